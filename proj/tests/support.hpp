// Shared fixtures and independent oracles for the unit tests.
#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "advpref/policy.hpp"
#include "advpref/rng.hpp"
#include "advpref/types.hpp"

namespace support {

using namespace advpref;

inline VocabPtr vocab_of(int n) {
  std::vector<std::string> syms;
  for (int i = 0; i < n - 1; ++i) syms.push_back(std::string(1, static_cast<char>('a' + i)));
  syms.push_back("<eos>");
  return std::make_shared<const Vocabulary>(syms, n - 1);
}

inline Sequence seq(std::initializer_list<Token> t) { return Sequence{std::vector<Token>(t)}; }

inline PolicyParams random_policy(VocabPtr v, int order, Rng& rng, double scale = 1.0) {
  PolicyParams p(std::move(v), order);
  for (double& x : p.logits().values()) x = scale * (2.0 * rng.uniform() - 1.0);
  return p;
}

// Response of length 1..max_len; eos-terminated unless it reaches max_len.
inline Sequence random_response(const Vocabulary& v, int max_len, Rng& rng) {
  const int len = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len)));
  Sequence s;
  for (int i = 0; i + 1 < len; ++i) s.tokens.push_back(static_cast<Token>(rng.below(v.size() - 1)));
  if (len < max_len)
    s.tokens.push_back(v.eos());
  else
    s.tokens.push_back(static_cast<Token>(rng.below(v.size() - 1)));
  return s;
}

inline Sequence random_prompt(const Vocabulary& v, int len, Rng& rng) {
  Sequence s;
  for (int i = 0; i < len; ++i) s.tokens.push_back(static_cast<Token>(rng.below(v.size() - 1)));
  return s;
}

// Central finite differences of f over every logit of p (h = 1e-5).
inline std::vector<double> finite_difference(PolicyParams& p, const std::function<double(const PolicyParams&)>& f,
                                             double h = 1e-5) {
  auto& v = p.logits().values();
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    v[i] = x + h;
    const double up = f(p);
    v[i] = x - h;
    const double dn = f(p);
    v[i] = x;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// Naive softmax, written independently of the library.
inline std::vector<double> naive_softmax(std::span<const double> z) {
  double s = 0.0;
  std::vector<double> e;
  for (double x : z) {
    e.push_back(std::exp(x));
    s += e.back();
  }
  for (double& x : e) x /= s;
  return e;
}

inline std::string fresh_dir(const std::string& name) {
  const auto p = std::filesystem::path(ADVPREF_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace support
