#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advpref {

// Single-consumer pseudo-random stream. Draw routines are written out here
// rather than taken from <random> distributions so that streams are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t state_seed) : engine_(state_seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Index drawn from a categorical distribution (weights need not be normalized).
  std::size_t categorical(std::span<const double> weights);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// Stream keyed by (seed, label). Equal pairs give equal streams; different
// labels give unrelated streams.
Rng seeded_rng(std::uint64_t seed, std::string_view stream_label);

}  // namespace advpref
