#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace skd {

// Derives an independent stream seed from a root seed and a purpose label.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose);

// mt19937_64 with portable draws (the standard distributions are not
// reproducible across library implementations).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) without modulo bias.
  std::uint64_t index(std::uint64_t n);

  // Draws an index from an (unnormalized, non-negative) weight vector.
  std::size_t categorical(const std::vector<double>& weights);

  // Standard gamma variate (Marsaglia-Tsang), used for Dirichlet draws.
  double gamma(double shape);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  double normal();
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace skd
