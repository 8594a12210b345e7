#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adplan {

// Outcome of one online evaluation.
struct ServeDecision {
  std::string impression_id;
  std::optional<std::string> chosen;  // nullopt = unallocated
  std::vector<std::pair<std::string, double>> probabilities;
  double draw = 0;  // the single uniform consumed by the categorical draw

  bool operator==(const ServeDecision&) const = default;
};

inline constexpr std::size_t kUnallocated = std::numeric_limits<std::size_t>::max();

// Maps one uniform u in [0,1) through the cumulative probabilities; returns
// kUnallocated when u falls in the residual mass.
inline std::size_t categorical_pick(std::span<const double> probabilities, double u) {
  double cumulative = 0;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    cumulative += probabilities[k];
    if (u < cumulative) return k;
  }
  return kUnallocated;
}

// 53-bit uniform in [0,1) from a 64-bit engine.
template <typename Rng>
double uniform01(Rng& rng) {
  static_assert(std::numeric_limits<typename Rng::result_type>::digits >= 64, "needs a 64-bit engine");
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// SplitMix64; used to derive an independent stream per impression so that the
// draw for an impression does not depend on which worker evaluates it.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 mix(seed ^ (index * 0xd1b54a32d192ed03ULL));
  mix();
  return mix();
}

}  // namespace adplan
