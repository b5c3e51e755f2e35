#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dasgd {

/// Independent random streams derived from one run seed.
enum class Stream : std::uint64_t {
  gradient = 1,
  compute_time = 2,
  latency = 3,
  start_phase = 4,
  data = 5,
};

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds `parts` into `base`; order matters.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  return std::mt19937_64(derive_seed(seed, {static_cast<std::uint64_t>(stream)}));
}

/// Seed of the sample xi_i^t drawn by `node` at local step `step`.
constexpr std::uint64_t gradient_seed(std::uint64_t run_seed, std::uint64_t node,
                                      std::uint64_t step) noexcept {
  return derive_seed(run_seed, {static_cast<std::uint64_t>(Stream::gradient), node, step});
}

}  // namespace dasgd
