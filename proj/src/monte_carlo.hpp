#pragma once

// Shared Monte Carlo plumbing for the sampled evaluators.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "ghzbayes/parallel.hpp"
#include "ghzbayes/schemes.hpp"

namespace ghzbayes::detail {

// Folds x into [-pi, pi).
inline double wrap(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(x + std::numbers::pi, two_pi);
  if (r < 0) r += two_pi;
  return r - std::numbers::pi;
}

// Runs `samples` draws of fn(rng) split into deterministic chunks; returns
// mean and standard error.
template <typename Fn>
SchemeResult monte_carlo(const McOptions& mc, Fn&& fn) {
  if (mc.samples < 2) throw std::invalid_argument("Monte Carlo needs at least 2 samples");
  constexpr std::size_t kChunks = 64;
  std::vector<double> sum(kChunks, 0.0), sum_sq(kChunks, 0.0);
  parallel_for(kChunks, [&](std::size_t c) {
    std::seed_seq seq{static_cast<std::uint32_t>(mc.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(mc.seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    const std::uint64_t begin = mc.samples * c / kChunks;
    const std::uint64_t end = mc.samples * (c + 1) / kChunks;
    for (std::uint64_t s = begin; s < end; ++s) {
      const double v = fn(rng);
      sum[c] += v;
      sum_sq[c] += v * v;
    }
  });
  double total = 0.0, total_sq = 0.0;
  for (std::size_t c = 0; c < kChunks; ++c) {
    total += sum[c];
    total_sq += sum_sq[c];
  }
  const double n = static_cast<double>(mc.samples);
  SchemeResult r;
  r.bmse = total / n;
  const double var = std::max(0.0, (total_sq / n - r.bmse * r.bmse) * n / (n - 1.0));
  r.std_error = std::sqrt(var / n);
  r.exact = false;
  r.outcomes = mc.samples;
  return r;
}

}  // namespace ghzbayes::detail
