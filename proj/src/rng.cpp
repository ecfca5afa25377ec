#include "amenpois/rng.hpp"

#include <cmath>

#include "amenpois/errors.hpp"

namespace amenpois {

Rng Rng::substream(std::uint64_t master_seed, std::uint64_t replicate,
                   std::uint64_t phase) noexcept {
  std::uint64_t k = mix(master_seed ^ 0x243f6a8885a308d3ULL);
  k = mix(k ^ (replicate + 0x13198a2e03707344ULL));
  k = mix(k ^ (phase * 0xa4093822299f31d0ULL + 0x082efa98ec4e6c89ULL));
  return Rng(k, 0);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = (*this)();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && cdf < u) break;  // numerically exhausted tail
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    const double kd = static_cast<double>(k);
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + kd * loglam - std::lgamma(kd + 1.0))
      return k;
  }
}

}  // namespace amenpois
