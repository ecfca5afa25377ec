#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "amenpois/rng.hpp"

namespace amenpois {

/// Compound-Poisson parameter lambda: {1..K} -> [0, inf) with finite support.
class ParamVector {
 public:
  ParamVector() = default;
  /// rates[i] is lambda(i + 1).
  explicit ParamVector(std::vector<double> rates);
  static ParamVector from_map(const std::map<int, double>& rates);

  double operator()(int k) const noexcept {
    return (k >= 1 && k <= support()) ? rates_[static_cast<std::size_t>(k - 1)] : 0.0;
  }
  /// Largest k with a stored rate (trailing zeros trimmed).
  int support() const noexcept { return static_cast<int>(rates_.size()); }
  double total() const noexcept { return total_; }
  /// sum_k k lambda(k), the mean of Z(lambda).
  double mean() const noexcept;
  std::span<const double> rates() const noexcept { return rates_; }

 private:
  std::vector<double> rates_;
  double total_ = 0.0;
};

/// Distribution on {0..size-1} with residual mass `tail` beyond.
struct DiscreteDist {
  std::vector<double> pmf;
  double tail = 0.0;

  double operator[](std::size_t w) const noexcept { return w < pmf.size() ? pmf[w] : 0.0; }
  std::size_t size() const noexcept { return pmf.size(); }
  double mean() const noexcept;

  static DiscreteDist point_mass(int w);
  /// Normalized histogram of nonnegative counts.
  static DiscreteDist from_counts(std::span<const std::uint64_t> counts);
};

/// pmf of Z(lambda) on 0..k_max by the Panjer-type recursion
/// p(w) = (1/w) sum_{k<=min(w,K)} k lambda(k) p(w-k), p(0) = exp(-total).
DiscreteDist cp_pmf(const ParamVector& lambda, int k_max);
/// Extends cp_pmf until the residual mass drops below tail_tol (capped at max_len).
DiscreteDist cp_pmf_until(const ParamVector& lambda, double tail_tol, int max_len = 1'000'000);

/// One draw of Z(lambda): N ~ Poisson(total) cluster sizes drawn from lambda(k)/total.
std::int64_t cp_sample(const ParamVector& lambda, Rng& rng);

DiscreteDist poisson_pmf(double mean, int k_max);
DiscreteDist binomial_pmf(int trials, double p);

/// The test-function indicator set A of h = 1(. in A); `complement` flips it,
/// so {members = {}, complement = true} is all of N.
struct HSet {
  std::vector<int> members;
  bool complement = false;

  bool contains(int w) const noexcept;
  static HSet all() { return HSet{{}, true}; }
};

struct SteinSolution {
  std::vector<double> values;  // f(0..w_max); f(0) := f(1)
  ParamVector lambda;
  HSet h_set;
  double expected_h = 0.0;
  /// Largest |w f(w) - sum k lambda(k) f(w+k) - h(w) + E h(Z)| over 1 <= w <= w_max - K.
  double max_residual = 0.0;
  /// Same expression on the w = 0 line, which the bounded solution satisfies only up to truncation.
  double zero_line_residual = 0.0;
  int sweeps = 0;

  double sup_abs() const noexcept;
  /// max |f(w+1) - f(w)| over 0 <= w < w_max.
  double sup_delta() const noexcept;
};

/// Bounded solution of w f(w) - sum_k k lambda(k) f(w+k) = h(w) - E h(Z) on 1..w_max
/// with f = 0 beyond w_max, by backward successive substitution (tolerance 1e-12).
SteinSolution stein_solve(const ParamVector& lambda, const HSet& h_set, int w_max);
/// A w_max whose truncation leaves cp tail mass below 1e-12 past w_max - K (at least 2K).
int stein_w_max(const ParamVector& lambda);

struct HBounds {
  double h0 = 0.0;
  double h1 = 0.0;
  bool refined_h1 = false;  // true when the lambda(1) - 2 lambda(2) bound was applied
};

HBounds h_bounds_analytic(const ParamVector& lambda);

/// (1/2) sum |p - q| including the tail masses; both inputs must be normalized.
double tv_distance(const DiscreteDist& p, const DiscreteDist& q);

}  // namespace amenpois
