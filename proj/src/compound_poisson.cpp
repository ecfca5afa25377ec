#include "amenpois/compound_poisson.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amenpois/errors.hpp"

namespace amenpois {

namespace {

constexpr double kNormTol = 1e-9;
constexpr double kSolverTol = 1e-12;
constexpr int kMaxSweeps = 100;

void check_normalized(const DiscreteDist& d) {
  double s = d.tail;
  for (double v : d.pmf) {
    if (!(v >= 0.0)) throw DomainError("distribution has a negative or NaN entry");
    s += v;
  }
  if (d.tail < 0.0 || std::abs(s - 1.0) > kNormTol) throw DomainError("distribution is not normalized");
}

}  // namespace

ParamVector::ParamVector(std::vector<double> rates) : rates_(std::move(rates)) {
  for (double r : rates_)
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("compound-Poisson rates must be finite and >= 0");
  while (!rates_.empty() && rates_.back() == 0.0) rates_.pop_back();
  total_ = std::accumulate(rates_.begin(), rates_.end(), 0.0);
}

ParamVector ParamVector::from_map(const std::map<int, double>& rates) {
  std::vector<double> v;
  for (const auto& [k, r] : rates) {
    if (k < 1) throw DomainError("compound-Poisson rates are indexed by k >= 1");
    if (v.size() < static_cast<std::size_t>(k)) v.resize(static_cast<std::size_t>(k), 0.0);
    v[static_cast<std::size_t>(k - 1)] = r;
  }
  return ParamVector(std::move(v));
}

double ParamVector::mean() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < rates_.size(); ++i) m += static_cast<double>(i + 1) * rates_[i];
  return m;
}

double DiscreteDist::mean() const noexcept {
  double m = 0.0;
  for (std::size_t w = 0; w < pmf.size(); ++w) m += static_cast<double>(w) * pmf[w];
  return m;
}

DiscreteDist DiscreteDist::point_mass(int w) {
  if (w < 0) throw DomainError("point mass location must be >= 0");
  DiscreteDist d;
  d.pmf.assign(static_cast<std::size_t>(w) + 1, 0.0);
  d.pmf.back() = 1.0;
  return d;
}

DiscreteDist DiscreteDist::from_counts(std::span<const std::uint64_t> counts) {
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw DomainError("histogram is empty");
  DiscreteDist d;
  d.pmf.reserve(counts.size());
  for (auto c : counts) d.pmf.push_back(static_cast<double>(c) / static_cast<double>(total));
  return d;
}

DiscreteDist cp_pmf(const ParamVector& lambda, int k_max) {
  if (k_max < 0) throw DomainError("cp_pmf needs k_max >= 0");
  const int K = lambda.support();
  DiscreteDist d;
  d.pmf.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
  d.pmf[0] = std::exp(-lambda.total());
  for (int w = 1; w <= k_max; ++w) {
    double s = 0.0;
    for (int k = 1; k <= std::min(w, K); ++k) s += k * lambda(k) * d.pmf[static_cast<std::size_t>(w - k)];
    d.pmf[static_cast<std::size_t>(w)] = s / w;
  }
  const double mass = std::accumulate(d.pmf.begin(), d.pmf.end(), 0.0);
  d.tail = std::max(0.0, 1.0 - mass);
  return d;
}

DiscreteDist cp_pmf_until(const ParamVector& lambda, double tail_tol, int max_len) {
  int len = std::max(16, 2 * lambda.support());
  const double m = lambda.mean();
  len = std::max(len, static_cast<int>(2.0 * m + 10.0));
  for (;;) {
    DiscreteDist d = cp_pmf(lambda, len);
    if (d.tail < tail_tol || len >= max_len) return d;
    len = std::min(max_len, 2 * len);
  }
}

std::int64_t cp_sample(const ParamVector& lambda, Rng& rng) {
  const double total = lambda.total();
  if (total == 0.0) return 0;
  const std::int64_t clusters = rng.poisson(total);
  std::int64_t sum = 0;
  for (std::int64_t i = 0; i < clusters; ++i) {
    double u = rng.uniform() * total;
    int k = 1;
    for (; k < lambda.support(); ++k) {
      u -= lambda(k);
      if (u < 0.0) break;
    }
    sum += k;
  }
  return sum;
}

DiscreteDist poisson_pmf(double mean, int k_max) {
  if (!(mean >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  return cp_pmf(ParamVector({mean}), k_max);
}

DiscreteDist binomial_pmf(int trials, double p) {
  if (trials < 0 || !(p >= 0.0 && p <= 1.0)) throw DomainError("invalid binomial parameters");
  DiscreteDist d;
  d.pmf.resize(static_cast<std::size_t>(trials) + 1);
  for (int k = 0; k <= trials; ++k) {
    double logc = std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0);
    double v;
    if (p == 0.0) v = (k == 0) ? 1.0 : 0.0;
    else if (p == 1.0) v = (k == trials) ? 1.0 : 0.0;
    else v = std::exp(logc + k * std::log(p) + (trials - k) * std::log1p(-p));
    d.pmf[static_cast<std::size_t>(k)] = v;
  }
  return d;
}

bool HSet::contains(int w) const noexcept {
  const bool in = std::find(members.begin(), members.end(), w) != members.end();
  return complement ? !in : in;
}

double SteinSolution::sup_abs() const noexcept {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double SteinSolution::sup_delta() const noexcept {
  double m = 0.0;
  for (std::size_t w = 0; w + 1 < values.size(); ++w) m = std::max(m, std::abs(values[w + 1] - values[w]));
  return m;
}

int stein_w_max(const ParamVector& lambda) {
  const DiscreteDist d = cp_pmf_until(lambda, 1e-12);
  const int K = std::max(1, lambda.support());
  return std::max(2 * K, static_cast<int>(d.size()) - 1 + K);
}

SteinSolution stein_solve(const ParamVector& lambda, const HSet& h_set, int w_max) {
  const int K = lambda.support();
  if (w_max < std::max(2, 2 * K)) throw DomainError("stein_solve needs w_max >= 2 K");
  if (!std::isfinite(lambda.total())) throw DomainError("lambda total must be finite");

  const DiscreteDist z = cp_pmf_until(lambda, 1e-14);
  double eh = 0.0;
  for (std::size_t w = 0; w < z.size(); ++w)
    if (h_set.contains(static_cast<int>(w))) eh += z.pmf[w];
  if (h_set.complement) eh += z.tail;  // the truncated tail lies in the complement of a finite set

  SteinSolution sol;
  sol.lambda = lambda;
  sol.h_set = h_set;
  sol.expected_h = eh;

  // f(w) for w = 0..w_max + K, zero beyond w_max.
  std::vector<double> f(static_cast<std::size_t>(w_max + K) + 1, 0.0);
  auto g = [&](int w) { return (h_set.contains(w) ? 1.0 : 0.0) - eh; };
  double change = 0.0;
  int sweep = 0;
  do {
    change = 0.0;
    for (int w = w_max; w >= 1; --w) {
      double s = 0.0;
      for (int k = 1; k <= K; ++k) s += k * lambda(k) * f[static_cast<std::size_t>(w + k)];
      const double next = (g(w) + s) / w;
      change = std::max(change, std::abs(next - f[static_cast<std::size_t>(w)]));
      f[static_cast<std::size_t>(w)] = next;
    }
    ++sweep;
    if (!std::isfinite(change)) throw NumericError("Stein solver produced non-finite values", change);
  } while (change > kSolverTol && sweep < kMaxSweeps);
  if (change > kSolverTol) throw NumericError("Stein solver did not converge", change);
  f[0] = f[1];

  auto residual = [&](int w) {
    double s = 0.0;
    for (int k = 1; k <= K; ++k) s += k * lambda(k) * f[static_cast<std::size_t>(w + k)];
    return std::abs(w * f[static_cast<std::size_t>(w)] - s - g(w));
  };
  for (int w = 1; w <= w_max - K; ++w) sol.max_residual = std::max(sol.max_residual, residual(w));
  sol.zero_line_residual = residual(0);
  sol.sweeps = sweep;
  sol.values.assign(f.begin(), f.begin() + w_max + 1);
  return sol;
}

HBounds h_bounds_analytic(const ParamVector& lambda) {
  const double l1 = lambda(1);
  const double l2 = lambda(2);
  const double scale = l1 > 0.0 ? std::min(1.0 / l1, 1.0) : 1.0;
  HBounds out;
  out.h0 = scale * std::exp(lambda.total());
  out.h1 = out.h0;
  // The refined H1 bound needs k lambda(k) nonincreasing; with finite support it then tends to 0.
  bool monotone = true;
  for (int k = 1; k < lambda.support(); ++k)
    if ((k + 1) * lambda(k + 1) > k * lambda(k)) monotone = false;
  const double gap = l1 - 2.0 * l2;
  if (gap > 0.0 && monotone) {
    const double logplus = std::max(0.0, std::log(2.0 * gap));
    const double refined = std::min((1.0 / gap) * (1.0 / (4.0 * gap) + logplus), 1.0);
    if (refined < out.h1) {
      out.h1 = refined;
      out.refined_h1 = true;
    }
  }
  return out;
}

double tv_distance(const DiscreteDist& p, const DiscreteDist& q) {
  check_normalized(p);
  check_normalized(q);
  const std::size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (std::size_t w = 0; w < n; ++w) s += std::abs(p[w] - q[w]);
  s += std::abs(p.tail - q.tail);
  return std::min(1.0, 0.5 * s);
}

}  // namespace amenpois
