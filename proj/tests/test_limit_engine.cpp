#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "amenpois/errors.hpp"
#include "amenpois/limit_engine.hpp"

using namespace amenpois;

namespace {

GroupElement el(std::vector<int> c) { return GroupElement{std::move(c)}; }

bool within_se(double est, double target, double se, double k = 4.0) { return std::abs(est - target) <= k * se + 1e-12; }

double binom(int n, int k) { return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0))); }

/// P(X_0 = 1, sum_{|x| <= b} X_x = k) for the width-w moving-window field on Z,
/// by enumerating the 2^(2b + w) exceedance indicators that the ball depends on.
double mdep_origin_joint(int w, double tau, int b, int k) {
  const int vars = 2 * b + w;
  const double s = 1.0 - tau;
  double total = 0.0;
  for (int mask = 0; mask < (1 << vars); ++mask) {
    double pr = 1.0;
    for (int i = 0; i < vars; ++i) pr *= (mask >> i & 1) ? s : 1.0 - s;
    auto x = [&](int site) {  // site in [-b, b]; uses indicators site..site+w-1 (offset by b)
      for (int j = 0; j < w; ++j)
        if (!((mask >> (site + b + j)) & 1)) return 0;
      return 1;
    };
    if (!x(0)) continue;
    int sum = 0;
    for (int site = -b; site <= b; ++site) sum += x(site);
    if (sum == k) total += pr;
  }
  return total;
}

/// Exact k-weighted randomized rates for an iid field on a window of `size`
/// sites (grid(1), sup metric), j fixed locations, by enumerating location
/// tuples and field values at the distinct locations.
std::vector<double> randomized_oracle(int n, int j, double p, int b, int k_max) {
  const int size = 2 * n + 1;
  std::vector<double> out(static_cast<std::size_t>(k_max), 0.0);
  std::vector<int> loc(static_cast<std::size_t>(j), 0);
  const double weight = std::pow(size, -j);
  std::function<void(int)> rec = [&](int depth) {
    if (depth < j) {
      for (int v = 0; v < size; ++v) {
        loc[static_cast<std::size_t>(depth)] = v;
        rec(depth + 1);
      }
      return;
    }
    std::map<int, int> distinct;
    for (int v : loc) distinct.emplace(v, 0);
    std::vector<int> keys;
    for (auto& [v, idx] : distinct) {
      idx = static_cast<int>(keys.size());
      keys.push_back(v);
    }
    const int d = static_cast<int>(keys.size());
    for (int mask = 0; mask < (1 << d); ++mask) {
      const int ones = __builtin_popcount(static_cast<unsigned>(mask));
      const double pr = std::pow(p, ones) * std::pow(1.0 - p, d - ones);
      for (int a = 0; a < j; ++a) {
        if (!((mask >> distinct[loc[static_cast<std::size_t>(a)]]) & 1)) continue;
        int s = 0;
        for (int c = 0; c < j; ++c)
          if (((mask >> distinct[loc[static_cast<std::size_t>(c)]]) & 1) &&
              std::abs(loc[static_cast<std::size_t>(a)] - loc[static_cast<std::size_t>(c)]) <= b)
            ++s;
        if (s <= k_max) out[static_cast<std::size_t>(s - 1)] += weight * pr;
      }
    }
  };
  rec(0);
  return out;
}

FieldSample line_sample(std::vector<std::uint8_t> values) {
  FieldSample s;
  s.layout = FieldSample::Layout::lattice;
  s.dim = 1;
  s.region_radius = static_cast<int>(values.size() / 2);
  s.values = std::move(values);
  return s;
}

}  // namespace

TEST_CASE("w_sum") {
  const auto g = MetricGroup::grid(1);
  CHECK(w_sum(line_sample({1, 0, 1}), g.folner_set(1)) == 2);
  CHECK(w_sum(line_sample(std::vector<std::uint8_t>(7, 0)), g.folner_set(3)) == 0);
  FieldSample sq;
  sq.layout = FieldSample::Layout::lattice;
  sq.dim = 2;
  sq.region_radius = 1;
  sq.values.assign(9, 1);
  CHECK(w_sum(sq, MetricGroup::grid(2).folner_set(1)) == 9);
  CHECK_THROWS_AS(w_sum(line_sample({1, 0, 1}), g.folner_set(2)), RegionError);
}

TEST_CASE("ergodic lambda for the iid field") {
  const double p = 2.0 / 101.0;
  const auto est = lambda_hat_ergodic(IidField{1, p}, 50, 2, 5, 40000, 3);
  CHECK(est.k_max() == 5);
  const double l1 = 2.0 * std::pow(99.0 / 101.0, 4);
  const double l2 = 101.0 / 2.0 * p * 4.0 * p * std::pow(1.0 - p, 3);
  CHECK(within_se(est.rates[0], l1, est.stderr_[0]));
  CHECK(within_se(est.rates[1], l2, est.stderr_[1]));
  // With k_max = |B_b| every one is counted, so the mass identity is exact per replicate.
  CHECK(est.mass() == doctest::Approx(est.mean_w).epsilon(1e-12));
  CHECK(within_se(est.mean_w, 2.0, est.mean_w_stderr));

  const auto wide = lambda_hat_ergodic(IidField{1, 0.4}, 10, 1, 6, 500, 4);
  for (int k = 4; k <= 6; ++k) CHECK(wide.rates[static_cast<std::size_t>(k - 1)] == 0.0);
  const auto zero = lambda_hat_ergodic(IidField{1, 0.0}, 10, 2, 5, 200, 5);
  for (double r : zero.rates) CHECK(r == 0.0);
  CHECK_THROWS_AS(lambda_hat_ergodic(ExchSeq{{{1.0, 0.5}, {2.0, 0.5}}, 10}, 5, 1, 3, 100, 1), DomainError);
}

TEST_CASE("clustering vanishes for the iid field as n grows") {
  double prev = 1.0;
  for (int n : {5, 20, 80}) {
    const double a = 2.0 * n + 1.0;
    const double p = 2.0 / a;
    const double closed = a / 2.0 * p * 4.0 * p * std::pow(1.0 - p, 3);
    const auto est = lambda_hat_ergodic(IidField{1, p}, n, 2, 5, 20000, 100 + static_cast<std::uint64_t>(n));
    CHECK(within_se(est.rates[1], closed, est.stderr_[1]));
    CHECK(closed < prev);
    prev = closed;
  }
}

TEST_CASE("m-dependent lambda against exact enumeration") {
  const int n = 40, b = 2, w = 2;
  const double a = 2.0 * n + 1.0;
  const auto spec = std::get<MdepField>(scale_to_mean(MdepField{1, w, 0.5}, 2.0, static_cast<std::int64_t>(a)));
  const auto est = lambda_hat_ergodic(spec, n, b, 5, 40000, 6);
  for (int k = 1; k <= 3; ++k) {
    const double exact = a / k * mdep_origin_joint(w, spec.tau, b, k);
    CHECK(within_se(est.rates[static_cast<std::size_t>(k - 1)], exact, est.stderr_[static_cast<std::size_t>(k - 1)]));
  }
  // The oracle itself: marginal P(X_0 = 1) = (1 - tau)^w.
  double marg = 0.0;
  for (int k = 1; k <= 2 * b + 1; ++k) marg += mdep_origin_joint(w, spec.tau, b, k);
  CHECK(marg == doctest::Approx(std::pow(1.0 - spec.tau, w)).epsilon(1e-12));
}

TEST_CASE("exchangeable rates") {
  const auto single = lambda_hat_exchangeable(ExchSeq{{{2.0, 1.0}}, 200}, 4000, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0].rate == 2.0);
  CHECK(within_se(single[0].empirical_rate, 2.0, single[0].empirical_stderr));

  const auto zero = lambda_hat_exchangeable(ExchSeq{{{0.0, 1.0}}, 50}, 500, 2);
  CHECK(zero[0].empirical_rate == 0.0);
  CHECK(zero[0].w_dist.size() == 1);

  const auto mix = lambda_hat_exchangeable(ExchSeq{{{1.0, 0.5}, {3.0, 0.5}}, 300}, 20000, 3);
  REQUIRE(mix.size() == 2);
  CHECK(within_se(mix[0].empirical_rate, 1.0, mix[0].empirical_stderr));
  CHECK(within_se(mix[1].empirical_rate, 3.0, mix[1].empirical_stderr));
  CHECK(mix[0].reps + mix[1].reps == 20000);
}

TEST_CASE("moment terms") {
  const auto z = moment_terms_ergodic(0.0, 50, 2.0);
  CHECK(z.mu == 0.0);
  CHECK(z.gamma == 0.0);
  const auto m = moment_terms_ergodic(2.0 / 101.0, 101, 2.0);
  CHECK(m.mu == doctest::Approx(2.0));
  CHECK(m.eta == doctest::Approx(2.0 / 101.0));
  CHECK(m.gamma == doctest::Approx(4.0));
  const auto one = moment_terms_ergodic(1.0, 9, 1.0);
  CHECK(one.mu == 9.0);
  CHECK(one.gamma == 81.0);
  CHECK_THROWS_AS(moment_terms_ergodic(1.2, 9, 1.0), DomainError);
}

TEST_CASE("deterministic bound assembly") {
  const auto shells = MetricGroup::grid(1).shell_table(41);
  const auto none = [](int) { return 0.0; };
  const double q = 2.0 / 101.0, e2 = std::exp(2.0);

  const auto only_gamma = theorem1_bound(moment_terms_ergodic(q, 101, 2.0), shells, none, none, 2, 0.0, e2, e2, 40);
  CHECK(only_gamma.total == doctest::Approx(2.0 * e2 * (9.0 / 101.0) * 4.0).epsilon(1e-14));

  const auto only_boundary = theorem1_bound(moment_terms_ergodic(q, 101, 2.0), shells, none, none, 2, 0.25, e2, 0.0, 40);
  CHECK(only_boundary.total == doctest::Approx(e2 * q * 0.5).epsilon(1e-14));

  // Hand-assembled: defect 4/101 for grid(1), n = 50, b = 2; geometric mixing 0.5^t.
  const auto geo = [](int t) { return std::pow(0.5, t); };
  const double defect = MetricGroup::grid(1).boundary_defect(50, 2);
  CHECK(defect == doctest::Approx(4.0 / 101.0));
  const auto rep = theorem1_bound(moment_terms_ergodic(q, 101, 2.0), shells, geo, geo, 2, defect, e2, e2, 40);
  double r_psi = 0.0, r_xi = 0.0;
  for (int i = 2; i <= 40; ++i) r_psi += 2.0 * std::pow(0.5, i);
  for (int i = 4; i <= 40; ++i) r_xi += 2.0 * std::pow(0.5, i);
  const double expected = e2 * q * std::sqrt(4.0 / 101.0) + e2 * (2.0 * 9.0 / 101.0 * 4.0 + 2.0 * r_psi + 2.0 * 2.0 * r_xi);
  CHECK(rep.total == doctest::Approx(expected).epsilon(1e-13));
  CHECK(rep.total == doctest::Approx(rep.term_boundary + rep.term_gamma + rep.term_psi + rep.term_xi).epsilon(1e-15));

  const auto best = theorem1_bound_best(q, 101, shells, geo, geo, 2, defect, e2, e2, 40);
  CHECK(best.total <= rep.total);
  CHECK(std::isinf(best.p));
  CHECK_THROWS_AS(theorem1_bound(moment_terms_ergodic(q, 101, 2.0), MetricGroup::grid(1).shell_table(3), none, none, 2,
                                 0.0, 1.0, 1.0, 40),
                  DomainError);
}

TEST_CASE("randomized sums") {
  const auto window = MetricGroup::grid(1).folner_set(3);
  Rng rng(1);
  const auto ones = line_sample(std::vector<std::uint8_t>(7, 1));
  CHECK(randomized_sum(ones, window, RandomizedSpec{JDist::fixed(0)}, rng) == 0);
  CHECK(randomized_sum(ones, window, RandomizedSpec{JDist::fixed(7)}, rng) == 7);

  const double p = 0.3, theta = 5.0;
  const int reps = 10000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    Rng field = Rng::substream(2, static_cast<std::uint64_t>(r), phase::field);
    Rng loc = Rng::substream(2, static_cast<std::uint64_t>(r), phase::locations);
    const auto sample = sample_window(IidField{1, p}, 3, field);
    const double w = static_cast<double>(randomized_sum(sample, window, RandomizedSpec{JDist::poisson(theta)}, loc));
    s += w;
    s2 += w * w;
  }
  const double mean = s / reps;
  CHECK(within_se(mean, theta * p, std::sqrt((s2 / reps - mean * mean) / reps)));
}

TEST_CASE("randomized lambda") {
  RandomizedSpec none{JDist::fixed(0)};
  none.b_n = 1;
  for (double r : lambda_hat_randomized(IidField{1, 0.3}, 3, none, 4, 200, 1).rates) CHECK(r == 0.0);

  RandomizedSpec one{JDist::fixed(1)};
  one.b_n = 1;
  const auto e1 = lambda_hat_randomized(IidField{1, 0.3}, 3, one, 4, 20000, 2);
  CHECK(e1.k_weighted);
  CHECK(within_se(e1.rates[0], 0.3, e1.stderr_[0]));
  for (int k = 2; k <= 4; ++k) CHECK(e1.rates[static_cast<std::size_t>(k - 1)] == 0.0);

  for (int j = 2; j <= 3; ++j) {
    RandomizedSpec rs{JDist::fixed(j)};
    rs.b_n = 1;
    const auto oracle = randomized_oracle(3, j, 0.35, 1, 3);
    const auto est = lambda_hat_randomized(IidField{1, 0.35}, 3, rs, 3, 40000, 10 + static_cast<std::uint64_t>(j));
    for (int k = 1; k <= 3; ++k)
      CHECK(within_se(est.rates[static_cast<std::size_t>(k - 1)], oracle[static_cast<std::size_t>(k - 1)],
                      est.stderr_[static_cast<std::size_t>(k - 1)]));
    // Cluster rates divide the k-weighted expectation by k.
    CHECK(est.cluster_rates()(2) == doctest::Approx(est.rates[1] / 2.0));
  }
}

TEST_CASE("epsilon_n and radii") {
  const auto shells = MetricGroup::grid(1).shell_table(64);
  RandomizedSpec z{JDist::fixed(0)};
  z.b_n = 2;
  CHECK(epsilon_n(z, 101, shells, 0.0, 0.0) == 0.0);

  RandomizedSpec f{JDist::fixed(101)};
  f.b_n = 2;
  const double q = 2.0 / 101.0, j = 101.0, bb = 5.0, a = 101.0;
  const double manual = 2.0 * std::sqrt(2.0 * j * j * j * bb * bb / (a * a) * q * q + (j + 4.0 * j * j * bb / a) * q * q);
  CHECK(std::abs(epsilon_n(f, 101, shells, q, q) - manual) < 1e-10);

  // Poisson raw moments against a Monte Carlo estimate.
  const JDist pj = JDist::poisson(4.0);
  Rng rng(5);
  double m3 = 0.0;
  const int reps = 200000;
  for (int i = 0; i < reps; ++i) m3 += std::pow(static_cast<double>(pj.draw(rng)), 3);
  CHECK(std::abs(m3 / reps - pj.moment3()) < 0.02 * pj.moment3());
  CHECK(pj.moment3() == 64.0 + 48.0 + 4.0);

  const auto r = radii_cn(0.01, 0.5, 0.5, shells);
  CHECK(r.k_n == 10);
  CHECK(r.threshold == doctest::Approx(std::sqrt(10.0)));
  CHECK(r.c_n == 1);
  const auto big = radii_cn(2.0, 0.5, 0.5, shells);
  CHECK(big.c_n == 0);
  CHECK(big.below_unit);
  const auto sq = radii_cn(1.0 / 6561.0, 0.5, 0.5, MetricGroup::grid(2).shell_table(8));
  CHECK(sq.threshold == doctest::Approx(9.0));
  CHECK(sq.c_n == 1);
  CHECK(radii_cn(1e-30, 0.5, 0.9, MetricGroup::grid(1).shell_table(2)).saturated);
  CHECK_THROWS_AS(radii_cn(0.0, 0.5, 0.5, shells), DomainError);
}

TEST_CASE("explicit randomized bound") {
  const auto shells = MetricGroup::grid(1).shell_table(64);
  const auto none = [](int) { return 0.0; };
  RandomizedSpec f{JDist::fixed(101)};
  f.b_n = 2;
  // A large origin probability pushes epsilon above one: no admissible radius.
  CHECK(std::isinf(mtkatahdin_bound(RandomizedBoundInputs{2.0 / 101.0, 101, 1.5, 0.8, 40}, shells, none, none, f).total));

  const RandomizedBoundInputs in{1e-4, 101, 1.5, 0.8, 40};
  const auto rep = mtkatahdin_bound(in, shells, none, none, f);
  std::map<std::string, double> parts(rep.parts.begin(), rep.parts.end());
  CHECK(parts.at("variance_ball") == 0.0);
  CHECK(parts.at("variance_window") == 0.0);
  CHECK(rep.term_psi == 0.0);
  CHECK(rep.term_xi == 0.0);
  CHECK(parts.at("far_mixing") == 0.0);

  // Independent recomputation with Poisson J and geometric mixing.
  RandomizedSpec pj{JDist::poisson(101.0)};
  pj.b_n = 2;
  const auto geo = [](int t) { return std::pow(0.4, t); };
  const auto full = mtkatahdin_bound(in, shells, geo, geo, pj);
  const double q = in.q, a = 101.0, th = 101.0;
  const double j1 = th, j2 = th + th * th, j3 = th * th * th + 3 * th * th + th, var = th;
  const double bb = 5.0, b2b = 9.0;
  const double eps = 2.0 * std::sqrt(2.0 * j3 * bb * bb / (a * a) * q * q + (j1 + 4.0 * j2 * bb / a) * q * q);
  const double kn = std::floor(std::pow(eps, -0.5));
  int cn = 0;
  while (2.0 * (cn + 1) + 1.0 <= std::sqrt(kn)) ++cn;
  const double bc = 2.0 * cn + 1.0;
  double r_psi = 0.0, r_xi = 0.0;
  for (int i = 2; i <= 40; ++i) r_psi += 2.0 * std::pow(0.4, i);
  for (int i = 4; i <= 40; ++i) r_xi += 2.0 * std::pow(0.4, i);
  const double p1 = in.h1 * j2 / a * (q * r_psi + 2.0 * q * r_xi + q * q * (b2b + (b2b - bb)));
  const double p2 = in.h0 * (std::pow(eps, 0.5) + 2.0 * j2 * std::max(0.0, bb - bc) / a * q * q +
                             2.0 * j1 * std::pow(0.4, cn) * q +
                             q / a * (2.0 * bc / kn * j2 + bb * std::sqrt(2.0 * var) * std::sqrt(j2) + a * std::sqrt(2.0 * var)));
  CHECK(full.total == doctest::Approx(p1 + p2).epsilon(1e-12));
  double sum = 0.0;
  for (const auto& [name, v] : full.parts) sum += v;
  CHECK(sum == doctest::Approx(full.total).epsilon(1e-14));
}

TEST_CASE("percolation template radius") {
  const auto z2 = MetricGroup::finitely_generated({{1, 0}, {0, 1}});
  const auto t2 = z2.shell_table(10);
  CHECK(cayley_dn(z2, 0.5, 1000, t2) == 2);
  CHECK(cayley_dn(z2, 0.5, 1, t2) == 1);
  const auto z1 = MetricGroup::finitely_generated({{1}});
  CHECK(cayley_dn(z1, 0.5, 100, z1.shell_table(10)) == 4);
  for (std::int64_t a : {10, 100, 421, 1000, 5000}) {
    const int d = cayley_dn(z2, 0.5, a, t2);
    CHECK(cayley_lambda(0.5, induced_subgraph_edges(z2, d)) <= 1.0 / static_cast<double>(a));
  }
  CHECK(cayley_lambda(1.0, 12) == 1.0);
  CHECK(cayley_lambda(0.3, 0) == 1.0);
  CHECK(cayley_lambda(0.5, induced_subgraph_edges(z2, 1)) == 0.0625);
  CHECK_THROWS_AS(cayley_dn(z2, 0.5, 1e9, z2.shell_table(2)), ResourceError);
}

TEST_CASE("empirical law of W") {
  const auto zero = empirical_w_dist(IidField{1, 0.0}, 5, 200, 1);
  CHECK(zero.size() == 1);
  CHECK(zero[0] == 1.0);

  const int reps = 40000;
  const auto d = empirical_w_dist(IidField{1, 0.1}, 10, reps, 2);
  const auto exact = binomial_pmf(21, 0.1);
  for (std::size_t w = 0; w < 8; ++w) {
    const double se = std::sqrt(exact[w] * (1.0 - exact[w]) / reps);
    CHECK(within_se(d[w], exact[w], se));
  }
  CHECK(tv_stderr(d, reps) > 0.0);

  Scenario sc;
  sc.name = "exch";
  sc.simulator = ExchSeq{{{2.0, 1.0}}, 1};
  sc.n_grid = {40};
  sc.b_n = {1};
  sc.m_reps = reps;
  sc.seed = 3;
  const auto row = run_point(sc, 0);
  const auto bin = binomial_pmf(40, 2.0 / 40.0);
  for (std::size_t w = 0; w < 8; ++w)
    CHECK(within_se(row.w_dist[w], bin[w], std::sqrt(bin[w] * (1.0 - bin[w]) / reps)));
}

TEST_CASE("convergence curves") {
  Scenario zero;
  zero.name = "zero";
  zero.simulator = IidField{1, 0.0};
  zero.n_grid = {5, 10};
  zero.b_n = {1, 1};
  zero.m_reps = 200;
  const auto z = convergence_curve(zero);
  REQUIRE(z.rows.size() == 2);
  for (const auto& r : z.rows) CHECK(r.tv == 0.0);

  Scenario iid;
  iid.name = "iid";
  iid.simulator = IidField{1, 0.0};
  iid.mean_count = 2.0;
  iid.poisson_target = 2.0;
  iid.n_grid = {5, 20};
  iid.b_n = {1, 1};
  iid.m_reps = 40000;
  iid.seed = 9;
  const auto c = convergence_curve(iid);
  for (const auto& r : c.rows) {
    const int n_sites = static_cast<int>(r.window_size);
    const double exact = tv_distance(binomial_pmf(n_sites, 2.0 / n_sites), poisson_pmf(2.0, 200));
    CHECK(within_se(r.tv, exact, r.tv_stderr));
    REQUIRE(r.bound.has_value());
    CHECK(r.bound->total >= r.tv);
  }
}

TEST_CASE("replicate passes do not depend on the worker count") {
  const auto a = simulate_window(MdepField{1, 2, 0.6}, 10, 2, 5, 1001, 4, 1);
  const auto b = simulate_window(MdepField{1, 2, 0.6}, 10, 2, 5, 1001, 4, 4);
  CHECK(a.w_hist == b.w_hist);
  CHECK(a.ck_sum == b.ck_sum);
  CHECK(a.ck_sq == b.ck_sq);
}
