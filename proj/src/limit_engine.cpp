#include "amenpois/limit_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "amenpois/errors.hpp"
#include "amenpois/mixing.hpp"
#include "amenpois/parallel.hpp"

namespace amenpois {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Draws samples of a fixed region, reusing the percolation layout across replicates.
struct Sampler {
  SimulatorSpec spec;
  int radius = 0;
  std::shared_ptr<const CayleyLayout> layout;
  double p = 0.0;

  Sampler(const SimulatorSpec& s, int r) : spec(s), radius(r) {
    if (const auto* c = std::get_if<CayleyPerc>(&spec)) {
      layout = make_cayley_layout(c->group, radius, c->d_n);
      p = c->p;
    }
  }
  FieldSample draw(Rng& rng) const { return layout ? sample_cayley(layout, p, rng) : sample_window(spec, radius, rng); }
};

/// Site indices of the window and of each window element's b-ball inside the region.
struct Geometry {
  std::vector<GroupElement> elements;
  std::vector<std::size_t> sites;
  std::vector<std::vector<std::size_t>> balls;
};

Geometry make_geometry(const MetricGroup& group, const FolnerWindow& window, const FieldSample& shape, int b,
                       bool with_balls) {
  Geometry g;
  g.elements = window.elements();
  g.sites.reserve(g.elements.size());
  for (const auto& phi : g.elements) g.sites.push_back(shape.site_index(phi));
  if (!with_balls) return g;
  g.balls.resize(g.elements.size());
  for (std::size_t i = 0; i < g.elements.size(); ++i)
    for (const auto& psi : group.ball(g.elements[i], b)) {
      try {
        g.balls[i].push_back(shape.site_index(psi));
      } catch (const RegionError&) {
        // Percolation statistics vanish outside the region.
        if (shape.layout != FieldSample::Layout::cayley) throw;
      }
    }
  return g;
}

void record_counts(WindowTally& acc, const std::vector<std::int64_t>& ck) {
  for (std::size_t k = 0; k < ck.size(); ++k) {
    acc.ck_sum[k] += ck[k];
    acc.ck_sq[k] += ck[k] * ck[k];
  }
}

WindowTally empty_tally(int k_max) {
  WindowTally t;
  t.ck_sum.assign(static_cast<std::size_t>(k_max), 0);
  t.ck_sq.assign(static_cast<std::size_t>(k_max), 0);
  return t;
}

/// Counts, among the sampled ones, how many have neighbourhood sum k (k-weighted).
template <typename Near>
void neighbourhood_counts(std::size_t ones, Near near, std::vector<std::int64_t>& ck) {
  for (std::size_t i = 0; i < ones; ++i) {
    std::size_t s = 0;
    for (std::size_t j = 0; j < ones; ++j)
      if (near(i, j)) ++s;
    if (s >= 1 && s <= ck.size()) ++ck[s - 1];
  }
}

WindowTally simulate_planar(const PlanarPoisson& spec, int b, int k_max, std::int64_t m_reps, std::uint64_t seed,
                            int workers) {
  const double mean_j = spec.intensity * spec.side * spec.side;
  const double b2 = static_cast<double>(b) * b;
  return parallel_replicates(
      m_reps, workers, empty_tally(k_max),
      [&](std::int64_t r, WindowTally& acc) {
        Rng field = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::field);
        Rng loc = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::locations);
        const FieldSample s = sample_window(spec, 0, field);
        const std::int64_t j = loc.poisson(mean_j);
        std::vector<std::array<double, 2>> ones;
        for (std::int64_t i = 0; i < j; ++i) {
          const double x = spec.side * loc.uniform();
          const double y = spec.side * loc.uniform();
          if (eval_planar(s, x, y)) ones.push_back({x, y});
        }
        std::vector<std::int64_t> ck(static_cast<std::size_t>(k_max), 0);
        neighbourhood_counts(
            ones.size(),
            [&](std::size_t a, std::size_t c) {
              const double dx = ones[a][0] - ones[c][0];
              const double dy = ones[a][1] - ones[c][1];
              return dx * dx + dy * dy <= b2;
            },
            ck);
        acc.add_w(static_cast<std::int64_t>(ones.size()));
        record_counts(acc, ck);
      },
      [](WindowTally& out, const WindowTally& part) { out.merge(part); });
}

WindowTally simulate_sequence(const ExchSeq& spec, int k_max, std::int64_t m_reps, std::uint64_t seed, int workers) {
  return parallel_replicates(
      m_reps, workers, empty_tally(k_max),
      [&](std::int64_t r, WindowTally& acc) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::field);
        const FieldSample s = sample_window(spec, 0, rng);
        std::int64_t w = 0;
        for (auto v : s.values) w += v;
        acc.add_w(w);
      },
      [](WindowTally& out, const WindowTally& part) { out.merge(part); });
}

double pow_exponent(double p) { return std::isinf(p) ? 1.0 : (p - 1.0) / p; }

}  // namespace

double JDist::moment1() const { return value; }

double JDist::moment2() const { return kind == Kind::fixed ? value * value : value + value * value; }

double JDist::moment3() const {
  return kind == Kind::fixed ? value * value * value : value * value * value + 3.0 * value * value + value;
}

double JDist::variance() const { return kind == Kind::fixed ? 0.0 : value; }

std::int64_t JDist::draw(Rng& rng) const {
  return kind == Kind::fixed ? static_cast<std::int64_t>(value) : rng.poisson(value);
}

ParamVector LambdaEstimate::cluster_rates() const {
  std::vector<double> r(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) r[i] = k_weighted ? rates[i] / static_cast<double>(i + 1) : rates[i];
  return ParamVector(std::move(r));
}

double LambdaEstimate::mass() const {
  double m = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) m += k_weighted ? rates[i] : static_cast<double>(i + 1) * rates[i];
  return m;
}

void WindowTally::add_w(std::int64_t w) {
  if (w_hist.size() <= static_cast<std::size_t>(w)) w_hist.resize(static_cast<std::size_t>(w) + 1, 0);
  ++w_hist[static_cast<std::size_t>(w)];
  w_sum += w;
  w_sq += w * w;
  ++reps;
}

void WindowTally::merge(const WindowTally& other) {
  if (w_hist.size() < other.w_hist.size()) w_hist.resize(other.w_hist.size(), 0);
  for (std::size_t i = 0; i < other.w_hist.size(); ++i) w_hist[i] += other.w_hist[i];
  for (std::size_t k = 0; k < ck_sum.size(); ++k) {
    ck_sum[k] += other.ck_sum[k];
    ck_sq[k] += other.ck_sq[k];
  }
  w_sum += other.w_sum;
  w_sq += other.w_sq;
  reps += other.reps;
}

std::int64_t w_sum(const FieldSample& sample, const FolnerWindow& window) {
  std::int64_t w = 0;
  for (const auto& phi : window.elements()) w += eval_f(sample, phi);
  return w;
}

WindowTally simulate_window(const SimulatorSpec& spec, int n, int b, int k_max, std::int64_t m_reps,
                            std::uint64_t seed, int workers, const std::optional<RandomizedSpec>& randomized) {
  validate(spec);
  if (n < 0) throw DomainError("window index n must be >= 0");
  if (b < 0) throw DomainError("ball radius b must be >= 0");
  if (k_max < 1) throw DomainError("k_max must be >= 1");
  if (m_reps < 1) throw DomainError("m_reps must be >= 1");

  if (const auto* planar = std::get_if<PlanarPoisson>(&spec)) {
    if (!randomized) throw DomainError("planar Poisson sampling is defined for randomized sums only");
    return simulate_planar(*planar, b, k_max, m_reps, seed, workers);
  }
  if (const auto* exch = std::get_if<ExchSeq>(&spec)) {
    if (randomized) throw DomainError("randomized sums are not defined for sequences");
    return simulate_sequence(*exch, k_max, m_reps, seed, workers);
  }

  const MetricGroup group = acting_group(spec);
  const FolnerWindow window = group.folner_set(n);
  const bool cayley = std::holds_alternative<CayleyPerc>(spec);
  const int radius = (randomized || cayley) ? n : n + b;
  const Sampler sampler(spec, radius);
  Rng shape_rng(0);
  const FieldSample shape = sampler.draw(shape_rng);
  const Geometry geo = make_geometry(group, window, shape, b, !randomized);
  const auto size = static_cast<std::uint64_t>(geo.sites.size());

  return parallel_replicates(
      m_reps, workers, empty_tally(k_max),
      [&](std::int64_t r, WindowTally& acc) {
        Rng field = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::field);
        const FieldSample s = sampler.draw(field);
        std::vector<std::int64_t> ck(static_cast<std::size_t>(k_max), 0);
        std::int64_t w = 0;
        if (!randomized) {
          for (std::size_t i = 0; i < geo.sites.size(); ++i) {
            if (!s.values[geo.sites[i]]) continue;
            ++w;
            std::int64_t sum = 0;
            for (auto site : geo.balls[i]) sum += s.values[site];
            if (sum >= 1 && sum <= k_max) ++ck[static_cast<std::size_t>(sum - 1)];
          }
        } else {
          Rng loc = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::locations);
          const std::int64_t j = randomized->j_dist.draw(loc);
          std::vector<std::size_t> ones;
          for (std::int64_t i = 0; i < j; ++i) {
            const auto u = static_cast<std::size_t>(loc.below(size));
            if (s.values[geo.sites[u]]) ones.push_back(u);
          }
          w = static_cast<std::int64_t>(ones.size());
          neighbourhood_counts(
              ones.size(),
              [&](std::size_t a, std::size_t c) {
                return ones[a] == ones[c] || group.distance(geo.elements[ones[a]], geo.elements[ones[c]]) <= b;
              },
              ck);
        }
        acc.add_w(w);
        record_counts(acc, ck);
      },
      [](WindowTally& out, const WindowTally& part) { out.merge(part); });
}

LambdaEstimate lambda_from_tally(const WindowTally& tally, int n, int b, bool k_weighted) {
  if (tally.reps < 1) throw EstimationError("no replicates");
  LambdaEstimate est;
  est.n = n;
  est.b = b;
  est.m_reps = tally.reps;
  est.k_weighted = k_weighted;
  const double m = static_cast<double>(tally.reps);
  auto moments = [m](double sum, double sq) {
    const double mean = sum / m;
    const double var = m > 1.0 ? std::max(0.0, (sq / m - mean * mean) * m / (m - 1.0)) : 0.0;
    return std::pair{mean, std::sqrt(var / m)};
  };
  for (std::size_t k = 0; k < tally.ck_sum.size(); ++k) {
    const auto [mean, se] = moments(static_cast<double>(tally.ck_sum[k]), static_cast<double>(tally.ck_sq[k]));
    const double scale = k_weighted ? 1.0 : 1.0 / static_cast<double>(k + 1);
    est.rates.push_back(mean * scale);
    est.stderr_.push_back(se * scale);
  }
  const auto [wm, wse] = moments(static_cast<double>(tally.w_sum), static_cast<double>(tally.w_sq));
  est.mean_w = wm;
  est.mean_w_stderr = wse;
  return est;
}

DiscreteDist dist_from_tally(const WindowTally& tally) { return DiscreteDist::from_counts(tally.w_hist); }

LambdaEstimate lambda_hat_ergodic(const SimulatorSpec& spec, int n, int b, int k_max, std::int64_t m_reps,
                                  std::uint64_t seed, int workers) {
  if (!is_ergodic(spec)) throw DomainError("lambda_hat_ergodic needs an ergodic simulator");
  if (b < 1) throw DomainError("lambda_hat_ergodic needs b >= 1");
  if (std::holds_alternative<ExchSeq>(spec) || std::holds_alternative<PlanarPoisson>(spec))
    throw DomainError("lambda_hat_ergodic needs a simulator with a discrete acting group");
  return lambda_from_tally(simulate_window(spec, n, b, k_max, m_reps, seed, workers), n, b, false);
}

std::vector<AtomSummary> lambda_hat_exchangeable(const ExchSeq& spec, std::int64_t m_reps, std::uint64_t seed,
                                                 int workers) {
  validate(spec);
  if (m_reps < 1) throw DomainError("m_reps must be >= 1");
  using ByLatent = std::map<double, WindowTally>;
  const ByLatent grouped = parallel_replicates(
      m_reps, workers, ByLatent{},
      [&](std::int64_t r, ByLatent& acc) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::field);
        const FieldSample s = sample_window(spec, 0, rng);
        std::int64_t w = 0;
        for (auto v : s.values) w += v;
        acc[*s.latent].add_w(w);
      },
      [](ByLatent& out, const ByLatent& part) {
        for (const auto& [theta, t] : part) out[theta].merge(t);
      });
  std::vector<AtomSummary> atoms;
  for (const auto& [theta, weight] : spec.mixture) {
    AtomSummary a;
    a.theta = theta;
    a.weight = weight;
    a.rate = theta;
    const auto it = grouped.find(theta);
    if (it != grouped.end()) {
      const LambdaEstimate est = lambda_from_tally(it->second, spec.length, 0, false);
      a.empirical_rate = est.mean_w;
      a.empirical_stderr = est.mean_w_stderr;
      a.reps = it->second.reps;
      a.w_dist = dist_from_tally(it->second);
    }
    atoms.push_back(std::move(a));
  }
  return atoms;
}

MomentTerms moment_terms_ergodic(double q_origin, std::int64_t window_size, double p) {
  if (!(q_origin >= 0.0 && q_origin <= 1.0)) throw DomainError("origin probability must lie in [0, 1]");
  if (window_size < 1) throw DomainError("window must be non-empty");
  if (!(p >= 1.0)) throw DomainError("Holder index p must be >= 1");
  const double a = static_cast<double>(window_size);
  return MomentTerms{a * q_origin, q_origin, a * a * q_origin * q_origin, p, true, window_size};
}

std::string variant_name(BoundReport::Variant v) {
  return v == BoundReport::Variant::theorem1 ? "theorem1" : "mtkatahdin";
}

BoundReport theorem1_bound(const MomentTerms& moments, const ShellTable& shells, const MixingFn& psi,
                           const MixingFn& xi, int b_n, double defect, double h0, double h1, int cutoff) {
  if (b_n < 0) throw DomainError("b_n must be >= 0");
  if (moments.window_size < 1) throw DomainError("moment terms carry no window size");
  if (!(defect >= 0.0) || !(h0 >= 0.0) || !(h1 >= 0.0)) throw DomainError("defect and H constants must be >= 0");
  if (2 * b_n > shells.r_max) throw DomainError("shell table does not reach 2 b_n");
  const ResidueSum r_psi = residue_sum(shells, psi, b_n, 1, cutoff);
  const ResidueSum r_xi = residue_sum(shells, xi, b_n, 2, cutoff);
  const double a = static_cast<double>(moments.window_size);

  BoundReport rep;
  rep.variant = BoundReport::Variant::theorem1;
  rep.p = moments.p;
  rep.h0 = h0;
  rep.h1 = h1;
  rep.term_boundary = h0 * moments.eta * std::pow(defect, pow_exponent(moments.p));
  rep.term_gamma = h1 * 2.0 * (static_cast<double>(shells.ball(2 * b_n)) / a) * moments.gamma;
  rep.term_psi = h1 * moments.mu * r_psi.value;
  rep.term_xi = h1 * 2.0 * moments.mu * r_xi.value;
  rep.psi_last_term = r_psi.last_term;
  rep.xi_last_term = r_xi.last_term;
  rep.total = rep.term_boundary + rep.term_gamma + rep.term_psi + rep.term_xi;
  rep.parts = {{"boundary", rep.term_boundary}, {"gamma", rep.term_gamma}, {"psi", rep.term_psi}, {"xi", rep.term_xi}};
  return rep;
}

BoundReport theorem1_bound_best(double q_origin, std::int64_t window_size, const ShellTable& shells,
                                const MixingFn& psi, const MixingFn& xi, int b_n, double defect, double h0, double h1,
                                int cutoff) {
  std::optional<BoundReport> best;
  for (double p : {1.0, 2.0, kInf}) {
    BoundReport r = theorem1_bound(moment_terms_ergodic(q_origin, window_size, p), shells, psi, xi, b_n, defect, h0,
                                   h1, cutoff);
    if (!best || r.total < best->total) best = std::move(r);
  }
  return *best;
}

std::int64_t randomized_sum(const FieldSample& sample, const FolnerWindow& window, const RandomizedSpec& rspec,
                            Rng& rng) {
  const std::int64_t j = rspec.j_dist.draw(rng);
  const auto size = static_cast<std::uint64_t>(window.size());
  if (size == 0) throw DomainError("window must be non-empty");
  std::int64_t w = 0;
  for (std::int64_t i = 0; i < j; ++i) w += eval_f(sample, window.elements()[rng.below(size)]);
  return w;
}

LambdaEstimate lambda_hat_randomized(const SimulatorSpec& spec, int n, const RandomizedSpec& rspec, int k_max,
                                     std::int64_t m_reps, std::uint64_t seed, int workers) {
  return lambda_from_tally(simulate_window(spec, n, rspec.b_n, k_max, m_reps, seed, workers, rspec), n, rspec.b_n,
                           true);
}

double epsilon_n(const RandomizedSpec& rspec, std::int64_t window_size, const ShellTable& shells, double q1,
                 double q2) {
  if (window_size < 1) throw DomainError("window must be non-empty");
  if (!(q1 >= 0.0) || !(q2 >= 0.0)) throw DomainError("Q norms must be >= 0");
  if (!(rspec.spread_const > 0.0)) throw DomainError("spread constant must be > 0");
  const double s = rspec.spread_const;
  const double a = static_cast<double>(window_size);
  const double bb = static_cast<double>(shells.ball(rspec.b_n));
  const double inner = 2.0 * s * s * rspec.j_dist.moment3() * bb * bb / (a * a) * q1 * q1 +
                       (rspec.j_dist.moment1() + 4.0 * s * rspec.j_dist.moment2() * bb / a) * q2 * q2;
  return 2.0 * std::sqrt(inner);
}

RadiusChoice radii_cn(double epsilon, double alpha, double beta, const ShellTable& shells) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) throw DomainError("alpha and beta must lie in (0, 1)");
  RadiusChoice out;
  const double raw = std::pow(epsilon, alpha - 1.0);
  // Guard against pow landing just below an integer it equals exactly.
  double k = std::floor(raw);
  if (raw - k > 1.0 - 1e-12 * std::max(1.0, raw)) k += 1.0;
  out.k_n = static_cast<std::int64_t>(std::min(k, 9.0e18));
  out.threshold = std::pow(k, 1.0 - beta);
  if (out.threshold < static_cast<double>(shells.ball(0))) {
    out.below_unit = true;
    return out;
  }
  int r = 0;
  while (r < shells.r_max && static_cast<double>(shells.ball(r + 1)) <= out.threshold) ++r;
  out.c_n = r;
  out.saturated = r == shells.r_max;
  return out;
}

BoundReport mtkatahdin_bound(const RandomizedBoundInputs& in, const ShellTable& shells, const MixingFn& psi,
                             const MixingFn& xi, const RandomizedSpec& rspec) {
  if (in.window_size < 1) throw DomainError("window must be non-empty");
  if (!(in.q >= 0.0 && in.q <= 1.0)) throw DomainError("origin probability must lie in [0, 1]");
  const int b = rspec.b_n;
  if (b < 0) throw DomainError("b_n must be >= 0");
  if (2 * b > shells.r_max) throw DomainError("shell table does not reach 2 b_n");

  const double s = rspec.spread_const;
  const double a = static_cast<double>(in.window_size);
  const double q = in.q;
  const double j1 = rspec.j_dist.moment1();
  const double j2 = rspec.j_dist.moment2();
  const double sd2 = std::sqrt(2.0 * rspec.j_dist.variance());
  const double eps = epsilon_n(rspec, in.window_size, shells, q, q);

  BoundReport rep;
  rep.variant = BoundReport::Variant::mtkatahdin;
  rep.h0 = in.h0;
  rep.h1 = in.h1;
  rep.p = 2.0;

  const ResidueSum r_psi = residue_sum(shells, psi, b, 1, in.cutoff);
  const ResidueSum r_xi = residue_sum(shells, xi, b, 2, in.cutoff);
  const double lead = in.h1 * s * j2 / a;
  rep.term_psi = lead * q * r_psi.value;
  rep.term_xi = lead * 2.0 * q * r_xi.value;
  rep.term_gamma =
      lead * q * q * static_cast<double>(shells.ball(2 * b) + shells.ball(2 * b) - shells.ball(b));
  rep.psi_last_term = r_psi.last_term;
  rep.xi_last_term = r_xi.last_term;

  double p2 = kInf;
  std::vector<std::pair<std::string, double>> h0_parts;
  if (eps > 0.0) {
    const RadiusChoice rc = radii_cn(eps, rspec.alpha, rspec.beta, shells);
    if (rc.k_n >= 1) {
      const double bc = static_cast<double>(shells.ball(rc.c_n));
      const double bb = static_cast<double>(shells.ball(b));
      const double ball_gap = std::max(0.0, bb - bc);
      h0_parts = {
          {"eps_alpha", std::pow(eps, rspec.alpha)},
          {"ball_ratio", 2.0 * s * j2 * ball_gap / a * q * q},
          {"far_mixing", 2.0 * j1 * psi(rc.c_n) * q},
          {"k_n", q / a * 2.0 * s * bc / static_cast<double>(rc.k_n) * j2},
          {"variance_ball", q / a * s * bb * sd2 * std::sqrt(j2)},
          {"variance_window", q / a * a * sd2},
      };
      p2 = 0.0;
      for (auto& [name, v] : h0_parts) {
        v *= in.h0;
        p2 += v;
      }
    }
  } else {
    p2 = 0.0;
  }
  rep.term_boundary = p2;
  rep.total = rep.term_boundary + rep.term_gamma + rep.term_psi + rep.term_xi;
  rep.parts = {{"gamma", rep.term_gamma}, {"psi", rep.term_psi}, {"xi", rep.term_xi}};
  for (auto& part : h0_parts) rep.parts.push_back(std::move(part));
  if (std::isinf(p2)) rep.parts.emplace_back("h0_part", p2);
  return rep;
}

int cayley_dn(const MetricGroup& group, double p, std::int64_t window_size, const ShellTable& shells) {
  if (group.kind() != GroupKind::fin_gen) throw DomainError("cayley_dn needs a fin_gen group");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("p must lie in (0, 1)");
  if (window_size < 1) throw DomainError("window must be non-empty");
  const double gens = static_cast<double>(group.generators().size());
  const double rhs = -std::log(static_cast<double>(window_size)) / std::log(p);
  for (int k = 1; k <= shells.r_max; ++k) {
    const double lhs =
        0.5 * (gens * static_cast<double>(shells.ball(k)) - (gens - 1.0) * static_cast<double>(shells.shell(k - 1)));
    if (lhs >= rhs) return k;
  }
  throw ResourceError("no percolation template radius within the shell table");
}

double cayley_lambda(double p, std::int64_t edges) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("p must lie in (0, 1]");
  if (edges < 0) throw DomainError("edge count must be >= 0");
  return std::pow(p, static_cast<double>(edges));
}

DiscreteDist empirical_w_dist(const SimulatorSpec& spec, int n, std::int64_t m_reps, std::uint64_t seed, int workers,
                              const std::optional<RandomizedSpec>& randomized) {
  const int b = randomized ? randomized->b_n : 0;
  return dist_from_tally(simulate_window(spec, n, b, 1, m_reps, seed, workers, randomized));
}

double tv_stderr(const DiscreteDist& empirical, std::int64_t m_reps) {
  if (m_reps < 1) throw DomainError("m_reps must be >= 1");
  double s = 0.0;
  for (double p : empirical.pmf) s += std::sqrt(p * (1.0 - p) / static_cast<double>(m_reps));
  return 0.5 * s;
}

MixingFn MixingInput::psi() const {
  switch (kind) {
    case MixingModel::zero:
      return [](int) { return 0.0; };
    case MixingModel::m_dependent:
      return [w = range](int t) { return t < w ? 1.0 : 0.0; };
    case MixingModel::geometric:
      return [rho = rho](int t) { return std::pow(rho, t); };
    case MixingModel::cayley:
      return [d = range](int t) { return t <= 2 * d ? 1.0 : 0.0; };
  }
  throw DomainError("unknown mixing model");
}

MixingFn MixingInput::xi(int b) const {
  switch (kind) {
    case MixingModel::zero:
      return [](int) { return 0.0; };
    case MixingModel::m_dependent:
      return [w = range, b](int t) { return t < b + w ? 1.0 : 0.0; };
    case MixingModel::geometric:
      return [rho = rho, b](int t) { return std::pow(rho, std::max(0, t - b)); };
    case MixingModel::cayley:
      return [d = range, b](int t) { return t <= 2 * d + b ? 1.0 : 0.0; };
  }
  throw DomainError("unknown mixing model");
}

std::uint64_t point_seed(std::uint64_t master_seed, int n) {
  return Rng::mix(master_seed ^ Rng::mix(0x5eed0000ULL + static_cast<std::uint64_t>(n)));
}

void check_scenario(const Scenario& sc) {
  validate(sc.simulator);
  if (sc.n_grid.empty()) throw DomainError("n_grid must not be empty");
  for (std::size_t i = 0; i < sc.n_grid.size(); ++i) {
    if (sc.n_grid[i] < 1) throw DomainError("n_grid entries must be >= 1");
    if (i > 0 && sc.n_grid[i] <= sc.n_grid[i - 1]) throw DomainError("n_grid must be strictly increasing");
  }
  if (sc.b_n.size() != sc.n_grid.size()) throw DomainError("b_n needs one value per n");
  for (int b : sc.b_n)
    if (b < 1) throw DomainError("b_n must be >= 1");
  if (sc.m_reps < 1) throw DomainError("m_reps must be >= 1");
  if (sc.k_max && *sc.k_max < 1) throw DomainError("k_max must be >= 1");
  if (sc.residue_cutoff < 0) throw DomainError("residue_cutoff must be >= 0");
  if (std::holds_alternative<PlanarPoisson>(sc.simulator) && !sc.randomized)
    throw DomainError("planar Poisson scenarios need the randomized mode");
  if (std::holds_alternative<ExchSeq>(sc.simulator) && sc.randomized)
    throw DomainError("sequence scenarios support the deterministic mode only");
  if (sc.randomized) {
    const auto& r = *sc.randomized;
    if (!(r.alpha > 0.0 && r.alpha < 1.0) || !(r.beta > 0.0 && r.beta < 1.0))
      throw DomainError("alpha and beta must lie in (0, 1)");
    if (!(r.j_dist.value >= 0.0)) throw DomainError("J parameter must be >= 0");
  }
}

namespace {

double target_tv(const DiscreteDist& empirical, const ParamVector& lambda) {
  return tv_distance(empirical, cp_pmf_until(lambda, 1e-13));
}

int default_k_max(const MetricGroup& group, int b, bool randomized) {
  if (randomized) return 12;
  return static_cast<int>(std::min<std::int64_t>(group.shell_table(b).ball(b), 12));
}

void exchangeable_row(const Scenario& sc, const ExchSeq& spec, std::uint64_t seed, int workers, ExperimentRow& row) {
  row.atoms = lambda_hat_exchangeable(spec, sc.m_reps, seed, workers);
  row.window_size = spec.length;
  double tv = 0.0;
  double se = 0.0;
  double rate = 0.0;
  double rate_var = 0.0;
  std::vector<std::uint64_t> pooled;
  for (const auto& a : row.atoms) {
    rate += a.weight * a.empirical_rate;
    rate_var += a.weight * a.weight * a.empirical_stderr * a.empirical_stderr;
    if (a.reps == 0) continue;
    tv += a.weight * tv_distance(a.w_dist, poisson_pmf(a.theta, static_cast<int>(a.w_dist.size()) + 64));
    se += a.weight * tv_stderr(a.w_dist, a.reps);
    if (pooled.size() < a.w_dist.size()) pooled.resize(a.w_dist.size(), 0);
    for (std::size_t w = 0; w < a.w_dist.size(); ++w)
      pooled[w] += static_cast<std::uint64_t>(std::llround(a.w_dist.pmf[w] * static_cast<double>(a.reps)));
  }
  row.tv = tv;
  row.tv_stderr = se;
  row.w_dist = DiscreteDist::from_counts(pooled);
  row.lambda.rates = {rate};
  row.lambda.stderr_ = {std::sqrt(rate_var)};
  row.lambda.n = row.n;
  row.lambda.b = row.b_n;
  row.lambda.m_reps = sc.m_reps;
  row.lambda.mean_w = rate;
  row.lambda.mean_w_stderr = std::sqrt(rate_var);
}

}  // namespace

ExperimentRow run_point(const Scenario& sc, std::size_t index, int workers) {
  if (index >= sc.n_grid.size()) throw DomainError("grid index out of range");
  const auto start = std::chrono::steady_clock::now();
  ExperimentRow row;
  row.n = sc.n_grid[index];
  row.b_n = sc.b_n[index];
  const std::uint64_t seed = point_seed(sc.seed, row.n);
  SimulatorSpec spec = sc.simulator;

  if (auto* exch = std::get_if<ExchSeq>(&spec)) {
    exch->length = row.n;
    exchangeable_row(sc, *exch, seed, workers, row);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
  }

  std::optional<RandomizedSpec> rspec = sc.randomized;
  if (rspec) rspec->b_n = row.b_n;
  const int b = row.b_n;
  const int cutoff = sc.residue_cutoff;
  MixingInput mixing = sc.mixing;

  if (auto* planar = std::get_if<PlanarPoisson>(&spec)) {
    planar->side = static_cast<double>(row.n);
    row.window_size = static_cast<std::int64_t>(std::llround(planar->side * planar->side));
    const int k_max = sc.k_max.value_or(12);
    const WindowTally tally = simulate_window(spec, row.n, b, k_max, sc.m_reps, seed, workers, rspec);
    row.lambda = lambda_from_tally(tally, row.n, b, true);
    row.w_dist = dist_from_tally(tally);
    row.tv = target_tv(row.w_dist, row.lambda.cluster_rates());
    row.tv_stderr = tv_stderr(row.w_dist, tally.reps);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
  }

  const MetricGroup group = acting_group(spec);
  const FolnerWindow window = group.folner_set(row.n);
  row.window_size = window.size();
  const int shell_radius = std::max({cutoff + 1, 2 * b + 1, 64});
  const ShellTable shells = group.shell_table(shell_radius);

  if (sc.mean_count) spec = scale_to_mean(spec, *sc.mean_count, row.window_size);
  if (rspec && sc.j_per_site) {
    const double j = *sc.j_per_site * static_cast<double>(row.window_size);
    rspec->j_dist.value = rspec->j_dist.kind == JDist::Kind::fixed ? std::round(j) : j;
  }
  if (auto* perc = std::get_if<CayleyPerc>(&spec)) {
    if (perc->d_n <= 0) perc->d_n = cayley_dn(group, perc->p, row.window_size, shells);
    row.d_n = perc->d_n;
    row.edges = induced_subgraph_edges(group, perc->d_n);
    mixing.kind = MixingModel::cayley;
    mixing.range = perc->d_n;
  }
  const int k_max = sc.k_max.value_or(default_k_max(group, b, rspec.has_value()));
  const WindowTally tally = simulate_window(spec, row.n, b, k_max, sc.m_reps, seed, workers, rspec);
  row.lambda = lambda_from_tally(tally, row.n, b, rspec.has_value());
  row.w_dist = dist_from_tally(tally);
  row.tv_stderr = tv_stderr(row.w_dist, tally.reps);
  const ParamVector cluster = row.lambda.cluster_rates();
  const double tv_hat = target_tv(row.w_dist, cluster);

  if (sc.poisson_target) {
    row.tv = target_tv(row.w_dist, ParamVector({*sc.poisson_target}));
    row.tv_lambda_hat = tv_hat;
  } else if (row.edges && !rspec) {
    row.tv = target_tv(row.w_dist, ParamVector({cayley_lambda(std::get<CayleyPerc>(spec).p, *row.edges)}));
    row.tv_lambda_hat = tv_hat;
    row.tv_vs_mean = target_tv(row.w_dist, ParamVector({row.lambda.mean_w}));
  } else {
    row.tv = tv_hat;
  }

  double q = site_probability(spec);
  if (std::isnan(q)) q = std::clamp(row.lambda.mean_w / static_cast<double>(row.window_size), 0.0, 1.0);
  const HBounds h = h_bounds_analytic(cluster);
  const MixingFn psi = mixing.psi();
  const MixingFn xi = mixing.xi(b);
  if (rspec) {
    row.epsilon = epsilon_n(*rspec, row.window_size, shells, q, q);
    if (*row.epsilon > 0.0) row.radii = radii_cn(*row.epsilon, rspec->alpha, rspec->beta, shells);
    row.bound = mtkatahdin_bound({q, row.window_size, h.h0, h.h1, cutoff}, shells, psi, xi, *rspec);
  } else {
    const double defect = group.boundary_defect(row.n, b);
    row.bound = theorem1_bound_best(q, row.window_size, shells, psi, xi, b, defect, h.h0, h.h1, cutoff);
  }
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

ExperimentResult convergence_curve(const Scenario& sc, int workers) {
  check_scenario(sc);
  ExperimentResult res;
  res.scenario = sc.name;
  res.seed = sc.seed;
  for (std::size_t i = 0; i < sc.n_grid.size(); ++i) res.rows.push_back(run_point(sc, i, workers));
  return res;
}

}  // namespace amenpois
