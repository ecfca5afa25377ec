#include "amenpois/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "amenpois/errors.hpp"
#include "amenpois/parallel.hpp"

namespace amenpois {

namespace {

struct Observation {
  int origin = 0;
  int ball_sum = 0;
  int window_sum = 0;
  std::vector<int> far_sites;
};

int lattice_value(const FieldSample& s, std::vector<int>& coords) {
  const std::int64_t i = s.lattice_index(coords);
  if (i < 0) throw RegionError("mixing events reach outside the sampled region");
  return s.values[static_cast<std::size_t>(i)];
}

/// Sum over the box of the given radius centred at `center`.
int box_sum(const FieldSample& s, const std::vector<int>& center, int radius) {
  const int d = s.dim;
  std::vector<int> off(static_cast<std::size_t>(d), -radius);
  std::vector<int> pt(static_cast<std::size_t>(d));
  int total = 0;
  while (true) {
    for (int i = 0; i < d; ++i) pt[static_cast<std::size_t>(i)] = center[static_cast<std::size_t>(i)] + off[static_cast<std::size_t>(i)];
    total += lattice_value(s, pt);
    int i = d - 1;
    for (; i >= 0; --i) {
      if (++off[static_cast<std::size_t>(i)] <= radius) break;
      off[static_cast<std::size_t>(i)] = -radius;
    }
    if (i < 0) break;
  }
  return total;
}

Observation observe(const FieldSample& s, const EventDictionary& dict, int b, int t) {
  Observation o;
  const int w = dict.w_cap;
  if (s.layout == FieldSample::Layout::lattice) {
    std::vector<int> origin(static_cast<std::size_t>(s.dim), 0);
    o.origin = lattice_value(s, origin);
    o.ball_sum = b > 0 ? box_sum(s, origin, b) : o.origin;
    std::vector<int> center = origin;
    center[0] = t + w;
    o.window_sum = box_sum(s, center, w);
    for (const auto& e : dict.b_events) {
      if (e.kind != FarEvent::Kind::site_one) continue;
      std::vector<int> pt = origin;
      pt[0] = t + e.value;
      o.far_sites.push_back(lattice_value(s, pt));
    }
    return o;
  }
  if (s.layout == FieldSample::Layout::sequence) {
    const auto need = static_cast<std::size_t>(t + 2 * w + 1);
    if (s.values.size() < std::max<std::size_t>(need, static_cast<std::size_t>(std::max(b, 1))))
      throw RegionError("sequence too short for the requested mixing events");
    o.origin = s.values[0];
    o.ball_sum = o.origin;
    for (int i = 1; i < b; ++i) o.ball_sum += s.values[static_cast<std::size_t>(i)];
    for (int i = 0; i <= 2 * w; ++i) o.window_sum += s.values[static_cast<std::size_t>(t + i)];
    for (const auto& e : dict.b_events)
      if (e.kind == FarEvent::Kind::site_one) o.far_sites.push_back(s.values[static_cast<std::size_t>(t + e.value)]);
    return o;
  }
  throw DomainError("mixing estimation supports lattice fields and sequences only");
}

bool origin_holds(const OriginEvent& e, const Observation& o) {
  switch (e.kind) {
    case OriginEvent::Kind::one:
      return o.origin == 1;
    case OriginEvent::Kind::zero:
      return o.origin == 0;
    case OriginEvent::Kind::one_with_sum:
      return o.origin == 1 && o.ball_sum == e.sum;
  }
  return false;
}

void check_dictionary(const EventDictionary& dict, int b) {
  if (dict.a_events.empty() || dict.b_events.empty()) throw DomainError("event dictionary must not be empty");
  if (dict.w_cap < 0) throw DomainError("w_cap must be >= 0");
  for (const auto& e : dict.b_events)
    if (e.kind == FarEvent::Kind::site_one && (e.value < 0 || e.value > 2 * dict.w_cap))
      throw DomainError("site event offset outside the far window");
  if (b == 0)
    for (const auto& e : dict.a_events)
      if (e.kind == OriginEvent::Kind::one_with_sum) throw DomainError("ball-sum origin events need b >= 1");
}

struct PairStats {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t used = 0;
};

PairStats pair_stats(const MixingCounts& c, const EventDictionary& dict) {
  PairStats out;
  if (c.samples == 0) return out;
  const double m = static_cast<double>(c.samples);
  const std::size_t nb = c.b.size();
  for (std::size_t i = 0; i < c.a.size(); ++i) {
    const std::int64_t na = c.a[i];
    if (na < std::max<std::int64_t>(dict.min_count, 1)) continue;
    for (std::size_t j = 0; j < nb; ++j) {
      const double cond = static_cast<double>(c.ab[i * nb + j]) / static_cast<double>(na);
      const double marg = static_cast<double>(c.b[j]) / m;
      const double pc = (static_cast<double>(c.ab[i * nb + j]) + 0.5) / (static_cast<double>(na) + 1.0);
      const double pm = (static_cast<double>(c.b[j]) + 0.5) / (m + 1.0);
      const double se = std::sqrt(pc * (1.0 - pc) / static_cast<double>(na) + pm * (1.0 - pm) / m);
      out.value = std::max(out.value, std::abs(cond - marg));
      out.stderr_ = std::max(out.stderr_, se);
      ++out.used;
    }
  }
  return out;
}

MixingEstimate to_estimate(const MixingCounts& counts, const EventDictionary& dict, int t) {
  if (std::all_of(counts.a.begin(), counts.a.end(), [](std::int64_t v) { return v == 0; }))
    throw EstimationError("no origin event occurred; conditional probabilities undefined");
  const PairStats st = pair_stats(counts, dict);
  if (st.used == 0) throw EstimationError("no origin event reached the minimum count");
  return MixingEstimate{t, st.value, st.stderr_, counts.samples, st.used};
}

MixingCounts sample_counts(const SimulatorSpec& sim, const EventDictionary& dict, int b, int t, std::int64_t m_reps,
                           std::uint64_t seed, int workers) {
  const int radius = mixing_region_radius(dict, b, t);
  const MixingCounts init(dict.a_events.size(), dict.b_events.size());
  return parallel_replicates(
      m_reps, workers, init,
      [&](std::int64_t r, MixingCounts& acc) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::mixing);
        tally_events(sample_window(sim, radius, rng), dict, b, t, acc);
      },
      [](MixingCounts& out, const MixingCounts& part) { out.merge(part); });
}

void check_run(const SimulatorSpec& sim, int b, int t, std::int64_t m_reps) {
  validate(sim);
  if (t < 1) throw DomainError("separation t must be >= 1");
  if (b < 0) throw DomainError("ball radius b must be >= 0");
  if (m_reps < 1) throw DomainError("m_reps must be >= 1");
}

}  // namespace

std::string OriginEvent::label() const {
  switch (kind) {
    case Kind::one:
      return "f(e)=1";
    case Kind::zero:
      return "f(e)=0";
    case Kind::one_with_sum:
      return "f(e)=1,S_b=" + std::to_string(sum);
  }
  return "?";
}

std::string FarEvent::label() const {
  return kind == Kind::site_one ? "site+" + std::to_string(value) + "=1" : "sum_G=" + std::to_string(value);
}

EventDictionary EventDictionary::standard(bool with_ball_sums, int k_cap, int w_cap, int j_cap) {
  if (k_cap < 1 || w_cap < 0 || j_cap < 0) throw DomainError("event caps must be k_cap >= 1, w_cap >= 0, j_cap >= 0");
  EventDictionary d;
  d.w_cap = w_cap;
  d.a_events.push_back({OriginEvent::Kind::one, 0});
  d.a_events.push_back({OriginEvent::Kind::zero, 0});
  if (with_ball_sums)
    for (int k = 1; k <= k_cap; ++k) d.a_events.push_back({OriginEvent::Kind::one_with_sum, k});
  d.b_events.push_back({FarEvent::Kind::site_one, 0});
  if (w_cap > 0) d.b_events.push_back({FarEvent::Kind::site_one, w_cap});
  for (int j = 0; j <= j_cap; ++j) d.b_events.push_back({FarEvent::Kind::window_sum, j});
  return d;
}

void MixingCounts::merge(const MixingCounts& other) {
  if (a.empty() && b.empty()) {
    *this = other;
    return;
  }
  samples += other.samples;
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += other.a[i];
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += other.b[i];
  for (std::size_t i = 0; i < ab.size(); ++i) ab[i] += other.ab[i];
}

int mixing_region_radius(const EventDictionary& dict, int b, int t) { return std::max(b, t + 2 * dict.w_cap); }

void tally_events(const FieldSample& sample, const EventDictionary& dict, int b, int t, MixingCounts& counts) {
  check_dictionary(dict, b);
  if (counts.a.size() != dict.a_events.size() || counts.b.size() != dict.b_events.size())
    throw DomainError("counts do not match the dictionary");
  const Observation o = observe(sample, dict, b, t);
  std::vector<char> far(dict.b_events.size());
  std::size_t site = 0;
  for (std::size_t j = 0; j < dict.b_events.size(); ++j) {
    const auto& e = dict.b_events[j];
    far[j] = e.kind == FarEvent::Kind::site_one ? o.far_sites[site++] == 1 : o.window_sum == e.value;
    if (far[j]) ++counts.b[j];
  }
  const std::size_t nb = dict.b_events.size();
  for (std::size_t i = 0; i < dict.a_events.size(); ++i) {
    if (!origin_holds(dict.a_events[i], o)) continue;
    ++counts.a[i];
    for (std::size_t j = 0; j < nb; ++j)
      if (far[j]) ++counts.ab[i * nb + j];
  }
  ++counts.samples;
}

MixingEstimate estimate_from_counts(const MixingCounts& counts, const EventDictionary& dict, int t) {
  return to_estimate(counts, dict, t);
}

MixingEstimate estimate_from_samples(std::span<const FieldSample> samples, const EventDictionary& dict, int b, int t) {
  MixingCounts counts(dict.a_events.size(), dict.b_events.size());
  for (const auto& s : samples) tally_events(s, dict, b, t, counts);
  return to_estimate(counts, dict, t);
}

MixingEstimate estimate_psi(const SimulatorSpec& sim, int t, const EventDictionary& dict, std::int64_t m_reps,
                            std::uint64_t seed, int workers) {
  check_run(sim, 0, t, m_reps);
  if (!is_ergodic(sim)) throw DomainError("estimate_psi needs an ergodic simulator; use estimate_conditional");
  check_dictionary(dict, 0);
  return to_estimate(sample_counts(sim, dict, 0, t, m_reps, seed, workers), dict, t);
}

MixingEstimate estimate_xi(const SimulatorSpec& sim, int b, int t, const EventDictionary& dict, std::int64_t m_reps,
                           std::uint64_t seed, int workers) {
  check_run(sim, b, t, m_reps);
  if (b < 1) throw DomainError("estimate_xi needs b >= 1");
  if (t < 2 * b) throw DomainError("estimate_xi needs t >= 2b");
  if (!is_ergodic(sim)) throw DomainError("estimate_xi needs an ergodic simulator; use estimate_conditional");
  check_dictionary(dict, b);
  return to_estimate(sample_counts(sim, dict, b, t, m_reps, seed, workers), dict, t);
}

MixingEstimate estimate_conditional(const SimulatorSpec& sim, int b, int t, const EventDictionary& dict,
                                    std::int64_t m_reps, std::uint64_t seed, double p_norm, int workers) {
  check_run(sim, b, t, m_reps);
  if (!std::holds_alternative<ExchSeq>(sim)) throw DomainError("conditional mixing is supported for latent mixtures only");
  if (!(p_norm >= 1.0)) throw DomainError("p_norm must be >= 1");
  check_dictionary(dict, b);
  const int radius = mixing_region_radius(dict, b, t);
  using ByLatent = std::map<double, MixingCounts>;
  const ByLatent grouped = parallel_replicates(
      m_reps, workers, ByLatent{},
      [&](std::int64_t r, ByLatent& acc) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r), phase::mixing);
        const FieldSample s = sample_window(sim, radius, rng);
        auto [it, fresh] = acc.try_emplace(*s.latent, dict.a_events.size(), dict.b_events.size());
        tally_events(s, dict, b, t, it->second);
      },
      [](ByLatent& out, const ByLatent& part) {
        for (const auto& [theta, c] : part) {
          auto it = out.find(theta);
          if (it == out.end())
            out.emplace(theta, c);
          else
            it->second.merge(c);
        }
      });

  MixingEstimate out;
  out.t = t;
  out.n_samples = m_reps;
  double acc = 0.0;
  double acc_se = 0.0;
  for (const auto& [theta, c] : grouped) {
    const PairStats st = pair_stats(c, dict);
    if (st.used == 0) continue;
    const double w = static_cast<double>(c.samples) / static_cast<double>(m_reps);
    out.pairs_used += st.used;
    if (std::isinf(p_norm)) {
      acc = std::max(acc, st.value);
      acc_se = std::max(acc_se, st.stderr_);
    } else {
      acc += w * std::pow(st.value, p_norm);
      acc_se += w * std::pow(st.stderr_, p_norm);
    }
  }
  if (out.pairs_used == 0) throw EstimationError("no latent atom produced a usable event pair");
  out.value = std::isinf(p_norm) ? acc : std::pow(acc, 1.0 / p_norm);
  out.mc_stderr = std::isinf(p_norm) ? acc_se : std::pow(acc_se, 1.0 / p_norm);
  return out;
}

double analytic_markov_psi(double rho, int t) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("rho must lie in (0, 1)");
  if (t < 0) throw DomainError("t must be >= 0");
  return std::pow(rho, t);
}

ResidueSum residue_sum(const ShellTable& shells, const std::function<double(int)>& coeff, int b, int start_multiplier,
                       int cutoff) {
  if (start_multiplier != 1 && start_multiplier != 2) throw DomainError("start_multiplier must be 1 or 2");
  if (b < 0) throw DomainError("b must be >= 0");
  if (cutoff >= shells.r_max) throw DomainError("residue cutoff exceeds the shell table");
  ResidueSum out;
  for (int i = start_multiplier * b; i <= cutoff; ++i) {
    const double c = coeff(i);
    if (c < 0.0) throw DomainError("mixing coefficients must be nonnegative");
    out.last_term = static_cast<double>(shells.shell(i)) * c;
    out.value += out.last_term;
  }
  return out;
}

}  // namespace amenpois
