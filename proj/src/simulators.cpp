#include "amenpois/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amenpois/errors.hpp"

namespace amenpois {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::int64_t ipow(std::int64_t base, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

/// Advances a row-major multi-index over {0..side-1}^dim; false when exhausted.
bool next_index(std::vector<int>& idx, int side) {
  for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
    if (++idx[static_cast<std::size_t>(i)] < side) return true;
    idx[static_cast<std::size_t>(i)] = 0;
  }
  return false;
}

FieldSample lattice_sample(int dim, int radius, std::uint64_t seed) {
  FieldSample s;
  s.layout = FieldSample::Layout::lattice;
  s.dim = dim;
  s.region_radius = radius;
  s.values.assign(static_cast<std::size_t>(ipow(2 * radius + 1, dim)), 0);
  s.seed_record = seed;
  return s;
}

FieldSample sample_iid(const IidField& f, int radius, Rng& rng) {
  FieldSample s = lattice_sample(f.dim, radius, rng.key());
  for (auto& v : s.values) v = rng.bernoulli(f.p) ? 1 : 0;
  return s;
}

FieldSample sample_mdep(const MdepField& f, int radius, Rng& rng) {
  FieldSample s = lattice_sample(f.dim, radius, rng.key());
  const int side = 2 * radius + 1;
  const int uside = side + f.width - 1;
  std::vector<std::uint8_t> exceed(static_cast<std::size_t>(ipow(uside, f.dim)));
  for (auto& e : exceed) e = rng.uniform() > f.tau ? 1 : 0;
  std::vector<int> idx(static_cast<std::size_t>(f.dim), 0);
  std::vector<int> off(static_cast<std::size_t>(f.dim), 0);
  std::size_t flat = 0;
  do {
    bool all = true;
    std::fill(off.begin(), off.end(), 0);
    do {
      std::size_t u = 0;
      for (int d = 0; d < f.dim; ++d)
        u = u * static_cast<std::size_t>(uside) + static_cast<std::size_t>(idx[static_cast<std::size_t>(d)] + off[static_cast<std::size_t>(d)]);
      if (!exceed[u]) {
        all = false;
        break;
      }
    } while (next_index(off, f.width));
    s.values[flat++] = all ? 1 : 0;
  } while (next_index(idx, side));
  return s;
}

FieldSample sample_ising(const IsingField& f, int radius, Rng& rng) {
  FieldSample s = lattice_sample(f.dim, radius, rng.key());
  const int L = 2 * (radius + f.margin) + 1;
  const auto n_sites = static_cast<std::size_t>(ipow(L, f.dim));
  std::vector<std::int8_t> spin(n_sites);
  for (auto& x : spin) x = rng.bernoulli(0.5) ? 1 : -1;

  // P(+1 | neighbour sum s) for s = -2 dim, ..., 2 dim.
  std::vector<double> p_plus(static_cast<std::size_t>(4 * f.dim + 1));
  for (int sum = -2 * f.dim; sum <= 2 * f.dim; ++sum)
    p_plus[static_cast<std::size_t>(sum + 2 * f.dim)] = 1.0 / (1.0 + std::exp(-2.0 * (f.beta * sum + f.h)));

  std::vector<std::size_t> stride(static_cast<std::size_t>(f.dim));
  for (int d = f.dim - 1, acc = 1; d >= 0; --d) {
    stride[static_cast<std::size_t>(d)] = static_cast<std::size_t>(acc);
    acc *= L;
  }
  std::vector<int> coord(static_cast<std::size_t>(f.dim), 0);
  for (int sweep = 0; sweep < f.burn_in; ++sweep) {
    std::fill(coord.begin(), coord.end(), 0);
    std::size_t site = 0;
    do {
      int sum = 0;
      for (int d = 0; d < f.dim; ++d) {
        const int c = coord[static_cast<std::size_t>(d)];
        const std::size_t st = stride[static_cast<std::size_t>(d)];
        const std::size_t up = c + 1 < L ? site + st : site - static_cast<std::size_t>(L - 1) * st;
        const std::size_t dn = c > 0 ? site - st : site + static_cast<std::size_t>(L - 1) * st;
        sum += spin[up] + spin[dn];
      }
      spin[site] = rng.uniform() < p_plus[static_cast<std::size_t>(sum + 2 * f.dim)] ? 1 : -1;
      ++site;
    } while (next_index(coord, L));
  }
  const int side = 2 * radius + 1;
  std::vector<int> idx(static_cast<std::size_t>(f.dim), 0);
  std::size_t flat = 0;
  do {
    std::size_t t = 0;
    for (int d = 0; d < f.dim; ++d) t += static_cast<std::size_t>(idx[static_cast<std::size_t>(d)] + f.margin) * stride[static_cast<std::size_t>(d)];
    s.values[flat++] = spin[t] > 0 ? 1 : 0;
  } while (next_index(idx, side));
  return s;
}

FieldSample sample_exch(const ExchSeq& f, Rng& rng) {
  FieldSample s;
  s.layout = FieldSample::Layout::sequence;
  s.dim = 1;
  s.region_radius = f.length;
  s.seed_record = rng.key();
  double u = rng.uniform();
  double theta = f.mixture.back().first;
  for (const auto& [t, w] : f.mixture) {
    if (u < w) {
      theta = t;
      break;
    }
    u -= w;
  }
  s.latent = theta;
  const double p = std::clamp(theta / f.length, 0.0, 1.0);
  s.values.resize(static_cast<std::size_t>(f.length));
  for (auto& v : s.values) v = rng.bernoulli(p) ? 1 : 0;
  return s;
}

FieldSample sample_planar(const PlanarPoisson& f, Rng& rng) {
  FieldSample s;
  s.layout = FieldSample::Layout::planar;
  s.dim = 2;
  s.seed_record = rng.key();
  s.planar_side = f.side;
  s.planar_delta = f.delta;
  // Centers on the delta-enlarged square keep X stationary inside [0, side]^2.
  const double lo = -f.delta;
  const double width = f.side + 2.0 * f.delta;
  const double mean = f.kappa * (width * width) / (f.side * f.side);
  const std::int64_t count = rng.poisson(mean);
  s.centers.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) s.centers.push_back({lo + width * rng.uniform(), lo + width * rng.uniform()});
  return s;
}

}  // namespace

double IsingField::dobrushin_rho() const { return 2.0 * dim * std::tanh(std::abs(beta)); }

std::string simulator_name(const SimulatorSpec& spec) {
  return std::visit(overloaded{[](const IidField&) { return std::string("iid_field"); },
                               [](const MdepField&) { return std::string("mdep_field"); },
                               [](const IsingField&) { return std::string("ising_field"); },
                               [](const ExchSeq&) { return std::string("exch_seq"); },
                               [](const CayleyPerc&) { return std::string("cayley_perc"); },
                               [](const PlanarPoisson&) { return std::string("planar_poisson"); }},
                    spec);
}

void validate(const SimulatorSpec& spec) {
  std::visit(
      overloaded{
          [](const IidField& f) {
            if (f.dim < 1) throw DomainError("simulator.dim must be >= 1");
            if (!is_probability(f.p)) throw DomainError("simulator.p must lie in [0, 1]");
          },
          [](const MdepField& f) {
            if (f.dim < 1) throw DomainError("simulator.dim must be >= 1");
            if (f.width < 1) throw DomainError("simulator.width must be >= 1");
            if (!is_probability(f.tau)) throw DomainError("simulator.tau must lie in [0, 1]");
          },
          [](const IsingField& f) {
            if (f.dim < 1) throw DomainError("simulator.dim must be >= 1");
            if (!std::isfinite(f.beta) || !std::isfinite(f.h)) throw DomainError("simulator.beta and simulator.h must be finite");
            if (f.burn_in < 0) throw DomainError("simulator.burn_in must be >= 0");
            if (f.margin < 0) throw DomainError("simulator.margin must be >= 0");
          },
          [](const ExchSeq& f) {
            if (f.length < 1) throw DomainError("simulator.length must be >= 1");
            if (f.mixture.empty()) throw DomainError("simulator.mixture must not be empty");
            double total = 0.0;
            for (const auto& [theta, w] : f.mixture) {
              if (!(theta >= 0.0) || !std::isfinite(theta)) throw DomainError("simulator.mixture theta must be finite and >= 0");
              if (!is_probability(w)) throw DomainError("simulator.mixture weight must lie in [0, 1]");
              total += w;
            }
            if (std::abs(total - 1.0) > 1e-9) throw DomainError("simulator.mixture weights must sum to 1");
          },
          [](const CayleyPerc& f) {
            if (f.group.kind() != GroupKind::fin_gen) throw DomainError("simulator.group must be fin_gen");
            if (!is_probability(f.p)) throw DomainError("simulator.p must lie in [0, 1]");
            if (f.d_n < 0) throw DomainError("simulator.d_n must be >= 0");
          },
          [](const PlanarPoisson& f) {
            if (!(f.intensity >= 0.0) || !std::isfinite(f.intensity)) throw DomainError("simulator.intensity must be >= 0");
            if (!(f.side > 0.0) || !std::isfinite(f.side)) throw DomainError("simulator.side must be > 0");
            if (!(f.delta >= 0.0)) throw DomainError("simulator.delta must be >= 0");
            if (!(f.kappa >= 0.0)) throw DomainError("simulator.kappa must be >= 0");
          }},
      spec);
}

bool is_ergodic(const SimulatorSpec& spec) {
  if (const auto* e = std::get_if<ExchSeq>(&spec)) {
    int atoms = 0;
    for (const auto& [theta, w] : e->mixture)
      if (w > 0.0) ++atoms;
    return atoms <= 1;
  }
  return true;
}

MetricGroup acting_group(const SimulatorSpec& spec) {
  return std::visit(overloaded{[](const IidField& f) { return MetricGroup::grid(f.dim); },
                               [](const MdepField& f) { return MetricGroup::grid(f.dim); },
                               [](const IsingField& f) { return MetricGroup::grid(f.dim); },
                               [](const ExchSeq&) -> MetricGroup {
                                 throw DomainError("exchangeable sequences act through S_infinity; no enumerable window group");
                               },
                               [](const CayleyPerc& f) { return f.group; },
                               [](const PlanarPoisson&) -> MetricGroup {
                                 throw DomainError("planar Poisson sampling has no discrete acting group");
                               }},
                    spec);
}

SimulatorSpec scale_to_mean(const SimulatorSpec& spec, double mean_count, std::int64_t window_size) {
  if (!(mean_count >= 0.0) || window_size < 1) throw DomainError("mean_count must be >= 0 and window non-empty");
  const double q = std::min(1.0, mean_count / static_cast<double>(window_size));
  SimulatorSpec out = spec;
  std::visit(overloaded{[&](IidField& f) { f.p = q; },
                        [&](MdepField& f) {
                          const double cells = static_cast<double>(ipow(f.width, f.dim));
                          f.tau = 1.0 - std::pow(q, 1.0 / cells);
                        },
                        [&](IsingField& f) {
                          // Rare-spin calibration: P(+1 | all 2 dim neighbours -1) = q.
                          if (q <= 0.0 || q >= 1.0) throw DomainError("Ising calibration needs 0 < q < 1");
                          f.h = 2.0 * f.dim * f.beta - 0.5 * std::log(1.0 / q - 1.0);
                        },
                        [](auto&) {}},
             out);
  return out;
}

double site_probability(const SimulatorSpec& spec) {
  return std::visit(
      overloaded{[](const IidField& f) { return f.p; },
                 [](const MdepField& f) { return std::pow(1.0 - f.tau, static_cast<double>(ipow(f.width, f.dim))); },
                 [](const IsingField&) { return std::nan(""); },
                 [](const ExchSeq& f) {
                   double p = 0.0;
                   for (const auto& [theta, w] : f.mixture) p += w * std::clamp(theta / f.length, 0.0, 1.0);
                   return p;
                 },
                 [](const CayleyPerc& f) {
                   return std::pow(f.p, static_cast<double>(induced_subgraph_edges(f.group, f.d_n)));
                 },
                 [](const PlanarPoisson&) { return std::nan(""); }},
      spec);
}

std::shared_ptr<const CayleyLayout> make_cayley_layout(const MetricGroup& group, int radius, int d_n) {
  if (group.kind() != GroupKind::fin_gen) throw DomainError("Cayley layout needs a fin_gen group");
  if (radius < 0 || d_n < 0) throw DomainError("Cayley layout radii must be >= 0");
  auto layout = std::make_shared<CayleyLayout>();
  layout->group = group;
  layout->radius = radius;
  layout->d_n = d_n;
  layout->vertices = group.ball(group.identity(), radius);
  for (std::size_t i = 0; i < layout->vertices.size(); ++i) layout->index.emplace(layout->vertices[i], static_cast<int>(i));

  std::unordered_map<std::uint64_t, int> edge_id;
  auto key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(std::min(a, b))) << 32) |
           static_cast<std::uint32_t>(std::max(a, b));
  };
  for (std::size_t i = 0; i < layout->vertices.size(); ++i) {
    for (const auto& s : group.generators()) {
      const auto it = layout->index.find(group.compose(layout->vertices[i], s));
      if (it == layout->index.end()) continue;
      const int j = it->second;
      if (edge_id.emplace(key(static_cast<int>(i), j), static_cast<int>(layout->edges.size())).second)
        layout->edges.emplace_back(static_cast<int>(i), j);
    }
  }

  // Template graph G_n: edges of the Cayley graph induced on B_{d_n}.
  const auto template_ball = group.ball(group.identity(), d_n);
  ElementSet template_set(template_ball.begin(), template_ball.end());
  std::vector<std::pair<GroupElement, GroupElement>> template_pairs;
  for (const auto& u : template_ball)
    for (const auto& s : group.generators()) {
      GroupElement v = group.compose(u, s);
      if (template_set.contains(v) && u < v) template_pairs.emplace_back(u, v);
    }

  const std::size_t nv = layout->vertices.size();
  layout->interior.assign(nv, false);
  layout->template_edges.assign(nv, {});
  for (std::size_t i = 0; i < nv; ++i) {
    const auto& phi = layout->vertices[i];
    bool inside = true;
    for (const auto& g : template_ball)
      if (!layout->index.contains(group.compose(phi, g))) {
        inside = false;
        break;
      }
    if (!inside) continue;
    layout->interior[i] = true;
    auto& ids = layout->template_edges[i];
    for (const auto& [u, v] : template_pairs) {
      const int a = layout->index.at(group.compose(phi, u));
      const int b = layout->index.at(group.compose(phi, v));
      ids.push_back(edge_id.at(key(a, b)));
    }
  }
  return layout;
}

std::int64_t induced_subgraph_edges(const MetricGroup& group, int d) {
  if (group.kind() != GroupKind::fin_gen) throw DomainError("induced subgraph needs a fin_gen group");
  if (d < 0) throw DomainError("induced subgraph radius must be >= 0");
  const auto ball = group.ball(group.identity(), d);
  const ElementSet members(ball.begin(), ball.end());
  std::int64_t ordered = 0;
  for (const auto& u : ball)
    for (const auto& s : group.generators())
      if (members.contains(group.compose(u, s))) ++ordered;
  return ordered / 2;
}

FieldSample sample_cayley(const std::shared_ptr<const CayleyLayout>& layout, double p, Rng& rng) {
  FieldSample s;
  s.layout = FieldSample::Layout::cayley;
  s.dim = layout->group.rank();
  s.region_radius = layout->radius;
  s.seed_record = rng.key();
  s.cayley = layout;
  std::vector<std::uint8_t> kept(layout->edges.size());
  for (auto& k : kept) k = rng.bernoulli(p) ? 1 : 0;
  s.values.assign(layout->vertices.size(), 0);
  for (std::size_t i = 0; i < layout->vertices.size(); ++i) {
    if (!layout->interior[i]) continue;
    bool all = true;
    for (int e : layout->template_edges[i])
      if (!kept[static_cast<std::size_t>(e)]) {
        all = false;
        break;
      }
    s.values[i] = all ? 1 : 0;
  }
  return s;
}

FieldSample sample_window(const SimulatorSpec& spec, int radius, Rng& rng) {
  validate(spec);
  if (radius < 0) throw DomainError("sample radius must be >= 0");
  return std::visit(overloaded{[&](const IidField& f) { return sample_iid(f, radius, rng); },
                               [&](const MdepField& f) { return sample_mdep(f, radius, rng); },
                               [&](const IsingField& f) { return sample_ising(f, radius, rng); },
                               [&](const ExchSeq& f) { return sample_exch(f, rng); },
                               [&](const CayleyPerc& f) {
                                 return sample_cayley(make_cayley_layout(f.group, radius, f.d_n), f.p, rng);
                               },
                               [&](const PlanarPoisson& f) { return sample_planar(f, rng); }},
                    spec);
}

std::int64_t FieldSample::lattice_index(std::span<const int> coords) const {
  if (static_cast<int>(coords.size()) != dim) return -1;
  const int side = lattice_side();
  std::int64_t flat = 0;
  for (int c : coords) {
    if (c < -region_radius || c > region_radius) return -1;
    flat = flat * side + (c + region_radius);
  }
  return flat;
}

std::size_t FieldSample::site_index(const GroupElement& phi) const {
  switch (layout) {
    case Layout::lattice: {
      const std::int64_t i = lattice_index(phi.coords);
      if (i < 0) throw RegionError("query outside the sampled lattice region");
      return static_cast<std::size_t>(i);
    }
    case Layout::sequence: {
      if (phi.coords.empty()) throw RegionError("empty permutation");
      const int t = phi.coords.front();
      if (t < 1 || t > static_cast<int>(values.size())) throw RegionError("permutation maps 1 outside the sampled sequence");
      return static_cast<std::size_t>(t - 1);
    }
    case Layout::cayley: {
      const auto it = cayley->index.find(phi);
      if (it == cayley->index.end()) throw RegionError("query outside the sampled Cayley region");
      return static_cast<std::size_t>(it->second);
    }
    case Layout::planar:
      break;
  }
  throw RegionError("planar samples are evaluated at continuous locations");
}

int eval_f(const FieldSample& sample, const GroupElement& phi) { return sample.values[sample.site_index(phi)]; }

int eval_planar(const FieldSample& sample, double x, double y) {
  if (sample.layout != FieldSample::Layout::planar) throw DomainError("not a planar sample");
  if (x < 0.0 || y < 0.0 || x > sample.planar_side || y > sample.planar_side)
    throw RegionError("query outside the sampled planar square");
  const double d2 = sample.planar_delta * sample.planar_delta;
  for (const auto& c : sample.centers) {
    const double dx = c[0] - x;
    const double dy = c[1] - y;
    if (dx * dx + dy * dy <= d2) return 1;
  }
  return 0;
}

std::optional<double> latent(const FieldSample& sample) { return sample.latent; }

}  // namespace amenpois
