#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "amenpois/group.hpp"
#include "amenpois/rng.hpp"

namespace amenpois {

/// Independent Bernoulli(p) sites on Z^dim.
struct IidField {
  int dim = 1;
  double p = 0.0;
};

/// Site x is 1 iff every uniform in the block [x, x + width - 1]^dim exceeds tau;
/// stationary and (width - 1)-dependent, with marginal (1 - tau)^(width^dim).
struct MdepField {
  int dim = 1;
  int width = 2;
  double tau = 0.5;
};

/// Nearest-neighbour Ising model on a torus, heat-bath sweeps; site value 1(spin = +1).
struct IsingField {
  int dim = 2;
  double beta = 0.1;
  double h = 0.0;
  int burn_in = 200;
  int margin = 2;

  /// Dobrushin contraction coefficient 2 dim tanh(beta).
  double dobrushin_rho() const;
  bool in_dobrushin_regime() const { return dobrushin_rho() < 1.0; }
};

/// Conditionally i.i.d. Bernoulli(theta / length) sequence with theta drawn from the mixture.
struct ExchSeq {
  std::vector<std::pair<double, double>> mixture;  // (theta, weight)
  int length = 1;
};

/// Bond percolation on the Cayley graph of a fin_gen group; the site statistic
/// is Y_phi = 1(phi B_{d_n} lies in the region and all its induced edges survive).
struct CayleyPerc {
  MetricGroup group = MetricGroup::grid(1);
  double p = 0.5;
  int d_n = 1;
};

/// Planar Poisson sampling on [0, side]^2: X(x) = 1 iff x is within delta of an
/// independent Poisson process of total mean kappa (intensity kappa / side^2).
struct PlanarPoisson {
  double intensity = 1.0;  // nu = intensity * Lebesgue, so J ~ Poisson(intensity side^2)
  double side = 10.0;
  double delta = 1.0;
  double kappa = 1.0;
};

using SimulatorSpec = std::variant<IidField, MdepField, IsingField, ExchSeq, CayleyPerc, PlanarPoisson>;

std::string simulator_name(const SimulatorSpec& spec);
/// Throws DomainError naming the offending parameter.
void validate(const SimulatorSpec& spec);
/// False for latent mixtures (ExchSeq with more than one atom).
bool is_ergodic(const SimulatorSpec& spec);
/// The group acting on the structure (grid(dim) for lattice fields, the Cayley group for percolation).
MetricGroup acting_group(const SimulatorSpec& spec);
/// Re-tunes the rarity parameter so that E[site value] is about mean_count / window_size.
SimulatorSpec scale_to_mean(const SimulatorSpec& spec, double mean_count, std::int64_t window_size);
/// P(site value = 1), exact where available, otherwise NaN.
double site_probability(const SimulatorSpec& spec);

/// Precomputed region geometry for Cayley percolation: vertices of B_radius,
/// the edges among them, and the template edges of phi B_{d_n} for every vertex.
struct CayleyLayout {
  MetricGroup group = MetricGroup::grid(1);
  int radius = 0;
  int d_n = 0;
  std::vector<GroupElement> vertices;
  std::unordered_map<GroupElement, int, GroupElementHash> index;
  std::vector<std::pair<int, int>> edges;
  std::vector<bool> interior;                   // phi B_{d_n} inside the region
  std::vector<std::vector<int>> template_edges;  // edge ids of phi G_n (interior vertices only)
};

std::shared_ptr<const CayleyLayout> make_cayley_layout(const MetricGroup& group, int radius, int d_n);

/// Number of Cayley-graph edges with both endpoints in B_d.
std::int64_t induced_subgraph_edges(const MetricGroup& group, int d);

/// One realization of a binary structure over a finite region.
struct FieldSample {
  enum class Layout { lattice, sequence, cayley, planar };

  Layout layout = Layout::lattice;
  int dim = 0;
  int region_radius = 0;
  /// lattice: row-major box {-R..R}^dim; sequence: X(1..length); cayley: Y per layout vertex.
  std::vector<std::uint8_t> values;
  std::optional<double> latent;
  std::uint64_t seed_record = 0;
  std::shared_ptr<const CayleyLayout> cayley;
  std::vector<std::array<double, 2>> centers;  // planar
  double planar_side = 0.0;
  double planar_delta = 0.0;

  /// Flat index of a group element in `values`; RegionError outside the region.
  std::size_t site_index(const GroupElement& phi) const;
  /// Flat index of lattice coordinates, or -1 when outside the box.
  std::int64_t lattice_index(std::span<const int> coords) const;
  int lattice_side() const noexcept { return 2 * region_radius + 1; }
};

FieldSample sample_window(const SimulatorSpec& spec, int radius, Rng& rng);
FieldSample sample_cayley(const std::shared_ptr<const CayleyLayout>& layout, double p, Rng& rng);

/// f_n(phi X): the site value at phi (X(phi(1)) for sequences, Y_phi for percolation).
int eval_f(const FieldSample& sample, const GroupElement& phi);
/// X(x) for a planar sample at a continuous location.
int eval_planar(const FieldSample& sample, double x, double y);
std::optional<double> latent(const FieldSample& sample);

}  // namespace amenpois
