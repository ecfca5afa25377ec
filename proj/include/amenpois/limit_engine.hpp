#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amenpois/compound_poisson.hpp"
#include "amenpois/group.hpp"
#include "amenpois/simulators.hpp"

namespace amenpois {

/// Number of summands J_n of a randomized sum.
struct JDist {
  enum class Kind { fixed, poisson };
  Kind kind = Kind::fixed;
  double value = 0.0;  // j for fixed, the mean for poisson

  static JDist fixed(std::int64_t j) { return {Kind::fixed, static_cast<double>(j)}; }
  static JDist poisson(double mean) { return {Kind::poisson, mean}; }

  double moment1() const;  // E J
  double moment2() const;  // E J^2
  double moment3() const;  // E J^3
  double variance() const;
  std::int64_t draw(Rng& rng) const;
};

/// Randomized sum configuration; locations are uniform on the window, for which
/// the spread constant is 1.
struct RandomizedSpec {
  JDist j_dist;
  double spread_const = 1.0;
  int b_n = 1;
  double alpha = 0.5;
  double beta = 0.5;
};

struct LambdaEstimate {
  std::vector<double> rates;   // rates[k - 1]
  std::vector<double> stderr_;  // per-k Monte Carlo standard error
  int b = 0;
  int n = 0;
  std::int64_t m_reps = 0;
  /// True when rates hold k lambda(k) (the randomized-sum expectation), false for lambda(k).
  bool k_weighted = false;
  /// Mean and standard error of W_n on the same replicates.
  double mean_w = 0.0;
  double mean_w_stderr = 0.0;

  int k_max() const noexcept { return static_cast<int>(rates.size()); }
  /// The compound-Poisson cluster rates lambda(k).
  ParamVector cluster_rates() const;
  /// sum_k k lambda(k).
  double mass() const;
};

/// Integer accumulators of one Monte Carlo pass over replicate windows.
struct WindowTally {
  std::vector<std::uint64_t> w_hist;
  std::vector<std::int64_t> ck_sum;  // per k: sum over replicates of the count c_k
  std::vector<std::int64_t> ck_sq;
  std::int64_t w_sum = 0;
  std::int64_t w_sq = 0;
  std::int64_t reps = 0;

  void add_w(std::int64_t w);
  void merge(const WindowTally& other);
};

/// W_n = sum over the window of eval_f.
std::int64_t w_sum(const FieldSample& sample, const FolnerWindow& window);

/// One pass of m_reps replicates at window index n: the law of W_n and, for each
/// k <= k_max, the counts c_k = #{phi in A_n : f(phi) = 1, ball-b sum = k}
/// (or their randomized-sum analogues when `randomized` is set).
WindowTally simulate_window(const SimulatorSpec& spec, int n, int b, int k_max, std::int64_t m_reps,
                            std::uint64_t seed, int workers = 1,
                            const std::optional<RandomizedSpec>& randomized = std::nullopt);

LambdaEstimate lambda_from_tally(const WindowTally& tally, int n, int b, bool k_weighted);
DiscreteDist dist_from_tally(const WindowTally& tally);

/// lambda(k) = (1/k) E[c_k]; by invariance this equals (|A_n|/k) P(f(e) = 1, ball sum = k).
LambdaEstimate lambda_hat_ergodic(const SimulatorSpec& spec, int n, int b, int k_max, std::int64_t m_reps,
                                  std::uint64_t seed, int workers = 1);

struct AtomSummary {
  double theta = 0.0;
  double weight = 0.0;
  double rate = 0.0;  // conditional limit rate
  double empirical_rate = 0.0;
  double empirical_stderr = 0.0;
  std::int64_t reps = 0;
  DiscreteDist w_dist;
};

/// Per mixture atom: the limit rate theta and the empirical conditional mean of W_n.
std::vector<AtomSummary> lambda_hat_exchangeable(const ExchSeq& spec, std::int64_t m_reps, std::uint64_t seed,
                                                 int workers = 1);

struct MomentTerms {
  double mu = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double p = 1.0;
  bool ergodic = true;
  std::int64_t window_size = 0;
};

/// mu = |A_n| q, eta = q, gamma = |A_n|^2 q^2.
MomentTerms moment_terms_ergodic(double q_origin, std::int64_t window_size, double p);

struct BoundReport {
  enum class Variant { theorem1, mtkatahdin };

  double term_boundary = 0.0;
  double term_gamma = 0.0;
  double term_psi = 0.0;
  double term_xi = 0.0;
  double h0 = 0.0;
  double h1 = 0.0;
  double total = 0.0;
  Variant variant = Variant::theorem1;
  double p = 1.0;
  double psi_last_term = 0.0;
  double xi_last_term = 0.0;
  /// Named contributions, each already weighted, summing to total.
  std::vector<std::pair<std::string, double>> parts;
};

std::string variant_name(BoundReport::Variant v);

using MixingFn = std::function<double(int)>;

/// h0 eta defect^((p-1)/p) + h1 (2 |B_2b|/|A_n| gamma + mu R_psi(b) + 2 mu R_xi(b)).
BoundReport theorem1_bound(const MomentTerms& moments, const ShellTable& shells, const MixingFn& psi,
                           const MixingFn& xi, int b_n, double defect, double h0, double h1, int cutoff);
/// theorem1_bound at p in {1, 2, infinity}; returns the smallest.
BoundReport theorem1_bound_best(double q_origin, std::int64_t window_size, const ShellTable& shells,
                                const MixingFn& psi, const MixingFn& xi, int b_n, double defect, double h0, double h1,
                                int cutoff);

/// Draws J_n and J_n uniform locations (with replacement) and sums eval_f.
std::int64_t randomized_sum(const FieldSample& sample, const FolnerWindow& window, const RandomizedSpec& rspec,
                            Rng& rng);

/// Randomized-sum rates, k-weighted: E[sum_i f_i 1(neighbourhood sum of i = k)].
LambdaEstimate lambda_hat_randomized(const SimulatorSpec& spec, int n, const RandomizedSpec& rspec, int k_max,
                                     std::int64_t m_reps, std::uint64_t seed, int workers = 1);

double epsilon_n(const RandomizedSpec& rspec, std::int64_t window_size, const ShellTable& shells, double q1,
                 double q2);

struct RadiusChoice {
  int c_n = 0;
  std::int64_t k_n = 0;
  double threshold = 0.0;
  bool below_unit = false;  // threshold < |B_0|
  bool saturated = false;   // every tabulated radius qualifies
};

/// k_n = floor(eps^(alpha - 1)) and c_n = max{r : |B_r| <= k_n^(1 - beta)}.
RadiusChoice radii_cn(double epsilon, double alpha, double beta, const ShellTable& shells);

struct RandomizedBoundInputs {
  double q = 0.0;  // ergodic origin probability
  std::int64_t window_size = 0;
  double h0 = 0.0;
  double h1 = 0.0;
  int cutoff = 40;
};

/// The explicit randomized-sum bound: term_gamma, term_psi, term_xi carry the
/// h1 part and term_boundary the h0 part.
BoundReport mtkatahdin_bound(const RandomizedBoundInputs& in, const ShellTable& shells, const MixingFn& psi,
                             const MixingFn& xi, const RandomizedSpec& rspec);

/// Smallest k >= 1 with (|S||B_k| - (|S| - 1)|B_k \ B_{k-1}|)/2 >= -log|A_n| / log p.
int cayley_dn(const MetricGroup& group, double p, std::int64_t window_size, const ShellTable& shells);
double cayley_lambda(double p, std::int64_t edges);

/// Normalized histogram of W_n over m_reps replicates.
DiscreteDist empirical_w_dist(const SimulatorSpec& spec, int n, std::int64_t m_reps, std::uint64_t seed,
                              int workers = 1, const std::optional<RandomizedSpec>& randomized = std::nullopt);

/// Monte Carlo scale of a TV estimate: (1/2) sum_w sqrt(p_w (1 - p_w) / m).
double tv_stderr(const DiscreteDist& empirical, std::int64_t m_reps);

enum class MixingModel { zero, m_dependent, geometric, cayley };

/// Analytic mixing inputs fed to the bounds.
struct MixingInput {
  MixingModel kind = MixingModel::zero;
  int range = 0;     // m_dependent: dependence width; cayley: d_n (filled per n)
  double rho = 0.0;  // geometric

  MixingFn psi() const;
  MixingFn xi(int b) const;
};

struct Scenario {
  std::string name;
  SimulatorSpec simulator;
  /// When set, the rarity parameter is rescaled per n so that E[W_n] is about this value.
  std::optional<double> mean_count;
  std::vector<int> n_grid;
  std::vector<int> b_n;  // one per n
  std::int64_t m_reps = 1000;
  std::optional<int> k_max;
  std::uint64_t seed = 0;
  std::optional<RandomizedSpec> randomized;
  /// When set, the J parameter is rescaled per n to this multiple of |A_n|.
  std::optional<double> j_per_site;
  MixingInput mixing;
  /// When set, TV is taken against Poisson(target) instead of Z(lambda-hat).
  std::optional<double> poisson_target;
  int residue_cutoff = 40;
};

struct ExperimentRow {
  int n = 0;
  std::int64_t window_size = 0;
  int b_n = 0;
  LambdaEstimate lambda;
  double tv = 0.0;
  double tv_stderr = 0.0;
  std::optional<BoundReport> bound;
  double wall_seconds = 0.0;
  DiscreteDist w_dist;
  std::vector<AtomSummary> atoms;      // latent mixtures
  std::optional<double> tv_lambda_hat;  // TV against Z(lambda-hat) when the row target differs
  std::optional<double> tv_vs_mean;    // TV against Poisson(empirical mean), percolation
  std::optional<int> d_n;              // percolation
  std::optional<std::int64_t> edges;   // percolation template edge count
  std::optional<double> epsilon;       // randomized sums
  std::optional<RadiusChoice> radii;   // randomized sums
};

struct ExperimentResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<ExperimentRow> rows;
};

/// Seed for the replicates at window index n.
std::uint64_t point_seed(std::uint64_t master_seed, int n);

/// Simulates and bounds one grid point (index into n_grid).
ExperimentRow run_point(const Scenario& scenario, std::size_t index, int workers = 1);
ExperimentResult convergence_curve(const Scenario& scenario, int workers = 1);

/// Throws DomainError listing the first inconsistency.
void check_scenario(const Scenario& scenario);

}  // namespace amenpois
