#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amenpois/group.hpp"
#include "amenpois/simulators.hpp"

namespace amenpois {

/// Event on the origin: its value, optionally joined with the ball-b sum around it.
struct OriginEvent {
  enum class Kind { one, zero, one_with_sum };
  Kind kind = Kind::one;
  int sum = 0;

  std::string label() const;
};

/// Event on the far window G, a box of radius w_cap centred t + w_cap along the
/// first axis, so its nearest point is at distance t from the origin.
struct FarEvent {
  enum class Kind { site_one, window_sum };
  Kind kind = Kind::site_one;
  int value = 0;  // site_one: offset from the nearest point; window_sum: the sum

  std::string label() const;
};

struct EventDictionary {
  std::vector<OriginEvent> a_events;
  std::vector<FarEvent> b_events;
  int w_cap = 3;
  /// Pairs whose origin event occurs fewer times are skipped.
  std::int64_t min_count = 30;

  /// {f = 1}, {f = 0}, plus {f = 1, ball sum = k} for k <= k_cap when with_ball_sums;
  /// far events: site at the nearest point and the centre, window sum = j for j <= j_cap.
  static EventDictionary standard(bool with_ball_sums, int k_cap = 6, int w_cap = 3, int j_cap = 3);
};

struct MixingEstimate {
  int t = 0;
  double value = 0.0;
  double mc_stderr = 0.0;
  std::int64_t n_samples = 0;
  std::size_t pairs_used = 0;
};

/// Integer occurrence counts of dictionary events over samples.
struct MixingCounts {
  std::int64_t samples = 0;
  std::vector<std::int64_t> a;
  std::vector<std::int64_t> b;
  std::vector<std::int64_t> ab;  // row-major a x b

  MixingCounts() = default;
  MixingCounts(std::size_t n_a, std::size_t n_b) : a(n_a, 0), b(n_b, 0), ab(n_a * n_b, 0) {}
  void merge(const MixingCounts& other);
};

/// Region radius a sample needs for events at separation t.
int mixing_region_radius(const EventDictionary& dict, int b, int t);

/// Adds one sample's events. b = 0 disables ball sums (origin value only).
void tally_events(const FieldSample& sample, const EventDictionary& dict, int b, int t, MixingCounts& counts);

/// max over usable pairs of |P(B|A) - P(B)|; mc_stderr is the largest per-pair standard error.
MixingEstimate estimate_from_counts(const MixingCounts& counts, const EventDictionary& dict, int t);
MixingEstimate estimate_from_samples(std::span<const FieldSample> samples, const EventDictionary& dict, int b, int t);

/// Ergodic Psi estimate from m_reps independent samples.
MixingEstimate estimate_psi(const SimulatorSpec& sim, int t, const EventDictionary& dict, std::int64_t m_reps,
                            std::uint64_t seed, int workers = 1);
/// Ergodic xi estimate; requires t >= 2b.
MixingEstimate estimate_xi(const SimulatorSpec& sim, int b, int t, const EventDictionary& dict, std::int64_t m_reps,
                           std::uint64_t seed, int workers = 1);

/// Latent-conditioned coefficient for mixtures: the per-atom estimate combined by
/// the empirical L_p norm over latent draws (p_norm = 1, 2, or infinity).
MixingEstimate estimate_conditional(const SimulatorSpec& sim, int b, int t, const EventDictionary& dict,
                                    std::int64_t m_reps, std::uint64_t seed, double p_norm, int workers = 1);

/// rho^t, the geometric envelope for Markov fields under the Dobrushin condition.
double analytic_markov_psi(double rho, int t);

struct ResidueSum {
  double value = 0.0;
  double last_term = 0.0;
};

/// sum_{i = start_multiplier * b}^{cutoff} |B_{i+1} \ B_i| coeff(i).
ResidueSum residue_sum(const ShellTable& shells, const std::function<double(int)>& coeff, int b,
                       int start_multiplier, int cutoff);

}  // namespace amenpois
