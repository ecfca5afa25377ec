#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "amenpois/errors.hpp"
#include "amenpois/simulators.hpp"

using namespace amenpois;

namespace {

GroupElement el(std::vector<int> c) { return GroupElement{std::move(c)}; }

MetricGroup z2_word() { return MetricGroup::finitely_generated({{1, 0}, {0, 1}}); }

/// True when |estimate - p| is within k binomial standard errors.
bool within(double estimate, double p, double m, double k = 4.0) {
  return std::abs(estimate - p) <= k * std::sqrt(p * (1.0 - p) / m) + 1e-12;
}

}  // namespace

TEST_CASE("validation names the offending parameter") {
  auto message = [](const SimulatorSpec& s) {
    try {
      validate(s);
    } catch (const DomainError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(IidField{1, 1.5}).find("simulator.p") != std::string::npos);
  CHECK(message(MdepField{1, 0, 0.5}).find("simulator.width") != std::string::npos);
  CHECK(message(ExchSeq{{{1.0, 0.4}}, 10}).find("simulator.mixture") != std::string::npos);
  CHECK(message(IidField{1, 0.3}).empty());
}

TEST_CASE("iid field marginal and determinism") {
  const IidField f{2, 0.3};
  Rng a = Rng::substream(1, 0, phase::field), b = Rng::substream(1, 0, phase::field);
  const auto s1 = sample_window(f, 5, a);
  const auto s2 = sample_window(f, 5, b);
  CHECK(s1.values == s2.values);
  CHECK(s1.values.size() == 121);

  double ones = 0.0, m = 0.0;
  for (int r = 0; r < 400; ++r) {
    Rng rng = Rng::substream(2, static_cast<std::uint64_t>(r), phase::field);
    for (auto v : sample_window(f, 5, rng).values) ones += v;
    m += 121;
  }
  CHECK(within(ones / m, 0.3, m));
}

TEST_CASE("lattice indexing") {
  Rng rng(3);
  const auto s = sample_window(IidField{2, 0.5}, 2, rng);
  CHECK(s.lattice_index(std::vector<int>{-2, -2}) == 0);
  CHECK(s.lattice_index(std::vector<int>{2, 2}) == 24);
  CHECK(s.lattice_index(std::vector<int>{3, 0}) == -1);
  CHECK_THROWS_AS(eval_f(s, el({0, 3})), RegionError);
}

TEST_CASE("m-dependent field: marginal, joint, and independence at range") {
  const MdepField f{1, 2, 0.4};
  const double q = std::pow(0.6, 2);
  const int reps = 40000;
  double x0 = 0, x01 = 0, x02 = 0, x2 = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::substream(5, static_cast<std::uint64_t>(r), phase::field);
    const auto s = sample_window(f, 3, rng);
    const int a = eval_f(s, el({0})), b = eval_f(s, el({1})), c = eval_f(s, el({2}));
    x0 += a;
    x01 += a * b;
    x02 += a * c;
    x2 += c;
  }
  CHECK(site_probability(f) == doctest::Approx(q));
  CHECK(within(x0 / reps, q, reps));
  // Sites 0 and 1 share one uniform: P = 0.6^3.
  CHECK(within(x01 / reps, std::pow(0.6, 3), reps));
  // Sites 0 and 2 share none.
  CHECK(within(x02 / reps, q * q, reps));
}

TEST_CASE("Ising heat bath") {
  IsingField f;
  f.beta = 0.1;
  CHECK(f.dobrushin_rho() == doctest::Approx(4.0 * std::tanh(0.1)));
  CHECK(f.in_dobrushin_regime());

  // h = 0: spin flip symmetry gives P(+1) = 1/2.
  double ones = 0, m = 0;
  for (int r = 0; r < 300; ++r) {
    Rng rng = Rng::substream(8, static_cast<std::uint64_t>(r), phase::field);
    const auto s = sample_window(f, 2, rng);
    ones += eval_f(s, el({0, 0}));
    m += 1;
  }
  CHECK(within(ones / m, 0.5, m));

  // Rarity calibration: P(+1 | all neighbours -1) equals the requested site rate.
  const auto tuned = std::get<IsingField>(scale_to_mean(f, 2.0, 200));
  const double logit = 2.0 * (tuned.beta * -4.0 + tuned.h);
  CHECK(1.0 / (1.0 + std::exp(-logit)) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("exchangeable sequence") {
  const ExchSeq f{{{1.0, 0.5}, {3.0, 0.5}}, 50};
  CHECK_FALSE(is_ergodic(f));
  CHECK(is_ergodic(ExchSeq{{{2.0, 1.0}}, 50}));
  CHECK(site_probability(f) == doctest::Approx(0.04));
  int atom1 = 0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::substream(9, static_cast<std::uint64_t>(r), phase::field);
    const auto s = sample_window(f, 0, rng);
    REQUIRE(s.latent.has_value());
    atom1 += *s.latent == 1.0;
    CHECK(s.values.size() == 50);
  }
  CHECK(within(static_cast<double>(atom1) / reps, 0.5, reps));
}

TEST_CASE("Cayley percolation layout and statistics") {
  const auto g = z2_word();
  CHECK(induced_subgraph_edges(g, 1) == 4);
  CHECK(induced_subgraph_edges(g, 2) == 16);
  const auto layout = make_cayley_layout(g, 4, 1);
  CHECK(layout->vertices.size() == 41);
  std::size_t interior = 0;
  for (bool b : layout->interior) interior += b;
  CHECK(interior == 25);  // L1 ball of radius 3
  // Edges inside the L1 ball of radius 4: 2 r (r + 1) ... counted directly.
  std::size_t edges = 0;
  for (const auto& v : layout->vertices)
    for (const auto& w : layout->vertices)
      if (v < w && std::abs(v.coords[0] - w.coords[0]) + std::abs(v.coords[1] - w.coords[1]) == 1) ++edges;
  CHECK(layout->edges.size() == edges);

  Rng rng(1);
  const auto all = sample_cayley(layout, 1.0, rng);
  for (std::size_t i = 0; i < all.values.size(); ++i) CHECK(all.values[i] == (layout->interior[i] ? 1 : 0));
  const auto none = sample_cayley(layout, 0.0, rng);
  for (auto v : none.values) CHECK(v == 0);

  double hits = 0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    Rng rr = Rng::substream(4, static_cast<std::uint64_t>(r), phase::field);
    hits += eval_f(sample_cayley(layout, 0.5, rr), g.identity());
  }
  CHECK(within(hits / reps, std::pow(0.5, 4), reps));
  CHECK(site_probability(CayleyPerc{g, 0.5, 2}) == doctest::Approx(std::pow(0.5, 16)));
}

TEST_CASE("planar Poisson field void probability") {
  const PlanarPoisson f{1.0, 10.0, 1.0, 3.0};
  const double p_one = 1.0 - std::exp(-f.kappa * std::numbers::pi * f.delta * f.delta / (f.side * f.side));
  double hits = 0, edge = 0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::substream(6, static_cast<std::uint64_t>(r), phase::field);
    const auto s = sample_window(f, 0, rng);
    hits += eval_planar(s, 5.0, 5.0);
    edge += eval_planar(s, 0.0, 0.0);
  }
  CHECK(within(hits / reps, p_one, reps));
  CHECK(within(edge / reps, p_one, reps));
  Rng rng(1);
  CHECK_THROWS_AS(eval_planar(sample_window(f, 0, rng), 11.0, 1.0), RegionError);
}

TEST_CASE("scale_to_mean") {
  const auto iid = std::get<IidField>(scale_to_mean(IidField{1, 0.0}, 2.0, 201));
  CHECK(iid.p == doctest::Approx(2.0 / 201.0));
  const auto md = std::get<MdepField>(scale_to_mean(MdepField{2, 2, 0.5}, 3.0, 100));
  CHECK(site_probability(md) == doctest::Approx(0.03).epsilon(1e-12));
  CHECK_THROWS_AS(scale_to_mean(IidField{1, 0.0}, -1.0, 10), DomainError);
}
