#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "amenpois/errors.hpp"
#include "amenpois/mixing.hpp"

using namespace amenpois;

TEST_CASE("analytic Markov envelope") {
  CHECK(analytic_markov_psi(0.5, 3) == 0.125);
  CHECK(analytic_markov_psi(0.3, 0) == 1.0);
  CHECK(analytic_markov_psi(0.9, 20) == doctest::Approx(0.12158).epsilon(1e-4));
  CHECK_THROWS_AS(analytic_markov_psi(1.0, 2), DomainError);
  CHECK_THROWS_AS(analytic_markov_psi(0.5, -1), DomainError);
}

TEST_CASE("residue sums") {
  const auto t1 = MetricGroup::grid(1).shell_table(41);
  const auto r = residue_sum(t1, [](int i) { return std::pow(0.5, i); }, 1, 1, 40);
  CHECK(r.value == doctest::Approx(2.0 - std::pow(2.0, -39)).epsilon(1e-15));
  CHECK(r.last_term == doctest::Approx(2.0 * std::pow(0.5, 40)));
  CHECK(residue_sum(t1, [](int) { return 0.0; }, 1, 1, 40).value == 0.0);

  const auto t2 = MetricGroup::grid(2).shell_table(41);
  double direct = 0.0;
  for (int i = 4; i <= 40; ++i) direct += ((2.0 * i + 3) * (2.0 * i + 3) - (2.0 * i + 1) * (2.0 * i + 1)) * std::pow(0.9, i);
  CHECK(residue_sum(t2, [](int i) { return std::pow(0.9, i); }, 2, 2, 40).value == doctest::Approx(direct).epsilon(1e-13));

  double prev = 1e300;
  for (int b = 0; b <= 10; ++b) {
    const double v = residue_sum(t2, [](int i) { return std::pow(0.7, i); }, b, 1, 40).value;
    CHECK(v >= 0.0);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS_AS(residue_sum(t1, [](int) { return 0.0; }, 1, 1, 41), DomainError);
  CHECK_THROWS_AS(residue_sum(t1, [](int) { return 0.0; }, 1, 3, 10), DomainError);
}

TEST_CASE("event dictionary templates") {
  const auto psi = EventDictionary::standard(false);
  CHECK(psi.a_events.size() == 2);
  CHECK(psi.b_events.size() == 6);  // two sites and window sums 0..3
  const auto xi = EventDictionary::standard(true, 6);
  CHECK(xi.a_events.size() == 8);
  CHECK(xi.a_events.back().label() == "f(e)=1,S_b=6");
}

TEST_CASE("independent fields show no Psi or xi mixing") {
  const auto dict = EventDictionary::standard(false);
  const auto xdict = EventDictionary::standard(true);
  const IidField iid{1, 0.3};
  for (int t = 1; t <= 3; ++t) {
    const auto e = estimate_psi(iid, t, dict, 20000, 100 + static_cast<std::uint64_t>(t));
    CHECK(e.value <= 4.0 * e.mc_stderr);
    CHECK(e.n_samples == 20000);
  }
  const auto x = estimate_xi(iid, 1, 3, xdict, 20000, 7);
  CHECK(x.value <= 4.0 * x.mc_stderr);

  const MdepField md{1, 2, 0.4};
  const auto p3 = estimate_psi(md, 3, dict, 20000, 8);
  CHECK(p3.value <= 4.0 * p3.mc_stderr);
  const auto x3 = estimate_xi(md, 1, 3, xdict, 20000, 9);
  CHECK(x3.value <= 4.0 * x3.mc_stderr);
}

TEST_CASE("dependence inside the range is detected") {
  const auto e = estimate_psi(MdepField{1, 3, 0.3}, 1, EventDictionary::standard(false), 20000, 10);
  CHECK(e.value > 4.0 * e.mc_stderr);
}

TEST_CASE("latent-conditioned xi vanishes for exchangeable mixtures") {
  const ExchSeq f{{{5.0, 0.5}, {15.0, 0.5}}, 60};
  CHECK_THROWS_AS(estimate_psi(f, 2, EventDictionary::standard(false), 100, 1), DomainError);
  for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
    const auto e = estimate_conditional(f, 1, 3, EventDictionary::standard(true, 3), 20000, 12, p);
    CHECK(e.value <= 4.0 * e.mc_stderr);
  }
}

TEST_CASE("Ising field respects the Dobrushin envelope") {
  IsingField f;
  f.beta = 0.1;
  f.h = 0.0;
  f.burn_in = 100;
  const double rho = f.dobrushin_rho();
  const auto dict = EventDictionary::standard(false, 6, 1, 2);
  const auto e1 = estimate_psi(f, 1, dict, 3000, 21);
  const auto e2 = estimate_psi(f, 2, dict, 3000, 22);
  const auto e3 = estimate_psi(f, 3, dict, 3000, 23);
  CHECK(e2.value <= analytic_markov_psi(rho, 2) + 4.0 * e2.mc_stderr);
  CHECK(e1.value <= analytic_markov_psi(rho, 1) + 4.0 * e1.mc_stderr);
  CHECK(e3.value <= e1.value + 4.0 * std::hypot(e1.mc_stderr, e3.mc_stderr));
}

TEST_CASE("dictionary monotonicity on shared samples") {
  const MdepField f{1, 3, 0.3};
  const auto full = EventDictionary::standard(true, 4);
  EventDictionary sub = full;
  sub.a_events.resize(2);
  sub.b_events.resize(2);
  std::vector<FieldSample> samples;
  for (int r = 0; r < 5000; ++r) {
    Rng rng = Rng::substream(31, static_cast<std::uint64_t>(r), phase::mixing);
    samples.push_back(sample_window(f, mixing_region_radius(full, 1, 2), rng));
  }
  const auto a = estimate_from_samples(samples, sub, 1, 2);
  const auto b = estimate_from_samples(samples, full, 1, 2);
  CHECK(a.value <= b.value);
  CHECK(a.pairs_used < b.pairs_used);
}

TEST_CASE("estimates do not depend on the worker count") {
  const auto dict = EventDictionary::standard(true);
  const auto a = estimate_xi(MdepField{1, 2, 0.4}, 1, 2, dict, 3001, 77, 1);
  const auto b = estimate_xi(MdepField{1, 2, 0.4}, 1, 2, dict, 3001, 77, 3);
  CHECK(a.value == b.value);
  CHECK(a.mc_stderr == b.mc_stderr);
}

TEST_CASE("argument and estimation errors") {
  const auto dict = EventDictionary::standard(false);
  CHECK_THROWS_AS(estimate_psi(IidField{1, 0.3}, 0, dict, 100, 1), DomainError);
  CHECK_THROWS_AS(estimate_xi(IidField{1, 0.3}, 2, 3, EventDictionary::standard(true), 100, 1), DomainError);
  EventDictionary only_one = dict;
  only_one.a_events = {{OriginEvent::Kind::one, 0}};
  CHECK_THROWS_AS(estimate_psi(IidField{1, 0.0}, 1, only_one, 200, 1), EstimationError);
  CHECK_THROWS_AS(estimate_psi(PlanarPoisson{}, 1, dict, 10, 1), DomainError);
}
