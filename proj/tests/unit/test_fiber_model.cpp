#include <bsslasso/fiber_model.hpp>

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>
#include <random>

using namespace bsslasso;

namespace {

FiberLink one_event(double pos, double loss, std::optional<double> refl = std::nullopt, double length = 0.0) {
  FiberLink link;
  link.length_m = length > 0.0 ? length : pos;
  link.events.push_back(Event{pos, loss, refl});
  return link;
}

}  // namespace

TEST_CASE("coefficients from magnitudes, worked values") {
  CHECK(coefficients_from_magnitudes(one_event(1000.0, 0.0)).phi[0] == 0.0);
  CHECK(coefficients_from_magnitudes(one_event(1000.0, 1.0)).phi[0] ==
        doctest::Approx(1.0 - std::pow(10.0, -0.1)).epsilon(1e-14));
  CHECK(coefficients_from_magnitudes(one_event(1000.0, 1.0)).phi[0] == doctest::Approx(0.20567).epsilon(1e-4));

  FiberLink two;
  two.length_m = 2000.0;
  const double half = 10.0 * std::log10(2.0);
  two.events = {Event{1000.0, half, {}}, Event{2000.0, half, {}}};
  const StepCoefficients c = coefficients_from_magnitudes(two);
  CHECK(c.phi[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.phi[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_FALSE(c.theta[0].has_value());
}

TEST_CASE("magnitudes from coefficients, worked values") {
  const std::vector<double> zero{0.0};
  CHECK(magnitudes_from_coefficients(zero)[0] == 1.0);
  const std::vector<double> one{0.20567};
  CHECK(magnitudes_from_coefficients(one)[0] == doctest::Approx(std::pow(10.0, -0.05)).epsilon(1e-5));
  const std::vector<double> two{0.5, 0.25};
  const auto xi = magnitudes_from_coefficients(two);
  CHECK(xi[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(xi[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("magnitude recursion failure modes") {
  const std::vector<double> negative{0.5, 0.6};
  try {
    magnitudes_from_coefficients(negative);
    FAIL("expected InvalidCoefficients");
  } catch (const InvalidCoefficients& e) {
    CHECK(e.kind() == MagnitudeFailure::NegativeRadicand);
    CHECK(e.index() == 1);
  }
  const std::vector<double> dead{1.0, 0.0};
  try {
    magnitudes_from_coefficients(dead);
    FAIL("expected InvalidCoefficients");
  } catch (const InvalidCoefficients& e) {
    CHECK(e.kind() == MagnitudeFailure::ZeroLevel);
    CHECK(e.index() == 1);
  }
}

TEST_CASE("reflectance convention") {
  CHECK(theta_from_reflectance_db(20.0, 0.5) == doctest::Approx(50.0));
  CHECK(reflectance_db_from_theta(50.0, 0.5) == doctest::Approx(20.0));
  FiberLink two;
  two.length_m = 3000.0;
  two.events = {Event{1000.0, 3.0, 10.0}, Event{3000.0, 2.0, {}}};
  const StepCoefficients c = coefficients_from_magnitudes(two);
  REQUIRE(c.theta[0].has_value());
  // level before the first event is the full sum of steps, i.e. 1
  CHECK(*c.theta[0] == doctest::Approx(10.0));
  CHECK(level_before(c.phi, 0) == doctest::Approx(1.0));
  CHECK(level_before(c.phi, 1) == doctest::Approx(std::pow(10.0, -0.3)));
}

TEST_CASE("property: magnitude round trip on random links") {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const FiberLink link = testutil::random_link(rng, 1 + trial % 5, true);
    const auto xi = magnitudes_from_coefficients(coefficients_from_magnitudes(link).phi);
    for (std::size_t b = 0; b < xi.size(); ++b) {
      const double truth = transmission_from_loss_db(link.events[b].loss_db);
      worst = std::max(worst, std::abs(xi[b] - truth) / truth);
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("link validation") {
  FiberLink bad = one_event(1000.0, 1.0);
  bad.events[0].position_m = 1200.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  FiberLink neg = one_event(1000.0, -1.0);
  CHECK_THROWS_AS(neg.validate(), InvalidInput);
  FiberLink order;
  order.length_m = 2000.0;
  order.events = {Event{1500.0, 1.0, {}}, Event{1000.0, 1.0, {}}};
  CHECK_THROWS_AS(order.validate(), InvalidInput);
  CHECK_NOTHROW(one_event(1000.0, 1.0, 5.0).validate());
}

TEST_CASE("time domain profile, worked values") {
  PhysicalConstants c = testutil::standard();
  FiberLink two;
  two.length_m = 2000.0;
  two.events = {Event{800.0, 3.0, {}}, Event{2000.0, 1.0, {}}};
  const StepCoefficients coeffs = coefficients_from_magnitudes(two);
  const std::vector<double> z{0.0, 100.0, 500.0, 800.0, 1000.0, 2000.0};
  const auto p = time_domain_profile(two, c, z);
  const double sum = coeffs.phi[0] + coeffs.phi[1];
  CHECK(p[1] == doctest::Approx(std::exp(-2.0 * c.alpha * 100.0) * sum));
  CHECK(p[2] == doctest::Approx(std::exp(-2.0 * c.alpha * 500.0) * sum));
  // on the jump: mean of the one-sided limits
  CHECK(p[3] == doctest::Approx(std::exp(-2.0 * c.alpha * 800.0) * (sum + coeffs.phi[1]) / 2.0));
  CHECK(p[4] == doctest::Approx(std::exp(-2.0 * c.alpha * 1000.0) * coeffs.phi[1]));

  // single event at the end: nothing beyond it, spike lands on its node
  FiberLink spike = one_event(1000.0, 2.0, 10.0);
  const std::vector<double> grid = profile_grid(spike, 0.25);
  const auto w = trapezoid_weights(grid);
  const auto ps = time_domain_profile(spike, c, grid);
  const double theta = *coefficients_from_magnitudes(spike).theta[0];
  double integral = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) integral += w[i] * ps[i];
  const double steps = coefficients_from_magnitudes(spike).phi[0] * (1.0 - std::exp(-2.0 * c.alpha * 1000.0)) /
                       (2.0 * c.alpha);
  CHECK(integral == doctest::Approx(steps + theta * std::exp(-2.0 * c.alpha * 1000.0)).epsilon(1e-6));
  CHECK_THROWS_AS(time_domain_profile(spike, c, std::vector<double>{}), InvalidInput);
}

TEST_CASE("profile grid includes event positions") {
  FiberLink link;
  link.length_m = 1000.3;
  link.events = {Event{333.33, 1.0, {}}, Event{1000.3, 1.0, {}}};
  const auto g = profile_grid(link, 0.25);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1000.3);
  CHECK(std::find(g.begin(), g.end(), 333.33) != g.end());
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}

TEST_CASE("phasor atoms") {
  const PhysicalConstants c = testutil::standard();
  // alpha = 0, f -> 0: S_B -> X
  CHECK(std::abs(step_phasor(1e-12, 0.0, 1234.0) - Complex(1234.0, 0.0)) < 1e-6);
  CHECK(std::abs(step_phasor(0.0, 0.0, 1234.0) - Complex(1234.0, 0.0)) < 1e-9);
  // |S_R| is frequency independent
  for (double f : {100.0, 5000.0, 99'900.0}) {
    CHECK(std::abs(reflection_phasor(c.wavenumber(f), c.alpha, 3000.0)) ==
          doctest::Approx(std::exp(-2.0 * c.alpha * 3000.0)));
  }
  // closed form matches direct evaluation
  const double k = c.wavenumber(2500.0), x = 4321.0;
  const Complex s(-2.0 * c.alpha, k);
  CHECK(std::abs(step_phasor(k, c.alpha, x) - (std::exp(s * x) - 1.0) / s) < 1e-9);
}

TEST_CASE("property: step atom modulus envelope and main-lobe decay") {
  // |S_B| is bounded by the k -> 0 value and by 2 / |jk - 2 alpha|, and decreases
  // monotonically across the main lobe k X < 2 pi.
  const PhysicalConstants c = testutil::standard();
  for (double x : {500.0, 2000.0, 8000.0}) {
    const double dc = std::abs(step_phasor(0.0, c.alpha, x));
    double prev = dc;
    for (int i = 1; i <= 400; ++i) {
      const double k = 2.0 * M_PI / x * i / 400.0;
      const double mag = std::abs(step_phasor(k, c.alpha, x));
      CHECK(mag <= prev + 1e-12);
      prev = mag;
    }
    for (double f = 100.0; f <= 100'000.0; f += 100.0) {
      const double k = c.wavenumber(f);
      const double mag = std::abs(step_phasor(k, c.alpha, x));
      CHECK(mag <= dc + 1e-9);
      CHECK(mag <= 2.0 / std::hypot(k, 2.0 * c.alpha) + 1e-9);
    }
  }
}

TEST_CASE("property: conjugate symmetry and linearity") {
  std::mt19937_64 rng(5);
  const PhysicalConstants c = testutil::standard();
  for (int trial = 0; trial < 20; ++trial) {
    const FiberLink link = testutil::random_link(rng, 3, true);
    const StepCoefficients coeffs = coefficients_from_magnitudes(link);
    for (double f : {150.0, 7300.0, 61000.0}) {
      const Complex pos = link_response(coeffs, link, c, f);
      const Complex neg = link_response(coeffs, link, c, -f);
      CHECK(std::abs(neg - std::conj(pos)) <= 1e-12 * std::abs(pos) + 1e-15);
    }
    // superposition over disjoint event sets with the coefficients held fixed
    StepCoefficients a = coeffs, b = coeffs;
    for (std::size_t i = 0; i < coeffs.phi.size(); ++i) {
      if (i % 2) {
        a.phi[i] = 0.0;
        a.theta[i].reset();
      } else {
        b.phi[i] = 0.0;
        b.theta[i].reset();
      }
    }
    for (double f : {100.0, 33'300.0}) {
      const Complex whole = link_response(coeffs, link, c, f);
      const Complex parts = link_response(a, link, c, f) + link_response(b, link, c, f);
      CHECK(std::abs(whole - parts) <= 1e-12 * std::abs(whole));
    }
  }
}

TEST_CASE("numeric transform matches the closed form") {
  const PhysicalConstants c = testutil::standard();
  const auto freqs = frequency_grid(100.0, 100'000.0, 100.0);
  CHECK(freqs.size() == 1000);
  CHECK(freqs.back() == doctest::Approx(100'000.0));

  SUBCASE("single non-reflective event") {
    const FiberLink link = one_event(3000.0, 2.0);
    const auto z = profile_grid(link);
    const auto num = frequency_response_numeric(z, time_domain_profile(link, c, z), c, freqs);
    CHECK(relative_l2_error(num, frequency_response_analytic(link, c, freqs)) < 1e-6);
  }
  SUBCASE("random links") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 6; ++trial) {
      const bool refl = trial % 2;
      const FiberLink link = testutil::random_link(rng, 2 + trial % 2, refl);
      const auto z = profile_grid(link);
      const auto num = frequency_response_numeric(z, time_domain_profile(link, c, z), c, freqs);
      CHECK(relative_l2_error(num, frequency_response_analytic(link, c, freqs)) < (refl ? 1e-3 : 1e-6));
    }
  }
  SUBCASE("zero profile") {
    const std::vector<double> z{0.0, 0.25, 0.5}, p{0.0, 0.0, 0.0};
    const auto num = frequency_response_numeric(z, p, c, freqs);
    for (const Complex& s : num.samples) CHECK(s == Complex(0.0, 0.0));
  }
  SUBCASE("spike sifting") {
    // a lossless reflective event contributes only its Dirac term
    FiberLink link = one_event(2000.0, 0.0, 10.0, 2500.0);
    const auto z = profile_grid(link);
    const auto num = frequency_response_numeric(z, time_domain_profile(link, c, z), c, freqs);
    const double theta = 10.0;
    for (std::size_t i = 0; i < freqs.size(); i += 97) {
      const Complex expect = theta * reflection_phasor(c.wavenumber(freqs[i]), c.alpha, 2000.0);
      CHECK(std::abs(num.samples[i] - expect) < 1e-9 * theta);
    }
  }
  SUBCASE("coarse grid is rejected") {
    const std::vector<double> z{0.0, 10.0, 20.0}, p{1.0, 1.0, 1.0};
    CHECK_THROWS_AS(frequency_response_numeric(z, p, c, freqs), InvalidInput);
  }
}
