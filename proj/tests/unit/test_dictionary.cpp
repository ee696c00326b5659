#include <bsslasso/dictionary.hpp>

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>

using namespace bsslasso;

TEST_CASE("position grid") {
  const PositionGrid g = PositionGrid::uniform(1005.0, 10.0);
  CHECK(g.size() == 100);
  CHECK(g.positions.front() == doctest::Approx(10.0));
  CHECK(g.positions.back() == doctest::Approx(1000.0));
  CHECK(PositionGrid::uniform(1000.0, 10.0).size() == 100);
  CHECK_THROWS_AS(PositionGrid::uniform(5.0, 10.0), InvalidInput);
}

TEST_CASE("single column, alpha = 0") {
  PhysicalConstants c = testutil::standard();
  c.alpha = 0.0;
  PositionGrid g;
  g.positions = {700.0};
  g.step = 10.0;
  const std::vector<double> f{2500.0};
  const double length = 1000.0;
  const Dictionary d = build_dictionary(g, f, c, length, true);
  REQUIRE(d.matrix.rows() == 2);
  REQUIRE(d.matrix.cols() == 2);
  const double k = 4.0 * M_PI * 2500.0 * c.group_index / c.light_speed;
  const Complex expect = (std::exp(Complex(0.0, k * 700.0)) - 1.0) / Complex(0.0, k) / length;
  CHECK(d.matrix(0, 0) == doctest::Approx(expect.real()).epsilon(1e-12));
  CHECK(d.matrix(1, 0) == doctest::Approx(expect.imag()).epsilon(1e-12));
  CHECK(d.matrix(0, 1) == doctest::Approx(std::cos(k * 700.0) / length).epsilon(1e-12));
}

TEST_CASE("block layout") {
  const PhysicalConstants c = testutil::standard();
  const PositionGrid g = PositionGrid::uniform(2000.0, 10.0);
  const auto f = frequency_grid(100.0, 100'000.0, 100.0);
  const Dictionary full = build_dictionary(g, f, c, 2000.0, true);
  CHECK(full.matrix.cols() == 400);
  CHECK(full.matrix.rows() == 2000);
  for (std::size_t j : {0u, 57u, 199u}) {
    const double norm = full.matrix.col(static_cast<Eigen::Index>(full.reflection_column(j))).norm();
    CHECK(norm == doctest::Approx(std::exp(-2.0 * c.alpha * g.positions[j]) * std::sqrt(1000.0) / 2000.0));
  }
  const Dictionary sinc = build_dictionary(g, f, c, 2000.0, false);
  CHECK(sinc.matrix.cols() == 200);
  const Dictionary icpt = build_dictionary(g, f, c, 2000.0, false, true);
  CHECK(icpt.matrix.cols() == 201);
  CHECK(icpt.matrix.col(200).isOnes());
}

TEST_CASE("observation") {
  FrequencyProfile p;
  p.frequencies = {100.0};
  p.samples = {Complex(1.0, 2.0)};
  const Eigen::VectorXd y = build_observation(p);
  REQUIRE(y.size() == 2);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 2.0);
  p.samples = {Complex(0.0, 0.0)};
  CHECK(build_observation(p).isZero());
  const FrequencyProfile back = profile_from_observation(y, p.frequencies);
  CHECK(back.samples[0] == Complex(1.0, 2.0));
}

TEST_CASE("analytic Gram matches the dense product") {
  const PhysicalConstants c = testutil::standard();
  const auto f = frequency_grid(100.0, 100'000.0, 100.0);
  for (bool refl : {true, false}) {
    const PositionGrid g = PositionGrid::uniform(3000.0, 10.0);
    const Dictionary d = build_dictionary(g, f, c, 3000.0, refl);
    const Eigen::MatrixXd dense = d.matrix.transpose() * d.matrix;
    const Eigen::MatrixXd fast = penalized_gram(d);
    CHECK((fast - dense).cwiseAbs().maxCoeff() <= 1e-10 * dense.cwiseAbs().maxCoeff());
  }
}

namespace {

struct OnGrid {
  Dictionary dict;
  Eigen::VectorXd y;
  std::size_t index;
};

OnGrid on_grid_event(double position, bool reflective) {
  const PhysicalConstants c = testutil::standard();
  const double length = 2500.0;
  FiberLink link;
  link.length_m = length;
  link.events.push_back(Event{position, 2.0, reflective ? std::optional<double>(10.0) : std::nullopt});
  const auto f = frequency_grid(100.0, 100'000.0, 100.0);
  OnGrid out{build_dictionary(PositionGrid::uniform(length, 10.0), f, c, length, true),
             build_observation(frequency_response_analytic(link, c, f)), 0};
  out.index = static_cast<std::size_t>(std::lround(position / 10.0)) - 1;
  return out;
}

}  // namespace

TEST_CASE("on-grid event lies in the span of its atoms") {
  const OnGrid s = on_grid_event(1230.0, false);
  const Eigen::VectorXd col = s.dict.matrix.col(static_cast<Eigen::Index>(s.index));
  const double coef = col.dot(s.y) / col.squaredNorm();
  CHECK((s.y - coef * col).norm() <= 1e-9 * s.y.norm());
  CHECK(coef > 0.0);

  const OnGrid r = on_grid_event(1230.0, true);
  Eigen::MatrixXd pair(r.y.size(), 2);
  pair.col(0) = r.dict.matrix.col(static_cast<Eigen::Index>(r.dict.fault_column(r.index)));
  pair.col(1) = r.dict.matrix.col(static_cast<Eigen::Index>(r.dict.reflection_column(r.index)));
  const Eigen::VectorXd b = pair.colPivHouseholderQr().solve(r.y);
  CHECK((r.y - pair * b).norm() <= 1e-9 * r.y.norm());
}

TEST_CASE("property: true fault column has the largest normalized correlation") {
  // Step atoms grow with X, so raw correlations favour far columns; the
  // argmax property holds once each column is scaled to unit norm.
  for (double pos : {400.0, 1230.0, 2500.0}) {
    const OnGrid s = on_grid_event(pos, false);
    const Eigen::MatrixXd fault = s.dict.matrix.leftCols(static_cast<Eigen::Index>(s.dict.q()));
    const Eigen::VectorXd corr =
        (fault.transpose() * s.y).cwiseAbs().cwiseQuotient(fault.colwise().norm().transpose());
    Eigen::Index arg = 0;
    corr.maxCoeff(&arg);
    CHECK(static_cast<std::size_t>(arg) == s.index);
  }
}

TEST_CASE("property: adjacent column correlation decays with grid distance") {
  const PhysicalConstants c = testutil::standard();
  const auto f = frequency_grid(100.0, 100'000.0, 100.0);
  const Dictionary d = build_dictionary(PositionGrid::uniform(4000.0, 10.0), f, c, 4000.0, false);
  const Eigen::MatrixXd gram = penalized_gram(d);
  for (Eigen::Index j : {50, 150, 300}) {
    double prev = 1.0;
    for (Eigen::Index s = 1; s <= 5; ++s) {
      const double corr = gram(j, j + s) / std::sqrt(gram(j, j) * gram(j + s, j + s));
      CHECK(corr < prev);
      CHECK(corr > 0.5);
      prev = corr;
    }
  }
}
