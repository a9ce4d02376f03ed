#include <cmath>

#include "doctest.h"
#include "strokeseg/idm.hpp"
#include "test_support.hpp"

using namespace strokeseg;

namespace {

const BoundingBox kCanvas = default_canvas();
constexpr double kCell = 255.0 / 12.0;

double centre(int j) { return (j + 0.5) * kCell; }

Eigen::Map<const Eigen::Matrix<double, 12, 12, Eigen::RowMajor>> map_of(const IdmFeature& f, int k) {
  return Eigen::Map<const Eigen::Matrix<double, 12, 12, Eigen::RowMajor>>(f.data() + k * kIdmCells);
}

/// Smooth curve across the canvas sampled at the given spacing.
Stroke wavy(double spacing) {
  Stroke s;
  for (double t = 0; t <= 1.0 + 1e-12; t += 0.001) s.points.emplace_back(20 + 210 * t, 120 + 60 * std::sin(5 * t));
  return resample_stroke(s, spacing);
}

}  // namespace

TEST_CASE("orientation response") {
  CHECK(orientation_response(0.0, 0.0) == 1.0);
  CHECK(orientation_response(22.5, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(orientation_response(22.5, 45.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(orientation_response(90.0, 0.0) == 0.0);
  CHECK(orientation_response(45.0, 0.0) == 0.0);
  CHECK(orientation_response(179.0, 0.0) == doctest::Approx(1.0 - 1.0 / 45.0));
  CHECK(orientation_response(170.0, 135.0) == doctest::Approx(1.0 - 35.0 / 45.0));
}

TEST_CASE("tangent angles") {
  auto h = testing::line_stroke({{0, 0}, {1, 0}, {2, 0}});
  auto a = tangent_angles(h.points);
  CHECK(a(0) == 0.0);
  CHECK(a(1) == 0.0);
  auto r = testing::line_stroke({{2, 0}, {1, 0}, {0, 0}});
  CHECK(tangent_angles(r.points).maxCoeff() == doctest::Approx(0.0));
  auto v = testing::line_stroke({{0, 0}, {0, 5}});
  CHECK(tangent_angles(v.points)(0) == doctest::Approx(90.0));
  auto d = testing::line_stroke({{0, 0}, {3, 3}});
  CHECK(tangent_angles(d.points)(1) == doctest::Approx(45.0));
  auto same = testing::line_stroke({{1, 1}, {1, 1}});
  CHECK(std::isnan(tangent_angles(same.points)(0)));
}

TEST_CASE("horizontal segment through a row of cell centres") {
  std::vector<Point2> pts;
  for (int j = 2; j <= 9; ++j) pts.emplace_back(centre(j), centre(5));
  IdmFeature f = compute_idm(pts, kCanvas);
  for (int j = 2; j <= 9; ++j) CHECK(map_of(f, 0)(5, j) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(map_of(f, 0)(4, 5) == 0.0);
  CHECK(map_of(f, 1).isZero(0.0));
  CHECK(map_of(f, 2).isZero(0.0));
  CHECK(map_of(f, 3).isZero(0.0));
  CHECK(map_of(f, 4).sum() == 2.0);
  CHECK(map_of(f, 4)(5, 2) == 1.0);
  CHECK(map_of(f, 4)(5, 9) == 1.0);
}

TEST_CASE("a 22.5 degree tangent splits between the 0 and 45 degree maps") {
  const double t = std::tan(22.5 * std::numbers::pi / 180.0);
  const Point2 c(centre(6), centre(6));
  std::vector<Point2> pts = {c - Point2(10, 10 * t), c, c + Point2(10, 10 * t)};
  IdmFeature f = compute_idm(pts, kCanvas);
  CHECK(map_of(f, 0)(6, 6) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(map_of(f, 1)(6, 6) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(map_of(f, 2).isZero(0.0));
  CHECK(map_of(f, 3).isZero(0.0));
}

TEST_CASE("bilinear splat weights") {
  // A single vertical tangent a quarter cell right of a centre: 3/4 to its
  // own cell and 1/4 to the right neighbour.
  const Point2 p(centre(3) + 0.25 * kCell, centre(4));
  std::vector<Point2> pts = {p - Point2(0, 1e-3), p, p + Point2(0, 1e-3)};
  IdmFeature f = compute_idm(pts, kCanvas);
  CHECK(map_of(f, 2)(4, 3) == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(map_of(f, 2)(4, 4) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(map_of(f, 2).row(4).sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("near the border the weight folds onto the edge cell") {
  std::vector<Point2> pts = {{0.0, 1.0}, {2.0, 1.0}};
  IdmFeature f = compute_idm(pts, kCanvas);
  CHECK(map_of(f, 0)(0, 0) == 1.0);
}

TEST_CASE("IDM properties") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Stroke s = testing::random_stroke(rng, 2 + trial % 20, 15.0);
    for (auto& p : s.points) p = p.cwiseMax(0.0).cwiseMin(255.0);
    IdmFeature f = compute_idm(s.points, kCanvas);
    CHECK(f.minCoeff() >= 0.0);
    CHECK(f.maxCoeff() <= 1.0);
    std::vector<Point2> rev(s.points.rbegin(), s.points.rend());
    IdmFeature g = compute_idm(rev, kCanvas);
    CHECK((f - g).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("doubling the sampling density barely moves any cell") {
  IdmFeature coarse = compute_idm(wavy(1.0).points, kCanvas);
  IdmFeature fine = compute_idm(wavy(0.5).points, kCanvas);
  CHECK((coarse - fine).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("IDM input errors") {
  std::vector<Point2> one = {{1, 1}};
  CHECK_THROWS(compute_idm(one, kCanvas));
  std::vector<Point2> two = {{1, 1}, {2, 2}};
  CHECK_THROWS(compute_idm(two, BoundingBox{}));
}

TEST_CASE("spatial features") {
  auto s = testing::line_stroke({{0, 0}, {255, 255}});
  auto f = spatial_features(s, kCanvas);
  Eigen::Matrix<double, 6, 1> expected;
  expected << 0, 0, 1, 1, 0.5, 0.5;
  CHECK(f == expected);

  auto moved = s;
  for (auto& p : moved.points) p += Point2(3, 4);
  CHECK(((spatial_features(moved, kCanvas) - f).array() != 0.0).all());

  auto closed = testing::line_stroke({{10, 20}, {50, 80}, {90, 10}, {10, 20}});
  auto c = spatial_features(closed, kCanvas);
  CHECK(c(0) == c(2));
  CHECK(c(1) == c(3));
}

TEST_CASE("context feature") {
  Sketch one;
  one.strokes = {testing::line_stroke({{10, 10}, {100, 120}, {200, 40}})};
  Eigen::VectorXd f = context_feature(one, 0, kCanvas);
  REQUIRE(f.size() == kContextSize);
  CHECK(f.head(kIdmSize) == f.segment(kIdmSize, kIdmSize));

  Rng rng(2);
  Sketch many;
  for (int i = 0; i < 4; ++i) many.strokes.push_back(testing::random_stroke(rng, 6, 20.0));
  Eigen::MatrixXd all = baseline_features(many, FeatureVariant::IdmSpatialContext);
  REQUIRE(all.rows() == 1446);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(all.col(i) == context_feature(many, static_cast<std::size_t>(i), kCanvas));
    CHECK(all.col(i).segment(kIdmSize, kIdmSize) == all.col(0).segment(kIdmSize, kIdmSize));
  }
  // The symbol block covers every stroke block.
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK((all.col(i).segment(kIdmSize, kIdmSize).array() >= all.col(i).head(kIdmSize).array()).all());
  CHECK_THROWS(context_feature(many, 4, kCanvas));

  CHECK(baseline_features(many, FeatureVariant::Idm).rows() == 720);
  CHECK(baseline_features(many, FeatureVariant::IdmSpatial).rows() == 726);
  CHECK_THROWS(baseline_features(many, FeatureVariant::Encoder));
}

TEST_CASE("variant names") {
  for (auto v : {FeatureVariant::Encoder, FeatureVariant::Idm, FeatureVariant::IdmSpatial,
                 FeatureVariant::IdmSpatialContext})
    CHECK(parse_variant(variant_name(v)) == v);
  CHECK(variant_name(FeatureVariant::IdmSpatialContext) == "idm-spt-con");
  CHECK_THROWS(parse_variant("hog"));
}
