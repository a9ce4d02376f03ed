#include "strokeseg/idm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace strokeseg {

BoundingBox default_canvas() { return {Point2(0.0, 0.0), Point2(255.0, 255.0)}; }

namespace {

void check_canvas(const BoundingBox& canvas) {
  if (!(canvas.width() > 0.0 && canvas.height() > 0.0)) throw std::invalid_argument("canvas must have positive area");
}

/// Continuous grid coordinate where cell j spans [j, j + 1).
Eigen::Vector2d to_grid(const Point2& p, const BoundingBox& canvas) {
  return {(p.x() - canvas.min.x()) / canvas.width() * kIdmGrid, (p.y() - canvas.min.y()) / canvas.height() * kIdmGrid};
}

int cell_of(double u) { return std::clamp(static_cast<int>(std::floor(u)), 0, kIdmGrid - 1); }

void splat_max(Eigen::Ref<Eigen::VectorXd> map, const Eigen::Vector2d& g, double value) {
  // Bilinear weights to the four surrounding cell centres (j + 0.5); the outer
  // half-cell folds onto the border.
  const double fx = std::clamp(g.x() - 0.5, 0.0, kIdmGrid - 1.0);
  const double fy = std::clamp(g.y() - 0.5, 0.0, kIdmGrid - 1.0);
  const int x0 = std::min(static_cast<int>(fx), kIdmGrid - 2);
  const int y0 = std::min(static_cast<int>(fy), kIdmGrid - 2);
  const double tx = fx - x0, ty = fy - y0;
  const double w[2][2] = {{(1 - tx) * (1 - ty), tx * (1 - ty)}, {(1 - tx) * ty, tx * ty}};
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      double& cell = map((y0 + dy) * kIdmGrid + x0 + dx);
      cell = std::max(cell, w[dy][dx] * value);
    }
}

void accumulate(IdmFeature& f, std::span<const Point2> points, const BoundingBox& canvas) {
  if (points.size() < 2) throw std::invalid_argument("IDM needs at least two points");
  const Eigen::VectorXd angles = tangent_angles(points);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double a = angles(static_cast<Eigen::Index>(i));
    if (std::isnan(a)) continue;
    const Eigen::Vector2d g = to_grid(points[i], canvas);
    for (int k = 0; k < 4; ++k) {
      const double r = orientation_response(a, kIdmAngles[static_cast<std::size_t>(k)]);
      if (r > 0.0) splat_max(f.segment(k * kIdmCells, kIdmCells), g, r);
    }
  }
  for (const Point2& p : {points.front(), points.back()}) {
    const Eigen::Vector2d g = to_grid(p, canvas);
    f(4 * kIdmCells + cell_of(g.y()) * kIdmGrid + cell_of(g.x())) = 1.0;
  }
}

}  // namespace

Eigen::VectorXd tangent_angles(std::span<const Point2> points) {
  const std::size_t n = points.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = points[i == 0 ? 0 : i - 1];
    const Point2& b = points[i + 1 == n ? i : i + 1];
    const Point2 d = b - a;
    if (d.isZero(0.0)) {
      out(static_cast<Eigen::Index>(i)) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double deg = std::atan2(d.y(), d.x()) * 180.0 / std::numbers::pi;
    deg = std::fmod(deg, 180.0);
    if (deg < 0.0) deg += 180.0;
    if (deg >= 180.0) deg -= 180.0;
    out(static_cast<Eigen::Index>(i)) = deg;
  }
  return out;
}

double orientation_response(double angle, double reference) {
  double d = std::fmod(std::abs(angle - reference), 180.0);
  d = std::min(d, 180.0 - d);
  return std::max(0.0, 1.0 - d / 45.0);
}

IdmFeature compute_idm(std::span<const Point2> points, const BoundingBox& canvas) {
  check_canvas(canvas);
  IdmFeature f = IdmFeature::Zero();
  accumulate(f, points, canvas);
  return f;
}

IdmFeature symbol_idm(const Sketch& symbol, const BoundingBox& canvas) {
  check_canvas(canvas);
  IdmFeature f = IdmFeature::Zero();
  for (const auto& s : symbol.strokes) accumulate(f, s.points, canvas);
  return f;
}

Eigen::Matrix<double, kSpatialSize, 1> spatial_features(const Stroke& stroke, const BoundingBox& canvas) {
  check_canvas(canvas);
  if (stroke.points.empty()) throw std::invalid_argument("stroke without points");
  Point2 centroid = Point2::Zero();
  for (const auto& p : stroke.points) centroid += p;
  centroid /= static_cast<double>(stroke.points.size());
  const Eigen::Array2d size(canvas.width(), canvas.height());
  Eigen::Matrix<double, kSpatialSize, 1> out;
  out << ((stroke.points.front() - canvas.min).array() / size).matrix(),
      ((stroke.points.back() - canvas.min).array() / size).matrix(), ((centroid - canvas.min).array() / size).matrix();
  return out;
}

std::string variant_name(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::Encoder: return "nn";
    case FeatureVariant::Idm: return "idm";
    case FeatureVariant::IdmSpatial: return "idm-spt";
    case FeatureVariant::IdmSpatialContext: return "idm-spt-con";
  }
  throw std::invalid_argument("unknown feature variant");
}

FeatureVariant parse_variant(const std::string& name) {
  for (auto v : {FeatureVariant::Encoder, FeatureVariant::Idm, FeatureVariant::IdmSpatial,
                 FeatureVariant::IdmSpatialContext})
    if (variant_name(v) == name) return v;
  throw std::invalid_argument("unknown feature variant '" + name + "' (expected nn, idm, idm-spt or idm-spt-con)");
}

Eigen::VectorXd context_feature(const Sketch& symbol, std::size_t stroke, const BoundingBox& canvas) {
  if (stroke >= symbol.strokes.size()) throw std::out_of_range("stroke index out of range");
  Eigen::VectorXd out(kContextSize);
  out << compute_idm(symbol.strokes[stroke].points, canvas), symbol_idm(symbol, canvas),
      spatial_features(symbol.strokes[stroke], canvas);
  return out;
}

Eigen::MatrixXd baseline_features(const Sketch& symbol, FeatureVariant variant, const BoundingBox& canvas) {
  const auto n = static_cast<Eigen::Index>(symbol.strokes.size());
  switch (variant) {
    case FeatureVariant::Idm: {
      Eigen::MatrixXd out(kIdmSize, n);
      for (Eigen::Index i = 0; i < n; ++i) out.col(i) = compute_idm(symbol.strokes[static_cast<std::size_t>(i)].points, canvas);
      return out;
    }
    case FeatureVariant::IdmSpatial: {
      Eigen::MatrixXd out(kIdmSize + kSpatialSize, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = symbol.strokes[static_cast<std::size_t>(i)];
        out.col(i) << compute_idm(s.points, canvas), spatial_features(s, canvas);
      }
      return out;
    }
    case FeatureVariant::IdmSpatialContext: {
      Eigen::MatrixXd out(kContextSize, n);
      const IdmFeature shared = symbol_idm(symbol, canvas);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = symbol.strokes[static_cast<std::size_t>(i)];
        out.col(i) << compute_idm(s.points, canvas), shared, spatial_features(s, canvas);
      }
      return out;
    }
    case FeatureVariant::Encoder: break;
  }
  throw std::invalid_argument("encoder features need a trained model");
}

}  // namespace strokeseg
