#pragma once

// Image-deformation-model style appearance descriptor for a stroke: four
// orientation maps (0, 45, 90, 135 degrees) and one endpoint map on a 12x12
// grid, linearized row-major and concatenated. Plus the spatial and
// symbol-context extensions used as segmentation baselines.

#include <array>
#include <span>
#include <string>

#include <Eigen/Core>

#include "strokeseg/sketch.hpp"

namespace strokeseg {

inline constexpr int kIdmGrid = 12;
inline constexpr int kIdmMaps = 5;
inline constexpr int kIdmCells = kIdmGrid * kIdmGrid;
inline constexpr int kIdmSize = kIdmMaps * kIdmCells;  // 720
inline constexpr int kSpatialSize = 6;
inline constexpr int kContextSize = 2 * kIdmSize + kSpatialSize;  // 1446

inline constexpr std::array<double, 4> kIdmAngles = {0.0, 45.0, 90.0, 135.0};

/// Map k occupies values.segment(k * 144, 144); cell (row, col) is row * 12 + col,
/// rows follow the y axis.
using IdmFeature = Eigen::Matrix<double, kIdmSize, 1>;

/// The fixed canvas strokes are drawn on after normalization.
BoundingBox default_canvas();

/// Tangent direction in degrees within [0, 180); central differences inside
/// the stroke, one-sided at the ends. NaN where the neighbours coincide.
Eigen::VectorXd tangent_angles(std::span<const Point2> points);

/// max(0, 1 - d / 45) with d the angular distance modulo 180.
double orientation_response(double angle, double reference);

/// Orientation responses are splatted bilinearly onto cell centres and each
/// cell keeps the largest weighted response; endpoints mark their own cell.
IdmFeature compute_idm(std::span<const Point2> points, const BoundingBox& canvas);

/// Cell-wise maximum over all strokes of the symbol.
IdmFeature symbol_idm(const Sketch& symbol, const BoundingBox& canvas);

/// First point, last point and centroid, each scaled to [0, 1] by the canvas.
Eigen::Matrix<double, kSpatialSize, 1> spatial_features(const Stroke& stroke, const BoundingBox& canvas);

enum class FeatureVariant { Encoder, Idm, IdmSpatial, IdmSpatialContext };

std::string variant_name(FeatureVariant v);
/// Accepts nn, idm, idm-spt, idm-spt-con.
FeatureVariant parse_variant(const std::string& name);

/// [stroke IDM; symbol IDM; spatial].
Eigen::VectorXd context_feature(const Sketch& symbol, std::size_t stroke, const BoundingBox& canvas);

/// Hand-crafted features for every stroke of a symbol, one column each.
/// Not defined for FeatureVariant::Encoder.
Eigen::MatrixXd baseline_features(const Sketch& symbol, FeatureVariant variant,
                                  const BoundingBox& canvas = default_canvas());

}  // namespace strokeseg
