#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace strokeseg {

using Rng = std::mt19937_64;

/// Absolute canvas coordinate in pixels.
using Point2 = Eigen::Vector2d;

/// One-hot pen state carried by every encoded point.
enum class PenState : std::uint8_t {
  Down = 0,       // line from the previous point is drawn
  StrokeEnd = 1,  // last point of a stroke, pen lifted afterwards
  SketchEnd = 2,  // stroke finished; used for padding
};

constexpr int pen_index(PenState s) { return static_cast<int>(s); }
PenState pen_from_index(int index);

/// One pen sample as displacement plus pen state: [dx dy p1 p2 p3].
struct Point5 {
  double dx = 0.0;
  double dy = 0.0;
  PenState pen = PenState::SketchEnd;

  Eigen::Matrix<double, 5, 1> vector() const;
  static constexpr Point5 padding() { return {0.0, 0.0, PenState::SketchEnd}; }

  friend bool operator==(const Point5&, const Point5&) = default;
};

using OffsetStroke = std::vector<Point5>;

struct Stroke {
  std::vector<Point2> points;
  std::optional<std::string> label;

  double arc_length() const;
};

struct Sketch {
  std::string category;
  std::vector<Stroke> strokes;

  bool labeled() const;
  std::size_t point_count() const;
};

struct BoundingBox {
  Point2 min{0.0, 0.0};
  Point2 max{0.0, 0.0};

  double width() const { return max.x() - min.x(); }
  double height() const { return max.y() - min.y(); }
  double extent() const { return std::max(width(), height()); }
  Point2 center() const { return 0.5 * (min + max); }
};

BoundingBox bounding_box(std::span<const Point2> points);
BoundingBox bounding_box(const Sketch& sketch);

/// B padded offset sequences of equal length for one stroke ordinal.
///
/// steps[t] is a 5 x B matrix whose column b is the t-th point of row b.
/// Padding entries are exactly [0 0 0 0 1] and have mask(t, b) == false.
struct StrokeBatch {
  std::vector<Eigen::MatrixXd> steps;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  std::size_t temporal_index = 0;

  Eigen::Index length() const { return static_cast<Eigen::Index>(steps.size()); }
  Eigen::Index rows() const { return mask.cols(); }
  /// Number of real (unpadded) steps in row b.
  Eigen::Index row_length(Eigen::Index b) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Closed component-label set for an annotated category; empty if unknown.
const std::vector<std::string>& category_labels(const std::string& category);
std::vector<std::string> known_categories();

/// Line-delimited simplified-drawing records: {"word": ..., "drawing": [[xs], [ys]], ...}.
std::vector<Sketch> parse_quickdraw(std::istream& in);
/// Line-delimited {"category", "strokes", "labels"} records; every stroke must be labeled.
std::vector<Sketch> parse_annotated(std::istream& in);
/// Accepts either record flavor; labels are kept (and validated) when present.
std::vector<Sketch> parse_sketches(std::istream& in);

/// Canonical line-delimited output (same schema as the annotated input).
void write_sketches(std::ostream& out, std::span<const Sketch> sketches);
std::string sketch_to_json_line(const Sketch& sketch);

Sketch normalize_sketch(const Sketch& sketch);
Stroke resample_stroke(const Stroke& stroke, double spacing);
Stroke rdp_simplify(const Stroke& stroke, double epsilon);
Sketch remove_tiny_strokes(const Sketch& sketch, double min_length);

struct PreprocessOptions {
  double spacing = 1.0;
  double epsilon = 2.0;
  double min_length = 15.0;
};

/// normalize -> resample -> simplify -> drop degenerate -> remove tiny.
Sketch preprocess_sketch(const Sketch& sketch, const PreprocessOptions& options = {});

OffsetStroke to_offsets(const Stroke& stroke, const Point2& origin = Point2::Zero());
/// Inverse of to_offsets: cumulative sum starting at origin.
std::vector<Point2> from_offsets(std::span<const Point5> offsets,
                                 const Point2& origin = Point2::Zero());

/// Group sketches in consecutive runs of batch_size; within a group,
/// batch k holds every sketch's k-th stroke (or pure padding).
std::vector<StrokeBatch> make_stroke_batches(std::span<const Sketch> sketches,
                                             std::size_t batch_size);
StrokeBatch make_batch(std::span<const OffsetStroke> rows, std::size_t temporal_index = 0);

OffsetStroke augment_scale(std::span<const Point5> points, Rng& rng, double low = 0.9,
                           double high = 1.1);

}  // namespace strokeseg
