#include "strokeseg/sketch.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace strokeseg {

using nlohmann::json;

PenState pen_from_index(int index) {
  if (index < 0 || index > 2) throw std::out_of_range("pen state index out of range");
  return static_cast<PenState>(index);
}

Eigen::Matrix<double, 5, 1> Point5::vector() const {
  Eigen::Matrix<double, 5, 1> v = Eigen::Matrix<double, 5, 1>::Zero();
  v(0) = dx;
  v(1) = dy;
  v(2 + pen_index(pen)) = 1.0;
  return v;
}

double Stroke::arc_length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

bool Sketch::labeled() const {
  return !strokes.empty() &&
         std::all_of(strokes.begin(), strokes.end(), [](const Stroke& s) { return s.label.has_value(); });
}

std::size_t Sketch::point_count() const {
  std::size_t n = 0;
  for (const auto& s : strokes) n += s.points.size();
  return n;
}

BoundingBox bounding_box(std::span<const Point2> points) {
  if (points.empty()) throw std::invalid_argument("bounding box of an empty point set");
  BoundingBox box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

BoundingBox bounding_box(const Sketch& sketch) {
  std::vector<Point2> all;
  all.reserve(sketch.point_count());
  for (const auto& s : sketch.strokes) all.insert(all.end(), s.points.begin(), s.points.end());
  return bounding_box(all);
}

Eigen::Index StrokeBatch::row_length(Eigen::Index b) const {
  return mask.col(b).count();
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

// ---------------------------------------------------------------------------
// Categories

namespace {

const std::map<std::string, std::vector<std::string>>& label_table() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"airplane", {"body", "tail", "window", "wing"}},
      {"cat", {"body", "ear", "eye", "head", "leg", "mouth", "nose", "tail", "whisker"}},
      {"chair", {"back", "leg", "seat"}},
      {"firetruck", {"body", "cab", "ladder", "light", "water hose", "window", "wheel"}},
      {"flower", {"core", "leaves", "petals", "stem"}},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& category_labels(const std::string& category) {
  static const std::vector<std::string> empty;
  auto it = label_table().find(category);
  return it == label_table().end() ? empty : it->second;
}

std::vector<std::string> known_categories() {
  std::vector<std::string> out;
  for (const auto& [name, labels] : label_table()) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

Stroke parse_stroke(const json& pair, std::size_t line) {
  if (!pair.is_array() || pair.size() < 2 || !pair[0].is_array() || !pair[1].is_array())
    throw ParseError(line, "stroke must be a pair of coordinate arrays");
  const auto& xs = pair[0];
  const auto& ys = pair[1];
  if (xs.size() != ys.size())
    throw ParseError(line, "x and y coordinate arrays differ in length");
  if (xs.empty()) throw ParseError(line, "stroke without points");
  Stroke stroke;
  stroke.points.reserve(std::max<std::size_t>(xs.size(), 2));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs[i].is_number() || !ys[i].is_number())
      throw ParseError(line, "non-numeric coordinate");
    Point2 p(xs[i].get<double>(), ys[i].get<double>());
    if (!p.allFinite()) throw ParseError(line, "non-finite coordinate");
    stroke.points.push_back(p);
  }
  // A lone dot becomes a zero-length segment so the two-point invariant holds.
  if (stroke.points.size() == 1) stroke.points.push_back(stroke.points.front());
  return stroke;
}

enum class LabelPolicy { Ignore, Require, Optional };

Sketch parse_record(const std::string& text, std::size_t line, std::size_t index,
                    LabelPolicy policy) {
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed JSON: ") + e.what());
  }
  if (!record.is_object()) throw ParseError(line, "record is not an object");

  Sketch sketch;
  if (record.contains("category") && record["category"].is_string())
    sketch.category = record["category"].get<std::string>();
  else if (record.contains("word") && record["word"].is_string())
    sketch.category = record["word"].get<std::string>();
  else
    throw ParseError(line, "record has no category word");

  const json* strokes = nullptr;
  if (record.contains("strokes")) strokes = &record["strokes"];
  else if (record.contains("drawing")) strokes = &record["drawing"];
  if (strokes == nullptr || !strokes->is_array()) throw ParseError(line, "record has no stroke list");
  for (const auto& pair : *strokes) sketch.strokes.push_back(parse_stroke(pair, line));

  const bool has_labels = record.contains("labels");
  if (policy == LabelPolicy::Require || (policy == LabelPolicy::Optional && has_labels)) {
    const std::string where = "sketch " + std::to_string(index);
    if (sketch.strokes.empty()) throw ParseError(line, where + " has no strokes");
    if (!has_labels || !record["labels"].is_array())
      throw ParseError(line, where + " is missing its label list");
    const auto& labels = record["labels"];
    if (labels.size() != sketch.strokes.size())
      throw ParseError(line, where + " has " + std::to_string(labels.size()) + " labels for " +
                                 std::to_string(sketch.strokes.size()) + " strokes");
    const auto& allowed = category_labels(sketch.category);
    if (allowed.empty())
      throw ParseError(line, where + " has unknown annotated category '" + sketch.category + "'");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!labels[i].is_string() || labels[i].get<std::string>().empty())
        throw ParseError(line, where + " stroke " + std::to_string(i) + " is missing its label");
      auto label = labels[i].get<std::string>();
      if (std::find(allowed.begin(), allowed.end(), label) == allowed.end())
        throw ParseError(line, where + " label '" + label + "' is not a " + sketch.category +
                                   " component");
      sketch.strokes[i].label = std::move(label);
    }
  }
  return sketch;
}

std::vector<Sketch> parse_lines(std::istream& in, LabelPolicy policy) {
  std::vector<Sketch> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    out.push_back(parse_record(text, line, out.size(), policy));
  }
  return out;
}

}  // namespace

std::vector<Sketch> parse_quickdraw(std::istream& in) { return parse_lines(in, LabelPolicy::Ignore); }
std::vector<Sketch> parse_annotated(std::istream& in) { return parse_lines(in, LabelPolicy::Require); }
std::vector<Sketch> parse_sketches(std::istream& in) { return parse_lines(in, LabelPolicy::Optional); }

std::string sketch_to_json_line(const Sketch& sketch) {
  json record;
  record["category"] = sketch.category;
  json strokes = json::array();
  for (const auto& s : sketch.strokes) {
    json xs = json::array();
    json ys = json::array();
    for (const auto& p : s.points) {
      xs.push_back(p.x());
      ys.push_back(p.y());
    }
    strokes.push_back(json::array({xs, ys}));
  }
  record["strokes"] = std::move(strokes);
  if (sketch.labeled()) {
    json labels = json::array();
    for (const auto& s : sketch.strokes) labels.push_back(*s.label);
    record["labels"] = std::move(labels);
  }
  return record.dump();
}

void write_sketches(std::ostream& out, std::span<const Sketch> sketches) {
  for (const auto& s : sketches) out << sketch_to_json_line(s) << '\n';
}

// ---------------------------------------------------------------------------
// Geometry

Sketch normalize_sketch(const Sketch& sketch) {
  if (sketch.point_count() == 0) throw std::invalid_argument("cannot normalize a sketch without points");
  const BoundingBox box = bounding_box(sketch);
  const double extent = box.extent();
  if (!(extent > 0.0)) throw std::invalid_argument("degenerate sketch: all points coincide");
  const double scale = 255.0 / extent;
  Sketch out = sketch;
  for (auto& s : out.strokes)
    for (auto& p : s.points) p = (p - box.min) * scale;
  return out;
}

Stroke resample_stroke(const Stroke& stroke, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("resample spacing must be positive");
  const auto& pts = stroke.points;
  if (pts.size() < 2) throw std::invalid_argument("stroke needs at least two points");

  std::vector<double> cumulative(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    cumulative[i] = cumulative[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = cumulative.back();
  const double tolerance = 1e-9 * std::max(1.0, total);

  Stroke out;
  out.label = stroke.label;
  out.points.push_back(pts.front());
  std::size_t segment = 1;
  for (long k = 1;; ++k) {
    const double s = static_cast<double>(k) * spacing;
    if (s >= total - tolerance) break;
    while (cumulative[segment] < s) ++segment;
    const double length = cumulative[segment] - cumulative[segment - 1];
    const double t = length > 0.0 ? (s - cumulative[segment - 1]) / length : 0.0;
    out.points.push_back(pts[segment - 1] + t * (pts[segment] - pts[segment - 1]));
  }
  out.points.push_back(pts.back());
  return out;
}

namespace {

constexpr double kRdpTolerance = 1e-12;

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

Stroke rdp_simplify(const Stroke& stroke, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be non-negative");
  const auto& pts = stroke.points;
  if (pts.size() < 3) return stroke;

  std::vector<char> keep(pts.size(), 0);
  keep.front() = keep.back() = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, pts.size() - 1}};
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    double farthest = -1.0;
    std::size_t index = first;
    // Distances equal up to rounding count as ties, and ties go to the first point.
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = segment_distance(pts[i], pts[first], pts[last]);
      if (d > farthest + kRdpTolerance * std::max(1.0, farthest)) {
        farthest = d;
        index = i;
      }
    }
    if (index != first && farthest > epsilon + kRdpTolerance * std::max(1.0, epsilon)) {
      keep[index] = 1;
      stack.emplace_back(index, last);
      stack.emplace_back(first, index);
    }
  }

  Stroke out;
  out.label = stroke.label;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (keep[i]) out.points.push_back(pts[i]);
  return out;
}

Sketch remove_tiny_strokes(const Sketch& sketch, double min_length) {
  if (min_length < 0.0) throw std::invalid_argument("min_length must be non-negative");
  Sketch out;
  out.category = sketch.category;
  for (const auto& s : sketch.strokes)
    if (s.arc_length() >= min_length) out.strokes.push_back(s);
  if (out.strokes.empty()) throw std::invalid_argument("every stroke is shorter than the minimum length");
  return out;
}

Sketch preprocess_sketch(const Sketch& sketch, const PreprocessOptions& options) {
  Sketch work = normalize_sketch(sketch);
  Sketch simplified;
  simplified.category = work.category;
  for (const auto& s : work.strokes) {
    Stroke r = rdp_simplify(resample_stroke(s, options.spacing), options.epsilon);
    if (r.points.size() >= 2) simplified.strokes.push_back(std::move(r));
  }
  return remove_tiny_strokes(simplified, options.min_length);
}

// ---------------------------------------------------------------------------
// Encoding and batching

OffsetStroke to_offsets(const Stroke& stroke, const Point2& origin) {
  OffsetStroke out;
  out.reserve(stroke.points.size());
  Point2 previous = origin;
  for (std::size_t i = 0; i < stroke.points.size(); ++i) {
    const Point2& p = stroke.points[i];
    const bool last = i + 1 == stroke.points.size();
    out.push_back({p.x() - previous.x(), p.y() - previous.y(),
                   last ? PenState::StrokeEnd : PenState::Down});
    previous = p;
  }
  return out;
}

std::vector<Point2> from_offsets(std::span<const Point5> offsets, const Point2& origin) {
  std::vector<Point2> out;
  out.reserve(offsets.size());
  Point2 cursor = origin;
  for (const auto& o : offsets) {
    cursor += Point2(o.dx, o.dy);
    out.push_back(cursor);
  }
  return out;
}

StrokeBatch make_batch(std::span<const OffsetStroke> rows, std::size_t temporal_index) {
  std::size_t length = 1;
  for (const auto& r : rows) length = std::max(length, r.size());
  const auto B = static_cast<Eigen::Index>(rows.size());

  StrokeBatch batch;
  batch.temporal_index = temporal_index;
  batch.mask.setConstant(static_cast<Eigen::Index>(length), B, false);
  const Eigen::Matrix<double, 5, 1> pad = Point5::padding().vector();
  batch.steps.assign(length, pad.replicate(1, B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& row = rows[static_cast<std::size_t>(b)];
    for (std::size_t t = 0; t < row.size(); ++t) {
      batch.steps[t].col(b) = row[t].vector();
      batch.mask(static_cast<Eigen::Index>(t), b) = true;
    }
  }
  return batch;
}

std::vector<StrokeBatch> make_stroke_batches(std::span<const Sketch> sketches,
                                             std::size_t batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  std::vector<StrokeBatch> out;
  for (std::size_t begin = 0; begin < sketches.size(); begin += batch_size) {
    const auto group = sketches.subspan(begin, std::min(batch_size, sketches.size() - begin));
    std::size_t ordinals = 0;
    for (const auto& s : group) ordinals = std::max(ordinals, s.strokes.size());
    for (std::size_t k = 0; k < ordinals; ++k) {
      std::vector<OffsetStroke> rows;
      rows.reserve(group.size());
      for (const auto& s : group)
        rows.push_back(k < s.strokes.size() ? to_offsets(s.strokes[k]) : OffsetStroke{});
      out.push_back(make_batch(rows, k));
    }
  }
  return out;
}

OffsetStroke augment_scale(std::span<const Point5> points, Rng& rng, double low, double high) {
  std::uniform_real_distribution<double> factor(low, high);
  const double sx = factor(rng);
  const double sy = factor(rng);
  OffsetStroke out(points.begin(), points.end());
  for (auto& p : out) {
    p.dx *= sx;
    p.dy *= sy;
  }
  return out;
}

}  // namespace strokeseg
