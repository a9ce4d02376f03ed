#include <sstream>

#include "doctest.h"
#include "rdp_oracle.hpp"
#include "strokeseg/sketch.hpp"
#include "test_support.hpp"

using namespace strokeseg;
using testing::line_stroke;

namespace {

std::vector<Sketch> parse(const std::string& text, bool annotated = false) {
  std::istringstream in(text);
  return annotated ? parse_annotated(in) : parse_quickdraw(in);
}

Sketch sketch_with_strokes(std::vector<int> lengths) {
  Sketch s;
  s.category = "chair";
  double x = 0.0;
  for (int n : lengths) {
    Stroke st;
    for (int i = 0; i < n; ++i) st.points.emplace_back(x + i, 2.0 * i);
    x += 100.0;
    s.strokes.push_back(st);
  }
  return s;
}

}  // namespace

TEST_CASE("quickdraw records map to strokes") {
  auto s = parse(R"({"word":"cat","drawing":[[[0,10],[0,5]]]})");
  REQUIRE(s.size() == 1);
  CHECK(s[0].category == "cat");
  REQUIRE(s[0].strokes.size() == 1);
  CHECK(s[0].strokes[0].points[0] == Point2(0, 0));
  CHECK(s[0].strokes[0].points[1] == Point2(10, 5));

  CHECK(parse("").empty());
  CHECK(parse("\n  \n").empty());
}

TEST_CASE("malformed quickdraw lines report their line number") {
  try {
    parse("{\"word\":\"cat\",\"drawing\":[[[0,1],[0,1]]]}\n{\"word\":\"cat\",\"drawing\":[[[0,1,2],[0,1]]]}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("not json"), ParseError);
  CHECK_THROWS_AS(parse(R"({"drawing":[]})"), ParseError);
}

TEST_CASE("single-point strokes are widened to two points") {
  auto s = parse(R"({"word":"cat","drawing":[[[4],[7]]]})");
  REQUIRE(s[0].strokes[0].points.size() == 2);
  CHECK(s[0].strokes[0].points[0] == s[0].strokes[0].points[1]);
}

TEST_CASE("annotated records carry closed-set labels") {
  const std::string chair =
      R"({"category":"chair","strokes":[[[0,1],[0,1]],[[0,1],[0,1]],[[0,1],[0,1]],[[0,1],[0,1]],[[0,1],[0,1]],[[0,1],[0,1]]],)"
      R"("labels":["back","seat","leg","leg","leg","leg"]})";
  auto s = parse(chair, true);
  REQUIRE(s[0].strokes.size() == 6);
  CHECK(s[0].labeled());
  CHECK(*s[0].strokes[1].label == "seat");

  CHECK_THROWS_AS(parse(R"({"category":"chair","strokes":[[[0,1],[0,1]]],"labels":["wing"]})", true), ParseError);
  CHECK_THROWS_AS(parse(R"({"category":"chair","strokes":[],"labels":[]})", true), ParseError);
  CHECK_THROWS_AS(parse(R"({"category":"chair","strokes":[[[0,1],[0,1]]]})", true), ParseError);
  try {
    parse(R"({"category":"chair","strokes":[[[0,1],[0,1]]],"labels":["seat"]})"
          "\n"
          R"({"category":"chair","strokes":[[[0,1],[0,1]]],"labels":[""]})",
          true);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("sketch 1") != std::string::npos);
  }
}

TEST_CASE("writing and re-reading sketches round-trips") {
  Sketch s = sketch_with_strokes({3, 2});
  s.strokes[0].label = "back";
  s.strokes[1].label = "seat";
  std::ostringstream out;
  write_sketches(out, std::span<const Sketch>(&s, 1));
  std::istringstream in(out.str());
  auto back = parse_sketches(in);
  REQUIRE(back.size() == 1);
  CHECK(sketch_to_json_line(back[0]) == sketch_to_json_line(s));
}

TEST_CASE("normalization maps the larger axis onto [0, 255]") {
  Sketch s;
  s.category = "cat";
  s.strokes.push_back(line_stroke({{10, 10}, {20, 15}, {12, 20}}));
  Sketch n = normalize_sketch(s);
  BoundingBox box = bounding_box(n);
  CHECK(box.min.x() == doctest::Approx(0.0));
  CHECK(box.min.y() == doctest::Approx(0.0));
  CHECK(box.extent() == doctest::Approx(255.0));
  // Aspect ratio survives.
  CHECK(box.width() / box.height() == doctest::Approx(1.0));

  Sketch again = normalize_sketch(n);
  for (std::size_t i = 0; i < n.strokes[0].points.size(); ++i)
    CHECK((again.strokes[0].points[i] - n.strokes[0].points[i]).norm() < 1e-9);

  Sketch dot;
  dot.strokes.push_back(line_stroke({{3, 3}, {3, 3}}));
  CHECK_THROWS(normalize_sketch(dot));
}

TEST_CASE("resampling walks arc length") {
  Stroke v = resample_stroke(line_stroke({{0, 0}, {0, 4}}), 1.0);
  REQUIRE(v.points.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(v.points[i].y() == doctest::Approx(i));

  Stroke short_one = resample_stroke(line_stroke({{0, 0}, {0.5, 0}}), 1.0);
  CHECK(short_one.points.size() == 2);

  // Cumulative arc length 7 along an L: samples at 0..6 plus the kept end.
  Stroke l = resample_stroke(line_stroke({{0, 0}, {3, 0}, {3, 4}}), 1.0);
  REQUIRE(l.points.size() == 8);
  for (int k = 0; k < 7; ++k) {
    const Point2 expected = k <= 3 ? Point2(k, 0) : Point2(3, k - 3);
    CHECK((l.points[k] - expected).norm() < 1e-12);
  }
  CHECK(l.points.back() == Point2(3, 4));
  for (std::size_t i = 1; i < l.points.size(); ++i)
    CHECK((l.points[i] - l.points[i - 1]).norm() <= 1.0 + 1e-12);
}

TEST_CASE("simplification keeps endpoints and the epsilon band") {
  Stroke s = rdp_simplify(line_stroke({{0, 0}, {1, 0.1}, {2, 0}}), 2.0);
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[1] == Point2(2, 0));

  Stroke general = line_stroke({{0, 0}, {1, 3}, {4, 1}, {6, 5}, {7, 2}});
  CHECK(rdp_simplify(general, 0.0).points.size() == general.points.size());
  CHECK_THROWS(rdp_simplify(general, -1.0));
}

TEST_CASE("simplification agrees with the subsequence oracle on 5-point grid polylines") {
  std::vector<testing::P2> grid;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) grid.push_back({x, y});
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cell(0, 15);
  int checked = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    std::vector<testing::P2> pts;
    Stroke st;
    for (int i = 0; i < 5; ++i) {
      pts.push_back(grid[cell(rng)]);
      st.points.emplace_back(double(pts.back().x), double(pts.back().y));
    }
    for (double eps : {0.5, 1.0, 2.0}) {
      testing::RdpOracle oracle(pts, testing::squared_epsilon(eps));
      auto mask = oracle.unique_mask();
      REQUIRE(mask.has_value());
      CHECK(oracle.within_band(*mask));
      Stroke out = rdp_simplify(st, eps);
      std::vector<Point2> expected;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (oracle.kept(*mask, i)) expected.emplace_back(double(pts[i].x), double(pts[i].y));
      REQUIRE(out.points.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) CHECK(out.points[i] == expected[i]);
      ++checked;
    }
  }
  CHECK(checked == 12000);
}

TEST_CASE("tiny strokes are dropped in order") {
  Sketch s;
  s.strokes.push_back(line_stroke({{0, 0}, {100, 0}}));
  s.strokes.push_back(line_stroke({{0, 0}, {3, 0}}));
  s.strokes.push_back(line_stroke({{0, 0}, {0, 50}}));
  Sketch out = remove_tiny_strokes(s, 15.0);
  REQUIRE(out.strokes.size() == 2);
  CHECK(out.strokes[1].points[1] == Point2(0, 50));
  CHECK(remove_tiny_strokes(s, 0.0).strokes.size() == 3);

  Sketch tiny;
  tiny.strokes.push_back(line_stroke({{0, 0}, {1, 0}}));
  CHECK_THROWS(remove_tiny_strokes(tiny, 15.0));
}

TEST_CASE("preprocessing is deterministic") {
  Rng rng(3);
  Sketch s;
  s.category = "cat";
  for (int i = 0; i < 4; ++i) s.strokes.push_back(testing::random_stroke(rng, 12, 20.0));
  Sketch a = preprocess_sketch(s);
  Sketch b = preprocess_sketch(s);
  CHECK(sketch_to_json_line(a) == sketch_to_json_line(b));
  BoundingBox box = bounding_box(a);
  CHECK(box.extent() <= 255.0 + 1e-9);
}

TEST_CASE("offsets use the previous point and the stroke-end flag") {
  OffsetStroke o = to_offsets(line_stroke({{3, 4}, {3, 9}}));
  REQUIRE(o.size() == 2);
  CHECK(o[0] == Point5{3, 4, PenState::Down});
  CHECK(o[1] == Point5{0, 5, PenState::StrokeEnd});

  OffsetStroke rel = to_offsets(line_stroke({{3, 4}, {3, 9}}), Point2(3, 4));
  CHECK(rel[0].dx == 0.0);
  CHECK(rel[0].dy == 0.0);

  Rng rng(5);
  Stroke st;
  std::uniform_int_distribution<int> coord(-300, 300);
  for (int i = 0; i < 50; ++i) st.points.emplace_back(coord(rng), coord(rng));
  std::vector<Point2> back = from_offsets(to_offsets(st));
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == st.points[i]);
}

TEST_CASE("three sketches with 4, 2 and 1 strokes give four batches") {
  std::vector<Sketch> sketches = {sketch_with_strokes({3, 4, 2, 5}), sketch_with_strokes({2, 6}),
                                  sketch_with_strokes({4})};
  auto batches = make_stroke_batches(sketches, 3);
  REQUIRE(batches.size() == 4);
  const Eigen::Matrix<double, 5, 1> pad = Point5::padding().vector();

  // Second batch: two real rows and one pure-padding row.
  const StrokeBatch& b2 = batches[1];
  CHECK(b2.temporal_index == 1);
  CHECK(b2.rows() == 3);
  CHECK(b2.length() == 6);
  CHECK(b2.row_length(0) == 4);
  CHECK(b2.row_length(1) == 6);
  CHECK(b2.row_length(2) == 0);
  OffsetStroke first = to_offsets(sketches[0].strokes[1]);
  for (std::size_t t = 0; t < first.size(); ++t) CHECK(b2.steps[t].col(0) == first[t].vector());
  for (Eigen::Index t = 0; t < b2.length(); ++t) {
    CHECK(b2.steps[static_cast<std::size_t>(t)].col(2) == pad);
    CHECK_FALSE(b2.mask(t, 2));
  }

  // Padding <=> mask false everywhere.
  for (const auto& b : batches)
    for (Eigen::Index t = 0; t < b.length(); ++t)
      for (Eigen::Index r = 0; r < b.rows(); ++r) {
        const bool is_pad = b.steps[static_cast<std::size_t>(t)].col(r) == pad;
        if (!b.mask(t, r)) CHECK(is_pad);
      }

  CHECK(make_stroke_batches(std::vector<Sketch>{sketch_with_strokes({2, 3})}, 1).size() == 2);
  CHECK(make_stroke_batches(std::vector<Sketch>{sketch_with_strokes({2}), sketch_with_strokes({3})}, 2).size() == 1);
}

TEST_CASE("scale augmentation is bounded and reproducible") {
  OffsetStroke o = to_offsets(line_stroke({{1, 2}, {5, -3}, {8, 8}}));
  Rng a(9), b(9);
  OffsetStroke x = augment_scale(o, a);
  OffsetStroke y = augment_scale(o, b);
  CHECK(x == y);
  for (std::size_t i = 0; i < o.size(); ++i) {
    CHECK(x[i].pen == o[i].pen);
    CHECK(std::abs(x[i].dx) >= 0.9 * std::abs(o[i].dx) - 1e-12);
    CHECK(std::abs(x[i].dx) <= 1.1 * std::abs(o[i].dx) + 1e-12);
    CHECK(std::abs(x[i].dy) >= 0.9 * std::abs(o[i].dy) - 1e-12);
    CHECK(std::abs(x[i].dy) <= 1.1 * std::abs(o[i].dy) + 1e-12);
  }
}
