#include <regex>
#include <set>

#include "doctest.h"
#include "strokeseg/render.hpp"
#include "strokeseg/synthetic.hpp"
#include "test_support.hpp"

using namespace strokeseg;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> path_data(const std::string& svg) {
  std::vector<std::string> out;
  std::regex d(" d=\"([^\"]*)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), d); it != std::sregex_iterator(); ++it)
    out.push_back((*it)[1]);
  return out;
}

}  // namespace

TEST_CASE("unlabeled sketches render in one colour without a legend") {
  Sketch s;
  s.strokes = {testing::line_stroke({{0, 0}, {10, 10}}), testing::line_stroke({{5, 0}, {5, 20}, {9, 3}})};
  const std::string svg = render_svg(s);
  CHECK(count(svg, "<path") == 2);
  CHECK(count(svg, "stroke=\"#000000\"") == 2);
  CHECK(count(svg, "<text") == 0);
}

TEST_CASE("labelled chair gets a legend entry per class") {
  Rng rng(1);
  Sketch chair = synth_chair(rng);
  const std::string svg = render_svg(chair);
  CHECK(count(svg, "<text") == 3);
  CHECK(count(svg, "<path") == chair.strokes.size());
  CHECK(svg == render_svg(chair));

  const std::regex grammar(R"(M-?\d+\.\d{2} -?\d+\.\d{2}( L-?\d+\.\d{2} -?\d+\.\d{2})+)");
  for (const auto& d : path_data(svg)) CHECK(std::regex_match(d, grammar));

  chair.strokes[0].label = "armrest";
  CHECK_THROWS(render_svg(chair));
}

TEST_CASE("grid layout") {
  Rng rng(2);
  Sketch a = synth_flower(rng);
  std::vector<std::string> titles = {"input", "0.01", "0.5", "1.0"};
  const std::string svg = render_grid({{a, a, a, a}}, {}, titles);
  CHECK(count(svg, "<g>") == 4);
  CHECK(svg.find(">0.01<") != std::string::npos);
}

TEST_CASE("synthetic sketches") {
  for (const auto& cat : synthetic_categories()) {
    Rng rng(3), same(3);
    auto sketches = synth_sketches(cat, 30, rng);
    auto again = synth_sketches(cat, 30, same);
    REQUIRE(sketches.size() == 30);
    const auto& allowed = category_labels(cat);
    std::set<std::string> used;
    for (std::size_t i = 0; i < sketches.size(); ++i) {
      const auto& s = sketches[i];
      CHECK(s.category == cat);
      CHECK(s.labeled());
      CHECK(sketch_to_json_line(s) == sketch_to_json_line(again[i]));
      for (const auto& st : s.strokes) {
        CHECK(std::find(allowed.begin(), allowed.end(), *st.label) != allowed.end());
        used.insert(*st.label);
      }
      Sketch p = preprocess_sketch(s);
      CHECK(!p.strokes.empty());
      for (const auto& st : p.strokes) CHECK(st.points.size() >= 2);
    }
    CHECK(used.size() == allowed.size());
  }
  Rng rng(4);
  CHECK_THROWS(synth_sketches("cat", 1, rng));
}
