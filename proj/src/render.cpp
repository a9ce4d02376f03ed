#include "strokeseg/render.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace strokeseg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string colour_of(const Sketch& sketch, const Stroke& stroke) {
  if (!stroke.label) return "#000000";
  const auto& labels = category_labels(sketch.category);
  auto it = std::find(labels.begin(), labels.end(), *stroke.label);
  if (it == labels.end())
    throw std::invalid_argument("label '" + *stroke.label + "' is not a component of category '" + sketch.category + "'");
  return kPalette[static_cast<std::size_t>(it - labels.begin()) % kPalette.size()];
}

/// Paths for one sketch fitted into the square at (x, y) with side `size`.
void draw_panel(std::ostream& out, const Sketch& sketch, double x, double y, double size, const RenderOptions& o) {
  if (sketch.point_count() == 0) return;
  const BoundingBox box = bounding_box(sketch);
  const double extent = std::max(box.extent(), 1e-9);
  const double scale = size / extent;
  const Point2 offset(x + 0.5 * (size - box.width() * scale), y + 0.5 * (size - box.height() * scale));
  for (const auto& s : sketch.strokes) {
    if (s.points.empty()) continue;
    out << "<path fill=\"none\" stroke=\"" << colour_of(sketch, s) << "\" stroke-width=\"" << num(o.stroke_width)
        << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\" d=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const Point2 p = offset + (s.points[i] - box.min) * scale;
      out << (i == 0 ? "M" : " L") << num(p.x()) << ' ' << num(p.y());
    }
    if (s.points.size() == 1) {
      const Point2 p = offset + (s.points[0] - box.min) * scale;
      out << " L" << num(p.x()) << ' ' << num(p.y());
    }
    out << "\"/>\n";
  }
}

std::vector<std::string> used_labels(const std::vector<std::vector<Sketch>>& rows) {
  std::map<std::string, std::vector<std::string>> seen;  // category -> labels in class order
  for (const auto& row : rows)
    for (const auto& sk : row)
      for (const auto& st : sk.strokes)
        if (st.label) {
          colour_of(sk, st);
          auto& v = seen[sk.category];
          if (std::find(v.begin(), v.end(), *st.label) == v.end()) v.push_back(*st.label);
        }
  std::vector<std::string> out;
  for (auto& [category, labels] : seen) {
    const auto& order = category_labels(category);
    std::sort(labels.begin(), labels.end(), [&](const std::string& a, const std::string& b) {
      return std::find(order.begin(), order.end(), a) < std::find(order.begin(), order.end(), b);
    });
    for (const auto& l : labels) out.push_back(category + ":" + l);
  }
  return out;
}

}  // namespace

std::string render_svg(const Sketch& sketch, const RenderOptions& options) {
  return render_grid({{sketch}}, options);
}

std::string render_grid(const std::vector<std::vector<Sketch>>& rows, const RenderOptions& o,
                        std::span<const std::string> column_titles) {
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const auto legend = o.legend ? used_labels(rows) : std::vector<std::string>{};
  const double cell = o.panel + 2 * o.margin;
  const double title_h = column_titles.empty() ? 0.0 : 20.0;
  const double legend_h = legend.empty() ? 0.0 : 20.0 * static_cast<double>(legend.size()) + o.margin;
  const double width = std::max(1.0, static_cast<double>(cols)) * cell;
  const double height = title_h + static_cast<double>(rows.size()) * cell + legend_h;

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"#ffffff\"/>\n";
  for (std::size_t c = 0; c < column_titles.size(); ++c)
    out << "<text x=\"" << num((static_cast<double>(c) + 0.5) * cell) << "\" y=\"15.00\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"12\">" << escape(column_titles[c]) << "</text>\n";
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out << "<g>\n";
      draw_panel(out, rows[r][c], static_cast<double>(c) * cell + o.margin,
                 title_h + static_cast<double>(r) * cell + o.margin, o.panel, o);
      out << "</g>\n";
    }
  const double ly = title_h + static_cast<double>(rows.size()) * cell;
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const auto colon = legend[i].find(':');
    Sketch probe;
    probe.category = legend[i].substr(0, colon);
    Stroke s;
    s.label = legend[i].substr(colon + 1);
    const double y = ly + 20.0 * static_cast<double>(i);
    out << "<rect x=\"" << num(o.margin) << "\" y=\"" << num(y + 4) << "\" width=\"12.00\" height=\"12.00\" fill=\""
        << colour_of(probe, s) << "\"/>\n"
        << "<text x=\"" << num(o.margin + 18) << "\" y=\"" << num(y + 14) << "\" font-family=\"sans-serif\" "
        << "font-size=\"12\">" << escape(*s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace strokeseg
