#include "strokeseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace strokeseg {

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

/// Piecewise-linear path through the corners, sampled every ~2 px, with a
/// slow wobble along the normal and a little per-point noise.
std::vector<Point2> hand_drawn(const std::vector<Point2>& corners, Rng& rng, double wobble = 1.5) {
  std::vector<Point2> dense;
  for (std::size_t i = 0; i + 1 < corners.size(); ++i) {
    const Point2 a = corners[i], b = corners[i + 1];
    const int steps = std::max(1, static_cast<int>((b - a).norm() / 2.0));
    for (int s = 0; s < steps; ++s) dense.push_back(a + (b - a) * (static_cast<double>(s) / steps));
  }
  dense.push_back(corners.back());
  const double f1 = uniform(rng, 0.5, 2.0), f2 = uniform(rng, 2.0, 5.0);
  const double p1 = uniform(rng, 0.0, 2 * kPi), p2 = uniform(rng, 0.0, 2 * kPi);
  const double a1 = uniform(rng, 0.0, wobble), a2 = uniform(rng, 0.0, wobble * 0.4);
  std::normal_distribution<double> jitter(0.0, 0.3);
  const double n = static_cast<double>(dense.size() - 1);
  std::vector<Point2> out;
  out.reserve(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const double t = n > 0 ? static_cast<double>(i) / n : 0.0;
    const Point2 tangent = dense[std::min(i + 1, dense.size() - 1)] - dense[i == 0 ? 0 : i - 1];
    Point2 normal(-tangent.y(), tangent.x());
    if (normal.norm() > 0) normal.normalize();
    const double offset = a1 * std::sin(2 * kPi * f1 * t + p1) + a2 * std::sin(2 * kPi * f2 * t + p2);
    out.push_back(dense[i] + offset * normal + Point2(jitter(rng), jitter(rng)));
  }
  return out;
}

std::vector<Point2> ellipse(const Point2& c, double rx, double ry, double tilt, double start, double sweep, int n) {
  std::vector<Point2> out;
  const double ct = std::cos(tilt), st = std::sin(tilt);
  for (int i = 0; i <= n; ++i) {
    const double a = start + sweep * i / n;
    const Point2 p(rx * std::cos(a), ry * std::sin(a));
    out.emplace_back(c.x() + ct * p.x() - st * p.y(), c.y() + st * p.x() + ct * p.y());
  }
  return out;
}

struct Part {
  std::string label;
  std::vector<std::vector<Point2>> strokes;
};

/// Shuffles part order (keeping each part's strokes together), then applies
/// a random similarity transform to the whole sketch.
Sketch assemble(const std::string& category, std::vector<Part> parts, Rng& rng, double order_noise) {
  if (coin(rng, order_noise)) std::shuffle(parts.begin(), parts.end(), rng);
  const double angle = uniform(rng, -0.12, 0.12), scale = uniform(rng, 0.8, 1.25);
  const Point2 shift(uniform(rng, -20, 20), uniform(rng, -20, 20));
  const double ca = std::cos(angle) * scale, sa = std::sin(angle) * scale;
  Sketch out;
  out.category = category;
  for (auto& part : parts)
    for (auto& pts : part.strokes) {
      Stroke s;
      s.label = part.label;
      for (const auto& p : pts) s.points.emplace_back(ca * p.x() - sa * p.y() + shift.x(), sa * p.x() + ca * p.y() + shift.y());
      out.strokes.push_back(std::move(s));
    }
  return out;
}

}  // namespace

Sketch synth_chair(Rng& rng) {
  // y grows downward, as on screen.
  const double x0 = uniform(rng, 60, 90), width = uniform(rng, 70, 110);
  const double seat_y = uniform(rng, 110, 130), depth = uniform(rng, 12, 30), skew = uniform(rng, 8, 25);
  const double back_h = uniform(rng, 60, 100), leg_h = uniform(rng, 50, 80);
  const Point2 fl(x0, seat_y + depth), fr(x0 + width, seat_y + depth);
  const Point2 bl(x0 + skew, seat_y), br(x0 + skew + width, seat_y);

  Part seat{"seat", {}};
  if (coin(rng, 0.6)) {
    seat.strokes.push_back(hand_drawn({bl, br, fr, fl, bl}, rng));
  } else {
    seat.strokes.push_back(hand_drawn({bl, br}, rng));
    seat.strokes.push_back(hand_drawn({fl, fr}, rng));
  }

  Part back{"back", {}};
  const Point2 tl = bl + Point2(uniform(rng, -4, 4), -back_h), tr = br + Point2(uniform(rng, -4, 4), -back_h);
  if (coin(rng, 0.5)) {
    back.strokes.push_back(hand_drawn({bl, tl, tr, br}, rng));
  } else {
    back.strokes.push_back(hand_drawn({bl, tl}, rng));
    back.strokes.push_back(hand_drawn({tl, tr}, rng));
    back.strokes.push_back(hand_drawn({tr, br}, rng));
  }
  if (coin(rng, 0.4)) {
    const double mid = uniform(rng, 0.3, 0.6);
    back.strokes.push_back(hand_drawn({bl + (tl - bl) * mid, br + (tr - br) * mid}, rng));
  }

  Part legs{"leg", {}};
  const double splay = uniform(rng, 0, 8);
  legs.strokes.push_back(hand_drawn({fl, fl + Point2(-splay, leg_h)}, rng));
  legs.strokes.push_back(hand_drawn({fr, fr + Point2(splay, leg_h)}, rng));
  if (coin(rng, 0.7)) legs.strokes.push_back(hand_drawn({br, br + Point2(splay * 0.5, leg_h * 0.8)}, rng));
  if (coin(rng, 0.5)) legs.strokes.push_back(hand_drawn({bl, bl + Point2(-splay * 0.5, leg_h * 0.8)}, rng));

  return assemble("chair", {back, seat, legs}, rng, 0.3);
}

Sketch synth_flower(Rng& rng) {
  const Point2 c(uniform(rng, 110, 140), uniform(rng, 70, 100));
  const double r = uniform(rng, 10, 18);

  Part core{"core", {hand_drawn(ellipse(c, r, r * uniform(rng, 0.85, 1.15), 0, uniform(rng, 0, 2 * kPi), 2 * kPi, 24), rng, 0.8)}};

  Part petals{"petals", {}};
  const int count = std::uniform_int_distribution<int>(4, 8)(rng);
  const double petal = uniform(rng, 18, 32), phase = uniform(rng, 0, 2 * kPi);
  for (int k = 0; k < count; ++k) {
    const double a = phase + 2 * kPi * k / count;
    const Point2 dir(std::cos(a), std::sin(a));
    const Point2 centre = c + dir * (r + petal * 0.5);
    auto arc = ellipse(centre, petal * 0.55, petal * uniform(rng, 0.25, 0.4), a, kPi * 0.9, kPi * 2.1, 18);
    petals.strokes.push_back(hand_drawn(arc, rng, 0.8));
  }

  const double stem_len = uniform(rng, 80, 120), bend = uniform(rng, -20, 20);
  const Point2 base = c + Point2(0, r + 2);
  std::vector<Point2> stem_path;
  for (int i = 0; i <= 12; ++i) {
    const double t = i / 12.0;
    stem_path.emplace_back(base.x() + bend * std::sin(kPi * t), base.y() + stem_len * t);
  }
  Part stem{"stem", {hand_drawn(stem_path, rng, 1.0)}};

  Part leaves{"leaves", {}};
  const int n_leaves = std::uniform_int_distribution<int>(1, 2)(rng);
  for (int k = 0; k < n_leaves; ++k) {
    const double t = uniform(rng, 0.35, 0.8);
    const Point2 at(base.x() + bend * std::sin(kPi * t), base.y() + stem_len * t);
    const double side = (k == 0) == coin(rng, 0.5) ? 1.0 : -1.0;
    const double len = uniform(rng, 22, 35), tilt = side > 0 ? -0.5 : kPi + 0.5;
    const Point2 dir(std::cos(tilt), std::sin(tilt));
    leaves.strokes.push_back(hand_drawn(ellipse(at + dir * len * 0.5, len * 0.5, len * 0.18, tilt, kPi, 2 * kPi, 20), rng, 0.6));
  }

  return assemble("flower", {core, petals, stem, leaves}, rng, 0.3);
}

std::vector<std::string> synthetic_categories() { return {"chair", "flower"}; }

std::vector<Sketch> synth_sketches(const std::string& category, std::size_t count, Rng& rng) {
  Sketch (*make)(Rng&) = nullptr;
  if (category == "chair") make = synth_chair;
  else if (category == "flower") make = synth_flower;
  else throw std::invalid_argument("no synthetic generator for category '" + category + "'");
  std::vector<Sketch> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make(rng));
  return out;
}

}  // namespace strokeseg
