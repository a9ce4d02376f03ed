#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "strokeseg/config.hpp"
#include "strokeseg/sketch.hpp"

namespace testing {

inline strokeseg::Stroke line_stroke(std::vector<std::pair<double, double>> pts) {
  strokeseg::Stroke s;
  for (auto [x, y] : pts) s.points.emplace_back(x, y);
  return s;
}

inline strokeseg::Stroke random_stroke(strokeseg::Rng& rng, int n, double scale = 10.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  strokeseg::Stroke s;
  double x = 50.0, y = 50.0;
  for (int i = 0; i < n; ++i) {
    s.points.emplace_back(x, y);
    x += u(rng);
    y += u(rng);
  }
  return s;
}

/// Small enough for exhaustive finite differences.
inline strokeseg::VaeConfig tiny_vae_config() {
  strokeseg::VaeConfig c;
  c.enc_hidden = 4;
  c.dec_hidden = 8;
  c.mixtures = 2;
  c.latent = 3;
  c.batch = 4;
  c.max_len = 16;
  return c;
}

}  // namespace testing
