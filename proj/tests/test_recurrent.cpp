#include <cmath>

#include "doctest.h"
#include "strokeseg/recurrent.hpp"

using namespace strokeseg;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("xavier bounds and moments") {
  Rng rng(1);
  MatrixXd w = xavier_init<double>(100, 100, rng);
  const double bound = std::sqrt(6.0 / 200.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size());
  CHECK(std::abs(var / (2.0 / 200.0) - 1.0) < 0.1);

  Rng a(2), b(2);
  CHECK(xavier_init<double>(7, 3, a) == xavier_init<double>(7, 3, b));

  Rng c(3);
  CHECK(std::abs(xavier_init<double>(1, 1, c)(0, 0)) <= std::sqrt(3.0));
  CHECK_THROWS(xavier_init<double>(0, 3, c));
}

TEST_CASE("layer norm") {
  VectorXd gain = VectorXd::Ones(5), bias = VectorXd::LinSpaced(5, -1, 1);
  VectorXd constant = VectorXd::Constant(5, 4.2);
  CHECK((layer_norm<double>(constant, gain, bias, 1e-5) - bias).norm() < 1e-12);

  VectorXd v(5);
  v << 1.0, -2.0, 0.5, 7.0, 3.0;
  VectorXd out = layer_norm<double>(v, gain, VectorXd::Zero(5), 0.0);
  CHECK(std::abs(out.mean()) < 1e-12);
  CHECK(std::abs(out.squaredNorm() / 5.0 - 1.0) < 1e-6);

  VectorXd shifted = (3.5 * v.array() + 11.0).matrix();
  CHECK((layer_norm<double>(shifted, gain, bias, 0.0) - layer_norm<double>(v, gain, bias, 0.0)).norm() < 1e-12);

  CHECK_THROWS(layer_norm<double>(VectorXd::Ones(1), VectorXd::Ones(1), VectorXd::Zero(1), 1e-5));
}

TEST_CASE("layer norm backward matches finite differences") {
  Rng rng(4);
  const Eigen::Index n = 6, cols = 3;
  MatrixXd x = MatrixXd::Random(n, cols);
  MatrixXd weights = MatrixXd::Random(n, cols);
  VectorXd gain = VectorXd::Random(n), bias = VectorXd::Random(n);
  VectorXd theta(n * cols + 2 * n);
  theta << x.reshaped(), gain, bias;
  GradientFunction<double> f = [&](const VectorXd& t, VectorXd* grad) {
    MatrixXd xs = t.head(n * cols).reshaped(n, cols);
    VectorXd g = t.segment(n * cols, n), b = t.tail(n);
    LayerNormCache<double> cache;
    MatrixXd y = layer_norm_columns<double>(xs, g, b, 1e-5, &cache);
    if (grad != nullptr) {
      VectorXd dg = VectorXd::Zero(n), db = VectorXd::Zero(n);
      MatrixXd dx = layer_norm_backward<double>(weights, cache, g, dg, db);
      *grad << dx.reshaped(), dg, db;
    }
    return (y.array() * weights.array()).sum();
  };
  CHECK(finite_difference_check<double>(f, theta, 1e-6).max_relative_error < 1e-6);
}

TEST_CASE("LSTM step basics") {
  Rng rng(5);
  auto zero = LstmParams<double>::zeros(3, 4);
  MatrixXd x = MatrixXd::Random(3, 2);
  auto out = lstm_step<double>(zero, x, LstmState<double>::zeros(4, 2), nullptr, nullptr);
  CHECK(out.h.isZero());
  CHECK(out.c.isZero());

  auto p = LstmParams<double>::init(3, 4, rng);
  auto prev = LstmState<double>{MatrixXd::Random(4, 2), MatrixXd::Random(4, 2)};
  MatrixXd ones = MatrixXd::Ones(4, 2);
  auto plain = lstm_step<double>(p, x, prev, nullptr, nullptr);
  auto masked = lstm_step<double>(p, x, prev, &ones, nullptr);
  CHECK(plain.h == masked.h);
  CHECK(plain.c == masked.c);
  auto again = lstm_step<double>(p, x, prev, nullptr, nullptr);
  CHECK(plain.h == again.h);

  CHECK_THROWS(lstm_step<double>(p, MatrixXd::Random(2, 2), prev, nullptr, nullptr));
  MatrixXd bad_mask = MatrixXd::Ones(3, 2);
  CHECK_THROWS(lstm_step<double>(p, x, prev, &bad_mask, nullptr));
}

TEST_CASE("dropout never zeroes the carried cell") {
  Rng rng(6);
  auto p = LstmParams<double>::init(2, 3, rng);
  auto prev = LstmState<double>{MatrixXd::Random(3, 1), MatrixXd::Random(3, 1)};
  MatrixXd x = MatrixXd::Random(2, 1);
  MatrixXd drop_all = MatrixXd::Zero(3, 1);
  LstmStepCache<double> cache;
  auto out = lstm_step<double>(p, x, prev, &drop_all, &cache);
  CHECK((out.c - cache.forget_gate.cwiseProduct(prev.c)).norm() < 1e-15);
}

TEST_CASE("LSTM gradients over two steps match finite differences") {
  Rng rng(7);
  const Eigen::Index I = 3, H = 4, B = 2;
  auto base = LstmParams<double>::init(I, H, rng);
  base.bias.setRandom();
  base.gate_gain = (VectorXd::Random(4 * H).array() + 1.5).matrix();
  base.gate_bias.setRandom();
  base.cell_gain = (VectorXd::Random(H).array() + 1.5).matrix();
  base.cell_bias.setRandom();
  const MatrixXd x0 = MatrixXd::Random(I, B), x1 = MatrixXd::Random(I, B);
  const LstmState<double> start{MatrixXd::Random(H, B) * 0.5, MatrixXd::Random(H, B) * 0.5};
  const MatrixXd mask0 = dropout_mask<double>(H, B, 0.7, rng);
  const MatrixXd wh = MatrixXd::Random(H, B), wc = MatrixXd::Random(H, B);

  auto params = base;
  auto views = parameter_views(params);
  const VectorXd theta = flatten(views);

  GradientFunction<double> f = [&](const VectorXd& t, VectorXd* grad) {
    auto p = base;
    auto pv = parameter_views(p);
    unflatten(t, pv);
    LstmStepCache<double> c0, c1;
    auto s1 = lstm_step<double>(p, x0, start, &mask0, &c0);
    auto s2 = lstm_step<double>(p, x1, s1, nullptr, &c1);
    const double loss = (s2.h.array() * wh.array()).sum() + (s2.c.array() * wc.array()).sum();
    if (grad != nullptr) {
      auto g = LstmParams<double>::zeros(I, H);
      auto g1 = lstm_step_backward<double>(p, c1, wh, wc, g);
      lstm_step_backward<double>(p, c0, g1.dh_prev, g1.dc_prev, g);
      auto gv = parameter_views(g);
      *grad = flatten(gv);
    }
    return loss;
  };
  auto result = finite_difference_check<double>(f, theta, 1e-6);
  CHECK(result.max_relative_error < 1e-4);

  // Input and initial-state gradients as well.
  VectorXd inputs(I * B + 2 * H * B);
  inputs << x0.reshaped(), start.h.reshaped(), start.c.reshaped();
  GradientFunction<double> fx = [&](const VectorXd& t, VectorXd* grad) {
    MatrixXd xa = t.head(I * B).reshaped(I, B);
    LstmState<double> s0{t.segment(I * B, H * B).reshaped(H, B), t.tail(H * B).reshaped(H, B)};
    LstmStepCache<double> c0;
    auto s1 = lstm_step<double>(base, xa, s0, &mask0, &c0);
    if (grad != nullptr) {
      auto g = LstmParams<double>::zeros(I, H);
      auto gs = lstm_step_backward<double>(base, c0, wh, wc, g);
      *grad << gs.dx.reshaped(), gs.dh_prev.reshaped(), gs.dc_prev.reshaped();
    }
    return (s1.h.array() * wh.array()).sum() + (s1.c.array() * wc.array()).sum();
  };
  CHECK(finite_difference_check<double>(fx, inputs, 1e-6).max_relative_error < 1e-4);
}

TEST_CASE("gradient clipping") {
  VectorXd a(3), b(2);
  a << 0.5, 5.0, -3.0;
  b << -0.2, 1.0;
  std::vector<ParamView<double>> views{{a.data(), 3}, {b.data(), 2}};
  clip_gradients<double>(views, 1.0);
  CHECK(a == Eigen::Vector3d(0.5, 1.0, -1.0));
  CHECK(b == Eigen::Vector2d(-0.2, 1.0));
  CHECK_THROWS(clip_gradients<double>(views, 0.0));
}

TEST_CASE("Adam") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;

  VectorXd p = VectorXd::Constant(2, 1.0), g = VectorXd::Ones(2);
  std::vector<ParamView<double>> pv{{p.data(), 2}}, gv{{g.data(), 2}};
  OptimizerState<double> state;
  adam_update(pv, gv, state, cfg);
  CHECK(state.step == 1);
  // Bias correction makes both moment estimates exactly one on the first step.
  CHECK(p(0) == doctest::Approx(1.0 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-12));

  VectorXd q = VectorXd::Constant(2, 2.0), zero = VectorXd::Zero(2);
  std::vector<ParamView<double>> qv{{q.data(), 2}}, zv{{zero.data(), 2}};
  OptimizerState<double> s2;
  s2.first_moment = {VectorXd::Constant(2, 0.5)};
  s2.second_moment = {VectorXd::Constant(2, 0.25)};
  s2.step = 0;
  cfg.learning_rate = 0.0;
  adam_update(qv, zv, s2, cfg);
  CHECK(q == VectorXd::Constant(2, 2.0));
  CHECK(s2.first_moment[0](0) == doctest::Approx(0.45));
  CHECK(s2.second_moment[0](0) == doctest::Approx(0.24975));

  cfg.learning_rate = 1e-2;
  VectorXd r = VectorXd::Zero(1), rg = VectorXd::Constant(1, -0.3);
  std::vector<ParamView<double>> rv{{r.data(), 1}}, rgv{{rg.data(), 1}};
  OptimizerState<double> s3;
  double last = r(0);
  bool monotone = true;
  for (int i = 0; i < 1000; ++i) {
    adam_update(rv, rgv, s3, cfg);
    monotone = monotone && r(0) > last;
    last = r(0);
  }
  CHECK(monotone);

  std::vector<ParamView<double>> short_list{{r.data(), 1}};
  std::vector<ParamView<double>> two{{r.data(), 1}, {rg.data(), 1}};
  CHECK_THROWS(adam_update(short_list, two, s3, cfg));
}

TEST_CASE("flatten and unflatten are inverse") {
  VectorXd a = VectorXd::LinSpaced(4, 0, 3);
  MatrixXd b = MatrixXd::Random(2, 3);
  std::vector<ParamView<double>> views{{a.data(), a.size()}, {b.data(), b.size()}};
  VectorXd theta = flatten(views);
  CHECK(theta.size() == 10);
  VectorXd changed = theta * 2.0;
  unflatten(changed, views);
  CHECK(a(3) == 6.0);
  CHECK(flatten(views) == changed);
  CHECK_THROWS(unflatten(VectorXd(theta.head(9)), views));
}

TEST_CASE("finite difference harness") {
  GradientFunction<double> quad = [](const VectorXd& t, VectorXd* g) {
    if (g != nullptr) *g = t;
    return 0.5 * t.squaredNorm();
  };
  VectorXd theta = VectorXd::LinSpaced(5, -2, 2);
  CHECK(finite_difference_check<double>(quad, theta, 1e-4).max_relative_error < 1e-9);

  GradientFunction<double> wrong = [](const VectorXd& t, VectorXd* g) {
    if (g != nullptr) *g = 2.0 * t;
    return 0.5 * t.squaredNorm();
  };
  CHECK(finite_difference_check<double>(wrong, theta, 1e-4).max_relative_error > 0.1);
}
