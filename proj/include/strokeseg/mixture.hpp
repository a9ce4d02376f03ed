#pragma once

// Bivariate Gaussian mixture output layer: parameter layout, transforms,
// density, sampling, temperature and the per-step loss terms with their
// gradients with respect to the raw network output.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Core>

#include "strokeseg/sketch.hpp"

namespace strokeseg {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

/// Output width for M components: M weights, 2M means, 2M stds, M correlations, 3 pen logits.
constexpr Eigen::Index mixture_width(Eigen::Index components) { return 6 * components + 3; }

template <typename Scalar>
struct RawMixture {
  VectorX<Scalar> pi_hat, mu_x, mu_y, sigma_x_hat, sigma_y_hat, rho_hat;
  Vector3<Scalar> q_hat;

  Eigen::Index components() const { return pi_hat.size(); }
};

template <typename Scalar>
struct MixtureParams {
  VectorX<Scalar> pi, mu_x, mu_y, sigma_x, sigma_y, rho;
  Vector3<Scalar> q;

  Eigen::Index components() const { return pi.size(); }
};

/// Correlations are kept strictly inside (-1, 1) even when tanh saturates.
template <typename Scalar>
constexpr Scalar rho_limit() {
  return Scalar(1) - Scalar(1e-6);
}

template <typename Scalar>
constexpr Scalar density_floor() {
  return std::numeric_limits<Scalar>::min();
}

template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = logits.maxCoeff();
  Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, 1> e = (logits.array() - peak).exp().matrix();
  return Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, 1>(e / e.sum());
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = v.maxCoeff();
  if (!std::isfinite(peak)) return peak;
  return peak + std::log((v.array() - peak).exp().sum());
}

template <typename Derived>
RawMixture<typename Derived::Scalar> split_params(const Eigen::MatrixBase<Derived>& y,
                                                  Eigen::Index components) {
  if (components < 1 || y.size() != mixture_width(components))
    throw std::invalid_argument("mixture output has length " + std::to_string(y.size()) +
                                ", expected 6M+3 = " + std::to_string(mixture_width(components)));
  const Eigen::Index M = components;
  RawMixture<typename Derived::Scalar> r;
  r.pi_hat = y.segment(0, M);
  r.mu_x = y.segment(M, M);
  r.mu_y = y.segment(2 * M, M);
  r.sigma_x_hat = y.segment(3 * M, M);
  r.sigma_y_hat = y.segment(4 * M, M);
  r.rho_hat = y.segment(5 * M, M);
  r.q_hat = y.segment(6 * M, 3);
  return r;
}

template <typename Scalar>
Scalar clamp_rho(Scalar rho) {
  return std::clamp(rho, -rho_limit<Scalar>(), rho_limit<Scalar>());
}

template <typename Scalar>
MixtureParams<Scalar> transform_params(const RawMixture<Scalar>& r) {
  const bool finite = r.pi_hat.allFinite() && r.mu_x.allFinite() && r.mu_y.allFinite() &&
                      r.sigma_x_hat.allFinite() && r.sigma_y_hat.allFinite() &&
                      r.rho_hat.allFinite() && r.q_hat.allFinite();
  if (!finite) throw std::invalid_argument("non-finite raw mixture parameters");
  constexpr Scalar tiny = std::numeric_limits<Scalar>::min();
  constexpr Scalar huge = std::numeric_limits<Scalar>::max();
  MixtureParams<Scalar> m;
  m.pi = softmax(r.pi_hat);
  m.mu_x = r.mu_x;
  m.mu_y = r.mu_y;
  m.sigma_x = r.sigma_x_hat.array().exp().max(tiny).min(huge).matrix();
  m.sigma_y = r.sigma_y_hat.array().exp().max(tiny).min(huge).matrix();
  m.rho = r.rho_hat.array().tanh().unaryExpr([](Scalar v) { return clamp_rho(v); }).matrix();
  m.q = softmax(r.q_hat);
  return m;
}

/// Sharpening: logits divided by tau, variances scaled by tau.
template <typename Scalar>
MixtureParams<Scalar> apply_temperature(const RawMixture<Scalar>& r,
                                        const MixtureParams<Scalar>& m, Scalar tau) {
  if (!(tau > Scalar(0)) || tau > Scalar(1)) throw std::invalid_argument("temperature must lie in (0, 1]");
  MixtureParams<Scalar> out = m;
  out.pi = softmax((r.pi_hat / tau).eval());
  out.q = softmax((r.q_hat / tau).eval());
  const Scalar scale = std::sqrt(tau);
  out.sigma_x = m.sigma_x * scale;
  out.sigma_y = m.sigma_y * scale;
  return out;
}

/// Squared Mahalanobis-style quadratic form u of the bivariate density.
template <typename Scalar>
Scalar bivariate_quadratic(Scalar zx, Scalar zy, Scalar rho) {
  return zx * zx + zy * zy - Scalar(2) * rho * zx * zy;
}

template <typename Scalar>
Scalar log_bivariate_pdf(Scalar mu_x, Scalar mu_y, Scalar log_sigma_x, Scalar log_sigma_y,
                         Scalar rho, Scalar dx, Scalar dy) {
  const Scalar zx = (dx - mu_x) * std::exp(-log_sigma_x);
  const Scalar zy = (dy - mu_y) * std::exp(-log_sigma_y);
  const Scalar one_minus = Scalar(1) - rho * rho;
  return -std::log(Scalar(2) * std::numbers::pi_v<Scalar>) - log_sigma_x - log_sigma_y -
         Scalar(0.5) * std::log(one_minus) - bivariate_quadratic(zx, zy, rho) / (Scalar(2) * one_minus);
}

template <typename Scalar>
Scalar bivariate_pdf(Scalar mu_x, Scalar mu_y, Scalar sigma_x, Scalar sigma_y, Scalar rho,
                     Scalar dx, Scalar dy) {
  if (!(sigma_x > Scalar(0)) || !(sigma_y > Scalar(0))) throw std::invalid_argument("standard deviations must be positive");
  if (!(std::abs(rho) < Scalar(1))) throw std::invalid_argument("|rho| must be below 1");
  return std::exp(log_bivariate_pdf(mu_x, mu_y, std::log(sigma_x), std::log(sigma_y), rho, dx, dy));
}

/// -log sum_i pi_i N_i(dx, dy), evaluated with a max-shifted log-sum-exp.
template <typename Scalar>
Scalar mixture_nll(const MixtureParams<Scalar>& m, Scalar dx, Scalar dy) {
  const Eigen::Index M = m.components();
  VectorX<Scalar> terms(M);
  for (Eigen::Index i = 0; i < M; ++i)
    terms(i) = std::log(std::max(m.pi(i), density_floor<Scalar>())) +
               log_bivariate_pdf(m.mu_x(i), m.mu_y(i), std::log(m.sigma_x(i)), std::log(m.sigma_y(i)),
                                 m.rho(i), dx, dy);
  return -std::max(log_sum_exp(terms), std::log(density_floor<Scalar>()));
}

template <typename Scalar>
Scalar pen_cross_entropy(const Vector3<Scalar>& q, const Vector3<Scalar>& p) {
  Scalar loss = 0;
  for (int i = 0; i < 3; ++i)
    if (p(i) != Scalar(0)) loss -= p(i) * std::log(std::max(q(i), density_floor<Scalar>()));
  return loss;
}

template <typename Scalar>
Scalar pen_cross_entropy(const Vector3<Scalar>& q, PenState target) {
  Vector3<Scalar> p = Vector3<Scalar>::Zero();
  p(pen_index(target)) = Scalar(1);
  return pen_cross_entropy(q, p);
}

struct SampledPoint {
  double dx = 0.0;
  double dy = 0.0;
  PenState pen = PenState::Down;
};

namespace detail {

template <typename Scalar, typename Derived>
Eigen::Index draw_category(const Eigen::MatrixBase<Derived>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * static_cast<double>(probs.sum());
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cumulative += static_cast<double>(probs(i));
    if (u < cumulative) return i;
  }
  return probs.size() - 1;
}

}  // namespace detail

template <typename Scalar>
SampledPoint sample_point(const MixtureParams<Scalar>& m, Rng& rng) {
  const Eigen::Index k = detail::draw_category<Scalar>(m.pi, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double n1 = normal(rng);
  const double n2 = normal(rng);
  const double rho = static_cast<double>(m.rho(k));
  SampledPoint out;
  out.dx = static_cast<double>(m.mu_x(k)) + static_cast<double>(m.sigma_x(k)) * n1;
  out.dy = static_cast<double>(m.mu_y(k)) +
           static_cast<double>(m.sigma_y(k)) * (rho * n1 + std::sqrt(1.0 - rho * rho) * n2);
  out.pen = pen_from_index(static_cast<int>(detail::draw_category<Scalar>(m.q, rng)));
  return out;
}

/// Displacement NLL and pen cross-entropy of one output step.
template <typename Scalar>
struct StepLoss {
  Scalar nll = 0;
  Scalar pen = 0;
  int predicted_pen = 0;
};

/// Loss terms of one raw output column y and, when grad is non-null, the
/// gradient of nll_weight * nll + pen_weight * pen with respect to y.
/// The result must agree with mixture_nll(transform_params(split_params(y))).
template <typename Scalar, typename InDerived, typename OutDerived>
StepLoss<Scalar> mixture_step_loss(const Eigen::MatrixBase<InDerived>& y, Eigen::Index M, Scalar dx,
                                   Scalar dy, PenState pen, Scalar nll_weight, Scalar pen_weight,
                                   Eigen::MatrixBase<OutDerived>* grad) {
  StepLoss<Scalar> out;
  const auto pi_hat = y.segment(0, M);
  const auto q_hat = y.segment(6 * M, 3);

  // Pen-state cross-entropy from log-softmax.
  const Scalar q_lse = log_sum_exp(q_hat);
  const Vector3<Scalar> q = (q_hat.array() - q_lse).exp().matrix();
  out.pen = -std::max(q_hat(pen_index(pen)) - q_lse, std::log(density_floor<Scalar>()));
  q.maxCoeff(&out.predicted_pen);

  if (grad != nullptr) {
    auto& g = grad->derived();
    g.setZero();
    if (pen_weight != Scalar(0)) {
      Vector3<Scalar> dq = q;
      dq(pen_index(pen)) -= Scalar(1);
      g.segment(6 * M, 3) = pen_weight * dq;
    }
  }
  if (nll_weight == Scalar(0)) return out;

  const Scalar pi_lse = log_sum_exp(pi_hat);
  VectorX<Scalar> log_terms(M), zx(M), zy(M), rho(M), u(M);
  Eigen::Array<bool, Eigen::Dynamic, 1> clamped(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    const Scalar lsx = y(3 * M + i);
    const Scalar lsy = y(4 * M + i);
    const Scalar r_raw = std::tanh(y(5 * M + i));
    rho(i) = clamp_rho(r_raw);
    clamped(i) = rho(i) != r_raw;
    zx(i) = (dx - y(M + i)) * std::exp(-lsx);
    zy(i) = (dy - y(2 * M + i)) * std::exp(-lsy);
    const Scalar one_minus = Scalar(1) - rho(i) * rho(i);
    u(i) = bivariate_quadratic(zx(i), zy(i), rho(i));
    log_terms(i) = pi_hat(i) - pi_lse - std::log(Scalar(2) * std::numbers::pi_v<Scalar>) - lsx - lsy -
                   Scalar(0.5) * std::log(one_minus) - u(i) / (Scalar(2) * one_minus);
  }
  const Scalar lse = log_sum_exp(log_terms);
  const Scalar floor = std::log(density_floor<Scalar>());
  const bool floored = lse < floor;  // NaN passes through
  out.nll = -(floored ? floor : lse);

  if (grad == nullptr || floored) return out;
  auto& g = grad->derived();
  const VectorX<Scalar> gamma = (log_terms.array() - lse).exp().matrix();
  const VectorX<Scalar> pi = (pi_hat.array() - pi_lse).exp().matrix();
  for (Eigen::Index i = 0; i < M; ++i) {
    const Scalar one_minus = Scalar(1) - rho(i) * rho(i);
    const Scalar sx = std::exp(y(3 * M + i));
    const Scalar sy = std::exp(y(4 * M + i));
    const Scalar ax = (zx(i) - rho(i) * zy(i)) / one_minus;
    const Scalar ay = (zy(i) - rho(i) * zx(i)) / one_minus;
    // d log N / d theta; the loss gradient is -gamma times these.
    const Scalar d_mux = ax / sx;
    const Scalar d_muy = ay / sy;
    const Scalar d_lsx = Scalar(-1) + zx(i) * ax;
    const Scalar d_lsy = Scalar(-1) + zy(i) * ay;
    const Scalar d_rho_hat =
        clamped(i) ? Scalar(0) : rho(i) + zx(i) * zy(i) - rho(i) * u(i) / one_minus;
    const Scalar w = nll_weight * gamma(i);
    g(i) += nll_weight * (pi(i) - gamma(i));
    g(M + i) -= w * d_mux;
    g(2 * M + i) -= w * d_muy;
    g(3 * M + i) -= w * d_lsx;
    g(4 * M + i) -= w * d_lsy;
    g(5 * M + i) -= w * d_rho_hat;
  }
  return out;
}

}  // namespace strokeseg
