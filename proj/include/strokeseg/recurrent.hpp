#pragma once

// Differentiable building blocks shared by the autoencoder and the
// segmentation head: Xavier init, layer norm, a layer-normalized LSTM cell
// with candidate-update dropout, gradient clipping, Adam and a central
// finite-difference gradient checker.
//
// Batched tensors hold one example per column.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "strokeseg/mixture.hpp"
#include "strokeseg/sketch.hpp"

namespace strokeseg {

template <typename Scalar>
MatrixX<Scalar> xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng);

template <typename Scalar>
MatrixX<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double keep_prob, Rng& rng);

// ---------------------------------------------------------------------------
// Layer normalization

template <typename Scalar>
struct LayerNormCache {
  MatrixX<Scalar> normalized;                               // (x - mean) / std, per column
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inv_std;
};

/// Normalizes a single vector: (v - mean) / sqrt(var + eps) * gain + bias.
template <typename Scalar>
VectorX<Scalar> layer_norm(const VectorX<Scalar>& v, const VectorX<Scalar>& gain,
                           const VectorX<Scalar>& bias, std::type_identity_t<Scalar> eps);

/// Column-wise layer norm of x; fills cache when given.
template <typename Scalar>
MatrixX<Scalar> layer_norm_columns(const std::type_identity_t<Eigen::Ref<const MatrixX<Scalar>>>& x,
                                   const std::type_identity_t<Eigen::Ref<const VectorX<Scalar>>>& gain,
                                   const std::type_identity_t<Eigen::Ref<const VectorX<Scalar>>>& bias,
                                   std::type_identity_t<Scalar> eps,
                                   LayerNormCache<Scalar>* cache);

/// Gradient with respect to the layer-norm input given d(output).
/// Accumulates gain and bias gradients.
template <typename Scalar>
MatrixX<Scalar> layer_norm_backward(const std::type_identity_t<Eigen::Ref<const MatrixX<Scalar>>>& d_out,
                                    const LayerNormCache<Scalar>& cache,
                                    const std::type_identity_t<Eigen::Ref<const VectorX<Scalar>>>& gain,
                                    std::type_identity_t<Eigen::Ref<VectorX<Scalar>>> d_gain,
                                    std::type_identity_t<Eigen::Ref<VectorX<Scalar>>> d_bias);

// ---------------------------------------------------------------------------
// LSTM

/// Gate order in the stacked 4H pre-activation: input, forget, output, candidate.
template <typename S>
struct LstmParams {
  using Scalar = S;

  MatrixX<Scalar> w_input;      // 4H x I
  MatrixX<Scalar> w_recurrent;  // 4H x H
  VectorX<Scalar> bias;         // 4H
  VectorX<Scalar> gate_gain;    // 4H, layer norm per gate block
  VectorX<Scalar> gate_bias;    // 4H
  VectorX<Scalar> cell_gain;    // H, layer norm on the cell before the output tanh
  VectorX<Scalar> cell_bias;    // H

  Eigen::Index input_size() const { return w_input.cols(); }
  Eigen::Index hidden_size() const { return w_recurrent.cols(); }

  static LstmParams init(Eigen::Index input, Eigen::Index hidden, Rng& rng);
  static LstmParams zeros(Eigen::Index input, Eigen::Index hidden);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "w_input", w_input);
    f(prefix + "w_recurrent", w_recurrent);
    f(prefix + "bias", bias);
    f(prefix + "gate_gain", gate_gain);
    f(prefix + "gate_bias", gate_bias);
    f(prefix + "cell_gain", cell_gain);
    f(prefix + "cell_bias", cell_bias);
  }
};

template <typename Scalar>
struct LstmState {
  MatrixX<Scalar> h;
  MatrixX<Scalar> c;

  static LstmState zeros(Eigen::Index hidden, Eigen::Index batch) {
    return {MatrixX<Scalar>::Zero(hidden, batch), MatrixX<Scalar>::Zero(hidden, batch)};
  }
};

template <typename Scalar>
struct LstmStepCache {
  MatrixX<Scalar> x, h_prev, c_prev;
  LayerNormCache<Scalar> gate_norm[4];
  MatrixX<Scalar> input_gate, forget_gate, output_gate, candidate;
  MatrixX<Scalar> dropout;  // empty when no dropout
  LayerNormCache<Scalar> cell_norm;
  MatrixX<Scalar> cell_tanh;
};

template <typename Scalar>
struct LstmStepGrad {
  MatrixX<Scalar> dx, dh_prev, dc_prev;
};

inline constexpr double kLayerNormEps = 1e-5;

/// One LSTM step on a batch. dropout (H x B, already divided by the keep
/// probability) multiplies the candidate update only; the cell path is never
/// zeroed. Pass nullptr for no dropout.
template <typename Scalar>
LstmState<Scalar> lstm_step(const LstmParams<Scalar>& p, const std::type_identity_t<Eigen::Ref<const MatrixX<Scalar>>>& x,
                            const LstmState<Scalar>& prev, const MatrixX<Scalar>* dropout,
                            LstmStepCache<Scalar>* cache);

template <typename Scalar>
LstmStepGrad<Scalar> lstm_step_backward(const LstmParams<Scalar>& p, const LstmStepCache<Scalar>& cache,
                                        const MatrixX<Scalar>& dh, const MatrixX<Scalar>& dc,
                                        LstmParams<Scalar>& grads);

// ---------------------------------------------------------------------------
// Parameter blocks and optimization

/// Writable flat view of one parameter block (matrix or vector).
template <typename Scalar>
using ParamView = Eigen::Map<VectorX<Scalar>>;

/// Flat views of every block of a params struct exposing
/// `visit(prefix, f(name, block))` and a `Scalar` typedef.
template <typename Params>
std::vector<ParamView<typename Params::Scalar>> parameter_views(Params& params) {
  std::vector<ParamView<typename Params::Scalar>> out;
  params.visit("", [&](const std::string&, auto& block) { out.emplace_back(block.data(), block.size()); });
  return out;
}

/// Clip every gradient entry to [-threshold, threshold].
template <typename Scalar>
void clip_gradients(std::vector<ParamView<Scalar>>& grads, std::type_identity_t<Scalar> threshold);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct OptimizerState {
  std::vector<VectorX<Scalar>> first_moment;
  std::vector<VectorX<Scalar>> second_moment;
  std::int64_t step = 0;
};

/// Bias-corrected Adam update; moments are created on the first call.
template <typename Scalar>
void adam_update(std::vector<ParamView<Scalar>>& params, const std::vector<ParamView<Scalar>>& grads,
                 OptimizerState<Scalar>& state, const AdamConfig& config);

template <typename Scalar>
VectorX<Scalar> flatten(const std::vector<ParamView<Scalar>>& blocks);
template <typename Scalar>
void unflatten(const VectorX<Scalar>& theta, std::vector<ParamView<Scalar>>& blocks);

/// Loss at theta; writes the analytic gradient when grad is non-null.
template <typename Scalar>
using GradientFunction = std::function<Scalar(const VectorX<Scalar>& theta, VectorX<Scalar>* grad)>;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the analytic gradient with central differences
/// (L(theta + h e_i) - L(theta - h e_i)) / 2h. The relative error of a
/// coordinate is |a - n| / max(|a|, |n|, floor).
template <typename Scalar>
GradientCheckResult finite_difference_check(const std::type_identity_t<GradientFunction<Scalar>>& loss,
                                            const VectorX<Scalar>& theta, std::type_identity_t<Scalar> h,
                                            std::type_identity_t<Scalar> floor = Scalar(1e-6));

}  // namespace strokeseg
