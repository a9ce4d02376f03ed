#pragma once

// Stroke autoencoder: bidirectional LSTM encoder, Gaussian latent code and an
// autoregressive LSTM decoder with a mixture-density output.
//
// Batched matrices hold one stroke per column, as elsewhere in the library.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "strokeseg/config.hpp"
#include "strokeseg/mixture.hpp"
#include "strokeseg/recurrent.hpp"
#include "strokeseg/sketch.hpp"

namespace strokeseg {

template <typename S>
struct VaeParams {
  using Scalar = S;

  LstmParams<S> encoder_forward;
  LstmParams<S> encoder_backward;
  MatrixX<S> w_mu;     // N_z x 2 enc_hidden
  VectorX<S> b_mu;
  MatrixX<S> w_sigma;  // N_z x 2 enc_hidden
  VectorX<S> b_sigma;
  MatrixX<S> w_z;      // 2 dec_hidden x N_z
  VectorX<S> b_z;
  LstmParams<S> decoder;  // input is [previous point (5); z]
  MatrixX<S> w_y;      // 6M+3 x dec_hidden
  VectorX<S> b_y;

  static VaeParams init(const VaeConfig& config, Rng& rng);
  static VaeParams zeros(const VaeConfig& config);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    encoder_forward.visit(prefix + "encoder_forward.", f);
    encoder_backward.visit(prefix + "encoder_backward.", f);
    f(prefix + "w_mu", w_mu);
    f(prefix + "b_mu", b_mu);
    f(prefix + "w_sigma", w_sigma);
    f(prefix + "b_sigma", b_sigma);
    f(prefix + "w_z", w_z);
    f(prefix + "b_z", b_z);
    decoder.visit(prefix + "decoder.", f);
    f(prefix + "w_y", w_y);
    f(prefix + "b_y", b_y);
  }
};

template <typename S>
struct VaeModel {
  using Scalar = S;

  VaeConfig config;
  VaeParams<S> params;

  static VaeModel init(const VaeConfig& config, Rng& rng) {
    config.validate();
    return {config, VaeParams<S>::init(config, rng)};
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    params.visit(prefix, std::forward<F>(f));
  }
};

/// Posterior parameters, one column per stroke.
template <typename S>
struct LatentCode {
  MatrixX<S> z;
  MatrixX<S> mu;
  MatrixX<S> sigma_hat;
};

template <typename S>
struct Encoding {
  MatrixX<S> hidden;  // [h_f; h_b], 2 enc_hidden x B
  MatrixX<S> mu;
  MatrixX<S> sigma_hat;
};

/// Runs both encoder directions over the masked batch; padded steps carry the
/// state through unchanged.
template <typename S>
Encoding<S> encode(const VaeModel<S>& m, const StrokeBatch& batch);

template <typename S>
Encoding<S> encode(const VaeModel<S>& m, std::span<const Point5> stroke);

/// z = mu + exp(sigma_hat / 2) * eps, eps ~ N(0, I).
template <typename S>
MatrixX<S> sample_latent(const MatrixX<S>& mu, const std::type_identity_t<MatrixX<S>>& sigma_hat, Rng& rng);

/// [h0; c0] = tanh(W_z z + b_z), split into the two halves.
template <typename S>
LstmState<S> init_decoder(const VaeModel<S>& m, const std::type_identity_t<MatrixX<S>>& z);

/// Raw outputs y_t (6M+3 each), feeding the ground-truth previous point.
template <typename S>
std::vector<VectorX<S>> decode_teacher_forced(const VaeModel<S>& m, const std::type_identity_t<VectorX<S>>& z,
                                              std::span<const Point5> stroke);

/// Autoregressive sampling at temperature tau. Stops after the first point
/// whose pen state is not Down, or at max_len points; the final point always
/// carries StrokeEnd.
template <typename S>
OffsetStroke decode_sample(const VaeModel<S>& m, const std::type_identity_t<VectorX<S>>& z, double tau, Rng& rng,
                           int max_len);

/// -(1 / 2N_z) sum(1 + sigma_hat - mu^2 - exp(sigma_hat)).
template <typename S>
S kl_loss(const VectorX<S>& mu, const std::type_identity_t<VectorX<S>>& sigma_hat);

/// 1 - (1 - start) * anneal^step, exactly start at step 0.
double kl_weight(std::int64_t step, double start, double anneal);

/// Per-call random draws used by the loss: latent noise and dropout masks.
/// Empty mask vectors mean no dropout.
template <typename S>
struct ForwardNoise {
  MatrixX<S> latent;  // N_z x B; zero gives z = mu
  std::vector<MatrixX<S>> encoder_forward, encoder_backward, decoder;

  static ForwardNoise deterministic(const VaeConfig& config, Eigen::Index length, Eigen::Index rows);
  static ForwardNoise sample(const VaeConfig& config, Eigen::Index length, Eigen::Index rows, Rng& rng);
};

struct LossBreakdown {
  double reconstruction = 0.0;  // J_d
  double pen = 0.0;             // J_ps
  double kl = 0.0;              // J_KL
  double kl_weight = 0.0;
  double total = 0.0;
  Eigen::Index real_steps = 0;
  Eigen::Index correct_pen = 0;  // teacher-forced argmax hits over real steps
  Eigen::Index active_rows = 0;

  double pen_accuracy() const {
    return real_steps > 0 ? static_cast<double>(correct_pen) / static_cast<double>(real_steps) : 0.0;
  }
};

/// J_d + J_ps + w_KL J_KL on a batch. J_d of a stroke is averaged over its
/// real steps, J_ps over the padded length, and both over the rows that
/// contain a stroke. Rows that are entirely padding do not contribute.
/// Accumulates the gradient into grads when given.
template <typename S>
LossBreakdown total_loss(const VaeModel<S>& m, const StrokeBatch& batch, std::int64_t step,
                         const ForwardNoise<S>& noise, VaeParams<S>* grads);

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double reconstruction = 0.0;
  double pen = 0.0;
  double kl = 0.0;
  double kl_weight = 0.0;
  double total = 0.0;
};

template <typename S>
struct TrainOptions {
  int epochs = 1;
  bool augment = true;
  /// Called after each epoch with the 1-based epoch number.
  std::function<void(int epoch, const VaeModel<S>&, const OptimizerState<S>&)> on_epoch;
};

/// Shuffles, batches, augments, clips and applies Adam; one record per step.
/// Throws std::runtime_error on a non-finite loss.
template <typename S>
std::vector<StepRecord> train(VaeModel<S>& m, OptimizerState<S>& state, std::span<const Sketch> sketches,
                              const TrainOptions<S>& options, Rng& rng);

/// Mean loss over a corpus with no noise (z = mu, no dropout).
template <typename S>
LossBreakdown evaluate(const VaeModel<S>& m, std::span<const Sketch> sketches, std::int64_t step);

enum class LatentMode { Sample, Mean };

/// Encodes and re-samples every stroke; strokes keep their order and labels.
template <typename S>
Sketch reconstruct_sketch(const VaeModel<S>& m, const Sketch& sketch, double tau, Rng& rng,
                          LatentMode mode = LatentMode::Sample, int max_len = 0);

/// Encoder hidden state h = [h_f; h_b] for each stroke, one column each.
template <typename S>
MatrixX<S> encoder_features(const VaeModel<S>& m, std::span<const Stroke> strokes);

/// Sampling cap: the given quantile of offset-stroke lengths.
int stroke_length_quantile(std::span<const Sketch> sketches, double quantile = 0.99);

}  // namespace strokeseg
