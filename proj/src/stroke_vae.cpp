#include "strokeseg/stroke_vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace strokeseg {

namespace {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
Eigen::Matrix<S, 5, 1> start_token() {
  Eigen::Matrix<S, 5, 1> s;
  s << S(0), S(0), S(1), S(0), S(0);
  return s;
}

template <typename S>
std::vector<MatrixX<S>> cast_steps(const StrokeBatch& batch) {
  std::vector<MatrixX<S>> out;
  out.reserve(batch.steps.size());
  for (const auto& step : batch.steps) out.push_back(step.cast<S>());
  return out;
}

int target_pen(const Eigen::MatrixXd& step, Eigen::Index b) {
  Eigen::Index k = 0;
  step.col(b).segment<3>(2).maxCoeff(&k);
  return static_cast<int>(k);
}

template <typename S>
const MatrixX<S>* mask_at(const std::vector<MatrixX<S>>& masks, std::size_t t) {
  return masks.empty() ? nullptr : &masks[t];
}

/// One encoder direction. Padded steps carry the state through unchanged.
template <typename S>
LstmState<S> run_direction(const LstmParams<S>& p, const std::vector<MatrixX<S>>& inputs, const Mask& mask,
                           const std::vector<MatrixX<S>>& dropout, bool reverse,
                           std::vector<LstmStepCache<S>>* caches) {
  const auto L = inputs.size();
  const Eigen::Index B = inputs.front().cols();
  LstmState<S> state = LstmState<S>::zeros(p.hidden_size(), B);
  if (caches != nullptr) caches->assign(L, {});
  for (std::size_t k = 0; k < L; ++k) {
    const std::size_t t = reverse ? L - 1 - k : k;
    LstmState<S> next =
        lstm_step<S>(p, inputs[t], state, mask_at(dropout, t), caches != nullptr ? &(*caches)[t] : nullptr);
    for (Eigen::Index b = 0; b < B; ++b) {
      if (!mask(static_cast<Eigen::Index>(t), b)) continue;
      state.h.col(b) = next.h.col(b);
      state.c.col(b) = next.c.col(b);
    }
  }
  return state;
}

template <typename S>
void backprop_direction(const LstmParams<S>& p, const std::vector<LstmStepCache<S>>& caches, const Mask& mask,
                        bool reverse, MatrixX<S> dh, LstmParams<S>& grads) {
  const auto L = caches.size();
  const Eigen::Index B = dh.cols();
  MatrixX<S> dc = MatrixX<S>::Zero(dh.rows(), B);
  for (std::size_t k = L; k-- > 0;) {
    const std::size_t t = reverse ? L - 1 - k : k;
    MatrixX<S> dh_step = dh;
    MatrixX<S> dc_step = dc;
    for (Eigen::Index b = 0; b < B; ++b) {
      if (mask(static_cast<Eigen::Index>(t), b)) {
        dh.col(b).setZero();
        dc.col(b).setZero();
      } else {
        dh_step.col(b).setZero();
        dc_step.col(b).setZero();
      }
    }
    LstmStepGrad<S> g = lstm_step_backward<S>(p, caches[t], dh_step, dc_step, grads);
    dh += g.dh_prev;
    dc += g.dc_prev;
  }
}

template <typename S>
MatrixX<S> decoder_input(const MatrixX<S>& previous, const MatrixX<S>& z) {
  MatrixX<S> in(5 + z.rows(), z.cols());
  in.topRows(5) = previous;
  in.bottomRows(z.rows()) = z;
  return in;
}

template <typename S>
MatrixX<S> affine(const MatrixX<S>& w, const VectorX<S>& b, const MatrixX<S>& x) {
  MatrixX<S> out = w * x;
  out.colwise() += b;
  return out;
}

template <typename S>
Encoding<S> encode_inputs(const VaeModel<S>& m, const std::vector<MatrixX<S>>& inputs, const Mask& mask,
                          const ForwardNoise<S>* noise, std::vector<LstmStepCache<S>>* fwd_caches,
                          std::vector<LstmStepCache<S>>* bwd_caches) {
  const auto& p = m.params;
  static const std::vector<MatrixX<S>> none;
  const LstmState<S> hf = run_direction(p.encoder_forward, inputs, mask,
                                        noise != nullptr ? noise->encoder_forward : none, false, fwd_caches);
  const LstmState<S> hb = run_direction(p.encoder_backward, inputs, mask,
                                        noise != nullptr ? noise->encoder_backward : none, true, bwd_caches);
  Encoding<S> e;
  e.hidden.resize(hf.h.rows() + hb.h.rows(), hf.h.cols());
  e.hidden << hf.h, hb.h;
  e.mu = affine(p.w_mu, p.b_mu, e.hidden);
  e.sigma_hat = affine(p.w_sigma, p.b_sigma, e.hidden);
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename S>
VaeParams<S> VaeParams<S>::init(const VaeConfig& c, Rng& rng) {
  c.validate();
  VaeParams p;
  p.encoder_forward = LstmParams<S>::init(5, c.enc_hidden, rng);
  p.encoder_backward = LstmParams<S>::init(5, c.enc_hidden, rng);
  p.w_mu = xavier_init<S>(c.latent, 2 * c.enc_hidden, rng);
  p.b_mu = VectorX<S>::Zero(c.latent);
  p.w_sigma = xavier_init<S>(c.latent, 2 * c.enc_hidden, rng);
  p.b_sigma = VectorX<S>::Zero(c.latent);
  p.w_z = xavier_init<S>(2 * c.dec_hidden, c.latent, rng);
  p.b_z = VectorX<S>::Zero(2 * c.dec_hidden);
  p.decoder = LstmParams<S>::init(5 + c.latent, c.dec_hidden, rng);
  p.w_y = xavier_init<S>(mixture_width(c.mixtures), c.dec_hidden, rng);
  p.b_y = VectorX<S>::Zero(mixture_width(c.mixtures));
  return p;
}

template <typename S>
VaeParams<S> VaeParams<S>::zeros(const VaeConfig& c) {
  VaeParams p;
  p.encoder_forward = LstmParams<S>::zeros(5, c.enc_hidden);
  p.encoder_backward = LstmParams<S>::zeros(5, c.enc_hidden);
  p.w_mu = MatrixX<S>::Zero(c.latent, 2 * c.enc_hidden);
  p.b_mu = VectorX<S>::Zero(c.latent);
  p.w_sigma = MatrixX<S>::Zero(c.latent, 2 * c.enc_hidden);
  p.b_sigma = VectorX<S>::Zero(c.latent);
  p.w_z = MatrixX<S>::Zero(2 * c.dec_hidden, c.latent);
  p.b_z = VectorX<S>::Zero(2 * c.dec_hidden);
  p.decoder = LstmParams<S>::zeros(5 + c.latent, c.dec_hidden);
  p.w_y = MatrixX<S>::Zero(mixture_width(c.mixtures), c.dec_hidden);
  p.b_y = VectorX<S>::Zero(mixture_width(c.mixtures));
  return p;
}

template <typename S>
ForwardNoise<S> ForwardNoise<S>::deterministic(const VaeConfig& c, Eigen::Index, Eigen::Index rows) {
  ForwardNoise n;
  n.latent = MatrixX<S>::Zero(c.latent, rows);
  return n;
}

template <typename S>
ForwardNoise<S> ForwardNoise<S>::sample(const VaeConfig& c, Eigen::Index length, Eigen::Index rows, Rng& rng) {
  ForwardNoise n;
  std::normal_distribution<double> normal(0.0, 1.0);
  n.latent.resize(c.latent, rows);
  for (Eigen::Index j = 0; j < rows; ++j)
    for (Eigen::Index i = 0; i < c.latent; ++i) n.latent(i, j) = static_cast<S>(normal(rng));
  if (c.keep_prob < 1.0) {
    for (Eigen::Index t = 0; t < length; ++t) n.encoder_forward.push_back(dropout_mask<S>(c.enc_hidden, rows, c.keep_prob, rng));
    for (Eigen::Index t = 0; t < length; ++t) n.encoder_backward.push_back(dropout_mask<S>(c.enc_hidden, rows, c.keep_prob, rng));
    for (Eigen::Index t = 0; t < length; ++t) n.decoder.push_back(dropout_mask<S>(c.dec_hidden, rows, c.keep_prob, rng));
  }
  return n;
}

// ---------------------------------------------------------------------------

template <typename S>
Encoding<S> encode(const VaeModel<S>& m, const StrokeBatch& batch) {
  if (batch.length() == 0 || batch.rows() == 0) throw std::invalid_argument("encode: empty batch");
  return encode_inputs<S>(m, cast_steps<S>(batch), batch.mask, nullptr, nullptr, nullptr);
}

template <typename S>
Encoding<S> encode(const VaeModel<S>& m, std::span<const Point5> stroke) {
  if (stroke.empty()) throw std::invalid_argument("encode: empty stroke");
  const OffsetStroke row(stroke.begin(), stroke.end());
  return encode(m, make_batch(std::span<const OffsetStroke>(&row, 1)));
}

template <typename S>
MatrixX<S> sample_latent(const MatrixX<S>& mu, const std::type_identity_t<MatrixX<S>>& sigma_hat, Rng& rng) {
  if (mu.rows() != sigma_hat.rows() || mu.cols() != sigma_hat.cols())
    throw std::invalid_argument("sample_latent: mu and sigma_hat differ in shape");
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixX<S> z(mu.rows(), mu.cols());
  for (Eigen::Index j = 0; j < mu.cols(); ++j)
    for (Eigen::Index i = 0; i < mu.rows(); ++i)
      z(i, j) = mu(i, j) + std::exp(sigma_hat(i, j) / S(2)) * static_cast<S>(normal(rng));
  return z;
}

template <typename S>
LstmState<S> init_decoder(const VaeModel<S>& m, const std::type_identity_t<MatrixX<S>>& z) {
  if (z.rows() != m.config.latent) throw std::invalid_argument("init_decoder: z has the wrong length");
  const MatrixX<S> both = affine(m.params.w_z, m.params.b_z, z).array().tanh().matrix();
  const Eigen::Index H = m.config.dec_hidden;
  return {both.topRows(H), both.bottomRows(H)};
}

template <typename S>
std::vector<VectorX<S>> decode_teacher_forced(const VaeModel<S>& m, const std::type_identity_t<VectorX<S>>& z,
                                              std::span<const Point5> stroke) {
  if (z.size() != m.config.latent) throw std::invalid_argument("decode_teacher_forced: z has the wrong length");
  const MatrixX<S> zm = z;
  LstmState<S> state = init_decoder(m, zm);
  std::vector<VectorX<S>> out;
  out.reserve(stroke.size());
  MatrixX<S> previous = start_token<S>();
  for (const auto& point : stroke) {
    state = lstm_step<S>(m.params.decoder, decoder_input(previous, zm), state, nullptr, nullptr);
    out.push_back(m.params.w_y * state.h + m.params.b_y);
    previous = point.vector().cast<S>();
  }
  return out;
}

template <typename S>
OffsetStroke decode_sample(const VaeModel<S>& m, const std::type_identity_t<VectorX<S>>& z, double tau, Rng& rng,
                           int max_len) {
  if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("temperature must lie in (0, 1]");
  if (max_len < 1) throw std::invalid_argument("max_len must be positive");
  if (z.size() != m.config.latent) throw std::invalid_argument("decode_sample: z has the wrong length");
  const MatrixX<S> zm = z;
  LstmState<S> state = init_decoder(m, zm);
  MatrixX<S> previous = start_token<S>();
  OffsetStroke out;
  for (int n = 0; n < max_len; ++n) {
    state = lstm_step<S>(m.params.decoder, decoder_input(previous, zm), state, nullptr, nullptr);
    const VectorX<S> y = m.params.w_y * state.h + m.params.b_y;
    const RawMixture<S> raw = split_params(y, m.config.mixtures);
    const MixtureParams<S> mix = apply_temperature(raw, transform_params(raw), static_cast<S>(tau));
    const SampledPoint s = sample_point(mix, rng);
    out.push_back({s.dx, s.dy, s.pen});
    previous = out.back().vector().cast<S>();
    if (s.pen != PenState::Down) break;
  }
  out.back().pen = PenState::StrokeEnd;
  return out;
}

template <typename S>
S kl_loss(const VectorX<S>& mu, const std::type_identity_t<VectorX<S>>& sigma_hat) {
  if (mu.size() != sigma_hat.size() || mu.size() == 0) throw std::invalid_argument("kl_loss: mismatched lengths");
  const auto n = static_cast<S>(mu.size());
  return (sigma_hat.array().exp() + mu.array().square() - S(1) - sigma_hat.array()).sum() / (S(2) * n);
}

double kl_weight(std::int64_t step, double start, double anneal) {
  if (step < 0) throw std::invalid_argument("kl_weight: negative step");
  // Same as 1 - (1 - start) anneal^step, but exact at step 0.
  return start - (1.0 - start) * std::expm1(static_cast<double>(step) * std::log(anneal));
}

// ---------------------------------------------------------------------------

template <typename S>
LossBreakdown total_loss(const VaeModel<S>& m, const StrokeBatch& batch, std::int64_t step,
                         const ForwardNoise<S>& noise, VaeParams<S>* grads) {
  const auto& c = m.config;
  const auto& p = m.params;
  const Eigen::Index L = batch.length();
  const Eigen::Index B = batch.rows();
  const Eigen::Index M = c.mixtures;
  if (L == 0 || B == 0) throw std::invalid_argument("total_loss: empty batch");
  if (noise.latent.rows() != c.latent || noise.latent.cols() != B)
    throw std::invalid_argument("total_loss: latent noise shape mismatch");

  std::vector<Eigen::Index> lengths(static_cast<std::size_t>(B));
  LossBreakdown out;
  for (Eigen::Index b = 0; b < B; ++b) {
    lengths[static_cast<std::size_t>(b)] = batch.row_length(b);
    if (lengths[static_cast<std::size_t>(b)] > 0) ++out.active_rows;
  }
  if (out.active_rows == 0) throw std::invalid_argument("total_loss: batch holds no strokes");
  const auto active = static_cast<S>(out.active_rows);

  // Forward.
  const std::vector<MatrixX<S>> inputs = cast_steps<S>(batch);
  std::vector<LstmStepCache<S>> fwd_caches, bwd_caches;
  const bool need_grad = grads != nullptr;
  const Encoding<S> enc = encode_inputs(m, inputs, batch.mask, &noise, need_grad ? &fwd_caches : nullptr,
                                        need_grad ? &bwd_caches : nullptr);
  const MatrixX<S> spread = (enc.sigma_hat.array() / S(2)).exp().matrix();
  const MatrixX<S> z = enc.mu + spread.cwiseProduct(noise.latent);
  const MatrixX<S> init = affine(p.w_z, p.b_z, z).array().tanh().matrix();
  const Eigen::Index H = c.dec_hidden;
  LstmState<S> state{init.topRows(H), init.bottomRows(H)};

  std::vector<LstmStepCache<S>> dec_caches(need_grad ? static_cast<std::size_t>(L) : 0);
  std::vector<MatrixX<S>> dec_h;
  std::vector<MatrixX<S>> d_out;
  if (need_grad) {
    dec_h.reserve(static_cast<std::size_t>(L));
    d_out.assign(static_cast<std::size_t>(L), MatrixX<S>::Zero(mixture_width(M), B));
  }

  S j_d = 0, j_ps = 0;
  MatrixX<S> previous = start_token<S>().replicate(1, B);
  for (Eigen::Index t = 0; t < L; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    state = lstm_step<S>(p.decoder, decoder_input(previous, z), state, mask_at(noise.decoder, ts),
                         need_grad ? &dec_caches[ts] : nullptr);
    const MatrixX<S> y = affine(p.w_y, p.b_y, state.h);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Eigen::Index n_b = lengths[static_cast<std::size_t>(b)];
      if (n_b == 0) continue;
      const bool real = batch.mask(t, b);
      const S w_nll = real ? S(1) / (active * static_cast<S>(n_b)) : S(0);
      const S w_pen = S(1) / (active * static_cast<S>(L));
      const int pen = target_pen(batch.steps[ts], b);
      StepLoss<S> loss;
      if (need_grad) {
        auto g = d_out[ts].col(b);
        loss = mixture_step_loss(y.col(b), M, inputs[ts](0, b), inputs[ts](1, b), pen_from_index(pen), w_nll,
                                 w_pen, &g);
      } else {
        loss = mixture_step_loss(y.col(b), M, inputs[ts](0, b), inputs[ts](1, b), pen_from_index(pen), w_nll,
                                 w_pen, static_cast<Eigen::MatrixBase<VectorX<S>>*>(nullptr));
      }
      j_d += w_nll * loss.nll;
      j_ps += w_pen * loss.pen;
      if (real) {
        ++out.real_steps;
        if (loss.predicted_pen == pen) ++out.correct_pen;
      }
    }
    if (need_grad) dec_h.push_back(state.h);
    previous = inputs[ts];
  }

  S j_kl = 0;
  for (Eigen::Index b = 0; b < B; ++b)
    if (lengths[static_cast<std::size_t>(b)] > 0) j_kl += kl_loss<S>(enc.mu.col(b), enc.sigma_hat.col(b));
  j_kl /= active;

  const double w_kl = kl_weight(step, c.kl_weight_start, c.kl_anneal);
  out.reconstruction = static_cast<double>(j_d);
  out.pen = static_cast<double>(j_ps);
  out.kl = static_cast<double>(j_kl);
  out.kl_weight = w_kl;
  out.total = out.reconstruction + out.pen + w_kl * out.kl;
  if (!need_grad) return out;

  // Backward.
  auto& g = *grads;
  MatrixX<S> dh = MatrixX<S>::Zero(H, B);
  MatrixX<S> dc = MatrixX<S>::Zero(H, B);
  MatrixX<S> dz = MatrixX<S>::Zero(c.latent, B);
  for (Eigen::Index t = L; t-- > 0;) {
    const auto ts = static_cast<std::size_t>(t);
    g.w_y.noalias() += d_out[ts] * dec_h[ts].transpose();
    g.b_y += d_out[ts].rowwise().sum();
    dh.noalias() += p.w_y.transpose() * d_out[ts];
    LstmStepGrad<S> sg = lstm_step_backward<S>(p.decoder, dec_caches[ts], dh, dc, g.decoder);
    dz += sg.dx.bottomRows(c.latent);
    dh = std::move(sg.dh_prev);
    dc = std::move(sg.dc_prev);
  }
  MatrixX<S> d_init(2 * H, B);
  d_init << dh, dc;
  d_init.array() *= S(1) - init.array().square();
  g.w_z.noalias() += d_init * z.transpose();
  g.b_z += d_init.rowwise().sum();
  dz.noalias() += p.w_z.transpose() * d_init;

  const auto w = static_cast<S>(w_kl);
  const auto n_z = static_cast<S>(c.latent);
  MatrixX<S> d_mu = dz;
  MatrixX<S> d_sigma_hat = (dz.array() * noise.latent.array() * spread.array() / S(2)).matrix();
  for (Eigen::Index b = 0; b < B; ++b) {
    if (lengths[static_cast<std::size_t>(b)] == 0) continue;
    d_mu.col(b) += (w / (active * n_z)) * enc.mu.col(b);
    d_sigma_hat.col(b) += (w / (S(2) * active * n_z)) * (enc.sigma_hat.col(b).array().exp() - S(1)).matrix();
  }
  g.w_mu.noalias() += d_mu * enc.hidden.transpose();
  g.b_mu += d_mu.rowwise().sum();
  g.w_sigma.noalias() += d_sigma_hat * enc.hidden.transpose();
  g.b_sigma += d_sigma_hat.rowwise().sum();
  const MatrixX<S> d_hidden = p.w_mu.transpose() * d_mu + p.w_sigma.transpose() * d_sigma_hat;

  const Eigen::Index He = c.enc_hidden;
  backprop_direction(p.encoder_forward, fwd_caches, batch.mask, false, MatrixX<S>(d_hidden.topRows(He)),
                     g.encoder_forward);
  backprop_direction(p.encoder_backward, bwd_caches, batch.mask, true, MatrixX<S>(d_hidden.bottomRows(He)),
                     g.encoder_backward);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void augment_batch(StrokeBatch& batch, Rng& rng, double low, double high) {
  std::uniform_real_distribution<double> factor(low, high);
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    const Eigen::Index n = batch.row_length(b);
    if (n == 0) continue;
    const double sx = factor(rng);
    const double sy = factor(rng);
    for (Eigen::Index t = 0; t < n; ++t) {
      batch.steps[static_cast<std::size_t>(t)](0, b) *= sx;
      batch.steps[static_cast<std::size_t>(t)](1, b) *= sy;
    }
  }
}

bool has_strokes(const StrokeBatch& batch) {
  return batch.mask.any();
}

}  // namespace

template <typename S>
std::vector<StepRecord> train(VaeModel<S>& m, OptimizerState<S>& state, std::span<const Sketch> sketches,
                              const TrainOptions<S>& options, Rng& rng) {
  m.config.validate();
  if (sketches.empty()) throw std::invalid_argument("train: empty corpus");
  if (options.epochs < 0) throw std::invalid_argument("train: negative epoch count");
  const AdamConfig adam{m.config.learning_rate, 0.9, 0.999, 1e-8};
  std::vector<StepRecord> history;
  std::vector<std::size_t> order(sketches.size());

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Sketch> shuffled;
    shuffled.reserve(order.size());
    for (auto i : order) shuffled.push_back(sketches[i]);

    std::vector<StrokeBatch> batches =
        make_stroke_batches(shuffled, static_cast<std::size_t>(m.config.batch));
    for (std::size_t k = 0; k < batches.size(); ++k) {
      StrokeBatch& batch = batches[k];
      if (!has_strokes(batch)) continue;
      if (options.augment) augment_batch(batch, rng, m.config.augment_low, m.config.augment_high);
      const ForwardNoise<S> noise = ForwardNoise<S>::sample(m.config, batch.length(), batch.rows(), rng);
      VaeParams<S> grads = VaeParams<S>::zeros(m.config);
      const LossBreakdown loss = total_loss(m, batch, state.step, noise, &grads);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << state.step << " (epoch " << epoch << ", batch " << k
            << "): J_d=" << loss.reconstruction << " J_ps=" << loss.pen << " J_KL=" << loss.kl;
        throw std::runtime_error(msg.str());
      }
      history.push_back({state.step, epoch, loss.reconstruction, loss.pen, loss.kl, loss.kl_weight, loss.total});

      auto grad_views = parameter_views(grads);
      auto param_views = parameter_views(m.params);
      clip_gradients(grad_views, static_cast<S>(m.config.clip));
      adam_update(param_views, grad_views, state, adam);
    }
    if (options.on_epoch) options.on_epoch(epoch, m, state);
  }
  return history;
}

template <typename S>
LossBreakdown evaluate(const VaeModel<S>& m, std::span<const Sketch> sketches, std::int64_t step) {
  LossBreakdown sum;
  sum.kl_weight = kl_weight(step, m.config.kl_weight_start, m.config.kl_anneal);
  double rows = 0.0;
  for (const auto& batch : make_stroke_batches(sketches, static_cast<std::size_t>(m.config.batch))) {
    if (!has_strokes(batch)) continue;
    const auto noise = ForwardNoise<S>::deterministic(m.config, batch.length(), batch.rows());
    const LossBreakdown l = total_loss<S>(m, batch, step, noise, nullptr);
    const auto a = static_cast<double>(l.active_rows);
    sum.reconstruction += a * l.reconstruction;
    sum.pen += a * l.pen;
    sum.kl += a * l.kl;
    sum.real_steps += l.real_steps;
    sum.correct_pen += l.correct_pen;
    sum.active_rows += l.active_rows;
    rows += a;
  }
  if (rows > 0.0) {
    sum.reconstruction /= rows;
    sum.pen /= rows;
    sum.kl /= rows;
  }
  sum.total = sum.reconstruction + sum.pen + sum.kl_weight * sum.kl;
  return sum;
}

template <typename S>
Sketch reconstruct_sketch(const VaeModel<S>& m, const Sketch& sketch, double tau, Rng& rng, LatentMode mode,
                          int max_len) {
  Sketch out;
  out.category = sketch.category;
  for (const auto& stroke : sketch.strokes) {
    if (stroke.points.empty()) throw std::invalid_argument("reconstruct_sketch: empty stroke");
    const OffsetStroke offsets = to_offsets(stroke);
    const Encoding<S> e = encode(m, std::span<const Point5>(offsets));
    const MatrixX<S> z = mode == LatentMode::Mean ? e.mu : sample_latent<S>(e.mu, e.sigma_hat, rng);
    // Without an explicit cap or a configured one, allow twice the input length.
    int cap = max_len > 0 ? max_len : m.config.max_len;
    if (cap <= 0) cap = std::max(2, 2 * static_cast<int>(offsets.size()));
    const OffsetStroke sampled = decode_sample<S>(m, z.col(0), tau, rng, cap);
    Stroke s;
    s.points = from_offsets(sampled);
    if (s.points.size() == 1) s.points.push_back(s.points.front());
    s.label = stroke.label;
    out.strokes.push_back(std::move(s));
  }
  return out;
}

template <typename S>
MatrixX<S> encoder_features(const VaeModel<S>& m, std::span<const Stroke> strokes) {
  constexpr std::size_t chunk = 64;
  MatrixX<S> out(2 * m.config.enc_hidden, static_cast<Eigen::Index>(strokes.size()));
  for (std::size_t begin = 0; begin < strokes.size(); begin += chunk) {
    const std::size_t end = std::min(strokes.size(), begin + chunk);
    std::vector<OffsetStroke> rows;
    for (std::size_t i = begin; i < end; ++i) {
      if (strokes[i].points.empty()) throw std::invalid_argument("encoder_features: empty stroke");
      rows.push_back(to_offsets(strokes[i]));
    }
    const Encoding<S> e = encode(m, make_batch(rows));
    out.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) = e.hidden;
  }
  return out;
}

int stroke_length_quantile(std::span<const Sketch> sketches, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw std::invalid_argument("quantile must lie in (0, 1]");
  std::vector<std::size_t> lengths;
  for (const auto& s : sketches)
    for (const auto& stroke : s.strokes) lengths.push_back(stroke.points.size());
  if (lengths.empty()) throw std::invalid_argument("stroke_length_quantile: no strokes");
  std::sort(lengths.begin(), lengths.end());
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(lengths.size())));
  return static_cast<int>(lengths[std::max<std::size_t>(rank, 1) - 1]);
}

#define STROKESEG_INSTANTIATE_VAE(T)                                                                        \
  template struct VaeParams<T>;                                                                              \
  template struct ForwardNoise<T>;                                                                           \
  template Encoding<T> encode<T>(const VaeModel<T>&, const StrokeBatch&);                                    \
  template Encoding<T> encode<T>(const VaeModel<T>&, std::span<const Point5>);                               \
  template MatrixX<T> sample_latent<T>(const MatrixX<T>&, const MatrixX<T>&, Rng&);                          \
  template LstmState<T> init_decoder<T>(const VaeModel<T>&, const MatrixX<T>&);                              \
  template std::vector<VectorX<T>> decode_teacher_forced<T>(const VaeModel<T>&, const VectorX<T>&,           \
                                                            std::span<const Point5>);                        \
  template OffsetStroke decode_sample<T>(const VaeModel<T>&, const VectorX<T>&, double, Rng&, int);          \
  template T kl_loss<T>(const VectorX<T>&, const VectorX<T>&);                                               \
  template LossBreakdown total_loss<T>(const VaeModel<T>&, const StrokeBatch&, std::int64_t,                 \
                                       const ForwardNoise<T>&, VaeParams<T>*);                               \
  template std::vector<StepRecord> train<T>(VaeModel<T>&, OptimizerState<T>&, std::span<const Sketch>,       \
                                            const TrainOptions<T>&, Rng&);                                   \
  template LossBreakdown evaluate<T>(const VaeModel<T>&, std::span<const Sketch>, std::int64_t);             \
  template Sketch reconstruct_sketch<T>(const VaeModel<T>&, const Sketch&, double, Rng&, LatentMode, int);   \
  template MatrixX<T> encoder_features<T>(const VaeModel<T>&, std::span<const Stroke>);

STROKESEG_INSTANTIATE_VAE(float)
STROKESEG_INSTANTIATE_VAE(double)

#undef STROKESEG_INSTANTIATE_VAE

}  // namespace strokeseg
