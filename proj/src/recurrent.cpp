#include "strokeseg/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace strokeseg {

template <typename Scalar>
MatrixX<Scalar> xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("xavier_init needs positive dimensions");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  MatrixX<Scalar> m(rows, cols);
  // Column-major fill order keeps draws reproducible for a given seed.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(dist(rng));
  return m;
}

template <typename Scalar>
MatrixX<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0) || keep_prob > 1.0) throw std::invalid_argument("keep probability must lie in (0, 1]");
  if (keep_prob == 1.0) return MatrixX<Scalar>::Ones(rows, cols);
  std::bernoulli_distribution keep(keep_prob);
  const auto scale = static_cast<Scalar>(1.0 / keep_prob);
  MatrixX<Scalar> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : Scalar(0);
  return m;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
MatrixX<Scalar> layer_norm_columns(const std::type_identity_t<Eigen::Ref<const MatrixX<Scalar>>>& x,
                                   const std::type_identity_t<Eigen::Ref<const VectorX<Scalar>>>& gain,
                                   const std::type_identity_t<Eigen::Ref<const VectorX<Scalar>>>& bias,
                                   std::type_identity_t<Scalar> eps, LayerNormCache<Scalar>* cache) {
  const auto n = static_cast<Scalar>(x.rows());
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean = x.colwise().sum() / n;
  MatrixX<Scalar> centered = x.rowwise() - mean;
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inv_std =
      ((centered.array().square().colwise().sum() / n) + eps).rsqrt().matrix();
  MatrixX<Scalar> normalized = centered.array().rowwise() * inv_std.array();
  MatrixX<Scalar> out = (normalized.array().colwise() * gain.array()).colwise() + bias.array();
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
  }
  return out;
}

template <typename Scalar>
VectorX<Scalar> layer_norm(const VectorX<Scalar>& v, const VectorX<Scalar>& gain,
                           const VectorX<Scalar>& bias, std::type_identity_t<Scalar> eps) {
  if (v.size() < 2) throw std::invalid_argument("layer_norm needs at least two entries");
  return layer_norm_columns<Scalar>(v, gain, bias, eps, nullptr);
}

template <typename Scalar>
MatrixX<Scalar> layer_norm_backward(const std::type_identity_t<Eigen::Ref<const MatrixX<Scalar>>>& d_out,
                                    const LayerNormCache<Scalar>& cache,
                                    const std::type_identity_t<Eigen::Ref<const VectorX<Scalar>>>& gain,
                                    std::type_identity_t<Eigen::Ref<VectorX<Scalar>>> d_gain,
                                    std::type_identity_t<Eigen::Ref<VectorX<Scalar>>> d_bias) {
  const auto& xhat = cache.normalized;
  d_gain += (d_out.array() * xhat.array()).rowwise().sum().matrix();
  d_bias += d_out.rowwise().sum();
  const MatrixX<Scalar> d_xhat = d_out.array().colwise() * gain.array();
  const auto n = static_cast<Scalar>(xhat.rows());
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean_d = d_xhat.colwise().sum() / n;
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean_dx = (d_xhat.array() * xhat.array()).colwise().sum() / n;
  MatrixX<Scalar> dx = (d_xhat.array().rowwise() - mean_d.array()) - xhat.array().rowwise() * mean_dx.array();
  return dx.array().rowwise() * cache.inv_std.array();
}

// ---------------------------------------------------------------------------

template <typename S>
LstmParams<S> LstmParams<S>::init(Eigen::Index input, Eigen::Index hidden, Rng& rng) {
  if (hidden < 2) throw std::invalid_argument("LSTM hidden size must be at least 2 for layer norm");
  LstmParams p;
  p.w_input = xavier_init<S>(4 * hidden, input, rng);
  p.w_recurrent = xavier_init<S>(4 * hidden, hidden, rng);
  p.bias = VectorX<S>::Zero(4 * hidden);
  p.gate_gain = VectorX<S>::Ones(4 * hidden);
  p.gate_bias = VectorX<S>::Zero(4 * hidden);
  p.cell_gain = VectorX<S>::Ones(hidden);
  p.cell_bias = VectorX<S>::Zero(hidden);
  return p;
}

template <typename S>
LstmParams<S> LstmParams<S>::zeros(Eigen::Index input, Eigen::Index hidden) {
  LstmParams p;
  p.w_input = MatrixX<S>::Zero(4 * hidden, input);
  p.w_recurrent = MatrixX<S>::Zero(4 * hidden, hidden);
  p.bias = VectorX<S>::Zero(4 * hidden);
  p.gate_gain = VectorX<S>::Zero(4 * hidden);
  p.gate_bias = VectorX<S>::Zero(4 * hidden);
  p.cell_gain = VectorX<S>::Zero(hidden);
  p.cell_bias = VectorX<S>::Zero(hidden);
  return p;
}

namespace {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-a).exp()).inverse();
}

}  // namespace

template <typename Scalar>
LstmState<Scalar> lstm_step(const LstmParams<Scalar>& p,
                            const std::type_identity_t<Eigen::Ref<const MatrixX<Scalar>>>& x,
                            const LstmState<Scalar>& prev, const MatrixX<Scalar>* dropout,
                            LstmStepCache<Scalar>* cache) {
  const Eigen::Index H = p.hidden_size();
  const Eigen::Index B = x.cols();
  if (x.rows() != p.input_size() || prev.h.rows() != H || prev.c.rows() != H || prev.h.cols() != B ||
      prev.c.cols() != B)
    throw std::invalid_argument("lstm_step: shape mismatch");
  if (dropout != nullptr && (dropout->rows() != H || dropout->cols() != B))
    throw std::invalid_argument("lstm_step: dropout mask shape mismatch");

  MatrixX<Scalar> pre = p.w_input * x + p.w_recurrent * prev.h;
  pre.colwise() += p.bias;

  const auto eps = static_cast<Scalar>(kLayerNormEps);
  MatrixX<Scalar> gates(4 * H, B);
  for (int k = 0; k < 4; ++k)
    gates.middleRows(k * H, H) = layer_norm_columns<Scalar>(
        pre.middleRows(k * H, H), p.gate_gain.segment(k * H, H), p.gate_bias.segment(k * H, H), eps,
        cache != nullptr ? &cache->gate_norm[k] : nullptr);

  MatrixX<Scalar> i = sigmoid(gates.middleRows(0, H).array()).matrix();
  MatrixX<Scalar> f = sigmoid(gates.middleRows(H, H).array()).matrix();
  MatrixX<Scalar> o = sigmoid(gates.middleRows(2 * H, H).array()).matrix();
  MatrixX<Scalar> g = gates.middleRows(3 * H, H).array().tanh().matrix();

  LstmState<Scalar> next;
  if (dropout != nullptr)
    next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(g.cwiseProduct(*dropout));
  else
    next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);

  LayerNormCache<Scalar>* cell_cache = cache != nullptr ? &cache->cell_norm : nullptr;
  MatrixX<Scalar> cell_tanh =
      layer_norm_columns<Scalar>(next.c, p.cell_gain, p.cell_bias, eps, cell_cache).array().tanh().matrix();
  next.h = o.cwiseProduct(cell_tanh);

  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->input_gate = std::move(i);
    cache->forget_gate = std::move(f);
    cache->output_gate = std::move(o);
    cache->candidate = std::move(g);
    cache->dropout = dropout != nullptr ? *dropout : MatrixX<Scalar>();
    cache->cell_tanh = std::move(cell_tanh);
  }
  return next;
}

template <typename Scalar>
LstmStepGrad<Scalar> lstm_step_backward(const LstmParams<Scalar>& p, const LstmStepCache<Scalar>& cache,
                                        const MatrixX<Scalar>& dh, const MatrixX<Scalar>& dc,
                                        LstmParams<Scalar>& grads) {
  const Eigen::Index H = p.hidden_size();
  const Eigen::Index B = dh.cols();
  const auto& i = cache.input_gate;
  const auto& f = cache.forget_gate;
  const auto& o = cache.output_gate;
  const auto& g = cache.candidate;
  const bool has_dropout = cache.dropout.size() > 0;

  const MatrixX<Scalar> d_o = dh.cwiseProduct(cache.cell_tanh);
  const MatrixX<Scalar> d_cell_norm =
      (dh.array() * o.array() * (Scalar(1) - cache.cell_tanh.array().square())).matrix();
  MatrixX<Scalar> d_c = dc + layer_norm_backward<Scalar>(d_cell_norm, cache.cell_norm, p.cell_gain,
                                                         grads.cell_gain, grads.cell_bias);

  MatrixX<Scalar> d_gates(4 * H, B);
  const MatrixX<Scalar> dropped = has_dropout ? g.cwiseProduct(cache.dropout) : g;
  MatrixX<Scalar> d_g = d_c.cwiseProduct(i);
  if (has_dropout) d_g = d_g.cwiseProduct(cache.dropout);
  d_gates.middleRows(0, H) = (d_c.array() * dropped.array() * i.array() * (Scalar(1) - i.array())).matrix();
  d_gates.middleRows(H, H) = (d_c.array() * cache.c_prev.array() * f.array() * (Scalar(1) - f.array())).matrix();
  d_gates.middleRows(2 * H, H) = (d_o.array() * o.array() * (Scalar(1) - o.array())).matrix();
  d_gates.middleRows(3 * H, H) = (d_g.array() * (Scalar(1) - g.array().square())).matrix();

  MatrixX<Scalar> d_pre(4 * H, B);
  for (int k = 0; k < 4; ++k)
    d_pre.middleRows(k * H, H) = layer_norm_backward<Scalar>(
        d_gates.middleRows(k * H, H), cache.gate_norm[k], p.gate_gain.segment(k * H, H),
        grads.gate_gain.segment(k * H, H), grads.gate_bias.segment(k * H, H));

  grads.w_input.noalias() += d_pre * cache.x.transpose();
  grads.w_recurrent.noalias() += d_pre * cache.h_prev.transpose();
  grads.bias += d_pre.rowwise().sum();

  LstmStepGrad<Scalar> out;
  out.dx.noalias() = p.w_input.transpose() * d_pre;
  out.dh_prev.noalias() = p.w_recurrent.transpose() * d_pre;
  out.dc_prev = d_c.cwiseProduct(f);
  return out;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
void clip_gradients(std::vector<ParamView<Scalar>>& grads, std::type_identity_t<Scalar> threshold) {
  if (!(threshold > Scalar(0))) throw std::invalid_argument("clip threshold must be positive");
  for (auto& g : grads) g = g.cwiseMax(-threshold).cwiseMin(threshold);
}

template <typename Scalar>
void adam_update(std::vector<ParamView<Scalar>>& params, const std::vector<ParamView<Scalar>>& grads,
                 OptimizerState<Scalar>& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_update: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(VectorX<Scalar>::Zero(p.size()));
      state.second_moment.push_back(VectorX<Scalar>::Zero(p.size()));
    }
  }
  if (state.first_moment.size() != params.size()) throw std::invalid_argument("adam_update: optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const auto b1 = static_cast<Scalar>(config.beta1);
  const auto b2 = static_cast<Scalar>(config.beta2);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(config.beta1, t));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(config.beta2, t));
  const auto lr = static_cast<Scalar>(config.learning_rate);
  const auto eps = static_cast<Scalar>(config.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || params[k].size() != state.first_moment[k].size())
      throw std::invalid_argument("adam_update: block shape mismatch");
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    m = b1 * m + (Scalar(1) - b1) * grads[k];
    v = b2 * v + (Scalar(1) - b2) * grads[k].cwiseAbs2();
    if (lr != Scalar(0))
      params[k].array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  }
}

template <typename Scalar>
VectorX<Scalar> flatten(const std::vector<ParamView<Scalar>>& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  VectorX<Scalar> theta(total);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    theta.segment(offset, b.size()) = b;
    offset += b.size();
  }
  return theta;
}

template <typename Scalar>
void unflatten(const VectorX<Scalar>& theta, std::vector<ParamView<Scalar>>& blocks) {
  Eigen::Index offset = 0;
  for (auto& b : blocks) {
    if (offset + b.size() > theta.size()) throw std::invalid_argument("unflatten: vector too short");
    b = theta.segment(offset, b.size());
    offset += b.size();
  }
  if (offset != theta.size()) throw std::invalid_argument("unflatten: vector too long");
}

template <typename Scalar>
GradientCheckResult finite_difference_check(const std::type_identity_t<GradientFunction<Scalar>>& loss,
                                            const VectorX<Scalar>& theta, std::type_identity_t<Scalar> h,
                                            std::type_identity_t<Scalar> floor) {
  if (!(h > Scalar(0))) throw std::invalid_argument("finite difference step must be positive");
  VectorX<Scalar> analytic = VectorX<Scalar>::Zero(theta.size());
  loss(theta, &analytic);
  GradientCheckResult result;
  VectorX<Scalar> probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe(i) = theta(i) + h;
    const Scalar plus = loss(probe, nullptr);
    probe(i) = theta(i) - h;
    const Scalar minus = loss(probe, nullptr);
    probe(i) = theta(i);
    const Scalar numeric = (plus - minus) / (Scalar(2) * h);
    const Scalar scale = std::max({std::abs(analytic(i)), std::abs(numeric), floor});
    const double rel = static_cast<double>(std::abs(analytic(i) - numeric) / scale);
    if (rel > result.max_relative_error || result.worst_index < 0) {
      result.max_relative_error = rel;
      result.worst_index = i;
      result.analytic = static_cast<double>(analytic(i));
      result.numeric = static_cast<double>(numeric);
    }
  }
  return result;
}

#define STROKESEG_INSTANTIATE_RECURRENT(T)                                                              \
  template MatrixX<T> xavier_init<T>(Eigen::Index, Eigen::Index, Rng&);                                  \
  template MatrixX<T> dropout_mask<T>(Eigen::Index, Eigen::Index, double, Rng&);                         \
  template MatrixX<T> layer_norm_columns<T>(const Eigen::Ref<const MatrixX<T>>&,                         \
                                            const Eigen::Ref<const VectorX<T>>&,                         \
                                            const Eigen::Ref<const VectorX<T>>&, T, LayerNormCache<T>*); \
  template VectorX<T> layer_norm<T>(const VectorX<T>&, const VectorX<T>&, const VectorX<T>&, T);         \
  template MatrixX<T> layer_norm_backward<T>(const Eigen::Ref<const MatrixX<T>>&,                        \
                                             const LayerNormCache<T>&,                                   \
                                             const Eigen::Ref<const VectorX<T>>&,                        \
                                             Eigen::Ref<VectorX<T>>, Eigen::Ref<VectorX<T>>);            \
  template struct LstmParams<T>;                                                                         \
  template LstmState<T> lstm_step<T>(const LstmParams<T>&, const Eigen::Ref<const MatrixX<T>>&,          \
                                     const LstmState<T>&, const MatrixX<T>*, LstmStepCache<T>*);         \
  template LstmStepGrad<T> lstm_step_backward<T>(const LstmParams<T>&, const LstmStepCache<T>&,          \
                                                 const MatrixX<T>&, const MatrixX<T>&, LstmParams<T>&);  \
  template void clip_gradients<T>(std::vector<ParamView<T>>&, T);                                        \
  template void adam_update<T>(std::vector<ParamView<T>>&, const std::vector<ParamView<T>>&,             \
                               OptimizerState<T>&, const AdamConfig&);                                   \
  template VectorX<T> flatten<T>(const std::vector<ParamView<T>>&);                                      \
  template void unflatten<T>(const VectorX<T>&, std::vector<ParamView<T>>&);                             \
  template GradientCheckResult finite_difference_check<T>(const GradientFunction<T>&, const VectorX<T>&, \
                                                          T, T);

STROKESEG_INSTANTIATE_RECURRENT(float)
STROKESEG_INSTANTIATE_RECURRENT(double)

#undef STROKESEG_INSTANTIATE_RECURRENT

}  // namespace strokeseg
