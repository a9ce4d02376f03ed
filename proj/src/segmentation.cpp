#include "strokeseg/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace strokeseg {

using json = nlohmann::json;

namespace {

constexpr double kProbFloor = 1e-12;

template <typename S>
MatrixX<S> softmax_columns(const MatrixX<S>& logits) {
  MatrixX<S> e = (logits.rowwise() - logits.colwise().maxCoeff()).array().exp().matrix();
  return e.array().rowwise() / e.colwise().sum().array();
}

template <typename S>
struct SegCache {
  MatrixX<S> a1, h1, a2, h2, probs;
};

template <typename S>
void forward_cached(const SegModel<S>& m, const MatrixX<S>& x, const SegNoise<S>& noise, SegCache<S>& c) {
  if (x.rows() != m.input_size())
    throw std::invalid_argument("feature length " + std::to_string(x.rows()) + " does not match the model input " +
                                std::to_string(m.input_size()));
  const auto& p = m.params;
  c.a1 = (p.w_hidden1 * x).colwise() + p.b_hidden1;
  c.h1 = c.a1.cwiseMax(S(0));
  if (noise.hidden1.size() > 0) c.h1.array() *= noise.hidden1.array();
  c.a2 = (p.w_hidden2 * c.h1).colwise() + p.b_hidden2;
  c.h2 = c.a2.cwiseMax(S(0));
  if (noise.hidden2.size() > 0) c.h2.array() *= noise.hidden2.array();
  c.probs = softmax_columns<S>((p.w_out * c.h2).colwise() + p.b_out);
}

template <typename S>
MatrixX<S> gather(const MatrixX<S>& features, std::span<const std::size_t> idx) {
  MatrixX<S> out(features.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = features.col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

/// Weights for the classes seen in training; absent classes never enter the
/// loss, so their weight is left at zero.
Eigen::VectorXd training_weights(std::span<const int> labels, std::span<const std::size_t> idx, Eigen::Index classes) {
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(classes), 0);
  for (auto i : idx) ++counts[static_cast<std::size_t>(labels[i])];
  std::vector<Eigen::Index> present;
  for (auto c : counts)
    if (c > 0) present.push_back(c);
  const Eigen::VectorXd w = class_weights(present);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(classes);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < classes; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0) out(c) = w(k++);
  return out;
}

}  // namespace

template <typename S>
SegParams<S> SegParams<S>::init(Eigen::Index input, const SegConfig& config, Eigen::Index classes, Rng& rng) {
  SegParams p = zeros(input, config, classes);
  p.w_hidden1 = xavier_init<S>(config.hidden1, input, rng);
  p.w_hidden2 = xavier_init<S>(config.hidden2, config.hidden1, rng);
  p.w_out = xavier_init<S>(classes, config.hidden2, rng);
  return p;
}

template <typename S>
SegParams<S> SegParams<S>::zeros(Eigen::Index input, const SegConfig& config, Eigen::Index classes) {
  if (input < 1 || classes < 2) throw std::invalid_argument("segmenter needs a non-empty input and at least two classes");
  return {MatrixX<S>::Zero(config.hidden1, input), VectorX<S>::Zero(config.hidden1),
          MatrixX<S>::Zero(config.hidden2, config.hidden1), VectorX<S>::Zero(config.hidden2),
          MatrixX<S>::Zero(classes, config.hidden2), VectorX<S>::Zero(classes)};
}

template <typename S>
SegModel<S> SegModel<S>::init(Eigen::Index input, const SegConfig& config, std::vector<std::string> classes, Rng& rng) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(classes.size());
  return {config, std::move(classes), SegParams<S>::init(input, config, n, rng)};
}

template <typename S>
SegNoise<S> SegNoise<S>::sample(const SegModel<S>& m, Eigen::Index batch, Rng& rng) {
  if (m.config.keep_prob >= 1.0) return {};
  return {dropout_mask<S>(m.config.hidden1, batch, m.config.keep_prob, rng),
          dropout_mask<S>(m.config.hidden2, batch, m.config.keep_prob, rng)};
}

template <typename S>
MatrixX<S> seg_forward(const SegModel<S>& m, const std::type_identity_t<MatrixX<S>>& features, bool training,
                       Rng& rng) {
  SegCache<S> c;
  const SegNoise<S> noise = training ? SegNoise<S>::sample(m, features.cols(), rng) : SegNoise<S>{};
  forward_cached(m, features, noise, c);
  return c.probs;
}

Eigen::VectorXd class_weights(std::span<const Eigen::Index> counts) {
  if (counts.empty()) throw std::invalid_argument("class_weights: no classes");
  double total = 0.0;
  for (auto c : counts) {
    if (c <= 0) throw std::invalid_argument("class_weights: class absent from the training data");
    total += static_cast<double>(c);
  }
  Eigen::VectorXd neg(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) neg(static_cast<Eigen::Index>(i)) = -static_cast<double>(counts[i]) / total;
  const Eigen::ArrayXd e = (neg.array() - neg.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

double seg_loss(const Eigen::Ref<const Eigen::VectorXd>& probs, int true_class,
                const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (probs.size() != weights.size()) throw std::invalid_argument("seg_loss: probability/weight length mismatch");
  if (true_class < 0 || true_class >= probs.size()) throw std::out_of_range("seg_loss: class index out of range");
  const double p = probs(true_class);
  return -weights(true_class) * std::log(p < kProbFloor ? kProbFloor : p);
}

template <typename S>
double seg_batch_loss(const SegModel<S>& m, const std::type_identity_t<MatrixX<S>>& features,
                      std::span<const int> labels, const Eigen::VectorXd& weights, const SegNoise<S>& noise,
                      SegParams<S>* grads) {
  const Eigen::Index b = features.cols();
  if (static_cast<std::size_t>(b) != labels.size()) throw std::invalid_argument("one label per feature column expected");
  if (weights.size() != m.class_count()) throw std::invalid_argument("one weight per class expected");
  if (b == 0) return 0.0;
  SegCache<S> c;
  forward_cached(m, features, noise, c);

  double loss = 0.0;
  for (Eigen::Index j = 0; j < b; ++j)
    loss += seg_loss(c.probs.col(j).template cast<double>(), labels[static_cast<std::size_t>(j)], weights);
  loss /= static_cast<double>(b);
  if (grads == nullptr) return loss;

  // d/do of -w_c log softmax(o)_c is w_c (p - onehot).
  MatrixX<S> d_out = c.probs;
  for (Eigen::Index j = 0; j < b; ++j) {
    const int cls = labels[static_cast<std::size_t>(j)];
    d_out(cls, j) -= S(1);
    d_out.col(j) *= static_cast<S>(weights(cls) / static_cast<double>(b));
  }
  const auto& p = m.params;
  grads->w_out.noalias() += d_out * c.h2.transpose();
  grads->b_out += d_out.rowwise().sum();
  MatrixX<S> d2 = p.w_out.transpose() * d_out;
  if (noise.hidden2.size() > 0) d2.array() *= noise.hidden2.array();
  d2.array() *= (c.a2.array() > S(0)).template cast<S>();
  grads->w_hidden2.noalias() += d2 * c.h1.transpose();
  grads->b_hidden2 += d2.rowwise().sum();
  MatrixX<S> d1 = p.w_hidden2.transpose() * d2;
  if (noise.hidden1.size() > 0) d1.array() *= noise.hidden1.array();
  d1.array() *= (c.a1.array() > S(0)).template cast<S>();
  grads->w_hidden1.noalias() += d1 * features.transpose();
  grads->b_hidden1 += d1.rowwise().sum();
  return loss;
}

template <typename S>
std::vector<int> predict(const SegModel<S>& m, const std::type_identity_t<MatrixX<S>>& features) {
  SegCache<S> c;
  forward_cached(m, features, SegNoise<S>{}, c);
  std::vector<int> out(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    Eigen::Index arg = 0;
    c.probs.col(j).maxCoeff(&arg);
    out[static_cast<std::size_t>(j)] = static_cast<int>(arg);
  }
  return out;
}

double evaluate_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and ground-truth lengths differ");
  if (truth.empty()) throw std::invalid_argument("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

template <typename S>
SegTrainResult<S> train_segmenter(const std::type_identity_t<MatrixX<S>>& features, std::span<const int> labels,
                                  std::vector<std::string> classes, const SegConfig& config, Rng& rng) {
  const auto n = static_cast<std::size_t>(features.cols());
  if (labels.size() != n) throw std::invalid_argument("one label per feature column expected");
  if (n == 0) throw std::invalid_argument("no training examples");
  const auto class_count = static_cast<int>(classes.size());
  for (int l : labels)
    if (l < 0 || l >= class_count) throw std::out_of_range("label index out of range");

  SegTrainResult<S> result{SegModel<S>::init(features.rows(), config, std::move(classes), rng), 0, {}, {}};
  SegModel<S>& m = result.model;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val =
      std::min(n - 1, static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n))));
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const std::vector<std::size_t>& monitor_idx = n_val > 0 ? val_idx : train_idx;

  result.weights = training_weights(labels, train_idx, m.class_count());
  const MatrixX<S> monitor_x = gather<S>(features, monitor_idx);
  std::vector<int> monitor_y;
  for (auto i : monitor_idx) monitor_y.push_back(labels[i]);

  auto monitor = [&](EpochRecord& r) {
    r.monitor_loss = seg_batch_loss<S>(m, monitor_x, monitor_y, result.weights, SegNoise<S>{}, nullptr);
    r.monitor_accuracy = evaluate_accuracy(predict<S>(m, monitor_x), monitor_y);
  };
  EpochRecord initial;
  monitor(initial);
  double best_acc = initial.monitor_accuracy, best_loss = initial.monitor_loss;
  SegParams<S> best = m.params;

  OptimizerState<S> state;
  const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
  const auto batch = static_cast<std::size_t>(config.batch);
  int stale = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < train_idx.size(); start += batch) {
      const std::span<const std::size_t> idx(train_idx.data() + start, std::min(batch, train_idx.size() - start));
      const MatrixX<S> x = gather<S>(features, idx);
      std::vector<int> y;
      for (auto i : idx) y.push_back(labels[i]);
      auto grads = SegParams<S>::zeros(m.input_size(), m.config, m.class_count());
      const double loss = seg_batch_loss<S>(m, x, y, result.weights, SegNoise<S>::sample(m, x.cols(), rng), &grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("segmentation loss became non-finite at epoch " + std::to_string(epoch));
      rec.train_loss += loss * static_cast<double>(idx.size());
      auto pv = parameter_views(m.params);
      auto gv = parameter_views(grads);
      adam_update(pv, gv, state, adam);
    }
    rec.train_loss /= static_cast<double>(train_idx.size());
    monitor(rec);
    result.history.push_back(rec);
    if (rec.monitor_accuracy > best_acc || (rec.monitor_accuracy == best_acc && rec.monitor_loss < best_loss)) {
      best_acc = rec.monitor_accuracy;
      best_loss = rec.monitor_loss;
      best = m.params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  m.params = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, Rng& rng) {
  if (k < 2) throw std::invalid_argument("cross validation needs at least two folds");
  if (n < static_cast<std::size_t>(k))
    throw std::invalid_argument("cannot split " + std::to_string(n) + " sketches into " + std::to_string(k) + " folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  const auto kk = static_cast<std::size_t>(k);
  for (std::size_t f = 0; f < kk; ++f)
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(f * n / kk),
                    order.begin() + static_cast<std::ptrdiff_t>((f + 1) * n / kk));
  return folds;
}

FoldTrainer mlp_fold_trainer(std::vector<std::string> classes, SegConfig config) {
  return [classes = std::move(classes), config](std::span<const LabeledSymbol> train,
                                                std::span<const LabeledSymbol> test, Rng& rng) {
    Eigen::Index strokes = 0, dim = -1;
    for (const auto& s : train) {
      strokes += s.features.cols();
      dim = s.features.rows();
    }
    Eigen::MatrixXd x(dim, strokes);
    std::vector<int> y;
    Eigen::Index col = 0;
    for (const auto& s : train) {
      x.middleCols(col, s.features.cols()) = s.features;
      col += s.features.cols();
      y.insert(y.end(), s.labels.begin(), s.labels.end());
    }
    const auto trained = train_segmenter<double>(x, y, classes, config, rng);
    std::vector<int> out;
    for (const auto& s : test) {
      const auto p = predict<double>(trained.model, s.features);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  };
}

CvReport cross_validate(std::span<const LabeledSymbol> data, const std::vector<std::string>& classes, int k,
                        const FoldTrainer& trainer, Rng& rng, std::size_t train_limit) {
  const auto c = static_cast<Eigen::Index>(classes.size());
  for (const auto& s : data) {
    if (static_cast<std::size_t>(s.features.cols()) != s.labels.size())
      throw std::invalid_argument("one label per stroke expected");
    for (int l : s.labels)
      if (l < 0 || l >= c) throw std::out_of_range("label index out of range");
  }
  const auto folds = make_folds(data.size(), k, rng);
  CvReport report;
  report.classes = classes;
  report.confusion = Eigen::MatrixXi::Zero(c, c);
  std::size_t total = 0, correct = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<LabeledSymbol> train, test;
    for (std::size_t g = 0; g < folds.size(); ++g)
      for (auto i : folds[g]) (g == f ? test : train).push_back(data[i]);
    if (train_limit > 0 && train.size() > train_limit) train.resize(train_limit);

    const std::vector<int> predicted = trainer(train, test, rng);
    std::vector<int> truth;
    for (const auto& s : test) truth.insert(truth.end(), s.labels.begin(), s.labels.end());
    if (predicted.size() != truth.size()) throw std::runtime_error("fold trainer returned the wrong number of labels");

    FoldResult r;
    r.fold = static_cast<int>(f);
    r.train_sketches = train.size();
    r.test_sketches = test.size();
    r.test_strokes = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
      r.correct += predicted[i] == truth[i];
      ++report.confusion(truth[i], predicted[i]);
    }
    r.accuracy = truth.empty() ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(truth.size());
    total += r.test_strokes;
    correct += r.correct;
    report.folds.push_back(r);
  }
  report.mean_accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  double sum = 0.0;
  for (const auto& r : report.folds) sum += r.accuracy;
  report.fold_mean_accuracy = sum / static_cast<double>(report.folds.size());
  return report;
}

json report_to_json(const CvReport& report) {
  json folds = json::array();
  for (const auto& r : report.folds)
    folds.push_back({{"fold", r.fold},
                     {"train_sketches", r.train_sketches},
                     {"test_sketches", r.test_sketches},
                     {"test_strokes", r.test_strokes},
                     {"correct", r.correct},
                     {"accuracy", r.accuracy}});
  json matrix = json::array();
  for (Eigen::Index i = 0; i < report.confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < report.confusion.cols(); ++j) row.push_back(report.confusion(i, j));
    matrix.push_back(row);
  }
  return {{"classes", report.classes},
          {"folds", folds},
          {"mean_accuracy", report.mean_accuracy},
          {"fold_mean_accuracy", report.fold_mean_accuracy},
          {"confusion", matrix}};
}

#define STROKESEG_INSTANTIATE_SEG(T)                                                                           \
  template struct SegParams<T>;                                                                                \
  template struct SegModel<T>;                                                                                 \
  template struct SegNoise<T>;                                                                                 \
  template MatrixX<T> seg_forward<T>(const SegModel<T>&, const MatrixX<T>&, bool, Rng&);                       \
  template double seg_batch_loss<T>(const SegModel<T>&, const MatrixX<T>&, std::span<const int>,               \
                                    const Eigen::VectorXd&, const SegNoise<T>&, SegParams<T>*);                \
  template std::vector<int> predict<T>(const SegModel<T>&, const MatrixX<T>&);                                 \
  template SegTrainResult<T> train_segmenter<T>(const MatrixX<T>&, std::span<const int>, std::vector<std::string>, \
                                                const SegConfig&, Rng&);

STROKESEG_INSTANTIATE_SEG(double)
STROKESEG_INSTANTIATE_SEG(float)

}  // namespace strokeseg
