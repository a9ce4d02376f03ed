#pragma once

// Stroke segmentation head: a 3-layer MLP over fixed stroke features,
// trained with class-weighted cross entropy, plus sketch-level k-fold
// cross-validation.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "strokeseg/config.hpp"
#include "strokeseg/recurrent.hpp"

namespace strokeseg {

template <typename S>
struct SegParams {
  using Scalar = S;

  MatrixX<S> w_hidden1;  // hidden1 x input
  VectorX<S> b_hidden1;
  MatrixX<S> w_hidden2;  // hidden2 x hidden1
  VectorX<S> b_hidden2;
  MatrixX<S> w_out;      // classes x hidden2
  VectorX<S> b_out;

  static SegParams init(Eigen::Index input, const SegConfig& config, Eigen::Index classes, Rng& rng);
  static SegParams zeros(Eigen::Index input, const SegConfig& config, Eigen::Index classes);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "w_hidden1", w_hidden1);
    f(prefix + "b_hidden1", b_hidden1);
    f(prefix + "w_hidden2", w_hidden2);
    f(prefix + "b_hidden2", b_hidden2);
    f(prefix + "w_out", w_out);
    f(prefix + "b_out", b_out);
  }
};

template <typename S>
struct SegModel {
  using Scalar = S;

  SegConfig config;
  std::vector<std::string> classes;
  SegParams<S> params;

  Eigen::Index input_size() const { return params.w_hidden1.cols(); }
  Eigen::Index class_count() const { return static_cast<Eigen::Index>(classes.size()); }

  static SegModel init(Eigen::Index input, const SegConfig& config, std::vector<std::string> classes, Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    params.visit(prefix, std::forward<F>(f));
  }
};

/// Dropout masks for the two hidden layers (already scaled by 1 / keep).
/// Empty means no dropout.
template <typename S>
struct SegNoise {
  MatrixX<S> hidden1, hidden2;

  static SegNoise sample(const SegModel<S>& m, Eigen::Index batch, Rng& rng);
};

/// Class probabilities, one column per feature column. Dropout only when
/// training.
template <typename S>
MatrixX<S> seg_forward(const SegModel<S>& m, const std::type_identity_t<MatrixX<S>>& features, bool training,
                       Rng& rng);

/// softmax(-n / sum(n)). Every count must be positive.
Eigen::VectorXd class_weights(std::span<const Eigen::Index> counts);

/// -w_c log p_c for true class c (log floored).
double seg_loss(const Eigen::Ref<const Eigen::VectorXd>& probs, int true_class,
                const Eigen::Ref<const Eigen::VectorXd>& weights);

/// Mean weighted cross entropy over the columns; accumulates the gradient
/// into grads when given.
template <typename S>
double seg_batch_loss(const SegModel<S>& m, const std::type_identity_t<MatrixX<S>>& features,
                      std::span<const int> labels, const Eigen::VectorXd& weights, const SegNoise<S>& noise,
                      SegParams<S>* grads);

/// Argmax per column; ties go to the lowest class index.
template <typename S>
std::vector<int> predict(const SegModel<S>& m, const std::type_identity_t<MatrixX<S>>& features);

/// Correct / total. Throws on a length mismatch or empty input.
double evaluate_accuracy(std::span<const int> predicted, std::span<const int> truth);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double monitor_accuracy = 0.0;  // validation split, or the training set when there is none
  double monitor_loss = 0.0;
};

template <typename S>
struct SegTrainResult {
  SegModel<S> model;
  int best_epoch = 0;  // 0 means the initial model
  std::vector<EpochRecord> history;
  Eigen::VectorXd weights;
};

/// Adam on Xavier-initialized weights with early stopping on a held-out
/// fraction of the examples. Returns the best monitored model.
/// Throws std::runtime_error on a non-finite loss.
template <typename S>
SegTrainResult<S> train_segmenter(const std::type_identity_t<MatrixX<S>>& features, std::span<const int> labels,
                                  std::vector<std::string> classes, const SegConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Cross-validation

/// Features (one column per stroke) and class indices of one sketch.
struct LabeledSymbol {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

/// k disjoint folds of a shuffled 0..n-1; sizes differ by at most one.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, Rng& rng);

/// Trains on `train` and returns one predicted class per stroke of `test`, in order.
using FoldTrainer = std::function<std::vector<int>(std::span<const LabeledSymbol> train,
                                                   std::span<const LabeledSymbol> test, Rng& rng)>;

FoldTrainer mlp_fold_trainer(std::vector<std::string> classes, SegConfig config);

struct FoldResult {
  int fold = 0;
  std::size_t train_sketches = 0;
  std::size_t test_sketches = 0;
  std::size_t test_strokes = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct CvReport {
  std::vector<std::string> classes;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;       // pooled over strokes
  double fold_mean_accuracy = 0.0;  // unweighted mean of folds
  Eigen::MatrixXi confusion;        // truth row, prediction column
};

/// Sketch-level k-fold cross validation. train_limit > 0 keeps only the first
/// train_limit sketches of each (shuffled) training split.
CvReport cross_validate(std::span<const LabeledSymbol> data, const std::vector<std::string>& classes, int k,
                        const FoldTrainer& trainer, Rng& rng, std::size_t train_limit = 0);

nlohmann::json report_to_json(const CvReport& report);

}  // namespace strokeseg
