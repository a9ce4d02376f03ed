#include "strokeseg/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace strokeseg {

namespace {

const VaeModel<double>& need_encoder(const VaeModel<double>* encoder) {
  if (encoder == nullptr) throw std::invalid_argument("the nn feature needs an encoder checkpoint");
  return *encoder;
}

}  // namespace

Eigen::MatrixXd stroke_features(const Sketch& sketch, FeatureVariant variant, const VaeModel<double>* encoder) {
  if (variant == FeatureVariant::Encoder) return encoder_features(need_encoder(encoder), sketch.strokes);
  return baseline_features(sketch, variant);
}

std::vector<LabeledSymbol> labeled_symbols(std::span<const Sketch> sketches, const std::vector<std::string>& classes,
                                           FeatureVariant variant, const VaeModel<double>* encoder) {
  std::vector<LabeledSymbol> out(sketches.size());
  for (std::size_t i = 0; i < sketches.size(); ++i)
    for (const auto& st : sketches[i].strokes) {
      if (!st.label) throw std::invalid_argument("sketch " + std::to_string(i) + " has an unlabeled stroke");
      auto it = std::find(classes.begin(), classes.end(), *st.label);
      if (it == classes.end()) throw std::invalid_argument("label '" + *st.label + "' is not in the class list");
      out[i].labels.push_back(static_cast<int>(it - classes.begin()));
    }

  if (variant != FeatureVariant::Encoder) {
    for (std::size_t i = 0; i < sketches.size(); ++i) out[i].features = baseline_features(sketches[i], variant);
    return out;
  }
  std::vector<Stroke> all;
  for (const auto& s : sketches) all.insert(all.end(), s.strokes.begin(), s.strokes.end());
  const Eigen::MatrixXd h = encoder_features(need_encoder(encoder), all);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < sketches.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(sketches[i].strokes.size());
    out[i].features = h.middleCols(col, n);
    col += n;
  }
  return out;
}

std::vector<std::string> predict_labels(const SegModel<double>& seg, FeatureVariant variant,
                                        const VaeModel<double>* encoder, const Sketch& sketch) {
  std::vector<std::string> out;
  if (sketch.strokes.empty()) return out;
  for (int c : predict<double>(seg, stroke_features(sketch, variant, encoder)))
    out.push_back(seg.classes[static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace strokeseg
