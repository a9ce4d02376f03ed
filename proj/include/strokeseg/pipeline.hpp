#pragma once

// Glue between preprocessed sketches, the frozen encoder and the
// segmentation head.

#include <span>
#include <string>
#include <vector>

#include "strokeseg/idm.hpp"
#include "strokeseg/segmentation.hpp"
#include "strokeseg/stroke_vae.hpp"

namespace strokeseg {

/// One column per stroke. encoder is required for FeatureVariant::Encoder
/// and ignored otherwise.
Eigen::MatrixXd stroke_features(const Sketch& sketch, FeatureVariant variant, const VaeModel<double>* encoder);

/// Features and class indices for every sketch; every stroke must carry a
/// label from `classes`. Encoder features are computed in one batched pass.
std::vector<LabeledSymbol> labeled_symbols(std::span<const Sketch> sketches, const std::vector<std::string>& classes,
                                           FeatureVariant variant, const VaeModel<double>* encoder);

/// Component label per stroke of the sketch.
std::vector<std::string> predict_labels(const SegModel<double>& seg, FeatureVariant variant,
                                        const VaeModel<double>* encoder, const Sketch& sketch);

}  // namespace strokeseg
