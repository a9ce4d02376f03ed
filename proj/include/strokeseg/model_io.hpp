#pragma once

// Checkpoint files for the autoencoder and the segmentation head.

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "strokeseg/checkpoint.hpp"
#include "strokeseg/segmentation.hpp"
#include "strokeseg/stroke_vae.hpp"

namespace strokeseg {

inline constexpr const char* kVaeKind = "stroke-vae";
inline constexpr const char* kSegKind = "segmenter";

/// extra is merged into the header (e.g. the training corpus checksum).
template <typename S>
void save_vae(std::ostream& out, const VaeModel<S>& m, const OptimizerState<S>* state,
              const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json header = extra;
  header["kind"] = kVaeKind;
  header["config"] = m.config;
  auto copy = m.params;
  save_checkpoint(out, header, copy, state);
}

template <typename S>
struct LoadedVae {
  VaeModel<S> model;
  OptimizerState<S> optimizer;
  nlohmann::json header;
};

template <typename S>
LoadedVae<S> load_vae(std::istream& in) {
  LoadedVae<S> out;
  out.header = read_checkpoint_header(in);
  if (out.header.value("kind", std::string{}) != kVaeKind) throw CheckpointError("not an autoencoder checkpoint");
  out.model.config = out.header.at("config").template get<VaeConfig>();
  out.model.config.validate();
  out.model.params = VaeParams<S>::zeros(out.model.config);
  load_checkpoint_payload(in, out.header, out.model.params, &out.optimizer);
  return out;
}

template <typename S>
void save_segmenter(std::ostream& out, const SegModel<S>& m, const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json header = extra;
  header["kind"] = kSegKind;
  header["config"] = m.config;
  header["classes"] = m.classes;
  header["input"] = m.input_size();
  auto copy = m.params;
  save_checkpoint<SegParams<S>>(out, header, copy, nullptr);
}

template <typename S>
struct LoadedSegmenter {
  SegModel<S> model;
  nlohmann::json header;
};

template <typename S>
LoadedSegmenter<S> load_segmenter(std::istream& in) {
  LoadedSegmenter<S> out;
  out.header = read_checkpoint_header(in);
  if (out.header.value("kind", std::string{}) != kSegKind) throw CheckpointError("not a segmenter checkpoint");
  out.model.config = out.header.at("config").template get<SegConfig>();
  out.model.config.validate();
  out.model.classes = out.header.at("classes").template get<std::vector<std::string>>();
  out.model.params = SegParams<S>::zeros(out.header.at("input").template get<Eigen::Index>(), out.model.config,
                                         out.model.class_count());
  load_checkpoint_payload<SegParams<S>>(in, out.header, out.model.params, nullptr);
  return out;
}

}  // namespace strokeseg
