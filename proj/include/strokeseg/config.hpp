#pragma once

#include <string>

#include "json.hpp"

namespace strokeseg {

/// Stroke autoencoder hyperparameters. Defaults are the full-scale setup.
struct VaeConfig {
  int enc_hidden = 512;  // per direction
  int dec_hidden = 1024;
  int mixtures = 20;
  int latent = 128;
  int batch = 100;
  double kl_weight_start = 0.01;
  double kl_anneal = 0.99995;
  double learning_rate = 1e-4;
  double clip = 1.0;
  double keep_prob = 0.9;
  int max_len = 0;  // sampling cap; 0 means "derive from the training corpus"
  double augment_low = 0.9;
  double augment_high = 1.1;

  void validate() const;
};

/// Segmentation head hyperparameters.
struct SegConfig {
  int hidden1 = 1024;
  int hidden2 = 512;
  double keep_prob = 0.5;
  int batch = 16;
  double learning_rate = 1e-3;
  int max_epochs = 200;
  int patience = 20;
  double validation_fraction = 0.1;

  void validate() const;
};

void to_json(nlohmann::json& j, const VaeConfig& c);
void from_json(const nlohmann::json& j, VaeConfig& c);
void to_json(nlohmann::json& j, const SegConfig& c);
void from_json(const nlohmann::json& j, SegConfig& c);

/// Parses a JSON object or `key = value` lines (# comments allowed) into an
/// object. Unknown keys are rejected by the typed loaders below.
nlohmann::json parse_config_text(const std::string& text);

/// Overlays the keys in text onto base.
VaeConfig load_vae_config(const std::string& text, VaeConfig base = {});
SegConfig load_seg_config(const std::string& text, SegConfig base = {});

}  // namespace strokeseg
