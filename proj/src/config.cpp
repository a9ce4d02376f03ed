#include "strokeseg/config.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

namespace strokeseg {

using nlohmann::json;

void VaeConfig::validate() const {
  if (enc_hidden < 2 || dec_hidden < 2) throw std::invalid_argument("hidden sizes must be at least 2");
  if (mixtures < 1 || latent < 1 || batch < 1) throw std::invalid_argument("mixtures, latent and batch must be positive");
  if (!(kl_anneal > 0.0 && kl_anneal < 1.0)) throw std::invalid_argument("kl_anneal must lie in (0, 1)");
  if (!(kl_weight_start >= 0.0 && kl_weight_start <= 1.0)) throw std::invalid_argument("kl_weight_start must lie in [0, 1]");
  if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be non-negative");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("keep_prob must lie in (0, 1]");
  if (max_len < 0) throw std::invalid_argument("max_len must be non-negative");
  if (!(augment_low > 0.0 && augment_low <= augment_high)) throw std::invalid_argument("invalid augmentation range");
}

void SegConfig::validate() const {
  if (hidden1 < 1 || hidden2 < 1 || batch < 1) throw std::invalid_argument("hidden sizes and batch must be positive");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("keep_prob must lie in (0, 1]");
  if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be non-negative");
  if (max_epochs < 0 || patience < 1) throw std::invalid_argument("invalid epoch budget");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) throw std::invalid_argument("validation_fraction must lie in [0, 1)");
}

void to_json(json& j, const VaeConfig& c) {
  j = json{{"enc_hidden", c.enc_hidden},       {"dec_hidden", c.dec_hidden},
           {"mixtures", c.mixtures},           {"latent", c.latent},
           {"batch", c.batch},                 {"kl_weight_start", c.kl_weight_start},
           {"kl_anneal", c.kl_anneal},         {"learning_rate", c.learning_rate},
           {"clip", c.clip},                   {"keep_prob", c.keep_prob},
           {"max_len", c.max_len},             {"augment_low", c.augment_low},
           {"augment_high", c.augment_high}};
}

void to_json(json& j, const SegConfig& c) {
  j = json{{"hidden1", c.hidden1},
           {"hidden2", c.hidden2},
           {"keep_prob", c.keep_prob},
           {"batch", c.batch},
           {"learning_rate", c.learning_rate},
           {"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"validation_fraction", c.validation_fraction}};
}

namespace {

template <typename Config>
void overlay(const json& j, Config& c) {
  json current = c;
  for (const auto& [key, value] : j.items()) {
    if (!current.contains(key)) throw std::invalid_argument("unknown configuration key '" + key + "'");
    if (current[key].is_number_integer()) {
      if (!value.is_number()) throw std::invalid_argument("configuration key '" + key + "' expects a number");
      const double v = value.template get<double>();
      if (v != static_cast<double>(static_cast<long long>(v)))
        throw std::invalid_argument("configuration key '" + key + "' expects an integer");
      current[key] = static_cast<long long>(v);
    } else {
      if (!value.is_number()) throw std::invalid_argument("configuration key '" + key + "' expects a number");
      current[key] = value.template get<double>();
    }
  }
  c = current.template get<Config>();
}

}  // namespace

void from_json(const json& j, VaeConfig& c) {
  c.enc_hidden = j.at("enc_hidden").get<int>();
  c.dec_hidden = j.at("dec_hidden").get<int>();
  c.mixtures = j.at("mixtures").get<int>();
  c.latent = j.at("latent").get<int>();
  c.batch = j.at("batch").get<int>();
  c.kl_weight_start = j.at("kl_weight_start").get<double>();
  c.kl_anneal = j.at("kl_anneal").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.clip = j.at("clip").get<double>();
  c.keep_prob = j.at("keep_prob").get<double>();
  c.max_len = j.at("max_len").get<int>();
  c.augment_low = j.at("augment_low").get<double>();
  c.augment_high = j.at("augment_high").get<double>();
}

void from_json(const json& j, SegConfig& c) {
  c.hidden1 = j.at("hidden1").get<int>();
  c.hidden2 = j.at("hidden2").get<int>();
  c.keep_prob = j.at("keep_prob").get<double>();
  c.batch = j.at("batch").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
}

json parse_config_text(const std::string& text) {
  const auto first = std::find_if(text.begin(), text.end(), [](unsigned char ch) { return !std::isspace(ch); });
  if (first != text.end() && *first == '{') {
    json j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("configuration JSON must be an object");
    return j;
  }
  json j = json::object();
  std::istringstream in(text);
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
  };
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(number) + ": '" + value + "' is not a number");
    j[key] = v;
  }
  return j;
}

VaeConfig load_vae_config(const std::string& text, VaeConfig base) {
  overlay(parse_config_text(text), base);
  base.validate();
  return base;
}

SegConfig load_seg_config(const std::string& text, SegConfig base) {
  overlay(parse_config_text(text), base);
  base.validate();
  return base;
}

}  // namespace strokeseg
