#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nsc/error.hpp"
#include "nsc/inference/uncertainty.hpp"
#include "nsc/model/losses.hpp"

namespace nsc {

enum class TrainMode { full, no_entropy_fixed_iters, diag_loss_only };

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::full: return "full";
    case TrainMode::no_entropy_fixed_iters: return "no_entropy_fixed_iters";
    case TrainMode::diag_loss_only: return "diag_loss_only";
  }
  return "?";
}

/// Accepts the canonical names and the short CLI spellings.
inline TrainMode train_mode_from_string(std::string_view s) {
  if (s == "full") return TrainMode::full;
  if (s == "no_entropy_fixed_iters" || s == "no-entropy") return TrainMode::no_entropy_fixed_iters;
  if (s == "diag_loss_only" || s == "diag-only") return TrainMode::diag_loss_only;
  throw ConfigError("unknown training mode '" + std::string(s) + "'");
}

struct TrainConfig {
  std::vector<std::size_t> layer_sizes{256};
  double dropout = 0.5;
  LossConfig loss;
  double beta = 0.3;
  std::size_t max_attempts = 50;
  std::size_t epochs = 5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::full;
  std::size_t fixed_iters = 0;
  double warmup_fraction = 0.1;
  double weight_decay = 0.01;
  bool normalize_entropy = true;
  bool mask_known = true;

  void validate() const {
    if (layer_sizes.empty()) throw ConfigError("layer_sizes must list at least one hidden layer");
    for (auto s : layer_sizes)
      if (s == 0) throw ConfigError("hidden layer size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
    loss.validate();
    if (mode != TrainMode::full && fixed_iters < 1)
      throw ConfigError("fixed_iters is required unless mode = full");
    stopping().validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must lie in [0,1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  }

  /// Stopping rule used for training rollouts and stored in the checkpoint.
  StoppingConfig stopping() const {
    if (mode == TrainMode::full) return {beta, max_attempts, true, normalize_entropy};
    return {beta, fixed_iters, false, normalize_entropy};
  }

  /// Weight of the symptom loss as actually applied.
  double effective_lambda() const { return mode == TrainMode::diag_loss_only ? 0.0 : loss.lambda; }
};

inline const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "layer_sizes", "dropout",   "lambda",      "gamma_plus",      "gamma_minus",  "margin",
      "beta",        "max_attempts", "epochs",   "learning_rate",   "batch_size",   "seed",
      "mode",        "fixed_iters",  "warmup_fraction", "weight_decay", "normalize_entropy", "mask_known"};
  return keys;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"layer_sizes", c.layer_sizes},
          {"dropout", c.dropout},
          {"lambda", c.loss.lambda},
          {"gamma_plus", c.loss.gamma_plus},
          {"gamma_minus", c.loss.gamma_minus},
          {"margin", c.loss.margin},
          {"beta", c.beta},
          {"max_attempts", c.max_attempts},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"mode", std::string(to_string(c.mode))},
          {"fixed_iters", c.fixed_iters},
          {"warmup_fraction", c.warmup_fraction},
          {"weight_decay", c.weight_decay},
          {"normalize_entropy", c.normalize_entropy},
          {"mask_known", c.mask_known}};
}

/// Flat key/value document; missing keys keep their defaults, unknown keys
/// are rejected.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat object");
  const auto& keys = train_config_keys();
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("unknown config key '" + k + "'");
  TrainConfig c;
  try {
    auto opt = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("layer_sizes", c.layer_sizes);
    opt("dropout", c.dropout);
    opt("lambda", c.loss.lambda);
    opt("gamma_plus", c.loss.gamma_plus);
    opt("gamma_minus", c.loss.gamma_minus);
    opt("margin", c.loss.margin);
    opt("beta", c.beta);
    opt("max_attempts", c.max_attempts);
    opt("epochs", c.epochs);
    opt("learning_rate", c.learning_rate);
    opt("batch_size", c.batch_size);
    opt("seed", c.seed);
    if (j.contains("mode")) c.mode = train_mode_from_string(j.at("mode").get<std::string>());
    opt("fixed_iters", c.fixed_iters);
    opt("warmup_fraction", c.warmup_fraction);
    opt("weight_decay", c.weight_decay);
    opt("normalize_entropy", c.normalize_entropy);
    opt("mask_known", c.mask_known);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

}  // namespace nsc
