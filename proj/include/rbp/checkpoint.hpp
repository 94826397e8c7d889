#pragma once

// Model checkpoints: configuration, every parameter (name, shape, trainable
// flag, values) and the training history, stored as JSON.

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rbp/model.hpp"

namespace rbp {

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"architecture", std::string(to_string(c.architecture))},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"learning_rate", c.learning_rate},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"rbp", std::string(to_string(c.rbp))},
          {"vocab", c.vocab},
          {"context", c.context},
          {"outputs", c.outputs},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"head_hidden", c.head_hidden},
          {"head_loss_weight", c.head_loss_weight},
          {"teacher_forcing", c.teacher_forcing}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  if (j.contains("architecture")) c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::size_t>();
  if (j.contains("layers")) c.layers = j.at("layers").get<std::size_t>();
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("rbp")) c.rbp = parse_rbp(j.at("rbp").get<std::string>());
  if (j.contains("vocab")) c.vocab = j.at("vocab").get<std::size_t>();
  if (j.contains("context")) c.context = j.at("context").get<std::size_t>();
  if (j.contains("outputs")) c.outputs = j.at("outputs").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("head_hidden")) c.head_hidden = j.at("head_hidden").get<std::size_t>();
  if (j.contains("head_loss_weight")) c.head_loss_weight = j.at("head_loss_weight").get<double>();
  if (j.contains("teacher_forcing")) c.teacher_forcing = j.at("teacher_forcing").get<bool>();
  return c;
}

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json checkpoint_json(const TrainedModel& m) {
  nlohmann::json params = nlohmann::json::array();
  for (const Parameter& p : m.network.params().all()) {
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"trainable", p.trainable}, {"values", p.value.values()}});
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : m.history) history.push_back({{"loss", e.loss}, {"train_accuracy", e.train_accuracy}});
  return {{"format", "rbp-checkpoint"},
          {"version", kCheckpointFormatVersion},
          {"config", to_json(m.config())},
          {"parameters", params},
          {"history", history}};
}

/// Rebuilds the network from the stored config, then overwrites every
/// parameter. Names, shapes and trainable flags must match exactly.
inline TrainedModel checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rbp-checkpoint") throw CheckpointError("not an rbp-checkpoint document");
  if (j.at("version").get<int>() != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint version " + j.at("version").dump());
  }
  TrainedModel m{Network(model_config_from_json(j.at("config"))), {}};
  ParameterStore& store = m.network.params();
  const auto& params = j.at("parameters");
  if (params.size() != store.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
                          std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& jp = params[i];
    Parameter& p = store[i];
    const auto name = jp.at("name").get<std::string>();
    if (name != p.name) throw CheckpointError("parameter " + std::to_string(i) + ": expected " + p.name + ", found " + name);
    const auto shape = jp.at("shape").get<Shape>();
    if (shape != p.value.shape()) {
      throw CheckpointError("parameter " + name + ": shape " + shape_string(shape) + " does not match model shape " +
                            shape_string(p.value.shape()));
    }
    if (jp.at("trainable").get<bool>() != p.trainable) throw CheckpointError("parameter " + name + ": trainable flag differs");
    p.value = Tensor(shape, jp.at("values").get<std::vector<double>>());
  }
  for (const auto& e : j.at("history")) {
    m.history.push_back({e.at("loss").get<double>(), e.at("train_accuracy").get<double>()});
  }
  return m;
}

inline void save_checkpoint(const TrainedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << checkpoint_json(m).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace rbp
