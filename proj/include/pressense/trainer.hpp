#pragma once

// Toy training loop over synthetic records, evaluation helpers, and JSON checkpoints.
//
// Checkpoint layout:
//   {"format": "pressense-checkpoint", "version": 1,
//    "config": {"width", "height", "channels", "hidden_channels", "n_bins", "seed"},
//    "parameters": [{"name", "shape", "values"}, ...],            model order
//    "adam": {"lr", "beta1", "beta2", "eps", "step", "m": [[...]], "v": [[...]]}}

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pressense/adam.hpp"
#include "pressense/error.hpp"
#include "pressense/metrics.hpp"
#include "pressense/records.hpp"
#include "pressense/tinynet.hpp"

namespace pressense {

/// How per-pixel bin scores become a pressure estimate.
enum class PressureDecode { argmax, expected };

struct TrainConfig {
  ModelConfig model;
  LossConfig loss{0.01, 0.001, true, true, PixelReduction::mean};
  AdamHyper adam;
  int epochs = 6;
  int steps_per_epoch = 100;
  int batch_size = 8;              // half full, half weak when both are available
  double decay_at_fraction = 1.0 / 3.0;  // lr drops 10x after this fraction of the steps
  std::uint64_t seed = 0;          // batch sampling
  PressureDecode decode = PressureDecode::expected;
};

struct EpochMetrics {
  int epoch = 0;
  LossBreakdown mean_loss;
  double weak_contact_accuracy = 0.0;            // on the weak test split
  std::optional<double> full_volumetric_iou;     // on the full test split
  double full_contact_accuracy = 0.0;
};

struct TrainResult {
  ModelParams params;
  AdamState adam;
  std::vector<EpochMetrics> history;
};

/// Training examples from records; records must carry features.
inline std::vector<TrainSample> samples_from_records(std::span<const SessionRecord> records, const BinSpec& spec) {
  std::vector<TrainSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.features) throw InvalidArgument("record " + r.session_id + "/" + std::to_string(r.frame_index) +
                                           " has no feature map");
    TrainSample s;
    s.features = *r.features;
    s.domain = r.domain;
    s.label = r.contact_label;
    if (r.domain == Domain::full) s.target = quantize(*r.pressure, spec);
    out.push_back(std::move(s));
  }
  return out;
}

inline PressureImage decode_pressure(const Volume& logits, const BinSpec& spec, PressureDecode mode) {
  return mode == PressureDecode::argmax ? decode_argmax(logits, spec) : decode_expected(softmax(logits), spec);
}

inline PressureImage predict_pressure(const ModelParams& params, const Volume& features, const BinSpec& spec,
                                      PressureDecode mode = PressureDecode::expected) {
  return decode_pressure(forward(params, features).pressure_logits, spec, mode);
}

/// Predicted contact label from the contact head (sigmoid > 0.5; force from logit 5).
inline ContactLabel label_from_logits(std::span<const double> logits) {
  ContactLabel l;
  for (int i = 0; i < kFingerCount; ++i) l.fingers[i] = logits[i] > 0.0 ? 1 : 0;
  l.force = l.any_contact() ? (logits[5] > 0.0 ? ForceLevel::high : ForceLevel::low) : ForceLevel::unspecified;
  return l;
}

inline MetricsReport evaluate_model(const ModelParams& params, std::span<const SessionRecord> records,
                                    const BinSpec& spec, PressureDecode mode = PressureDecode::expected) {
  std::vector<FrameEvaluation> frames;
  frames.reserve(records.size());
  for (const auto& r : records) {
    if (!r.features) throw InvalidArgument("record without feature map cannot be evaluated");
    FrameEvaluation f;
    f.frame_id = r.session_id + "/" + std::to_string(r.frame_index);
    f.gt_label = r.contact_label;
    f.gt_pressure = r.pressure;
    auto fw = forward(params, *r.features);
    f.estimate = decode_pressure(fw.pressure_logits, spec, mode);
    f.estimated_label = label_from_logits(fw.contact_logits);
    frames.push_back(std::move(f));
  }
  return evaluate_frames(frames);
}

/// Trains from scratch. Deterministic in (config, data).
inline TrainResult train_toy(std::span<const SessionRecord> full_train, std::span<const SessionRecord> weak_train,
                             std::span<const SessionRecord> full_test, std::span<const SessionRecord> weak_test,
                             const TrainConfig& cfg) {
  if (full_train.empty() && weak_train.empty()) throw InvalidArgument("no training data");
  if (cfg.epochs < 1 || cfg.steps_per_epoch < 1 || cfg.batch_size < 1)
    throw InvalidArgument("epochs, steps and batch size must be positive");
  const BinSpec spec = make_bin_spec(cfg.model.n_bins);
  const auto full = samples_from_records(full_train, spec);
  const auto weak = samples_from_records(weak_train, spec);

  TrainResult out{init_model(cfg.model), AdamState(cfg.adam), {}};
  std::mt19937_64 rng(cfg.seed);
  const int n_weak = full.empty() ? cfg.batch_size : weak.empty() ? 0 : cfg.batch_size / 2;
  const int n_full = cfg.batch_size - n_weak;
  std::uniform_int_distribution<std::size_t> pick_full(0, full.empty() ? 0 : full.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_weak(0, weak.empty() ? 0 : weak.size() - 1);
  const int total_steps = cfg.epochs * cfg.steps_per_epoch;
  const int decay_step = static_cast<int>(cfg.decay_at_fraction * total_steps);

  std::vector<TrainSample> batch;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossBreakdown sum;
    for (int k = 0; k < cfg.steps_per_epoch; ++k, ++step) {
      out.adam.hyper.lr = step < decay_step ? cfg.adam.lr : cfg.adam.lr * 0.1;
      batch.clear();
      for (int i = 0; i < n_full; ++i) batch.push_back(full[pick_full(rng)]);
      for (int i = 0; i < n_weak; ++i) batch.push_back(weak[pick_weak(rng)]);
      auto l = backward_and_step(out.params, out.adam, batch, cfg.loss);
      sum.l_p += l.l_p;
      sum.l_w += l.l_w;
      sum.l_d += l.l_d;
      sum.total += l.total;
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    const double n = cfg.steps_per_epoch;
    m.mean_loss = {sum.l_p / n, sum.l_w / n, sum.l_d / n, sum.total / n};
    if (!weak_test.empty()) m.weak_contact_accuracy = evaluate_model(out.params, weak_test, spec, cfg.decode).contact_accuracy;
    if (!full_test.empty()) {
      auto r = evaluate_model(out.params, full_test, spec, cfg.decode);
      m.full_volumetric_iou = r.volumetric_iou;
      m.full_contact_accuracy = r.contact_accuracy;
    }
    out.history.push_back(m);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["loss"] = {{"l_p", m.mean_loss.l_p}, {"l_w", m.mean_loss.l_w}, {"l_d", m.mean_loss.l_d}, {"total", m.mean_loss.total}};
  j["weak_contact_accuracy"] = m.weak_contact_accuracy;
  j["full_volumetric_iou"] =
      m.full_volumetric_iou ? nlohmann::ordered_json(*m.full_volumetric_iou) : nlohmann::ordered_json();
  j["full_contact_accuracy"] = m.full_contact_accuracy;
  return j;
}

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_to_json(const ModelParams& params, const AdamState& adam) {
  nlohmann::ordered_json j;
  j["format"] = "pressense-checkpoint";
  j["version"] = kCheckpointVersion;
  const auto& c = params.config;
  j["config"] = {{"width", c.width},         {"height", c.height}, {"channels", c.channels},
                 {"hidden_channels", c.hidden_channels}, {"n_bins", c.n_bins}, {"seed", c.seed}};
  j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& a : params.arrays)
    j["parameters"].push_back({{"name", a.name}, {"shape", a.shape}, {"values", a.values}});
  j["adam"] = {{"lr", adam.hyper.lr},   {"beta1", adam.hyper.beta1}, {"beta2", adam.hyper.beta2},
               {"eps", adam.hyper.eps}, {"step", adam.step},         {"m", adam.m}, {"v", adam.v}};
  return j;
}

struct Checkpoint {
  ModelParams params;
  AdamState adam;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "pressense-checkpoint") throw ParseError(0, "not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw VersionError("checkpoint version " + std::to_string(j.at("version").get<int>()) + " is not supported");
    const auto& jc = j.at("config");
    ModelConfig c;
    c.width = jc.at("width").get<int>();
    c.height = jc.at("height").get<int>();
    c.channels = jc.at("channels").get<int>();
    c.hidden_channels = jc.at("hidden_channels").get<int>();
    c.n_bins = jc.at("n_bins").get<int>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    Checkpoint out{init_model(c), {}};
    const auto& jp = j.at("parameters");
    if (jp.size() != out.params.arrays.size()) throw ParseError(0, "checkpoint has the wrong number of arrays");
    for (std::size_t i = 0; i < jp.size(); ++i) {
      auto& a = out.params.arrays[i];
      if (jp[i].at("name").get<std::string>() != a.name || jp[i].at("shape").get<std::vector<int>>() != a.shape)
        throw ParseError(0, "checkpoint array " + std::to_string(i) + " does not match " + a.name);
      auto values = jp[i].at("values").get<std::vector<double>>();
      if (values.size() != a.values.size()) throw ParseError(0, "checkpoint array " + a.name + " has the wrong size");
      a.values = std::move(values);
    }
    const auto& ja = j.at("adam");
    out.adam.hyper = {ja.at("lr").get<double>(), ja.at("beta1").get<double>(), ja.at("beta2").get<double>(),
                      ja.at("eps").get<double>()};
    out.adam.step = ja.at("step").get<std::int64_t>();
    out.adam.m = ja.at("m").get<std::vector<std::vector<double>>>();
    out.adam.v = ja.at("v").get<std::vector<std::vector<double>>>();
    if (!out.adam.m.empty()) out.adam.ensure_shapes(out.params.sizes());
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(0, std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState& adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(params, adam).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace pressense
