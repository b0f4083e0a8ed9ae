#pragma once

// JSON overrides for the tool configs. Keys absent from the object keep their
// defaults; unknown keys and wrong types are rejected.

#include <set>
#include <string>

#include <json.hpp>

#include "pressense/error.hpp"
#include "pressense/synth.hpp"
#include "pressense/trainer.hpp"

namespace pressense {

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw InvalidArgument(what + " config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw InvalidArgument("unknown " + what + " config key '" + it.key() + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw InvalidArgument(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

inline void read_shift(const nlohmann::json& j, const char* key, DomainShift& s) {
  auto it = j.find(key);
  if (it == j.end()) return;
  check_keys(*it, {"bias", "pressure_gain", "texture_noise"}, key);
  std::vector<double> bias(s.bias.begin(), s.bias.end());
  read(*it, "bias", bias);
  if (bias.size() != s.bias.size()) throw InvalidArgument(std::string(key) + ".bias needs one value per channel");
  std::copy(bias.begin(), bias.end(), s.bias.begin());
  read(*it, "pressure_gain", s.pressure_gain);
  read(*it, "texture_noise", s.texture_noise);
}

}  // namespace detail

inline void apply_overrides(SynthConfig& c, const nlohmann::json& j) {
  detail::check_keys(j,
                     {"width", "height", "frame_rate", "participants", "seed", "force_low_n", "force_high_n",
                      "force_spread", "pixel_pitch_mm", "blob_sigma_px", "position_jitter", "frames_per_cycle",
                      "cycles_per_prompt", "no_contact_prompts", "with_features", "cue_noise", "full_shift",
                      "weak_shift"},
                     "synth");
  detail::read(j, "width", c.width);
  detail::read(j, "height", c.height);
  detail::read(j, "frame_rate", c.frame_rate);
  detail::read(j, "participants", c.participants);
  detail::read(j, "seed", c.seed);
  detail::read(j, "force_low_n", c.force_low_n);
  detail::read(j, "force_high_n", c.force_high_n);
  detail::read(j, "force_spread", c.force_spread);
  detail::read(j, "pixel_pitch_mm", c.pixel_pitch_mm);
  detail::read(j, "blob_sigma_px", c.blob_sigma_px);
  detail::read(j, "position_jitter", c.position_jitter);
  detail::read(j, "frames_per_cycle", c.frames_per_cycle);
  detail::read(j, "cycles_per_prompt", c.cycles_per_prompt);
  detail::read(j, "no_contact_prompts", c.no_contact_prompts);
  detail::read(j, "with_features", c.with_features);
  detail::read(j, "cue_noise", c.cue_noise);
  detail::read_shift(j, "full_shift", c.full_shift);
  detail::read_shift(j, "weak_shift", c.weak_shift);
  c.validate();
}

inline void apply_overrides(TrainConfig& c, const nlohmann::json& j) {
  detail::check_keys(j,
                     {"hidden_channels", "model_seed", "lambda1", "lambda2", "use_contact_loss", "use_domain_loss",
                      "pixel_reduction", "lr", "beta1", "beta2", "eps", "epochs", "steps_per_epoch", "batch_size",
                      "decay_at_fraction", "seed", "decode"},
                     "train");
  detail::read(j, "hidden_channels", c.model.hidden_channels);
  detail::read(j, "model_seed", c.model.seed);
  detail::read(j, "lambda1", c.loss.lambda1);
  detail::read(j, "lambda2", c.loss.lambda2);
  detail::read(j, "use_contact_loss", c.loss.use_contact_loss);
  detail::read(j, "use_domain_loss", c.loss.use_domain_loss);
  std::string s;
  detail::read(j, "pixel_reduction", s);
  if (s == "sum") c.loss.pixel_reduction = PixelReduction::sum;
  else if (s == "mean") c.loss.pixel_reduction = PixelReduction::mean;
  else if (!s.empty()) throw InvalidArgument("pixel_reduction must be 'sum' or 'mean'");
  detail::read(j, "lr", c.adam.lr);
  detail::read(j, "beta1", c.adam.beta1);
  detail::read(j, "beta2", c.adam.beta2);
  detail::read(j, "eps", c.adam.eps);
  detail::read(j, "epochs", c.epochs);
  detail::read(j, "steps_per_epoch", c.steps_per_epoch);
  detail::read(j, "batch_size", c.batch_size);
  detail::read(j, "decay_at_fraction", c.decay_at_fraction);
  detail::read(j, "seed", c.seed);
  s.clear();
  detail::read(j, "decode", s);
  if (s == "argmax") c.decode = PressureDecode::argmax;
  else if (s == "expected") c.decode = PressureDecode::expected;
  else if (!s.empty()) throw InvalidArgument("decode must be 'argmax' or 'expected'");
}

}  // namespace pressense
