#pragma once

// Synthetic capture sessions.
//
// A participant works through a table of action prompts (a fingertip
// combination plus a force level). Each prompt is one press cycle of
// `frames_per_cycle` frames whose force follows a raised-cosine
// press / hold / release envelope. Every contacting fingertip contributes one
// anisotropic Gaussian blob; blob integrals split the sampled total force
// equally across fingers with +-20% jitter. Blobs whose peak stays under the
// 1 kPa sensing floor are not rendered, and a frame without any rendered blob
// gets the no-contact label.
//
// Each frame also gets a 3-channel companion feature map standing in for the
// camera: a noisy compressed pressure cue, a hand silhouette that is present
// whether or not the fingers touch, and an appearance channel. Weakly-labeled
// sessions apply a domain shift (per-channel appearance bias, gain on the
// pressure cue, heavier texture noise on the silhouette and appearance channels).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pressense/error.hpp"
#include "pressense/geometry.hpp"
#include "pressense/losses.hpp"
#include "pressense/pressure.hpp"
#include "pressense/records.hpp"

namespace pressense {

enum class PromptForce { low, high, slide, no_contact };

struct ActionPrompt {
  std::array<bool, kFingerCount> fingers{};
  PromptForce force = PromptForce::no_contact;

  friend bool operator==(const ActionPrompt&, const ActionPrompt&) = default;
};

/// The eight fingertip combinations, thumb..pinky order.
inline const std::array<std::array<bool, kFingerCount>, 8>& prompt_combinations() {
  static const std::array<std::array<bool, kFingerCount>, 8> table{{
      {false, true, false, false, false},  // index
      {true, false, false, false, false},  // thumb
      {true, true, false, false, false},   // index + thumb
      {false, true, true, false, false},   // index + middle
      {false, false, true, false, false},  // middle
      {false, false, false, true, false},  // ring
      {false, false, false, false, true},  // pinky
      {true, true, true, true, true},      // all fingers
  }};
  return table;
}

inline std::string prompt_text(const ActionPrompt& p) {
  static constexpr std::array<const char*, kFingerCount> names{"thumb", "index", "middle", "ring", "pinky"};
  if (p.force == PromptForce::no_contact) return "no contact";
  std::string s;
  for (int i = 0; i < kFingerCount; ++i)
    if (p.fingers[i]) s += (s.empty() ? "" : "+") + std::string(names[i]);
  switch (p.force) {
    case PromptForce::low: return s + " low";
    case PromptForce::high: return s + " high";
    default: return s + " slide";
  }
}

/// Every combination at low, high and slide, plus `no_contact_prompts` hovers.
inline std::vector<ActionPrompt> prompt_table(int no_contact_prompts = 4) {
  std::vector<ActionPrompt> out;
  for (const auto& combo : prompt_combinations())
    for (PromptForce f : {PromptForce::low, PromptForce::high, PromptForce::slide}) out.push_back({combo, f});
  for (int i = 0; i < no_contact_prompts; ++i) out.push_back({{}, PromptForce::no_contact});
  return out;
}

inline constexpr int kFeatureChannels = 3;

struct DomainShift {
  std::array<double, kFeatureChannels> bias{};
  double pressure_gain = 1.0;
  double texture_noise = 0.05;  // silhouette and appearance channels
};

struct SynthConfig {
  int width = 105;
  int height = 185;
  double frame_rate = 15.0;
  int participants = 8;
  std::uint64_t seed = 0;
  double force_low_n = 3.6;
  double force_high_n = 19.6;
  double force_spread = 0.35;     // relative standard deviation of the total force
  double pixel_pitch_mm = 1.3;    // sensor element spacing
  double blob_sigma_px = 2.5;     // across the finger; along the finger is 1.4x
  double position_jitter = 0.02;  // fraction of the grid size
  int frames_per_cycle = 15;
  int cycles_per_prompt = 1;
  int no_contact_prompts = 4;
  bool with_features = true;
  double cue_noise = 0.05;  // pressure-cue channel, both domains
  DomainShift full_shift{{0.0, 0.0, 0.0}, 1.0, 0.05};
  DomainShift weak_shift{{0.6, 0.4, 1.0}, 0.8, 0.15};

  void validate() const {
    if (width < 1 || height < 1) throw InvalidArgument("grid dimensions must be positive");
    if (!(frame_rate > 0.0)) throw InvalidArgument("frame rate must be positive");
    if (participants < 1) throw InvalidArgument("need at least one participant");
    if (!(force_low_n > 0.0) || !(force_high_n > 0.0) || force_spread < 0.0)
      throw InvalidArgument("force statistics must be positive");
    if (!(pixel_pitch_mm > 0.0) || !(blob_sigma_px > 0.0)) throw InvalidArgument("blob geometry must be positive");
    if (frames_per_cycle < 1 || cycles_per_prompt < 1 || no_contact_prompts < 0)
      throw InvalidArgument("prompt schedule counts must be positive");
  }
};

/// Random draws shared by all frames of one press cycle.
struct PressPlan {
  ActionPrompt prompt;
  double total_force_n = 0.0;
  std::array<double, kFingerCount> share{};
  std::array<Point2, kFingerCount> center{};  // pixel coordinates
};

struct RenderedFrame {
  PressureImage pressure;
  ContactLabel label;
  std::array<double, kFingerCount> blob_peak{};  // 0 for blobs under the sensing floor
};

/// Canonical fingertip positions as fractions of (width, height), fingers pointing to -y.
inline constexpr std::array<std::array<double, 2>, kFingerCount> kCanonicalFingertips{{
    {0.22, 0.62}, {0.38, 0.33}, {0.52, 0.27}, {0.65, 0.33}, {0.77, 0.45}}};

/// Press envelope in [0, 1]: zero, raised-cosine rise, hold, raised-cosine fall, zero.
inline double press_envelope(double phase) {
  if (phase <= 0.1 || phase >= 0.9) return 0.0;
  if (phase < 0.35) return 0.5 - 0.5 * std::cos(std::numbers::pi * (phase - 0.1) / 0.25);
  if (phase <= 0.65) return 1.0;
  return 0.5 + 0.5 * std::cos(std::numbers::pi * (phase - 0.65) / 0.25);
}

inline double mean_force(const SynthConfig& c, PromptForce f) {
  switch (f) {
    case PromptForce::low: return c.force_low_n;
    case PromptForce::high: return c.force_high_n;
    case PromptForce::slide: return std::sqrt(c.force_low_n * c.force_high_n);
    default: return 0.0;
  }
}

/// `hand_offset` is a per-participant displacement in grid fractions.
inline PressPlan sample_press(const ActionPrompt& prompt, const SynthConfig& c, std::mt19937_64& rng,
                              std::array<double, 2> hand_offset = {0.0, 0.0}, double force_scale = 1.0) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> share_jitter(0.8, 1.2);
  PressPlan plan;
  plan.prompt = prompt;
  const double mean = mean_force(c, prompt.force) * force_scale;
  plan.total_force_n = std::max(0.05 * mean, mean * (1.0 + c.force_spread * unit(rng)));
  double share_sum = 0.0;
  for (int i = 0; i < kFingerCount; ++i) {
    const double jitter = share_jitter(rng);
    plan.share[i] = prompt.fingers[i] ? jitter : 0.0;
    share_sum += plan.share[i];
    const double u = kCanonicalFingertips[i][0] + hand_offset[0] + c.position_jitter * unit(rng);
    const double v = kCanonicalFingertips[i][1] + hand_offset[1] + c.position_jitter * unit(rng);
    plan.center[i] = {u * (c.width - 1), v * (c.height - 1)};
  }
  if (share_sum > 0.0)
    for (double& s : plan.share) s /= share_sum;
  return plan;
}

/// Position of fingertip `i` at `phase`; sliding prompts sweep sideways.
inline Point2 fingertip_at(const PressPlan& plan, int i, double phase, const SynthConfig& c) {
  Point2 p = plan.center[i];
  if (plan.prompt.force == PromptForce::slide) p.x += (phase - 0.5) * 0.15 * (c.width - 1);
  return p;
}

inline RenderedFrame render_press(const PressPlan& plan, double phase, const SynthConfig& c) {
  RenderedFrame out{PressureImage(c.width, c.height), ContactLabel::no_contact(), {}};
  const double env = plan.prompt.force == PromptForce::no_contact ? 0.0 : press_envelope(phase);
  if (env == 0.0) return out;
  const double sx = c.blob_sigma_px, sy = 1.4 * c.blob_sigma_px;
  std::vector<double> acc(static_cast<std::size_t>(c.width) * c.height, 0.0);
  std::vector<double> blob(acc.size());
  bool any = false;
  for (int i = 0; i < kFingerCount; ++i) {
    if (!plan.prompt.fingers[i]) continue;
    const Point2 ctr = fingertip_at(plan, i, phase, c);
    double mass = 0.0, peak = 0.0;
    for (int y = 0; y < c.height; ++y)
      for (int x = 0; x < c.width; ++x) {
        const double dx = (x - ctr.x) / sx, dy = (y - ctr.y) / sy;
        const double g = std::exp(-0.5 * (dx * dx + dy * dy));
        blob[static_cast<std::size_t>(y) * c.width + x] = g;
        mass += g;
      }
    if (mass <= 0.0) continue;
    // Integral in kPa * px^2 is force / element area.
    const double integral = plan.share[i] * plan.total_force_n * env * 1000.0 / (c.pixel_pitch_mm * c.pixel_pitch_mm);
    const double scale = integral / mass;
    for (double g : blob) peak = std::max(peak, g * scale);
    if (peak < kContactThresholdKpa) continue;
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += blob[k] * scale;
    out.blob_peak[i] = peak;
    out.label.fingers[i] = 1;
    any = true;
  }
  if (!any) return out;
  out.pressure = PressureImage(c.width, c.height, std::move(acc));
  out.label.force = plan.prompt.force == PromptForce::low    ? ForceLevel::low
                    : plan.prompt.force == PromptForce::high ? ForceLevel::high
                                                             : ForceLevel::unspecified;
  return out;
}

/// One frame of a freshly sampled press.
inline RenderedFrame render_frame(const ActionPrompt& prompt, double phase, const SynthConfig& c,
                                  std::mt19937_64& rng) {
  if (phase < 0.0 || phase > 1.0) throw InvalidArgument("phase must lie in [0, 1]");
  return render_press(sample_press(prompt, c, rng), phase, c);
}

/// Companion feature map for a rendered frame.
inline Volume render_features(const RenderedFrame& frame, const PressPlan& plan, double phase, Domain domain,
                              const SynthConfig& c, std::mt19937_64& rng) {
  const DomainShift& shift = domain == Domain::full ? c.full_shift : c.weak_shift;
  std::normal_distribution<double> noise(0.0, shift.texture_noise), sensor(0.0, c.cue_noise);
  Volume f(c.width, c.height, kFeatureChannels);
  const double sx = 1.5 * c.blob_sigma_px, sy = 2.0 * c.blob_sigma_px;
  std::array<Point2, kFingerCount> tips;
  for (int i = 0; i < kFingerCount; ++i) tips[i] = fingertip_at(plan, i, phase, c);
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      double silhouette = 0.0;
      for (int i = 0; i < kFingerCount; ++i) {
        const double dx = (x - tips[i].x) / sx, dy = (y - tips[i].y) / sy;
        silhouette += (plan.prompt.fingers[i] ? 1.0 : 0.5) * std::exp(-0.5 * (dx * dx + dy * dy));
      }
      const double cue = std::tanh(frame.pressure.at(x, y) / 10.0);
      f.at(x, y, 0) = shift.pressure_gain * cue + shift.bias[0] + sensor(rng);
      f.at(x, y, 1) = silhouette + shift.bias[1] + noise(rng);
      f.at(x, y, 2) = shift.bias[2] + noise(rng);
    }
  return f;
}

/// Records of one participant's session in one domain. Weak records drop the
/// pressure image but keep the label rendered from it.
inline std::vector<SessionRecord> generate_session(const SynthConfig& c, int participant, Domain domain) {
  c.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                    static_cast<std::uint32_t>(participant), static_cast<std::uint32_t>(domain == Domain::weak)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> unit(0.0, 1.0);
  const std::array<double, 2> hand_offset{0.03 * unit(rng), 0.03 * unit(rng)};
  const double force_scale = std::exp(0.15 * unit(rng));

  auto prompts = prompt_table(c.no_contact_prompts);
  std::shuffle(prompts.begin(), prompts.end(), rng);
  char id[32];
  std::snprintf(id, sizeof id, "p%03d-%s", participant, to_string(domain));

  std::vector<SessionRecord> out;
  std::int64_t frame = 0;
  for (const auto& prompt : prompts)
    for (int cycle = 0; cycle < c.cycles_per_prompt; ++cycle) {
      const PressPlan plan = sample_press(prompt, c, rng, hand_offset, force_scale);
      for (int k = 0; k < c.frames_per_cycle; ++k, ++frame) {
        const double phase = (k + 0.5) / c.frames_per_cycle;
        RenderedFrame rf = render_press(plan, phase, c);
        SessionRecord r;
        r.session_id = id;
        r.participant_id = participant;
        r.frame_index = frame;
        r.timestamp = static_cast<double>(frame) / c.frame_rate;
        r.domain = domain;
        r.contact_label = rf.label;
        r.prompt = prompt_text(prompt);
        if (c.with_features) r.features = render_features(rf, plan, phase, domain, c, rng);
        if (domain == Domain::full) r.pressure = std::move(rf.pressure);
        out.push_back(std::move(r));
      }
    }
  return out;
}

/// Participant ids per split. Train and test participants must be disjoint.
struct SplitPlan {
  std::vector<int> full_train, weak_train, full_test, weak_test;
};

/// Deals participants 0..n-1 round-robin into full-train, weak-train, full-test, weak-test.
inline SplitPlan default_split(int participants) {
  if (participants < 4) throw InvalidArgument("a four-way split needs at least 4 participants");
  SplitPlan s;
  std::array<std::vector<int>*, 4> slots{&s.full_train, &s.weak_train, &s.full_test, &s.weak_test};
  for (int p = 0; p < participants; ++p) slots[p % 4]->push_back(p);
  return s;
}

struct Dataset {
  std::vector<SessionRecord> full_train, weak_train, full_test, weak_test;
};

inline Dataset generate_dataset(const SynthConfig& c, const SplitPlan& plan) {
  c.validate();
  std::set<int> train(plan.full_train.begin(), plan.full_train.end());
  train.insert(plan.weak_train.begin(), plan.weak_train.end());
  for (const auto* test : {&plan.full_test, &plan.weak_test})
    for (int p : *test)
      if (train.contains(p))
        throw InvalidArgument("participant " + std::to_string(p) + " appears in both train and test splits");
  auto build = [&](const std::vector<int>& ids, Domain d) {
    std::vector<SessionRecord> out;
    for (int p : ids) {
      auto s = generate_session(c, p, d);
      out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    return out;
  };
  return {build(plan.full_train, Domain::full), build(plan.weak_train, Domain::weak),
          build(plan.full_test, Domain::full), build(plan.weak_test, Domain::weak)};
}

inline Dataset generate_dataset(const SynthConfig& c) { return generate_dataset(c, default_split(c.participants)); }

}  // namespace pressense
