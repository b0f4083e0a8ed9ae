#pragma once

// Synthetic typing sessions: index-finger taps on key centres of a layout.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pressense/records.hpp"
#include "pressense/touch_engine.hpp"

namespace pressense {

struct TypingSynthConfig {
  int width = 185;
  int height = 105;
  double frame_rate = 15.0;
  int press_frames = 4;
  int gap_frames = 3;
  int lead_frames = 5;          // idle frames before the first tap
  double peak_kpa = 12.0;
  double peak_spread = 0.25;    // relative
  double sigma_px = 2.5;
  double aim_jitter_px = 1.5;
  std::uint64_t seed = 0;
  std::string session_id = "typing";
};

/// Key sequence for `text` followed by Enter. Spaces map to the Space key.
inline std::vector<std::string> keys_for_text(const std::string& text) {
  std::vector<std::string> keys;
  for (char ch : text) keys.push_back(ch == ' ' ? "Space" : std::string(1, ch));
  keys.push_back("Enter");
  return keys;
}

/// One record per frame; every key is a tap of `press_frames` frames.
inline std::vector<SessionRecord> generate_typing_session(const std::vector<std::string>& keys,
                                                          const KeyLayout& layout, const TypingSynthConfig& c) {
  if (c.press_frames < 1 || c.gap_frames < 0 || c.lead_frames < 0) throw InvalidArgument("invalid tap timing");
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<SessionRecord> out;
  auto push = [&](PressureImage p, const std::string& prompt) {
    SessionRecord r;
    r.session_id = c.session_id;
    r.frame_index = static_cast<std::int64_t>(out.size());
    r.timestamp = static_cast<double>(r.frame_index) / c.frame_rate;
    r.domain = Domain::full;
    r.contact_label = any_contact(p) ? make_label({0, 1, 0, 0, 0}, -1) : ContactLabel::no_contact();
    r.pressure = std::move(p);
    r.prompt = prompt;
    out.push_back(std::move(r));
  };
  for (int i = 0; i < c.lead_frames; ++i) push(PressureImage(c.width, c.height), "");
  for (const auto& key : keys) {
    Point2 aim = key_center(layout, key);
    aim.x += c.aim_jitter_px * unit(rng);
    aim.y += c.aim_jitter_px * unit(rng);
    const double peak = c.peak_kpa * std::max(0.2, 1.0 + c.peak_spread * unit(rng));
    for (int f = 0; f < c.press_frames; ++f) {
      std::vector<double> v(static_cast<std::size_t>(c.width) * c.height);
      for (int y = 0; y < c.height; ++y)
        for (int x = 0; x < c.width; ++x) {
          const double dx = (x - aim.x) / c.sigma_px, dy = (y - aim.y) / (1.4 * c.sigma_px);
          v[static_cast<std::size_t>(y) * c.width + x] = peak * std::exp(-0.5 * (dx * dx + dy * dy));
        }
      push(PressureImage(c.width, c.height, std::move(v)), key);
    }
    for (int g = 0; g < c.gap_frames; ++g) push(PressureImage(c.width, c.height), "");
  }
  return out;
}

}  // namespace pressense
