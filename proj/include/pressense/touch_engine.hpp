#pragma once

// Frame-by-frame touch pipeline: peaks -> tracks -> debounced key events and strokes.
//
// Per track:
//
//   (new peak) -> pending_down --n hits--> down --miss--> pending_up --n misses--> (gone)
//                      |                    ^                 |
//                      +--miss--> (gone)    +------hit--------+
//
// n = debounce_frames. A key-down fires on the frame that completes n
// consecutive detections; a key-up on the frame that completes n consecutive
// misses. The key is looked up once, at key-down.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pressense/error.hpp"
#include "pressense/geometry.hpp"
#include "pressense/metrics.hpp"
#include "pressense/pressure.hpp"

namespace pressense {

struct KeyRect {
  std::string label;
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

  /// Half-open: [x, x + w) x [y, y + h).
  bool contains(Point2 p) const noexcept { return p.x >= x && p.x < x + w && p.y >= y && p.y < y + h; }
  friend bool operator==(const KeyRect&, const KeyRect&) = default;
};

struct KeyLayout {
  std::string name;
  std::vector<KeyRect> keys;

  void validate() const {
    std::set<std::string> labels;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& k = keys[i];
      if (k.label.empty()) throw InvalidArgument("key labels must be non-empty");
      if (!(k.w > 0.0) || !(k.h > 0.0)) throw InvalidArgument("key '" + k.label + "' has an empty rectangle");
      if (!labels.insert(k.label).second) throw InvalidArgument("duplicate key label '" + k.label + "'");
      for (std::size_t j = 0; j < i; ++j) {
        const auto& o = keys[j];
        if (k.x < o.x + o.w && o.x < k.x + k.w && k.y < o.y + o.h && o.y < k.y + k.h)
          throw InvalidArgument("keys '" + o.label + "' and '" + k.label + "' overlap");
      }
    }
  }
  friend bool operator==(const KeyLayout&, const KeyLayout&) = default;
};

inline std::optional<std::string> hit_test(Point2 p, const KeyLayout& layout) {
  for (const auto& k : layout.keys)
    if (k.contains(p)) return k.label;
  return std::nullopt;
}

inline nlohmann::ordered_json to_json(const KeyLayout& layout) {
  nlohmann::ordered_json j;
  j["name"] = layout.name;
  j["keys"] = nlohmann::ordered_json::array();
  for (const auto& k : layout.keys) j["keys"].push_back({{"label", k.label}, {"rect", {k.x, k.y, k.w, k.h}}});
  return j;
}

/// {"name": "...", "keys": [{"label": "q", "rect": [x, y, w, h]}, ...]}
inline KeyLayout layout_from_json(const nlohmann::json& j) {
  KeyLayout layout;
  try {
    layout.name = j.value("name", std::string());
    for (const auto& k : j.at("keys")) {
      auto r = k.at("rect").get<std::vector<double>>();
      if (r.size() != 4) throw ParseError(0, "key rect must be [x, y, w, h]");
      layout.keys.push_back({k.at("label").get<std::string>(), r[0], r[1], r[2], r[3]});
    }
    layout.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("malformed layout: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(0, std::string("invalid layout: ") + e.what());
  }
  return layout;
}

inline KeyLayout load_layout(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open layout '" + path + "'");
  try {
    return layout_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("layout is not valid JSON: ") + e.what());
  }
}

/// QWERTY letters, Backspace, Space and Enter on a 185 x 105 surface, 17 x 20 px keys.
inline KeyLayout qwerty_layout() {
  KeyLayout l{"qwerty", {}};
  const std::array<std::pair<std::string, double>, 3> rows{{{"qwertyuiop", 5.0}, {"asdfghjkl", 13.0}, {"zxcvbnm", 21.0}}};
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t i = 0; i < rows[r].first.size(); ++i)
      l.keys.push_back({std::string(1, rows[r].first[i]), rows[r].second + 17.0 * static_cast<double>(i),
                        10.0 + 22.0 * static_cast<double>(r), 17.0, 20.0});
  l.keys.push_back({"Backspace", 140.0, 54.0, 34.0, 20.0});
  l.keys.push_back({"Space", 38.0, 76.0, 102.0, 20.0});
  l.keys.push_back({"Enter", 140.0, 76.0, 34.0, 20.0});
  return l;
}

inline Point2 key_center(const KeyLayout& layout, const std::string& label) {
  for (const auto& k : layout.keys)
    if (k.label == label) return {k.x + 0.5 * k.w, k.y + 0.5 * k.h};
  throw InvalidArgument("layout has no key '" + label + "'");
}

struct EngineConfig {
  int debounce_frames = 2;
  double threshold = kContactThresholdKpa;
  double association_radius = 15.0;  // px
  double min_peak_distance = 3.0;    // px
  double frame_rate = 15.0;          // Hz, for event timestamps
  double width_min = 1.0;            // stroke width at the threshold, px
  double width_max = 12.0;           // stroke width at width_pressure_max and above, px
  double width_pressure_max = 30.0;  // kPa

  void validate() const {
    if (debounce_frames < 1) throw InvalidArgument("debounce_frames must be >= 1");
    if (!(threshold > 0.0)) throw InvalidArgument("threshold must be positive");
    if (!(association_radius > 0.0) || !(min_peak_distance >= 1.0))
      throw InvalidArgument("association radius must be positive and peak distance >= 1");
    if (!(frame_rate > 0.0)) throw InvalidArgument("frame rate must be positive");
    if (!(width_min > 0.0) || width_max < width_min || !(width_pressure_max > threshold))
      throw InvalidArgument("invalid stroke width mapping");
  }
};

/// Linear from width_min at the threshold to width_max at width_pressure_max, clamped.
inline double width_map(double kpa, const EngineConfig& c) {
  const double t = std::clamp((kpa - c.threshold) / (c.width_pressure_max - c.threshold), 0.0, 1.0);
  return c.width_min + t * (c.width_max - c.width_min);
}

enum class KeyEventKind { down, up };

struct KeyEvent {
  KeyEventKind kind = KeyEventKind::down;
  std::optional<std::string> key;  // none without a layout or outside every key
  std::int64_t frame = 0;
  double timestamp = 0.0;
  Point2 position;
  int track = 0;

  friend bool operator==(const KeyEvent&, const KeyEvent&) = default;
};

struct StrokeSample {
  int track = 0;
  Point2 position;
  double pressure = 0.0;
  double width = 0.0;
  std::int64_t frame = 0;

  friend bool operator==(const StrokeSample&, const StrokeSample&) = default;
};

struct FrameEvents {
  std::int64_t frame = 0;
  std::vector<TouchPoint> touches;
  std::vector<KeyEvent> keys;
  std::vector<StrokeSample> strokes;
};

enum class TrackState { pending_down, down, pending_up };

struct Track {
  int id = 0;
  TrackState state = TrackState::pending_down;
  int count = 0;  // consecutive hits (pending_down) or misses (pending_up)
  Point2 position;
  double pressure = 0.0;
  std::int64_t onset_frame = -1;
  std::optional<std::string> key;
};

class TouchEngine {
 public:
  explicit TouchEngine(EngineConfig config = {}, std::optional<KeyLayout> layout = std::nullopt)
      : config_(config), layout_(std::move(layout)) {
    config_.validate();
    if (layout_) layout_->validate();
  }

  const EngineConfig& config() const noexcept { return config_; }
  const std::optional<KeyLayout>& layout() const noexcept { return layout_; }
  const std::vector<Track>& tracks() const noexcept { return tracks_; }
  std::int64_t frames_seen() const noexcept { return frame_; }

  FrameEvents step_frame(const PressureImage& frame) {
    if (frame_ == 0) {
      width_ = frame.width();
      height_ = frame.height();
    } else if (frame.width() != width_ || frame.height() != height_) {
      throw SessionError("frame size changed from " + std::to_string(width_) + "x" + std::to_string(height_) +
                         " to " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
    }
    FrameEvents out;
    out.frame = frame_;
    out.touches = find_peaks(frame, config_.threshold, config_.min_peak_distance);

    // Greedy global nearest-neighbour association; ties by track id, then peak order.
    struct Pair {
      double d;
      std::size_t t, p;
    };
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < tracks_.size(); ++t)
      for (std::size_t p = 0; p < out.touches.size(); ++p) {
        const double d = std::hypot(out.touches[p].x - tracks_[t].position.x, out.touches[p].y - tracks_[t].position.y);
        if (d <= config_.association_radius) pairs.push_back({d, t, p});
      }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<int> match(tracks_.size(), -1);
    std::vector<bool> used(out.touches.size(), false);
    for (const auto& pr : pairs)
      if (match[pr.t] < 0 && !used[pr.p]) {
        match[pr.t] = static_cast<int>(pr.p);
        used[pr.p] = true;
      }

    std::vector<Track> next;
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
      Track tr = tracks_[t];
      const bool hit = match[t] >= 0;
      if (hit) {
        const auto& tp = out.touches[static_cast<std::size_t>(match[t])];
        tr.position = {tp.x, tp.y};
        tr.pressure = tp.peak_pressure;
      }
      if (advance(tr, hit, out)) next.push_back(std::move(tr));
    }
    for (std::size_t p = 0; p < out.touches.size(); ++p) {
      if (used[p]) continue;
      Track tr;
      tr.id = next_track_id_++;
      tr.position = {out.touches[p].x, out.touches[p].y};
      tr.pressure = out.touches[p].peak_pressure;
      if (advance(tr, true, out)) next.push_back(std::move(tr));
    }
    tracks_ = std::move(next);
    ++frame_;
    return out;
  }

 private:
  /// Applies one hit/miss to a track, emitting events. Returns false when the track ends.
  bool advance(Track& tr, bool hit, FrameEvents& out) {
    const int n = config_.debounce_frames;
    switch (tr.state) {
      case TrackState::pending_down:
        if (!hit) return false;
        if (++tr.count < n) return true;
        tr.state = TrackState::down;
        tr.count = 0;
        tr.onset_frame = frame_;
        if (layout_) tr.key = hit_test(tr.position, *layout_);
        out.keys.push_back(event(KeyEventKind::down, tr));
        out.strokes.push_back(stroke(tr));
        return true;
      case TrackState::down:
      case TrackState::pending_up:
        if (hit) {
          tr.state = TrackState::down;
          tr.count = 0;
          out.strokes.push_back(stroke(tr));
          return true;
        }
        tr.state = TrackState::pending_up;
        if (++tr.count < n) return true;
        out.keys.push_back(event(KeyEventKind::up, tr));
        return false;
    }
    return false;
  }

  KeyEvent event(KeyEventKind kind, const Track& tr) const {
    return {kind, tr.key, frame_, static_cast<double>(frame_) / config_.frame_rate, tr.position, tr.id};
  }
  StrokeSample stroke(const Track& tr) const {
    return {tr.id, tr.position, tr.pressure, width_map(tr.pressure, config_), frame_};
  }

  EngineConfig config_;
  std::optional<KeyLayout> layout_;
  std::vector<Track> tracks_;
  std::int64_t frame_ = 0;
  int width_ = 0, height_ = 0;
  int next_track_id_ = 0;
};

struct TypingResult {
  TypingTranscript transcript;
  WpmResult wpm;
};

/// Rebuilds the typed text from key-downs up to the first Enter and scores it.
/// Space types ' ', Backspace deletes one code point, unlabeled touches are
/// ignored. Time runs from the first key-down to the Enter key-down.
inline TypingResult score_typing(std::span<const KeyEvent> events, const std::string& reference, double frame_rate) {
  if (!(frame_rate > 0.0)) throw InvalidArgument("frame rate must be positive");
  std::u32string typed;
  std::optional<std::int64_t> first;
  for (const auto& e : events) {
    if (e.kind != KeyEventKind::down || !e.key) continue;
    if (!first) first = e.frame;
    const std::string& k = *e.key;
    if (k == "Enter") {
      std::string text;
      for (char32_t cp : typed) {
        // Re-encode as UTF-8.
        if (cp < 0x80) {
          text.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
          text.push_back(static_cast<char>(0xC0 | (cp >> 6)));
          text.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
          text.push_back(static_cast<char>(0xE0 | (cp >> 12)));
          text.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
          text.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
          text.push_back(static_cast<char>(0xF0 | (cp >> 18)));
          text.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
          text.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
          text.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
      }
      TypingTranscript t{reference, text, static_cast<double>(e.frame - *first) / frame_rate};
      return {t, net_wpm(t)};
    }
    if (k == "Backspace") {
      if (!typed.empty()) typed.pop_back();
    } else if (k == "Space") {
      typed.push_back(U' ');
    } else {
      typed += to_code_points(k);
    }
  }
  throw IncompleteSession("typing session has no Enter key press");
}

}  // namespace pressense
