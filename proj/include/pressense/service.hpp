#pragma once

// Transport-independent session protocol and offline replay.
//
// Client -> service
//   {"type": "config", "session": id, "frame_rate": 15, "layout": "qwerty" | {layout object},
//    "debounce_frames": 2, "threshold": 1.0, "mode": "keyboard" | "drawing" | "raw-events",
//    "reference": "text to score against", "grid": [w, h]}
//   {"type": "frame", "session": id, "timestamp": t,
//    "pressure": {"width": w, "height": h, "data": [...]}}        dense
//   {"type": "frame", "session": id, "timestamp": t,
//    "touches": [{"x": .., "y": .., "pressure": ..}, ...]}        sparse, needs "grid"
//
// Service -> client
//   {"type": "ack", "session": id, "of": "config"}
//   {"type": "events", "session": id, "frame": n, "timestamp": t,
//    "touches": [...], "keys": [...], "strokes": [...]}           one per inbound frame
//   {"type": "transcript", "session": id, "reference", "typed", "elapsed_seconds",
//    "net_wpm", "wpm", "characters", "errors"}                    keyboard mode, on Enter
//   {"type": "error", "session": id, "code": "parse" | "protocol" | "session", "message": ...}

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pressense/error.hpp"
#include "pressense/metrics.hpp"
#include "pressense/records.hpp"
#include "pressense/touch_engine.hpp"
#include "pressense/trainer.hpp"

namespace pressense {

enum class SessionMode { keyboard, drawing, raw_events };

inline SessionMode session_mode_from_string(const std::string& s) {
  if (s == "keyboard") return SessionMode::keyboard;
  if (s == "drawing") return SessionMode::drawing;
  if (s == "raw-events") return SessionMode::raw_events;
  throw InvalidArgument("unknown session mode '" + s + "'");
}

inline const char* to_string(SessionMode m) {
  switch (m) {
    case SessionMode::keyboard: return "keyboard";
    case SessionMode::drawing: return "drawing";
    default: return "raw-events";
  }
}

struct SessionConfig {
  std::string session_id = "session";
  double frame_rate = 15.0;
  std::string layout = "qwerty";
  int debounce_frames = 2;
  double threshold = kContactThresholdKpa;
  SessionMode mode = SessionMode::keyboard;
  std::string reference;
  std::optional<std::pair<int, int>> grid;  // for sparse frames

  void validate() const {
    if (!(frame_rate > 0.0)) throw InvalidArgument("frame rate must be positive");
    if (debounce_frames < 1) throw InvalidArgument("debounce_frames must be >= 1");
    if (!(threshold > 0.0)) throw InvalidArgument("threshold must be positive");
    if (grid && (grid->first < 1 || grid->second < 1)) throw InvalidArgument("grid dimensions must be positive");
  }

  EngineConfig engine() const {
    EngineConfig e;
    e.debounce_frames = debounce_frames;
    e.threshold = threshold;
    e.frame_rate = frame_rate;
    return e;
  }
};

/// Named layouts: the built-in QWERTY plus every *.json file of a directory.
class LayoutRegistry {
 public:
  LayoutRegistry() { layouts_["qwerty"] = qwerty_layout(); }

  static LayoutRegistry from_directory(const std::string& dir) {
    LayoutRegistry r;
    if (dir.empty() || !std::filesystem::is_directory(dir)) return r;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      KeyLayout l = load_layout(f.string());
      r.layouts_[l.name.empty() ? f.stem().string() : l.name] = std::move(l);
    }
    return r;
  }

  const KeyLayout& get(const std::string& name) const {
    auto it = layouts_.find(name);
    if (it == layouts_.end()) throw InvalidArgument("unknown layout '" + name + "'");
    return it->second;
  }
  void add(KeyLayout l) { layouts_[l.name] = std::move(l); }
  const std::map<std::string, KeyLayout>& all() const noexcept { return layouts_; }

 private:
  std::map<std::string, KeyLayout> layouts_;
};

inline nlohmann::ordered_json to_json(const TouchPoint& t) {
  return {{"x", t.x},
          {"y", t.y},
          {"peak_pressure", t.peak_pressure},
          {"force_proxy", t.blob_force_proxy}};
}

inline nlohmann::ordered_json to_json(const KeyEvent& e) {
  nlohmann::ordered_json j;
  j["kind"] = e.kind == KeyEventKind::down ? "down" : "up";
  j["key"] = e.key ? nlohmann::ordered_json(*e.key) : nlohmann::ordered_json();
  j["frame"] = e.frame;
  j["timestamp"] = e.timestamp;
  j["x"] = e.position.x;
  j["y"] = e.position.y;
  j["track"] = e.track;
  return j;
}

inline nlohmann::ordered_json to_json(const StrokeSample& s) {
  return {{"track", s.track}, {"x", s.position.x}, {"y", s.position.y},
          {"pressure", s.pressure}, {"width", s.width}, {"frame", s.frame}};
}

inline nlohmann::ordered_json events_message(const std::string& session, const FrameEvents& ev, double timestamp) {
  nlohmann::ordered_json j;
  j["type"] = "events";
  j["session"] = session;
  j["frame"] = ev.frame;
  j["timestamp"] = timestamp;
  j["touches"] = nlohmann::ordered_json::array();
  for (const auto& t : ev.touches) j["touches"].push_back(to_json(t));
  j["keys"] = nlohmann::ordered_json::array();
  for (const auto& k : ev.keys) j["keys"].push_back(to_json(k));
  j["strokes"] = nlohmann::ordered_json::array();
  for (const auto& s : ev.strokes) j["strokes"].push_back(to_json(s));
  return j;
}

inline nlohmann::ordered_json transcript_message(const std::string& session, const TypingResult& r) {
  nlohmann::ordered_json j;
  j["type"] = "transcript";
  j["session"] = session;
  j["reference"] = r.transcript.reference;
  j["typed"] = r.transcript.typed;
  j["elapsed_seconds"] = r.transcript.elapsed_seconds;
  j["net_wpm"] = r.wpm.net_wpm;
  j["wpm"] = r.wpm.wpm;
  j["characters"] = r.wpm.characters;
  j["errors"] = r.wpm.errors;
  return j;
}

inline nlohmann::ordered_json error_message(const std::string& session, const std::string& code,
                                            const std::string& message) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["session"] = session;
  j["code"] = code;
  j["message"] = message;
  return j;
}

/// Renders sparse touches as round Gaussian blobs (sigma 2.5 px) of the given peak.
inline PressureImage rasterize_touches(const nlohmann::json& touches, int width, int height) {
  std::vector<double> v(static_cast<std::size_t>(width) * height, 0.0);
  constexpr double sigma = 2.5;
  for (const auto& t : touches) {
    const double cx = t.at("x").get<double>(), cy = t.at("y").get<double>(), peak = t.at("pressure").get<double>();
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(peak) || peak < 0.0)
      throw InvalidArgument("touch coordinates and pressure must be finite, pressure non-negative");
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dx = (x - cx) / sigma, dy = (y - cy) / sigma;
        v[static_cast<std::size_t>(y) * width + x] += peak * std::exp(-0.5 * (dx * dx + dy * dy));
      }
  }
  return PressureImage(width, height, std::move(v));
}

inline SessionConfig session_config_from_json(const nlohmann::json& j, LayoutRegistry& layouts) {
  SessionConfig c;
  c.session_id = j.at("session").get<std::string>();
  c.frame_rate = j.value("frame_rate", c.frame_rate);
  c.debounce_frames = j.value("debounce_frames", c.debounce_frames);
  c.threshold = j.value("threshold", c.threshold);
  c.mode = session_mode_from_string(j.value("mode", std::string("keyboard")));
  c.reference = j.value("reference", std::string());
  if (auto it = j.find("layout"); it != j.end()) {
    if (it->is_object()) {
      KeyLayout l = layout_from_json(*it);
      if (l.name.empty()) l.name = "session:" + c.session_id;
      c.layout = l.name;
      layouts.add(std::move(l));
    } else {
      c.layout = it->get<std::string>();
    }
  }
  layouts.get(c.layout);
  if (auto it = j.find("grid"); it != j.end()) {
    auto g = it->get<std::vector<int>>();
    if (g.size() != 2) throw InvalidArgument("grid must be [width, height]");
    c.grid = std::make_pair(g[0], g[1]);
  }
  c.validate();
  return c;
}

/// One client session. Feed it inbound text messages; it returns the replies in
/// order. Not thread-safe; a transport runs one handler per connection.
class SessionHandler {
 public:
  explicit SessionHandler(LayoutRegistry layouts = {}) : layouts_(std::move(layouts)) {}

  struct Reply {
    std::vector<std::string> messages;
    bool close = false;
  };

  Reply handle(const std::string& text) {
    Reply out;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      out.messages.push_back(error_message(session_id(), "parse", std::string("malformed JSON: ") + e.what()).dump());
      out.close = true;
      return out;
    }
    try {
      if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw ProtocolError("message must be an object with a string \"type\"");
      if (!j.contains("session") || !j["session"].is_string())
        throw ProtocolError("message must carry a string \"session\"");
      const std::string type = j["type"].get<std::string>();
      if (type == "config") {
        configure(j);
        nlohmann::ordered_json ack{{"type", "ack"}, {"session", config_->session_id}, {"of", "config"}};
        out.messages.push_back(ack.dump());
      } else if (type == "frame") {
        frame(j, out);
      } else {
        throw ProtocolError("unknown message type '" + type + "'");
      }
    } catch (const ProtocolError& e) {
      out.messages.push_back(error_message(session_id(), "protocol", e.what()).dump());
    } catch (const SessionError& e) {
      out.messages.push_back(error_message(session_id(), "session", e.what()).dump());
    } catch (const InvalidArgument& e) {
      out.messages.push_back(error_message(session_id(), "protocol", e.what()).dump());
    } catch (const ParseError& e) {
      out.messages.push_back(error_message(session_id(), "protocol", e.what()).dump());
    } catch (const nlohmann::json::exception& e) {
      out.messages.push_back(error_message(session_id(), "protocol", e.what()).dump());
    }
    return out;
  }

  const std::optional<SessionConfig>& config() const noexcept { return config_; }
  const LayoutRegistry& layouts() const noexcept { return layouts_; }

 private:
  std::string session_id() const { return config_ ? config_->session_id : std::string(); }

  void configure(const nlohmann::json& j) {
    if (config_) throw ProtocolError("session is already configured");
    SessionConfig c = session_config_from_json(j, layouts_);
    std::optional<KeyLayout> layout;
    if (c.mode == SessionMode::keyboard) layout = layouts_.get(c.layout);
    engine_.emplace(c.engine(), std::move(layout));
    config_ = std::move(c);
  }

  void frame(const nlohmann::json& j, Reply& out) {
    if (!config_) throw ProtocolError("frame received before config");
    if (j["session"].get<std::string>() != config_->session_id)
      throw ProtocolError("frame for session '" + j["session"].get<std::string>() + "' on session '" +
                          config_->session_id + "'");
    PressureImage img;
    if (auto it = j.find("pressure"); it != j.end()) {
      img = PressureImage(it->at("width").get<int>(), it->at("height").get<int>(),
                          it->at("data").get<std::vector<double>>());
    } else if (auto t = j.find("touches"); t != j.end()) {
      if (!config_->grid) throw ProtocolError("sparse frames need \"grid\" in the config");
      img = rasterize_touches(*t, config_->grid->first, config_->grid->second);
    } else {
      throw ProtocolError("frame carries neither \"pressure\" nor \"touches\"");
    }
    const double ts = j.contains("timestamp") ? j["timestamp"].get<double>()
                                              : static_cast<double>(engine_->frames_seen()) / config_->frame_rate;
    FrameEvents ev = engine_->step_frame(img);
    out.messages.push_back(events_message(config_->session_id, ev, ts).dump());
    if (config_->mode != SessionMode::keyboard) return;
    bool enter = false;
    for (const auto& k : ev.keys) {
      typed_.push_back(k);
      enter = enter || (k.kind == KeyEventKind::down && k.key == "Enter");
    }
    if (enter) {
      out.messages.push_back(
          transcript_message(config_->session_id, score_typing(typed_, config_->reference, config_->frame_rate))
              .dump());
      typed_.clear();
    }
  }

  LayoutRegistry layouts_;
  std::optional<SessionConfig> config_;
  std::optional<TouchEngine> engine_;
  std::vector<KeyEvent> typed_;
};

struct ReplayResult {
  std::vector<FrameEvents> events;
  std::optional<TypingResult> transcript;
  std::optional<MetricsReport> metrics;
  std::size_t frames = 0;
};

/// Runs records through the engine. With a model, the estimate of each frame is
/// the model's prediction from its feature map; without one, a full record's
/// own pressure image is the estimate and weak records are skipped. Metrics are
/// reported when `with_metrics` is set and at least one frame was evaluated.
inline ReplayResult replay_records(std::span<const SessionRecord> records, const SessionConfig& cfg,
                                   const LayoutRegistry& layouts, const ModelParams* model = nullptr,
                                   bool with_metrics = true) {
  cfg.validate();
  std::optional<KeyLayout> layout;
  if (cfg.mode == SessionMode::keyboard) layout = layouts.get(cfg.layout);
  TouchEngine engine(cfg.engine(), layout);
  const BinSpec spec = model ? make_bin_spec(model->config.n_bins) : make_bin_spec();
  ReplayResult out;
  std::vector<FrameEvaluation> frames;
  std::vector<KeyEvent> keys;
  for (const auto& r : records) {
    PressureImage estimate;
    if (model) {
      if (!r.features) throw InvalidArgument("model replay needs feature maps in the records");
      estimate = predict_pressure(*model, *r.features, spec);
    } else if (r.pressure) {
      estimate = *r.pressure;
    } else {
      continue;
    }
    FrameEvents ev = engine.step_frame(estimate);
    keys.insert(keys.end(), ev.keys.begin(), ev.keys.end());
    out.events.push_back(std::move(ev));
    ++out.frames;
    if (with_metrics)
      frames.push_back({r.session_id + "/" + std::to_string(r.frame_index), r.contact_label, r.pressure,
                        std::move(estimate), std::nullopt});
  }
  if (cfg.mode == SessionMode::keyboard) {
    for (const auto& k : keys)
      if (k.kind == KeyEventKind::down && k.key == "Enter") {
        out.transcript = score_typing(keys, cfg.reference, cfg.frame_rate);
        break;
      }
  }
  if (with_metrics && !frames.empty()) out.metrics = evaluate_frames(frames, cfg.threshold);
  return out;
}

inline nlohmann::ordered_json to_json(const ReplayResult& r, const SessionConfig& cfg) {
  nlohmann::ordered_json j;
  j["session"] = cfg.session_id;
  j["mode"] = to_string(cfg.mode);
  j["frames"] = r.frames;
  std::size_t downs = 0, ups = 0, strokes = 0;
  for (const auto& e : r.events) {
    for (const auto& k : e.keys) (k.kind == KeyEventKind::down ? downs : ups)++;
    strokes += e.strokes.size();
  }
  j["events"] = {{"key_down", downs}, {"key_up", ups}, {"strokes", strokes}};
  if (r.transcript) {
    auto t = transcript_message(cfg.session_id, *r.transcript);
    t.erase("type");
    t.erase("session");
    j["transcript"] = t;
  }
  if (r.metrics) j["metrics"] = to_json(*r.metrics);
  return j;
}

}  // namespace pressense
