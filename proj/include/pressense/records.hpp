#pragma once

// Session records: one frame per line of JSON.
//
//   {"schema_version": 1, "session_id": "p003-full", "participant_id": 3,
//    "frame_index": 0, "timestamp": 0.0, "domain": "full" | "weak",
//    "contact_label": {"fingers": [t, i, m, r, p], "force": -1 | 0 | 1},
//    "prompt": "index+thumb high",
//    "pressure": {"width": W, "height": H, "data": [row-major kPa]},        full only
//    "features": {"width": W, "height": H, "channels": C, "data": [...]}}   optional
//
// Doubles are written with the shortest representation that round-trips.

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pressense/error.hpp"
#include "pressense/grid.hpp"
#include "pressense/losses.hpp"
#include "pressense/pressure.hpp"

namespace pressense {

inline constexpr int kRecordSchemaVersion = 1;

struct SessionRecord {
  std::string session_id;
  int participant_id = 0;
  std::int64_t frame_index = 0;
  double timestamp = 0.0;
  Domain domain = Domain::full;
  ContactLabel contact_label;
  std::optional<PressureImage> pressure;
  std::string prompt;
  std::optional<Volume> features;  // companion feature map used for training

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

inline const char* to_string(Domain d) { return d == Domain::full ? "full" : "weak"; }

inline Domain domain_from_string(const std::string& s) {
  if (s == "full") return Domain::full;
  if (s == "weak") return Domain::weak;
  throw InvalidArgument("unknown domain '" + s + "'");
}

/// Throws InvalidArgument if the record breaks the domain/pressure invariant.
inline void validate_record(const SessionRecord& r) {
  if (r.domain == Domain::weak && r.pressure) throw InvalidArgument("weak record carries pressure");
  if (r.domain == Domain::full && !r.pressure) throw InvalidArgument("full record lacks pressure");
  if (r.pressure && r.features &&
      (r.pressure->width() != r.features->width || r.pressure->height() != r.features->height))
    throw InvalidArgument("features and pressure differ in size");
}

inline nlohmann::ordered_json to_json(const ContactLabel& l) {
  nlohmann::ordered_json j;
  j["fingers"] = nlohmann::ordered_json::array();
  for (auto f : l.fingers) j["fingers"].push_back(static_cast<int>(f));
  j["force"] = static_cast<int>(l.force);
  return j;
}

inline nlohmann::ordered_json to_json(const SessionRecord& r) {
  validate_record(r);
  nlohmann::ordered_json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["session_id"] = r.session_id;
  j["participant_id"] = r.participant_id;
  j["frame_index"] = r.frame_index;
  j["timestamp"] = r.timestamp;
  j["domain"] = to_string(r.domain);
  j["contact_label"] = to_json(r.contact_label);
  j["prompt"] = r.prompt;
  if (r.pressure) {
    j["pressure"]["width"] = r.pressure->width();
    j["pressure"]["height"] = r.pressure->height();
    j["pressure"]["data"] = std::vector<double>(r.pressure->values().begin(), r.pressure->values().end());
  }
  if (r.features) {
    j["features"]["width"] = r.features->width;
    j["features"]["height"] = r.features->height;
    j["features"]["channels"] = r.features->depth;
    j["features"]["data"] = r.features->data;
  }
  return j;
}

namespace detail {

template <typename T>
T field(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(line, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

using WarningSink = std::function<void(std::size_t line, const std::string& message)>;

/// Parses one record line. `line` is used for error messages only.
inline SessionRecord record_from_json(const nlohmann::json& j, std::size_t line, const WarningSink& warn = {}) {
  using detail::field;
  if (!j.is_object()) throw ParseError(line, "record is not a JSON object");
  const int version = field<int>(j, "schema_version", line);
  if (version != kRecordSchemaVersion)
    throw VersionError("line " + std::to_string(line) + ": schema version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kRecordSchemaVersion) + ")");
  static const std::set<std::string> known{"schema_version", "session_id", "participant_id", "frame_index",
                                           "timestamp",      "domain",     "contact_label",  "prompt",
                                           "pressure",       "features"};
  if (warn)
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) warn(line, "ignoring unknown field '" + key + "'");

  SessionRecord r;
  try {
    r.session_id = field<std::string>(j, "session_id", line);
    r.participant_id = field<int>(j, "participant_id", line);
    r.frame_index = field<std::int64_t>(j, "frame_index", line);
    r.timestamp = field<double>(j, "timestamp", line);
    r.domain = domain_from_string(field<std::string>(j, "domain", line));
    r.prompt = j.contains("prompt") ? field<std::string>(j, "prompt", line) : std::string();
    const auto& label = j.at("contact_label");
    auto fingers = field<std::vector<int>>(label, "fingers", line);
    if (fingers.size() != kFingerCount) throw ParseError(line, "contact_label.fingers must have 5 entries");
    r.contact_label = make_label({fingers[0], fingers[1], fingers[2], fingers[3], fingers[4]},
                                 field<int>(label, "force", line));
    if (auto it = j.find("pressure"); it != j.end()) {
      r.pressure = PressureImage(field<int>(*it, "width", line), field<int>(*it, "height", line),
                                 field<std::vector<double>>(*it, "data", line));
    }
    if (auto it = j.find("features"); it != j.end()) {
      Volume v(field<int>(*it, "width", line), field<int>(*it, "height", line), field<int>(*it, "channels", line));
      auto data = field<std::vector<double>>(*it, "data", line);
      if (data.size() != v.data.size()) throw ParseError(line, "features.data has the wrong length");
      v.data = std::move(data);
      r.features = std::move(v);
    }
    validate_record(r);
  } catch (const InvalidArgument& e) {
    throw ParseError(line, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, e.what());
  }
  return r;
}

inline void write_records(std::span<const SessionRecord> records, std::ostream& out) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing records");
}

inline void write_records(std::span<const SessionRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_records(records, out);
}

/// Reads records until end of stream. Blank lines are skipped; a malformed or
/// truncated line raises ParseError carrying its 1-based line number.
inline std::vector<SessionRecord> read_records(std::istream& in, const WarningSink& warn = {}) {
  std::vector<SessionRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    out.push_back(record_from_json(j, line, warn));
  }
  return out;
}

inline std::vector<SessionRecord> read_records(const std::string& path, const WarningSink& warn = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open '" + path + "'");
  return read_records(in, warn);
}

}  // namespace pressense
