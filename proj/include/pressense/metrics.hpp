#pragma once

// Evaluation metrics: contact accuracy, contact IoU, volumetric IoU, contact-label
// accuracies, and the typing metrics (Levenshtein errors, WPM / Net WPM).

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pressense/error.hpp"
#include "pressense/losses.hpp"
#include "pressense/pressure.hpp"

namespace pressense {

struct FrameEvaluation {
  std::string frame_id;
  ContactLabel gt_label;
  std::optional<PressureImage> gt_pressure;  // present only for fully-labeled frames
  PressureImage estimate;
  std::optional<ContactLabel> estimated_label;
};

/// Fraction of frames whose thresholded any-contact bit matches the label's.
inline double contact_accuracy(std::span<const FrameEvaluation> frames, double threshold = kContactThresholdKpa) {
  if (frames.empty()) throw InvalidArgument("contact accuracy needs at least one frame");
  std::size_t agree = 0;
  for (const auto& f : frames)
    if (any_contact(f.estimate, threshold) == f.gt_label.any_contact()) ++agree;
  return static_cast<double>(agree) / static_cast<double>(frames.size());
}

struct IouCounts {
  double intersection = 0.0;
  double union_ = 0.0;
};

inline IouCounts contact_iou_counts(const ContactImage& gt, const ContactImage& est) {
  if (!gt.same_shape(est)) throw InvalidArgument("contact images differ in size");
  IouCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool a = gt.data[i] != 0, b = est.data[i] != 0;
    c.intersection += (a && b) ? 1.0 : 0.0;
    c.union_ += (a || b) ? 1.0 : 0.0;
  }
  return c;
}

/// |gt ∧ est| / |gt ∨ est|; nullopt when both masks are empty.
inline std::optional<double> contact_iou(const ContactImage& gt, const ContactImage& est) {
  auto c = contact_iou_counts(gt, est);
  if (c.union_ == 0.0) return std::nullopt;
  return c.intersection / c.union_;
}

inline IouCounts volumetric_iou_counts(const PressureImage& gt, const PressureImage& est) {
  if (!gt.same_shape(est)) throw InvalidArgument("pressure images differ in size");
  IouCounts c;
  auto a = gt.values();
  auto b = est.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.intersection += std::min(a[i], b[i]);
    c.union_ += std::max(a[i], b[i]);
  }
  return c;
}

/// Σ min(gt, est) / Σ max(gt, est); nullopt when both images are identically zero.
inline std::optional<double> volumetric_iou(const PressureImage& gt, const PressureImage& est) {
  auto c = volumetric_iou_counts(gt, est);
  if (c.union_ == 0.0) return std::nullopt;
  return c.intersection / c.union_;
}

struct LabelMetrics {
  std::array<double, kFingerCount> finger_accuracy{};
  std::optional<double> force_accuracy;  // over pairs whose ground-truth force is specified
  std::size_t pairs = 0;
  std::size_t force_pairs = 0;
};

/// Per-element agreement of (estimated, ground-truth) contact-label pairs.
inline LabelMetrics label_metrics(std::span<const std::pair<ContactLabel, ContactLabel>> pairs) {
  if (pairs.empty()) throw InvalidArgument("label metrics need at least one pair");
  LabelMetrics m;
  m.pairs = pairs.size();
  std::array<std::size_t, kFingerCount> agree{};
  std::size_t force_agree = 0;
  for (const auto& [est, gt] : pairs) {
    for (int i = 0; i < kFingerCount; ++i)
      if ((est.fingers[i] != 0) == (gt.fingers[i] != 0)) ++agree[i];
    if (gt.force != ForceLevel::unspecified) {
      ++m.force_pairs;
      if (est.force == gt.force) ++force_agree;
    }
  }
  for (int i = 0; i < kFingerCount; ++i)
    m.finger_accuracy[i] = static_cast<double>(agree[i]) / static_cast<double>(pairs.size());
  if (m.force_pairs > 0) m.force_accuracy = static_cast<double>(force_agree) / static_cast<double>(m.force_pairs);
  return m;
}

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD, one per byte.
inline std::u32string to_code_points(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > text.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

/// Unit-cost Levenshtein distance over code points.
inline std::size_t char_errors(std::string_view reference, std::string_view typed) {
  const std::u32string a = to_code_points(reference);
  const std::u32string b = to_code_points(typed);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

struct TypingTranscript {
  std::string reference;
  std::string typed;
  double elapsed_seconds = 0.0;  // first keystroke to Enter
};

struct WpmResult {
  double net_wpm = 0.0;
  double wpm = 0.0;
  std::size_t characters = 0;
  std::size_t errors = 0;
  double elapsed_seconds = 0.0;
};

/// Net WPM = (c/5 - e) / (t/60), taken literally: negative when e > c/5.
inline WpmResult net_wpm(std::size_t characters, std::size_t errors, double elapsed_seconds) {
  if (!(elapsed_seconds > 0.0)) throw InvalidArgument("elapsed time must be positive");
  WpmResult r;
  r.characters = characters;
  r.errors = errors;
  r.elapsed_seconds = elapsed_seconds;
  const double minutes = elapsed_seconds / 60.0;
  const double words = static_cast<double>(characters) / 5.0;
  r.wpm = words / minutes;
  r.net_wpm = (words - static_cast<double>(errors)) / minutes;
  return r;
}

inline WpmResult net_wpm(const TypingTranscript& t) {
  return net_wpm(to_code_points(t.typed).size(), char_errors(t.reference, t.typed), t.elapsed_seconds);
}

struct MetricsReport {
  std::size_t frames = 0;
  std::size_t pressure_frames = 0;
  double contact_accuracy = 0.0;
  // Pressure metrics exist only when some frame carries ground-truth pressure.
  std::optional<double> contact_iou;
  std::optional<double> contact_iou_global;
  std::optional<double> volumetric_iou;
  std::optional<double> volumetric_iou_global;
  std::size_t contact_iou_frames = 0;
  std::size_t volumetric_iou_frames = 0;
  std::optional<LabelMetrics> labels;
};

/// Evaluates a sequence of frames. IoU metrics are averaged per frame over the
/// frames where they are defined (both-empty frames are skipped); the global
/// variants pool intersections and unions over all pressure frames.
inline MetricsReport evaluate_frames(std::span<const FrameEvaluation> frames,
                                     double threshold = kContactThresholdKpa) {
  MetricsReport r;
  r.frames = frames.size();
  r.contact_accuracy = contact_accuracy(frames, threshold);
  double ciou_sum = 0.0, viou_sum = 0.0;
  IouCounts cglob, vglob;
  std::vector<std::pair<ContactLabel, ContactLabel>> label_pairs;
  for (const auto& f : frames) {
    if (f.estimated_label) label_pairs.emplace_back(*f.estimated_label, f.gt_label);
    if (!f.gt_pressure) continue;
    ++r.pressure_frames;
    auto gc = contact_image(*f.gt_pressure, threshold);
    auto ec = contact_image(f.estimate, threshold);
    auto cc = contact_iou_counts(gc, ec);
    auto vc = volumetric_iou_counts(*f.gt_pressure, f.estimate);
    cglob.intersection += cc.intersection;
    cglob.union_ += cc.union_;
    vglob.intersection += vc.intersection;
    vglob.union_ += vc.union_;
    if (cc.union_ > 0.0) {
      ciou_sum += cc.intersection / cc.union_;
      ++r.contact_iou_frames;
    }
    if (vc.union_ > 0.0) {
      viou_sum += vc.intersection / vc.union_;
      ++r.volumetric_iou_frames;
    }
  }
  if (r.pressure_frames > 0) {
    if (r.contact_iou_frames > 0) r.contact_iou = ciou_sum / static_cast<double>(r.contact_iou_frames);
    if (r.volumetric_iou_frames > 0)
      r.volumetric_iou = viou_sum / static_cast<double>(r.volumetric_iou_frames);
    if (cglob.union_ > 0.0) r.contact_iou_global = cglob.intersection / cglob.union_;
    if (vglob.union_ > 0.0) r.volumetric_iou_global = vglob.intersection / vglob.union_;
  }
  if (!label_pairs.empty()) r.labels = label_metrics(label_pairs);
  return r;
}

inline nlohmann::ordered_json to_json(const LabelMetrics& m) {
  nlohmann::ordered_json j;
  static constexpr std::array<const char*, kFingerCount> names{"thumb", "index", "middle", "ring", "pinky"};
  for (int i = 0; i < kFingerCount; ++i) j["finger_accuracy"][names[i]] = m.finger_accuracy[i];
  j["force_accuracy"] = m.force_accuracy ? nlohmann::ordered_json(*m.force_accuracy) : nlohmann::ordered_json();
  j["pairs"] = m.pairs;
  j["force_pairs"] = m.force_pairs;
  return j;
}

/// Report as JSON. Pressure metrics are omitted entirely for frame sets without
/// ground-truth pressure; an IoU that is undefined on every frame is null.
inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["frames"] = r.frames;
  j["contact_accuracy"] = r.contact_accuracy;
  if (r.pressure_frames > 0) {
    j["pressure_frames"] = r.pressure_frames;
    j["contact_iou"] = opt(r.contact_iou);
    j["contact_iou_global"] = opt(r.contact_iou_global);
    j["contact_iou_frames"] = r.contact_iou_frames;
    j["volumetric_iou"] = opt(r.volumetric_iou);
    j["volumetric_iou_global"] = opt(r.volumetric_iou_global);
    j["volumetric_iou_frames"] = r.volumetric_iou_frames;
  }
  if (r.labels) j["contact_labels"] = to_json(*r.labels);
  return j;
}

inline nlohmann::ordered_json to_json(const WpmResult& w) {
  nlohmann::ordered_json j;
  j["net_wpm"] = w.net_wpm;
  j["wpm"] = w.wpm;
  j["characters"] = w.characters;
  j["errors"] = w.errors;
  j["elapsed_seconds"] = w.elapsed_seconds;
  return j;
}

}  // namespace pressense
