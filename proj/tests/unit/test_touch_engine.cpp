#include <gtest/gtest.h>

#include <chrono>

#include "pressense/touch_engine.hpp"
#include "pressense/typing_synth.hpp"

using namespace pressense;

namespace {

PressureImage blob_frame(int w, int h, std::vector<Point2> centers, double peak = 8.0) {
  std::vector<double> v(static_cast<std::size_t>(w) * h, 0.0);
  for (const auto& c : centers)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        v[static_cast<std::size_t>(y) * w + x] +=
            peak * std::exp(-0.5 * (std::pow((x - c.x) / 2.0, 2) + std::pow((y - c.y) / 2.0, 2)));
  return PressureImage(w, h, v);
}

std::vector<KeyEvent> run_sequence(const std::vector<int>& bits, int debounce) {
  EngineConfig cfg;
  cfg.debounce_frames = debounce;
  TouchEngine engine(cfg);
  const PressureImage on = blob_frame(20, 20, {{10, 10}}), off(20, 20);
  std::vector<KeyEvent> events;
  for (int b : bits) {
    auto out = engine.step_frame(b ? on : off);
    events.insert(events.end(), out.keys.begin(), out.keys.end());
  }
  return events;
}

// Declarative form of the debounce rule: the pressed state turns on at t when it
// is off and frames t-n+1..t are all contact, and turns off at t when it is on
// and frames t-n+1..t are all empty.
std::vector<std::pair<KeyEventKind, int>> expected_events(const std::vector<int>& bits, int n) {
  std::vector<std::pair<KeyEventKind, int>> out;
  bool pressed = false;
  for (int t = 0; t < static_cast<int>(bits.size()); ++t) {
    if (t + 1 < n) continue;
    bool all_on = true, all_off = true;
    for (int k = t - n + 1; k <= t; ++k) {
      all_on = all_on && bits[k] == 1;
      all_off = all_off && bits[k] == 0;
    }
    if (!pressed && all_on) {
      pressed = true;
      out.push_back({KeyEventKind::down, t});
    } else if (pressed && all_off) {
      pressed = false;
      out.push_back({KeyEventKind::up, t});
    }
  }
  return out;
}

std::vector<KeyEvent> type_keys(const std::vector<std::string>& keys, const KeyLayout& layout, int gap = 3) {
  TypingSynthConfig c;
  c.gap_frames = gap;
  c.aim_jitter_px = 0.0;
  TouchEngine engine(EngineConfig{}, layout);
  std::vector<KeyEvent> events;
  for (const auto& r : generate_typing_session(keys, layout, c)) {
    auto out = engine.step_frame(*r.pressure);
    events.insert(events.end(), out.keys.begin(), out.keys.end());
  }
  return events;
}

KeyEvent down(const std::string& key, std::int64_t frame) {
  KeyEvent e;
  e.kind = KeyEventKind::down;
  e.key = key;
  e.frame = frame;
  return e;
}

}  // namespace

TEST(Debounce, WorkedSequence) {
  auto ev = run_sequence({0, 1, 1, 1, 0, 1, 0, 0}, 2);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].kind, KeyEventKind::down);
  EXPECT_EQ(ev[0].frame, 2);
  EXPECT_EQ(ev[1].kind, KeyEventKind::up);
  EXPECT_EQ(ev[1].frame, 7);
  EXPECT_TRUE(run_sequence({0, 1, 0}, 2).empty());
}

TEST(Debounce, ExhaustiveEnumeration) {
  for (int n : {1, 2, 3}) {
    for (int len = 1; len <= 10; ++len) {
      for (int mask = 0; mask < (1 << len); ++mask) {
        std::vector<int> bits(len);
        for (int i = 0; i < len; ++i) bits[i] = (mask >> i) & 1;
        auto ev = run_sequence(bits, n);
        auto want = expected_events(bits, n);
        ASSERT_EQ(ev.size(), want.size()) << "n=" << n << " mask=" << mask << " len=" << len;
        for (std::size_t i = 0; i < ev.size(); ++i) {
          ASSERT_EQ(ev[i].kind, want[i].first);
          ASSERT_EQ(ev[i].frame, want[i].second);
        }
        for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
          ASSERT_NE(ev[i].kind, ev[i + 1].kind);
          if (ev[i].kind == KeyEventKind::down) ASSERT_GE(ev[i + 1].frame - ev[i].frame, n);
        }
      }
    }
  }
}

TEST(Debounce, StablePressLatency) {
  for (int n : {1, 2, 3, 4}) {
    std::vector<int> bits(3, 0);
    bits.resize(15, 1);
    auto ev = run_sequence(bits, n);
    ASSERT_FALSE(ev.empty());
    // Onset at frame 3; the key-down lands on the n-th consecutive contact frame.
    EXPECT_EQ(ev[0].frame, 3 + n - 1);
  }
}

TEST(TouchEngine, TwoSimultaneousTouches) {
  auto layout = qwerty_layout();
  TouchEngine engine(EngineConfig{}, layout);
  auto frame = blob_frame(185, 105, {key_center(layout, "q"), key_center(layout, "p")});
  std::vector<KeyEvent> downs;
  for (int i = 0; i < 4; ++i)
    for (const auto& e : engine.step_frame(frame).keys) downs.push_back(e);
  ASSERT_EQ(downs.size(), 2u);
  EXPECT_EQ(downs[0].frame, 1);
  EXPECT_EQ(downs[1].frame, 1);
  EXPECT_NE(downs[0].track, downs[1].track);
  std::set<std::string> keys{*downs[0].key, *downs[1].key};
  EXPECT_EQ(keys, (std::set<std::string>{"q", "p"}));
}

TEST(TouchEngine, StrokesAndWidthMap) {
  EngineConfig cfg;
  TouchEngine engine(cfg);
  std::vector<StrokeSample> strokes;
  for (int i = 0; i < 6; ++i) {
    auto out = engine.step_frame(blob_frame(40, 40, {{10.0 + i, 20.0}}, 3.0 + 4.0 * i));
    strokes.insert(strokes.end(), out.strokes.begin(), out.strokes.end());
  }
  ASSERT_EQ(strokes.size(), 5u);
  for (std::size_t i = 1; i < strokes.size(); ++i) {
    EXPECT_EQ(strokes[i].track, strokes[0].track);
    EXPECT_GT(strokes[i].width, strokes[i - 1].width);
  }
  EXPECT_EQ(width_map(0.0, cfg), cfg.width_min);
  EXPECT_EQ(width_map(500.0, cfg), cfg.width_max);
  double prev = 0.0;
  for (double p = 0.0; p < 40.0; p += 0.25) {
    double w = width_map(p, cfg);
    EXPECT_GE(w, prev);
    EXPECT_GE(w, cfg.width_min);
    EXPECT_LE(w, cfg.width_max);
    prev = w;
  }
}

TEST(TouchEngine, RejectsSizeChangeAndBadConfig) {
  TouchEngine engine;
  engine.step_frame(PressureImage(10, 10));
  EXPECT_THROW(engine.step_frame(PressureImage(10, 11)), SessionError);
  EngineConfig bad;
  bad.debounce_frames = 0;
  EXPECT_THROW(TouchEngine{bad}, InvalidArgument);
}

TEST(TouchEngine, DeterministicAcrossRuns) {
  auto layout = qwerty_layout();
  auto keys = keys_for_text("hello world");
  auto a = type_keys(keys, layout);
  auto b = type_keys(keys, layout);
  EXPECT_EQ(a, b);
}

TEST(TouchEngine, MedianFrameTimeAtSensorSize) {
  auto layout = qwerty_layout();
  TypingSynthConfig c;
  auto records = generate_typing_session(keys_for_text("the quick brown fox"), layout, c);
  TouchEngine engine(EngineConfig{}, layout);
  std::vector<double> ms;
  for (const auto& r : records) {
    auto t0 = std::chrono::steady_clock::now();
    engine.step_frame(*r.pressure);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
  EXPECT_LT(ms[ms.size() / 2], 20.0);
}

TEST(HitTest, HalfOpenRectangles) {
  KeyLayout l{"two", {{"a", 0, 0, 10, 10}, {"b", 10, 0, 10, 10}}};
  EXPECT_EQ(hit_test({5, 5}, l), "a");
  EXPECT_EQ(hit_test({15, 5}, l), "b");
  EXPECT_EQ(hit_test({10, 5}, l), "b");  // shared edge belongs to the right key
  EXPECT_EQ(hit_test({0, 0}, l), "a");
  EXPECT_EQ(hit_test({20, 5}, l), std::nullopt);
  EXPECT_EQ(hit_test({5, 10}, l), std::nullopt);
  EXPECT_EQ(hit_test({-1, 5}, l), std::nullopt);
  KeyLayout overlap{"bad", {{"a", 0, 0, 10, 10}, {"b", 9, 0, 10, 10}}};
  EXPECT_THROW(overlap.validate(), InvalidArgument);
  KeyLayout dup{"bad", {{"a", 0, 0, 10, 10}, {"a", 20, 0, 10, 10}}};
  EXPECT_THROW(dup.validate(), InvalidArgument);
}

TEST(Layout, ShippedQwertyMatchesBuiltIn) {
  auto shipped = load_layout(std::string(PRESSENSE_LAYOUT_DIR) + "/qwerty.json");
  EXPECT_EQ(shipped, qwerty_layout());
  EXPECT_NO_THROW(qwerty_layout().validate());
  for (const auto& k : qwerty_layout().keys) EXPECT_EQ(hit_test(key_center(qwerty_layout(), k.label), qwerty_layout()), k.label);
  EXPECT_THROW(layout_from_json(nlohmann::json::parse(R"({"keys": [{"label": "a"}]})")), ParseError);
}

TEST(ScoreTyping, ExactTranscript) {
  // 150 characters, first key-down at frame 0, Enter at frame 900 (60 s at 15 Hz).
  std::vector<KeyEvent> ev;
  std::string ref;
  for (int i = 0; i < 150; ++i) {
    ref.push_back(static_cast<char>('a' + i % 26));
    ev.push_back(down(std::string(1, ref.back()), i * 6));
  }
  ev.push_back(down("Enter", 900));
  auto r = score_typing(ev, ref, 15.0);
  EXPECT_EQ(r.transcript.typed, ref);
  EXPECT_EQ(r.wpm.net_wpm, 30.0);

  auto sub = ev;
  sub[10].key = "z";
  EXPECT_EQ(score_typing(sub, ref, 15.0).wpm.net_wpm, 29.0);

  // Wrong key corrected with Backspace: transcript is exact again.
  auto fixed = ev;
  fixed.insert(fixed.begin() + 11, {down("x", 61), down("Backspace", 62)});
  auto rf = score_typing(fixed, ref, 15.0);
  EXPECT_EQ(rf.transcript.typed, ref);
  EXPECT_EQ(rf.wpm.errors, 0u);

  std::vector<KeyEvent> no_enter(ev.begin(), ev.end() - 1);
  EXPECT_THROW(score_typing(no_enter, ref, 15.0), IncompleteSession);
}

TEST(ScoreTyping, EndToEndThroughEngine) {
  auto layout = qwerty_layout();
  auto ev = type_keys(keys_for_text("hello world"), layout);
  auto r = score_typing(ev, "hello world", 15.0);
  EXPECT_EQ(r.transcript.typed, "hello world");
  EXPECT_EQ(r.wpm.errors, 0u);
  // Taps every 7 frames; 11 characters before Enter.
  EXPECT_DOUBLE_EQ(r.transcript.elapsed_seconds, 11 * 7 / 15.0);
}
