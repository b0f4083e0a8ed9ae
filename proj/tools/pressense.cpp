// pressense: dataset synthesis, toy training, evaluation, replay and the live service.
//
// Exit codes: 0 ok, 1 other failure, 2 invalid arguments, 3 data or parse error,
// 4 training diverged.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pressense/config.hpp"
#include "pressense/server.hpp"
#include "pressense/service.hpp"
#include "pressense/synth.hpp"
#include "pressense/trainer.hpp"
#include "pressense/typing_synth.hpp"

namespace fs = std::filesystem;
using namespace pressense;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

const char* const kSplitFiles[] = {"full_train.jsonl", "weak_train.jsonl", "full_test.jsonl", "weak_test.jsonl"};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config '" + path + "' is not valid JSON: " + e.what());
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text << '\n';
}

std::vector<SessionRecord> load(const std::string& path) {
  return read_records(path, [&](std::size_t line, const std::string& msg) {
    std::cerr << path << ":" << line << ": warning: " << msg << '\n';
  });
}

std::array<std::vector<SessionRecord>, 4> load_dataset(const std::string& dir) {
  std::array<std::vector<SessionRecord>, 4> out;
  for (int i = 0; i < 4; ++i) {
    const auto p = fs::path(dir) / kSplitFiles[i];
    if (fs::exists(p)) out[i] = load(p.string());
  }
  if (out[0].empty() && out[1].empty()) throw ParseError(0, "no training records under '" + dir + "'");
  return out;
}

struct SynthArgs {
  std::string out = "data";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> participants;
  std::string typing;
  std::string typing_out = "typing.jsonl";
};

int run_synth(const SynthArgs& a) {
  if (!a.typing.empty()) {
    TypingSynthConfig tc;
    if (a.seed) tc.seed = *a.seed;
    write_records(generate_typing_session(keys_for_text(a.typing), qwerty_layout(), tc), a.typing_out);
    std::cerr << "wrote typing session to " << a.typing_out << '\n';
    return 0;
  }
  SynthConfig c;
  if (!a.config.empty()) apply_overrides(c, read_json_file(a.config));
  if (a.seed) c.seed = *a.seed;
  if (a.participants) c.participants = *a.participants;
  c.validate();
  const Dataset d = generate_dataset(c);
  fs::create_directories(a.out);
  const std::vector<SessionRecord>* parts[] = {&d.full_train, &d.weak_train, &d.full_test, &d.weak_test};
  for (int i = 0; i < 4; ++i) {
    write_records(*parts[i], (fs::path(a.out) / kSplitFiles[i]).string());
    std::cerr << kSplitFiles[i] << ": " << parts[i]->size() << " records\n";
  }
  return 0;
}

struct TrainArgs {
  std::string data = "data";
  std::string out = "checkpoint.json";
  std::string history;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, steps;
};

int run_train(const TrainArgs& a) {
  TrainConfig c;
  if (!a.config.empty()) apply_overrides(c, read_json_file(a.config));
  if (a.seed) c.seed = c.model.seed = *a.seed;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.steps) c.steps_per_epoch = *a.steps;
  const auto d = load_dataset(a.data);
  const auto& probe = d[0].empty() ? d[1].front() : d[0].front();
  if (!probe.features) throw ParseError(0, "training records carry no feature maps");
  c.model.width = probe.features->width;
  c.model.height = probe.features->height;
  c.model.channels = probe.features->depth;
  auto r = train_toy(d[0], d[1], d[2], d[3], c);
  nlohmann::ordered_json h = nlohmann::ordered_json::array();
  for (const auto& m : r.history) {
    h.push_back(to_json(m));
    std::cerr << "epoch " << m.epoch << ": loss " << m.mean_loss.total << ", weak contact accuracy "
              << m.weak_contact_accuracy << '\n';
  }
  save_checkpoint(a.out, r.params, r.adam);
  if (!a.history.empty()) write_output(a.history, h.dump(2));
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint = "checkpoint.json";
  std::string records;
  std::string out;
  std::string decode = "expected";
};

int run_evaluate(const EvaluateArgs& a) {
  const auto ck = load_checkpoint(a.checkpoint);
  const auto records = load(a.records);
  if (records.empty()) throw ParseError(0, "'" + a.records + "' holds no records");
  const auto mode = a.decode == "argmax" ? PressureDecode::argmax : PressureDecode::expected;
  auto report = evaluate_model(ck.params, records, make_bin_spec(ck.params.config.n_bins), mode);
  write_output(a.out, to_json(report).dump(2));
  return 0;
}

struct ReplayArgs {
  std::string records;
  std::string config;
  std::string checkpoint;
  std::string layouts = PRESSENSE_LAYOUT_DIR;
  std::string out;
  std::string events;
  std::string mode;
  std::string reference;
};

int run_replay(const ReplayArgs& a) {
  LayoutRegistry layouts = LayoutRegistry::from_directory(a.layouts);
  SessionConfig cfg;
  if (!a.config.empty()) {
    auto j = read_json_file(a.config);
    j["type"] = "config";
    if (!j.contains("session")) j["session"] = "replay";
    cfg = session_config_from_json(j, layouts);
  } else {
    cfg.session_id = "replay";
  }
  if (!a.mode.empty()) cfg.mode = session_mode_from_string(a.mode);
  if (!a.reference.empty()) cfg.reference = a.reference;
  const auto records = load(a.records);
  std::optional<Checkpoint> ck;
  if (!a.checkpoint.empty()) ck = load_checkpoint(a.checkpoint);
  auto r = replay_records(records, cfg, layouts, ck ? &ck->params : nullptr);
  if (!a.events.empty()) {
    std::ofstream out(a.events, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + a.events + "' for writing");
    for (const auto& e : r.events) out << events_message(cfg.session_id, e, e.frame / cfg.frame_rate).dump() << '\n';
  }
  write_output(a.out, to_json(r, cfg).dump(2));
  return 0;
}

struct ServeArgs {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  std::string layouts = PRESSENSE_LAYOUT_DIR;
};

int run_serve(const ServeArgs& a) {
  Server server({a.address, a.port, a.layouts});
  server.stop_on_signals();
  std::cerr << "listening on " << a.address << ":" << server.port() << '\n';
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pressure estimation toolkit: synth, train, evaluate, replay, serve"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset or typing session");
  synth->add_option("-o,--out", sa.out, "Output directory for the four splits");
  synth->add_option("-c,--config", sa.config, "JSON file with synth config overrides");
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--participants", sa.participants, "Number of synthetic participants");
  synth->add_option("--typing", sa.typing, "Generate a typing session for this text instead");
  synth->add_option("--typing-out", sa.typing_out, "Output file for --typing");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the toy model on a synthetic dataset");
  train->add_option("-d,--data", ta.data, "Dataset directory written by synth");
  train->add_option("-o,--out", ta.out, "Checkpoint path");
  train->add_option("--history", ta.history, "Write per-epoch metrics JSON here");
  train->add_option("-c,--config", ta.config, "JSON file with training config overrides");
  train->add_option("--seed", ta.seed, "Seed for initialization and batch sampling");
  train->add_option("--epochs", ta.epochs)->check(CLI::PositiveNumber);
  train->add_option("--steps", ta.steps, "Steps per epoch")->check(CLI::PositiveNumber);

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a record file");
  evaluate->add_option("-k,--checkpoint", ea.checkpoint, "Checkpoint path");
  evaluate->add_option("-r,--records", ea.records, "Records (JSON lines)")->required();
  evaluate->add_option("-o,--out", ea.out, "Report path (default stdout)");
  evaluate->add_option("--decode", ea.decode, "Pressure decoding")->check(CLI::IsMember({"argmax", "expected"}));

  ReplayArgs ra;
  auto* replay = app.add_subcommand("replay", "Run recorded frames through the touch engine");
  replay->add_option("-r,--records", ra.records, "Records (JSON lines)")->required();
  replay->add_option("-c,--config", ra.config, "JSON session config");
  replay->add_option("-k,--checkpoint", ra.checkpoint, "Estimate pressure from features with this model");
  replay->add_option("--layouts", ra.layouts, "Directory of layout files");
  replay->add_option("--mode", ra.mode, "Session mode")->check(CLI::IsMember({"keyboard", "drawing", "raw-events"}));
  replay->add_option("--reference", ra.reference, "Reference text for typing scores");
  replay->add_option("-o,--out", ra.out, "Report path (default stdout)");
  replay->add_option("--events", ra.events, "Write per-frame events as JSON lines here");

  ServeArgs va;
  auto* serve = app.add_subcommand("serve", "Run the WebSocket/HTTP service");
  serve->add_option("--address", va.address, "Bind address");
  serve->add_option("-p,--port", va.port, "TCP port (0 picks one)");
  serve->add_option("--layouts", va.layouts, "Directory of layout files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*train) return run_train(ta);
    if (*evaluate) return run_evaluate(ea);
    if (*replay) return run_replay(ra);
    if (*serve) return run_serve(va);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const VersionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const SessionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const IncompleteSession& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
