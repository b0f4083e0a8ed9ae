#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <limits>

#include "pressense/synth.hpp"
#include "pressense/trainer.hpp"

using namespace pressense;

namespace {

Dataset tiny_dataset(std::uint64_t seed = 3) {
  SynthConfig c;
  c.width = 16;
  c.height = 16;
  c.participants = 4;
  c.seed = seed;
  c.pixel_pitch_mm = 8.0;
  c.blob_sigma_px = 1.2;
  c.frames_per_cycle = 5;
  c.no_contact_prompts = 2;
  return generate_dataset(c);
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.model.width = 16;
  t.model.height = 16;
  t.model.hidden_channels = 4;
  t.epochs = 2;
  t.steps_per_epoch = 10;
  t.batch_size = 4;
  return t;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Trainer, SameSeedSameCurves) {
  auto d = tiny_dataset();
  auto cfg = tiny_train();
  auto a = train_toy(d.full_train, d.weak_train, d.full_test, d.weak_test, cfg);
  auto b = train_toy(d.full_train, d.weak_train, d.full_test, d.weak_test, cfg);
  ASSERT_EQ(a.history.size(), 2u);
  for (std::size_t i = 0; i < a.history.size(); ++i)
    EXPECT_EQ(to_json(a.history[i]).dump(), to_json(b.history[i]).dump());
  EXPECT_EQ(checkpoint_to_json(a.params, a.adam).dump(), checkpoint_to_json(b.params, b.adam).dump());

  cfg.seed = 99;
  auto c = train_toy(d.full_train, d.weak_train, d.full_test, d.weak_test, cfg);
  EXPECT_NE(checkpoint_to_json(a.params, a.adam).dump(), checkpoint_to_json(c.params, c.adam).dump());
}

TEST(Trainer, LossDecreasesOnFullData) {
  auto d = tiny_dataset();
  auto cfg = tiny_train();
  cfg.epochs = 4;
  cfg.steps_per_epoch = 40;
  cfg.adam.lr = 3e-3;
  auto r = train_toy(d.full_train, {}, d.full_test, {}, cfg);
  EXPECT_LT(r.history.back().mean_loss.l_p, r.history.front().mean_loss.l_p);
  EXPECT_TRUE(r.history.back().full_volumetric_iou.has_value());
}

TEST(Trainer, BaselineConfigurationRuns) {
  auto d = tiny_dataset();
  auto cfg = tiny_train();
  cfg.loss.lambda1 = 0.0;
  cfg.loss.lambda2 = 0.0;
  cfg.loss.use_contact_loss = false;
  cfg.loss.use_domain_loss = false;
  auto r = train_toy(d.full_train, d.weak_train, d.full_test, d.weak_test, cfg);
  EXPECT_EQ(r.history.back().mean_loss.l_w, 0.0);
  EXPECT_EQ(r.history.back().mean_loss.l_d, 0.0);
}

TEST(Trainer, RejectsBadInputs) {
  auto d = tiny_dataset();
  auto cfg = tiny_train();
  EXPECT_THROW(train_toy({}, {}, {}, {}, cfg), InvalidArgument);
  cfg.epochs = 0;
  EXPECT_THROW(train_toy(d.full_train, d.weak_train, {}, {}, cfg), InvalidArgument);
  auto stripped = d.full_train;
  stripped[0].features.reset();
  EXPECT_THROW(train_toy(stripped, {}, {}, {}, tiny_train()), InvalidArgument);
}

TEST(Trainer, HugeLearningRateDiverges) {
  auto d = tiny_dataset();
  auto cfg = tiny_train();
  cfg.adam.lr = std::numeric_limits<double>::max();
  EXPECT_THROW(train_toy(d.full_train, d.weak_train, {}, {}, cfg), TrainingDiverged);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto d = tiny_dataset();
  auto r = train_toy(d.full_train, d.weak_train, {}, {}, tiny_train());
  const auto path = temp_path("pressense_ckpt_test.json");
  save_checkpoint(path, r.params, r.adam);
  auto back = load_checkpoint(path);
  std::remove(path.c_str());
  ASSERT_EQ(back.params.arrays.size(), r.params.arrays.size());
  for (std::size_t i = 0; i < back.params.arrays.size(); ++i)
    EXPECT_EQ(back.params.arrays[i].values, r.params.arrays[i].values) << r.params.arrays[i].name;
  EXPECT_EQ(back.adam.step, r.adam.step);
  EXPECT_EQ(back.adam.m, r.adam.m);
  EXPECT_EQ(back.adam.v, r.adam.v);
  EXPECT_EQ(back.adam.hyper.lr, r.adam.hyper.lr);
  const auto& x = *d.full_test.front().features;
  EXPECT_EQ(forward(back.params, x).pressure_logits.data, forward(r.params, x).pressure_logits.data);
}

TEST(Checkpoint, RejectsWrongVersionAndShape) {
  ModelConfig mc;
  mc.hidden_channels = 4;
  auto p = init_model(mc);
  auto j = checkpoint_to_json(p, AdamState{});
  auto wrong_version = j;
  wrong_version["version"] = 7;
  EXPECT_THROW(checkpoint_from_json(wrong_version), VersionError);
  auto wrong_format = j;
  wrong_format["format"] = "other";
  EXPECT_THROW(checkpoint_from_json(wrong_format), ParseError);
  auto short_values = j;
  short_values["parameters"][0]["values"].erase(0);
  EXPECT_THROW(checkpoint_from_json(short_values), ParseError);
  auto missing = j;
  missing.erase("adam");
  EXPECT_THROW(checkpoint_from_json(missing), ParseError);
  EXPECT_THROW(load_checkpoint(temp_path("pressense_no_such_checkpoint.json")), ParseError);
}

TEST(Predict, LabelFromLogits) {
  std::vector<double> logits{1.0, -1.0, 0.5, -0.1, -3.0, 2.0};
  auto l = label_from_logits(logits);
  EXPECT_EQ(l.fingers, (std::array<std::uint8_t, 5>{1, 0, 1, 0, 0}));
  EXPECT_EQ(l.force, ForceLevel::high);
  std::vector<double> none{-1, -1, -1, -1, -1, 3.0};
  EXPECT_EQ(label_from_logits(none).force, ForceLevel::unspecified);
}
