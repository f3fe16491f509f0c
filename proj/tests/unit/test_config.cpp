#include <gtest/gtest.h>

#include "config.hpp"

using namespace priorflow;
using namespace priorflow::cli;
using nlohmann::ordered_json;

TEST(Config, MinimalDocumentUsesDefaults) {
  const ExperimentConfig c = parse_config(ordered_json::object(), Mode::Calibrate);
  EXPECT_EQ(c.calibration.loss.N_s, 200u);
  EXPECT_EQ(c.calibration.loss.n_dirs, 1000);
  EXPECT_EQ(c.calibration.schedule.total_steps, 600u);
  EXPECT_EQ(c.calibration.schedule.base_lr, 0.01);
  EXPECT_EQ(c.mesh, Mesh(1, 65));
  EXPECT_EQ(c.data.N, 200u);
}

TEST(Config, UnknownKeyIsNamed) {
  const auto doc = ordered_json::parse(R"({"optimizer": {"learnig_rate": 0.1}})");
  try {
    parse_config(doc, Mode::Calibrate);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learnig_rate"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config(ordered_json::parse(R"({"sed": 1})"), Mode::Calibrate), ConfigError);
}

TEST(Config, WrongTypeIsRejected) {
  EXPECT_THROW(parse_config(ordered_json::parse(R"({"loss": {"N_s": "many"}})"), Mode::Calibrate), ConfigError);
  EXPECT_THROW(parse_config(ordered_json::parse(R"({"mesh": {"dim": 3}})"), Mode::Calibrate), ConfigError);
  EXPECT_THROW(parse_config(ordered_json::parse(R"({"preset": "nope"})"), Mode::Calibrate), ConfigError);
}

TEST(Config, OneDimensionalPreset) {
  const auto c = parse_config(ordered_json::parse(R"({"preset": "darcy1d-levelset"})"), Mode::Calibrate);
  EXPECT_EQ(c.data.prior.alpha, (std::vector<double>{8.0, 1.0, 2.0}));
  EXPECT_EQ(c.data.prior.tau, 10.0);
  EXPECT_EQ(c.data.f_const, 10.0);
  EXPECT_EQ(c.data.d_y, 50u);
  EXPECT_EQ(c.data.gamma_std, 0.01);
  EXPECT_EQ(c.data.N, 1000u);
  EXPECT_EQ(c.mesh.n, 100);
  EXPECT_FALSE(c.calibration.loss.reg.enabled);
}

TEST(Config, DeskPresetsMatchAcceptanceScale) {
  const auto lvl = parse_config(ordered_json::parse(R"({"preset": "darcy1d-levelset-desk"})"), Mode::Calibrate);
  EXPECT_EQ(lvl.mesh, Mesh(1, 65));
  EXPECT_EQ(lvl.data.N, 200u);
  EXPECT_EQ(lvl.calibration.loss.N_s, 200u);
  EXPECT_EQ(lvl.calibration.schedule.total_steps, 600u);

  const auto joint = parse_config(ordered_json::parse(R"({"preset": "darcy1d-levelset-joint-desk"})"),
                                  Mode::CalibrateJoint);
  EXPECT_EQ(joint.calibration.op.layers, 2);
  EXPECT_EQ(joint.calibration.op.channels, 16);
  EXPECT_EQ(joint.calibration.op.modes, 8);
  EXPECT_EQ(joint.calibration.inner.batch, 20u);
  EXPECT_EQ(joint.calibration.inner.steps, 10u);
  EXPECT_EQ(joint.calibration.inner.schedule.total_steps, 3000u + 10u * 1000u);

  const auto logn = parse_config(ordered_json::parse(R"({"preset": "darcy2d-lognormal-desk"})"), Mode::Calibrate);
  EXPECT_EQ(logn.mesh, Mesh(2, 32));
  EXPECT_EQ(logn.calibration.model.modes_j, 12);
  EXPECT_EQ(logn.data.N, 200u);
  EXPECT_EQ(logn.calibration.loss.N_s, 64u);
  EXPECT_EQ(logn.calibration.schedule.total_steps, 400u);
  EXPECT_TRUE(logn.calibration.loss.reg.enabled);
}

TEST(Config, EveryPresetParses) {
  for (const auto& name : preset_names()) {
    ordered_json doc{{"preset", name}};
    EXPECT_NO_THROW(parse_config(doc, Mode::Calibrate)) << name;
  }
}

TEST(Config, OverridesMergeIntoPreset) {
  const auto c = parse_config(ordered_json::parse(R"({"preset": "darcy1d-levelset-desk", "optimizer": {"T": 7}})"),
                              Mode::Calibrate);
  EXPECT_EQ(c.calibration.schedule.total_steps, 7u);
  EXPECT_EQ(c.data.N, 200u);
}

TEST(Config, ModeNames) {
  for (Mode m : {Mode::GenData, Mode::Calibrate, Mode::CalibrateJoint, Mode::Verify, Mode::BayesCheck,
                 Mode::FemConvergence})
    EXPECT_EQ(mode_from_string(to_string(m)), m);
  EXPECT_THROW(mode_from_string("train"), ConfigError);
}
