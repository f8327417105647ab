#include <gtest/gtest.h>

#include "svdp/svdp.hpp"

using namespace svdp;

TEST(Config, DefaultsMatchDocumentedValues) {
  const Settings s;
  EXPECT_EQ(s.adapt.m, 10);
  EXPECT_EQ(s.adapt.density, 1e-3);
  EXPECT_EQ(s.adapt.alpha, 0.999);
  EXPECT_EQ(s.adapt.theta, 0.01);
  EXPECT_EQ(s.adapt.tau, 0.69);
  EXPECT_EQ(s.adapt.lr, 1e-4);
  EXPECT_EQ(s.adapt.scales, (std::vector<double>{0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0}));
  EXPECT_EQ(s.adapt.rounds, 3);
  EXPECT_EQ(s.adapt.replace_period, 1);
  EXPECT_EQ(s.adapt.loss_norm, LossNorm::full);
  EXPECT_EQ(s.adapt.train_scope, TrainScope::all);
  EXPECT_NO_THROW(validate(s));
}

TEST(Config, ParsesTextWithComments) {
  Settings s;
  apply_config_text(s,
                    "# adaptation\n"
                    "task = depth\n"
                    "density = 3e-3   # denser\n"
                    "\n"
                    "scales = 0.5, 1, 2\n"
                    "mode = tta\n"
                    "prompt_lr = 0.01\n"
                    "fixed_beta = 0.99\n"
                    "teacher_student = false\n");
  EXPECT_EQ(s.adapt.task, Task::depth);
  EXPECT_EQ(s.adapt.density, 3e-3);
  EXPECT_EQ(s.adapt.scales, (std::vector<double>{0.5, 1.0, 2.0}));
  EXPECT_EQ(s.adapt.mode, Mode::tta);
  EXPECT_EQ(s.adapt.effective_prompt_lr(), 0.01);
  EXPECT_EQ(s.adapt.fixed_beta, 0.99);
  EXPECT_FALSE(s.adapt.teacher_student);
  apply_setting(s, "fixed_beta", "none");
  apply_setting(s, "prompt_lr", "default");
  EXPECT_FALSE(s.adapt.fixed_beta.has_value());
  EXPECT_EQ(s.adapt.effective_prompt_lr(), s.adapt.lr);
}

TEST(Config, RejectsMalformedInput) {
  Settings s;
  EXPECT_THROW(apply_setting(s, "no_such_key", "1"), ConfigError);
  EXPECT_THROW(apply_setting(s, "density", "lots"), ConfigError);
  EXPECT_THROW(apply_setting(s, "rounds", "2.5"), ConfigError);
  EXPECT_THROW(apply_setting(s, "dpp", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(s, "mode", "batch"), ConfigError);
  EXPECT_THROW(apply_setting(s, "density", "nan"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "density 0.1\n"), ConfigError);
  try {
    apply_config_text(s, "m = 4\nalpha = x\n", "cfg.txt");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.txt:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(apply_config_file(s, "/nonexistent/svdp.cfg"), ConfigError);
}

TEST(Config, ValidationCatchesBadRanges) {
  auto bad = [](const char* key, const char* value) {
    Settings s;
    apply_setting(s, key, value);
    EXPECT_THROW(validate(s), ConfigError) << key << "=" << value;
  };
  bad("m", "1");
  bad("density", "0");
  bad("density", "1.5");
  bad("alpha", "0");
  bad("theta", "0");
  bad("beta_floor", "1");
  bad("tau", "1.2");
  bad("lr", "-1");
  bad("rounds", "0");
  bad("replace_period", "0");
  bad("height", "30");
  bad("severity_fog", "2");
  bad("fixed_beta", "1.5");
  bad("dropout_rate", "1");
}

TEST(Config, DumpParsesBackToSameSettings) {
  Settings s;
  apply_config_text(s, "density = 0.0123\nscales = 0.5,1.5\nseed = 77\nfixed_beta = 0.9999\ncorpus = /tmp/x\n");
  const auto text = dump_config(s);
  Settings t;
  apply_config_text(t, text);
  EXPECT_EQ(dump_config(t), text);
  EXPECT_EQ(t.adapt.density, 0.0123);
  EXPECT_EQ(t.adapt.fixed_beta, 0.9999);
}

TEST(Config, LaterSourcesOverrideEarlierOnes) {
  Settings s;
  apply_config_text(s, "density = 0.01\nrounds = 5\n");
  apply_setting(s, "density", "0.02");
  EXPECT_EQ(s.adapt.density, 0.02);
  EXPECT_EQ(s.adapt.rounds, 5);
}
