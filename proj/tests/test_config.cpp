#include <gtest/gtest.h>

#include "m2s/settings.hpp"
#include "m2s/toy_pipeline.hpp"

using namespace m2s;

TEST(KeyValueConfig, ParsesCommentsAndWhitespace) {
  const auto cfg = KeyValueConfig::parse("# header\n\n  fusion.window = 3  # trailing\nname=road\nlist = 1, 2 3\n");
  EXPECT_EQ(cfg.get_int("fusion.window"), 3);
  EXPECT_EQ(cfg.get_string("name"), "road");
  EXPECT_EQ(cfg.get_list("list"), (std::vector<double>{1, 2, 3}));
  EXPECT_FALSE(cfg.get_double("missing").has_value());
  EXPECT_EQ(cfg.entries().size(), 3u);
}

TEST(KeyValueConfig, Errors) {
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind([] { KeyValueConfig::parse("no equals sign\n"); }), ErrorKind::MalformedConfig);
  EXPECT_EQ(kind([] { KeyValueConfig::parse(" = 3\n"); }), ErrorKind::MalformedConfig);
  const auto cfg = KeyValueConfig::parse("a = 1.5x\nb = 2.5\nc = -1\n");
  EXPECT_EQ(kind([&] { cfg.get_double("a"); }), ErrorKind::MalformedConfig);
  EXPECT_EQ(kind([&] { cfg.get_int("b"); }), ErrorKind::MalformedConfig);
  std::size_t n = 0;
  EXPECT_EQ(kind([&] { cfg.read("c", n); }), ErrorKind::MalformedConfig);
  EXPECT_EQ(kind([] { KeyValueConfig::load("/nonexistent/m2s.cfg"); }), ErrorKind::IoError);
}

TEST(Settings, FusionKeys) {
  FusionConfig f;
  apply_config(KeyValueConfig::parse("fusion.hard_classes = 30, 81\nfusion.window = 2\nfusion.moving_threshold = 0.3\n"
                                     "fusion.register_moving = 0\nicp.max_iterations = 7\nicp.convergence_tol = 1e-6\n"
                                     "icp.max_correspondence_dist = 0.5\n"),
               f);
  EXPECT_EQ(f.hard_classes, (std::set<std::uint16_t>{30, 81}));
  EXPECT_EQ(f.window, 2u);
  EXPECT_EQ(f.moving_threshold, 0.3);
  EXPECT_FALSE(f.register_moving);
  EXPECT_EQ(f.registration.max_iterations, 7u);
  EXPECT_EQ(f.registration.convergence_tol, 1e-6);
  EXPECT_EQ(f.registration.max_correspondence_dist, 0.5);
  EXPECT_THROW(apply_config(KeyValueConfig::parse("fusion.hard_classes = 1.5\n"), f), Error);
  EXPECT_THROW(apply_config(KeyValueConfig::parse("fusion.window = 0\n"), f), Error);
}

TEST(Settings, DistillKeys) {
  DistillConfig d;
  apply_config(KeyValueConfig::parse("distill.T = 2\ndistill.P = 3\ndistill.betas = 1 0 0.5 0.25\ndistill.affinity = squared\n"),
               d);
  EXPECT_EQ(d.smooth_l1_T, 2.0);
  EXPECT_EQ(d.temperature_P, 3.0);
  EXPECT_EQ(d.betas, (std::array<double, 4>{1, 0, 0.5, 0.25}));
  EXPECT_EQ(d.affinity_norm, AffinityNorm::SquaredLiteral);
  EXPECT_THROW(apply_config(KeyValueConfig::parse("distill.betas = 1 2 3\n"), d), Error);
  EXPECT_THROW(apply_config(KeyValueConfig::parse("distill.affinity = dot\n"), d), Error);
  EXPECT_THROW(apply_config(KeyValueConfig::parse("distill.P = 0\n"), d), Error);
}

TEST(Settings, ToyRunKeys) {
  const auto cfg = toy_run_config(KeyValueConfig::parse("toy.hidden = 4\ntoy.lr = 0.5\ntoy.paste = 2\nsynthetic.scans = 3\n"));
  EXPECT_EQ(cfg.hidden, 4);
  EXPECT_EQ(cfg.learning_rate, 0.5);
  EXPECT_EQ(cfg.paste, 2u);
  EXPECT_EQ(cfg.scene.num_scans, 3u);
  EXPECT_EQ(toy_run_config(KeyValueConfig{}).scene.num_scans, 6u);
  EXPECT_THROW(toy_run_config(KeyValueConfig::parse("toy.lr = 0\n")), Error);
}

TEST(ToyRun, PasteAugmentedRunIsReproducible) {
  auto cfg = toy_run_config(KeyValueConfig::parse("toy.hidden = 6\ntoy.paste = 2\nsynthetic.scans = 3\n"));
  const auto a = run_toy_training(cfg, 3, 6);
  const auto b = run_toy_training(cfg, 3, 6);
  ASSERT_EQ(a.history.size(), 6u);
  EXPECT_TRUE(a.state.student == b.state.student);
  EXPECT_EQ(a.history.back().total, b.history.back().total);
  EXPECT_EQ(a.state.step, 6u);
}
