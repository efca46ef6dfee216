#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pointprobe/attack.hpp"
#include "pointprobe/errors.hpp"
#include "test_helpers.hpp"

using namespace pointprobe;
using tests::random_cloud;

namespace {

/// Small trained fixture shared by the attack tests.
struct Fixture {
  SyntheticDataset data;
  BuiltinClassifier model;

  Fixture()
      : data(generate_dataset(default_shape_classes(), 15, 64, 2025, 0.67)),
        model(6, 31) {
    TrainConfig cfg;
    cfg.epochs = 12;
    (void)train(model, data, cfg, 77);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("a zero step size leaves the parameters untouched") {
  const auto& f = fixture();
  const PointCloud& cloud = f.data.test.front();
  AttackConfig cfg;
  cfg.eta = 0.0;
  cfg.iterations = 5;
  cfg.restarts = 1;
  const AttackResult result =
      adversarial_transform(f.model, cloud, *cloud.label, cfg, 3);
  CHECK(result.theta == Vec3::Zero());
  CHECK(result.delta == Vec3::Zero());
  REQUIRE(result.trajectory.size() == 6);
  for (const auto& it : result.trajectory) {
    CHECK(it.theta == Vec3::Zero());
    CHECK(it.loss == result.trajectory[0].loss);
  }
}

TEST_CASE("every iterate stays inside the parameter box") {
  const auto& f = fixture();
  AttackConfig cfg;
  cfg.eta = 0.4;  // deliberately oversized steps
  cfg.iterations = 12;
  cfg.restarts = 3;
  for (int k = 0; k < 3; ++k) {
    const PointCloud& cloud = f.data.test[k];
    const AttackResult result =
        adversarial_transform(f.model, cloud, *cloud.label, cfg, 55 + k);
    for (const auto& it : result.trajectory)
      for (int a = 0; a < 3; ++a) {
        CHECK(std::abs(it.theta[a]) <= kRotationBound + 1e-12);
        CHECK(std::abs(it.delta[a]) <= kTranslationBound + 1e-12);
      }
  }
}

TEST_CASE("attacks are deterministic given the seed") {
  const auto& f = fixture();
  const PointCloud& cloud = f.data.test[1];
  AttackConfig cfg;
  cfg.iterations = 6;
  const AttackResult a = adversarial_transform(f.model, cloud, *cloud.label, cfg, 9);
  const AttackResult b = adversarial_transform(f.model, cloud, *cloud.label, cfg, 9);
  CHECK(a.theta == b.theta);
  CHECK(a.delta == b.delta);
  CHECK(a.loss == b.loss);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t t = 0; t < a.trajectory.size(); ++t)
    CHECK(a.trajectory[t].loss == b.trajectory[t].loss);
}

TEST_CASE("finite differences track the analytic transform gradient") {
  const auto& f = fixture();
  Rng rng(13);
  AttackConfig fd;
  fd.mode = AttackGradientMode::finite_difference;
  fd.fd_step = 1e-5;
  AttackConfig an;
  an.mode = AttackGradientMode::analytic;
  int checked = 0;
  for (int t = 0; t < 8; ++t) {
    const PointCloud& cloud = f.data.test[t % f.data.test.size()];
    Vec3 theta, delta;
    for (int a = 0; a < 3; ++a) {
      theta[a] = rng.uniform(-0.5, 0.5);
      delta[a] = rng.uniform(-0.3, 0.3);
    }
    const auto g_fd = attack_gradient(f.model, cloud, *cloud.label, theta, delta, fd);
    const auto g_an = attack_gradient(f.model, cloud, *cloud.label, theta, delta, an);
    for (int k = 0; k < 6; ++k) {
      if (std::abs(g_an[k]) < 1e-4) continue;  // skip near-kink components
      CHECK(std::abs(g_fd[k] - g_an[k]) / std::abs(g_an[k]) < 1e-3);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("the attack beats a random-transform search on most clouds") {
  const auto& f = fixture();
  AttackConfig cfg;
  cfg.mode = AttackGradientMode::analytic;
  cfg.iterations = 20;
  cfg.restarts = 3;
  int wins = 0, total = 0;
  for (std::size_t c = 0; c < std::min<std::size_t>(f.data.test.size(), 20); ++c) {
    const PointCloud& cloud = f.data.test[c];
    const AttackResult result =
        adversarial_transform(f.model, cloud, *cloud.label, cfg, 1000 + c);
    Rng rng(seed_combine(31337, c));
    double best_random = -1.0;
    for (int k = 0; k < 50; ++k) {
      Vec3 theta, delta;
      for (int a = 0; a < 3; ++a) {
        theta[a] = rng.uniform(-kRotationBound, kRotationBound);
        delta[a] = rng.uniform(-kTranslationBound, kTranslationBound);
      }
      best_random =
          std::max(best_random, attack_loss(f.model, cloud, theta, delta, *cloud.label));
    }
    ++total;
    if (result.loss >= best_random) ++wins;
  }
  CHECK(wins >= (total * 8) / 10);
}

TEST_CASE("adversarial training with zero attack iterations equals plain training") {
  const auto& f = fixture();
  TrainConfig tc;
  tc.epochs = 3;
  AttackConfig ac;
  ac.iterations = 0;
  ac.restarts = 1;

  BuiltinClassifier plain(6, 5), adv(6, 5);
  (void)train(plain, f.data, tc, 11);
  (void)adversarial_train(adv, f.data, tc, ac, 11);
  CHECK(plain.weights().w1 == adv.weights().w1);
  CHECK(plain.weights().w4 == adv.weights().w4);
  CHECK(plain.weights().b2 == adv.weights().b2);
}

TEST_CASE("adversarial training reports clean and adversarial accuracy per epoch") {
  const auto& f = fixture();
  TrainConfig tc;
  tc.epochs = 2;
  AttackConfig ac;
  ac.iterations = 2;
  ac.restarts = 1;
  ac.mode = AttackGradientMode::analytic;
  BuiltinClassifier model(6, 5);
  const AdvTrainReport report = adversarial_train(model, f.data, tc, ac, 11);
  REQUIRE(report.epochs.size() == 2);
  for (const auto& e : report.epochs) {
    CHECK(e.clean_accuracy >= 0.0);
    CHECK(e.clean_accuracy <= 1.0);
    CHECK(e.adversarial_accuracy >= 0.0);
    CHECK(e.adversarial_accuracy <= 1.0);
  }
}

TEST_CASE("analytic mode refuses black-box oracles") {
  // Any non-builtin oracle lacks input gradients.
  class Opaque : public ModelOracle {
   public:
    int num_classes() const override { return 2; }
    std::vector<ProbVector> evaluate(const std::vector<PointCloud>& b) const override {
      return std::vector<ProbVector>(b.size(), ProbVector{0.5, 0.5});
    }
  } opaque;
  AttackConfig cfg;
  cfg.mode = AttackGradientMode::analytic;
  CHECK_THROWS_AS(adversarial_transform(opaque, random_cloud(8, 1), 0, cfg, 1),
                  ArgumentError);
}

TEST_CASE("attack config validation") {
  AttackConfig cfg;
  cfg.eta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = AttackConfig{};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = AttackConfig{};
  cfg.fd_step = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

}  // TEST_SUITE
