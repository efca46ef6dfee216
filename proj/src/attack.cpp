#include "pointprobe/attack.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "pointprobe/errors.hpp"
#include "pointprobe/rng.hpp"

namespace pointprobe {

namespace {

struct Params {
  Vec3 theta = Vec3::Zero();
  Vec3 delta = Vec3::Zero();
};

Params clip_params(Params u) {
  for (int k = 0; k < 3; ++k) {
    u.theta[k] = std::clamp(u.theta[k], -kRotationBound, kRotationBound);
    u.delta[k] = std::clamp(u.delta[k], -kTranslationBound, kTranslationBound);
  }
  return u;
}

// d(Rx)/da etc., used by the analytic chain rule through the transform.
Mat3 rotation_derivative(const Vec3& theta, int axis) {
  const double c1 = std::cos(theta[0]), s1 = std::sin(theta[0]);
  const double c2 = std::cos(theta[1]), s2 = std::sin(theta[1]);
  const double c3 = std::cos(theta[2]), s3 = std::sin(theta[2]);
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, c1, -s1, 0, s1, c1;
  ry << c2, 0, s2, 0, 1, 0, -s2, 0, c2;
  rz << c3, -s3, 0, s3, c3, 0, 0, 0, 1;
  Mat3 d;
  switch (axis) {
    case 0:
      d << 0, 0, 0, 0, -s1, -c1, 0, c1, -s1;
      return rz * ry * d;
    case 1:
      d << -s2, 0, c2, 0, 0, 0, -c2, 0, -s2;
      return rz * d * rx;
    default:
      d << -s3, -c3, 0, c3, -s3, 0, 0, 0, 0;
      return d * ry * rx;
  }
}

using Grad6 = std::array<double, 6>;  // (theta_x, theta_y, theta_z, dx, dy, dz)

Grad6 finite_difference_gradient(const ModelOracle& oracle, const PointCloud& cloud,
                                 int label, const Params& u, const AttackConfig& cfg) {
  Grad6 g{};
  auto probe = [&](int k, double h) {
    Params v = u;
    if (k < 3)
      v.theta[k] += h;
    else
      v.delta[k - 3] += h;
    return attack_loss(oracle, cloud, v.theta, v.delta, label);
  };
  for (int k = 0; k < 6; ++k) {
    const bool active = k < 3 ? cfg.attack_rotation : cfg.attack_translation;
    if (!active) continue;
    g[k] = (probe(k, cfg.fd_step) - probe(k, -cfg.fd_step)) / (2.0 * cfg.fd_step);
  }
  return g;
}

Grad6 analytic_gradient(const BuiltinClassifier& model, const PointCloud& cloud,
                        int label, const Params& u, const AttackConfig& cfg,
                        double* loss_out) {
  const PointCloud transformed = apply_attack_params(cloud, u.theta, u.delta);
  std::vector<Vec3> point_grad;
  const double loss = model.input_gradient(transformed, label, &point_grad);
  if (loss_out) *loss_out = loss;

  Grad6 g{};
  if (cfg.attack_rotation) {
    for (int axis = 0; axis < 3; ++axis) {
      const Mat3 dr = rotation_derivative(u.theta, axis);
      double acc = 0.0;
      for (int p = 0; p < cloud.size(); ++p)
        acc += point_grad[p].dot(dr * cloud.points[p]);
      g[axis] = acc;
    }
  }
  if (cfg.attack_translation) {
    Vec3 acc = Vec3::Zero();
    for (const auto& gp : point_grad) acc += gp;
    for (int k = 0; k < 3; ++k) g[3 + k] = acc[k];
  }
  return g;
}

}  // namespace

void AttackConfig::validate() const {
  if (!(eta >= 0.0)) throw ArgumentError("attack step size must be >= 0");
  if (iterations < 0) throw ArgumentError("attack iteration count must be >= 0");
  if (restarts < 1) throw ArgumentError("attack needs at least one restart");
  if (!(fd_step > 0.0)) throw ArgumentError("finite-difference step must be > 0");
}

PointCloud apply_attack_params(const PointCloud& cloud, const Vec3& theta,
                               const Vec3& delta) {
  const Mat3 r = rotation_matrix(theta);
  PointCloud out = cloud;
  for (auto& p : out.points) p = r * p + delta;
  return out;
}

double attack_loss(const ModelOracle& oracle, const PointCloud& cloud,
                   const Vec3& theta, const Vec3& delta, int label) {
  const auto probs = oracle.evaluate({apply_attack_params(cloud, theta, delta)});
  const double p = std::clamp(probs.at(0).at(label), 1e-12, 1.0);
  return -std::log(p);
}

std::array<double, 6> attack_gradient(const ModelOracle& oracle,
                                      const PointCloud& cloud, int label,
                                      const Vec3& theta, const Vec3& delta,
                                      const AttackConfig& cfg) {
  const Params u{theta, delta};
  if (cfg.mode == AttackGradientMode::analytic) {
    const auto* builtin = dynamic_cast<const BuiltinClassifier*>(&oracle);
    if (!builtin)
      throw ArgumentError("analytic attack gradients need the built-in classifier");
    return analytic_gradient(*builtin, cloud, label, u, cfg, nullptr);
  }
  return finite_difference_gradient(oracle, cloud, label, u, cfg);
}

AttackResult adversarial_transform(const ModelOracle& oracle, const PointCloud& cloud,
                                   int label, const AttackConfig& cfg,
                                   std::uint64_t seed) {
  cfg.validate();
  if (label < 0 || label >= oracle.num_classes())
    throw ArgumentError("attack label out of range");
  const BuiltinClassifier* builtin = nullptr;
  if (cfg.mode == AttackGradientMode::analytic) {
    builtin = dynamic_cast<const BuiltinClassifier*>(&oracle);
    if (!builtin)
      throw ArgumentError("analytic attack gradients need the built-in classifier");
  }

  auto loss_of = [&](const Params& u) {
    return attack_loss(oracle, cloud, u.theta, u.delta, label);
  };

  AttackResult result;
  double best_loss = -std::numeric_limits<double>::infinity();

  for (int r = 0; r < cfg.restarts; ++r) {
    Params u;
    if (r > 0) {
      Rng rng(substream(seed, "restart", static_cast<std::uint64_t>(r)));
      if (cfg.attack_rotation)
        for (int k = 0; k < 3; ++k) u.theta[k] = rng.uniform(-kRotationBound, kRotationBound);
      if (cfg.attack_translation)
        for (int k = 0; k < 3; ++k)
          u.delta[k] = rng.uniform(-kTranslationBound, kTranslationBound);
    }

    std::vector<AttackIterate> trajectory;
    trajectory.reserve(cfg.iterations + 1);
    double loss = loss_of(u);
    trajectory.push_back({u.theta, u.delta, loss});
    Params restart_best = u;
    double restart_best_loss = loss;
    bool restart_plateau = false;

    for (int t = 0; t < cfg.iterations; ++t) {
      Grad6 g{};
      if (cfg.mode == AttackGradientMode::analytic)
        g = analytic_gradient(*builtin, cloud, label, u, cfg, nullptr);
      else
        g = finite_difference_gradient(oracle, cloud, label, u, cfg);

      int moved = 0;
      Params next = u;
      for (int k = 0; k < 6; ++k) {
        const bool active = k < 3 ? cfg.attack_rotation : cfg.attack_translation;
        if (!active || g[k] == 0.0) continue;
        const double step = cfg.eta * (g[k] > 0.0 ? 1.0 : -1.0);
        if (k < 3)
          next.theta[k] += step;
        else
          next.delta[k - 3] += step;
        ++moved;
      }
      if (moved == 0) restart_plateau = true;
      u = clip_params(next);
      loss = loss_of(u);
      trajectory.push_back({u.theta, u.delta, loss});
      if (loss > restart_best_loss) {
        restart_best_loss = loss;
        restart_best = u;
      }
    }

    if (restart_best_loss > best_loss) {
      best_loss = restart_best_loss;
      result.theta = restart_best.theta;
      result.delta = restart_best.delta;
      result.loss = restart_best_loss;
      result.trajectory = std::move(trajectory);
      result.plateau = restart_plateau;
    }
  }

  const auto probs =
      oracle.evaluate({apply_attack_params(cloud, result.theta, result.delta)}).at(0);
  const int predicted =
      static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  result.flipped = predicted != label;
  return result;
}

AdvTrainReport adversarial_train(BuiltinClassifier& model,
                                 const SyntheticDataset& data,
                                 const TrainConfig& train_cfg,
                                 const AttackConfig& attack_cfg, std::uint64_t seed) {
  if (data.train.empty()) throw ArgumentError("dataset has no train split");
  attack_cfg.validate();

  AdvTrainReport report;
  Rng shuffle_rng(substream(seed, "shuffle"));
  Rng aug_rng(substream(seed, "augment"));
  const int train_size = static_cast<int>(data.train.size());

  auto adversarial_accuracy = [&]() {
    if (data.test.empty() || attack_cfg.iterations == 0)
      return test_accuracy(model, data.test);
    int hits = 0;
    for (std::size_t c = 0; c < data.test.size(); ++c) {
      const PointCloud& cloud = data.test[c];
      const AttackResult res = adversarial_transform(
          model, cloud, *cloud.label, attack_cfg,
          substream(seed, "adv-eval", static_cast<std::uint64_t>(c)));
      if (!res.flipped) ++hits;
    }
    return static_cast<double>(hits) / data.test.size();
  };

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const std::vector<int> order = shuffle_rng.permutation(train_size);
    double epoch_loss = 0.0;
    for (int start = 0; start < train_size; start += train_cfg.batch_size) {
      const int end = std::min(start + train_cfg.batch_size, train_size);
      std::vector<PointCloud> batch;
      batch.reserve(end - start);
      for (int b = start; b < end; ++b) {
        const PointCloud& base = data.train[order[b]];
        if (!base.label.has_value()) throw ArgumentError("train cloud without a label");
        PointCloud cloud = train_cfg.augmentation.any()
                               ? augment_cloud(base, train_cfg.augmentation, aug_rng)
                               : base;
        if (attack_cfg.iterations > 0) {
          const AttackResult res = adversarial_transform(
              model, cloud, *base.label, attack_cfg,
              substream(seed, "attack", static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(order[b])));
          cloud = apply_attack_params(cloud, res.theta, res.delta);
          cloud.label = base.label;
        }
        batch.push_back(std::move(cloud));
      }
      epoch_loss += sgd_step(model, batch, train_cfg.epoch_learning_rate(epoch));
    }
    AdvEpochStats stats;
    stats.train_loss = epoch_loss / train_size;
    stats.clean_accuracy = test_accuracy(model, data.test);
    stats.adversarial_accuracy = adversarial_accuracy();
    report.epochs.push_back(stats);
  }
  report.final_clean_accuracy = test_accuracy(model, data.test);
  report.final_adversarial_accuracy = adversarial_accuracy();
  return report;
}

}  // namespace pointprobe
