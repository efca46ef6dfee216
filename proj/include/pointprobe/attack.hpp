#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pointprobe/geometry.hpp"
#include "pointprobe/model.hpp"

namespace pointprobe {

enum class AttackGradientMode { finite_difference, analytic };

/// Clipped sign-gradient search over the 6 transform parameters
/// u = (theta, delta), maximizing classification loss. Bounds equal the
/// sensitivity enumeration ranges so attack strength and metric ranges are
/// commensurate.
struct AttackConfig {
  double eta = 0.01;        // parameter step size
  int iterations = 20;      // sign-gradient steps per restart
  int restarts = 3;         // first restart starts at u = 0
  AttackGradientMode mode = AttackGradientMode::finite_difference;
  double fd_step = 1e-3;    // central-difference step (radians / units)
  bool attack_rotation = true;
  bool attack_translation = true;

  void validate() const;
};

struct AttackIterate {
  Vec3 theta = Vec3::Zero();
  Vec3 delta = Vec3::Zero();
  double loss = 0.0;
};

struct AttackResult {
  Vec3 theta = Vec3::Zero();  // worst-loss parameters found
  Vec3 delta = Vec3::Zero();
  double loss = 0.0;
  bool flipped = false;   // prediction differs from the label at the optimum
  bool plateau = false;   // a restart hit an all-zero sign gradient
  std::vector<AttackIterate> trajectory;  // best restart, length iterations+1
};

/// Rotate by theta (x, y, z order about the origin), then translate.
PointCloud apply_attack_params(const PointCloud& cloud, const Vec3& theta,
                               const Vec3& delta);

/// Cross-entropy of the oracle's ground-truth probability on the
/// transformed cloud.
double attack_loss(const ModelOracle& oracle, const PointCloud& cloud,
                   const Vec3& theta, const Vec3& delta, int label);

/// Loss gradient with respect to the 6 transform parameters
/// (theta_x, theta_y, theta_z, dx, dy, dz), by the mode in cfg.
std::array<double, 6> attack_gradient(const ModelOracle& oracle,
                                      const PointCloud& cloud, int label,
                                      const Vec3& theta, const Vec3& delta,
                                      const AttackConfig& cfg);

/// Iterates u <- Clip(u + eta * sign(grad_u Loss)) from u = 0 (plus seeded
/// random restarts) and returns the worst-loss iterate. Gradients come from
/// central finite differences (black-box) or the built-in classifier's
/// analytic chain rule through the transform.
AttackResult adversarial_transform(const ModelOracle& oracle, const PointCloud& cloud,
                                   int label, const AttackConfig& cfg,
                                   std::uint64_t seed);

struct AdvEpochStats {
  double train_loss = 0.0;
  double clean_accuracy = 0.0;
  double adversarial_accuracy = 0.0;  // on the attacked test split
};

struct AdvTrainReport {
  std::vector<AdvEpochStats> epochs;
  double final_clean_accuracy = 0.0;
  double final_adversarial_accuracy = 0.0;
};

/// Min-max training: each batch sample is replaced by its worst-case
/// transform before the descent step on the weights. With zero attack
/// iterations this is bit-identical to plain training.
AdvTrainReport adversarial_train(BuiltinClassifier& model,
                                 const SyntheticDataset& data,
                                 const TrainConfig& train_cfg,
                                 const AttackConfig& attack_cfg, std::uint64_t seed);

}  // namespace pointprobe
