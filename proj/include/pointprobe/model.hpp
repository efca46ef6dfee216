#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pointprobe/geometry.hpp"

namespace pointprobe {

using ProbVector = std::vector<double>;

/// Evaluates coalitions of a fixed (cloud, partition) game. Implementations
/// must agree exactly with masking the cloud and calling the oracle.
class CoalitionEvaluator {
 public:
  virtual ~CoalitionEvaluator() = default;
  virtual int num_classes() const = 0;
  virtual std::vector<ProbVector> evaluate(const std::vector<CoalitionMask>& masks,
                                           int workers) const = 0;
  /// Pooled encoder features per coalition (projection reward). Throws
  /// ArgumentError unless the backing oracle exposes embeddings.
  virtual std::vector<std::vector<double>> embeddings(
      const std::vector<CoalitionMask>& masks, int workers) const;
};

/// Black-box classifier interface: per-cloud per-class probabilities.
/// Implementations must be deterministic for fixed weights and input and
/// safe to call from multiple threads.
class ModelOracle {
 public:
  virtual ~ModelOracle() = default;
  virtual int num_classes() const = 0;
  virtual std::vector<ProbVector> evaluate(const std::vector<PointCloud>& batch) const = 0;

  virtual bool supports_embedding() const { return false; }
  virtual std::vector<double> embedding(const PointCloud&) const;

  /// Coalition fast path; the default masks clouds and calls evaluate().
  virtual std::unique_ptr<CoalitionEvaluator> coalition_evaluator(
      const PointCloud& cloud, const RegionPartition& part) const;
};

/// Validates a probability vector (non-negative, sums to 1 +- 1e-6).
void validate_probability_vector(const ProbVector& probs, int classes,
                                 const std::string& context);

enum class RewardKind { classification_logit, embedding_projection };

struct RewardSpec {
  RewardKind kind = RewardKind::classification_logit;
  int label = -1;            // ground-truth class, classification kind
  double prob_clamp = 1e-6;  // keeps the log-odds finite

  void validate() const;
};

/// log(p/(1-p)) with p clamped to [clamp, 1-clamp].
double logit_reward(double p, double clamp);

/// Classification reward for one cloud: log-odds of the ground-truth class.
/// The embedding-projection reward is defined relative to a game's full and
/// empty coalitions and is built by the attribution layer instead.
double reward(const ModelOracle& oracle, const PointCloud& cloud,
              const RewardSpec& spec);

// --- built-in classifier -----------------------------------------------------

/// Shared per-point MLP weights (3 -> 64 -> 128, ReLU) plus the dense head
/// over the max-pooled feature (128 -> 64 -> C).
struct MlpWeights {
  Eigen::MatrixXd w1, w2, w3, w4;
  Eigen::VectorXd b1, b2, b3, b4;
};

/// Desk-scale permutation-invariant point-cloud classifier. Max-pooling over
/// per-point features makes the forward pass independent of point order.
class BuiltinClassifier : public ModelOracle {
 public:
  BuiltinClassifier(int classes, std::uint64_t init_seed);

  int num_classes() const override { return classes_; }
  std::vector<ProbVector> evaluate(const std::vector<PointCloud>& batch) const override;
  bool supports_embedding() const override { return true; }
  /// Max-pooled 128-dim encoder feature.
  std::vector<double> embedding(const PointCloud& cloud) const override;
  std::unique_ptr<CoalitionEvaluator> coalition_evaluator(
      const PointCloud& cloud, const RegionPartition& part) const override;

  ProbVector probabilities(const PointCloud& cloud) const;
  int predict(const PointCloud& cloud) const;

  /// Cross-entropy loss and its gradient with respect to the input points.
  double input_gradient(const PointCloud& cloud, int label,
                        std::vector<Vec3>* grad_out) const;

  MlpWeights& weights() { return w_; }
  const MlpWeights& weights() const { return w_; }

  void save(const std::string& path) const;
  static BuiltinClassifier load(const std::string& path);
  std::string to_json() const;
  static BuiltinClassifier from_json(const std::string& text);

 private:
  explicit BuiltinClassifier(int classes) : classes_(classes) {}
  int classes_;
  MlpWeights w_;
};

// --- synthetic dataset -------------------------------------------------------

/// Shape classes with distinct edge/surface/mass character.
const std::vector<std::string>& default_shape_classes();

struct SyntheticDataset {
  std::vector<PointCloud> train;
  std::vector<PointCloud> test;
  std::vector<std::string> class_names;
  int points = 0;
  std::uint64_t seed = 0;
};

/// Seeded sampling on analytic surfaces with Gaussian jitter (sigma 0.01)
/// and a random orientation about the y axis, then normalized. per_class
/// samples per class are split train/test by train_fraction.
SyntheticDataset generate_dataset(const std::vector<std::string>& classes,
                                  int per_class, int points, std::uint64_t seed,
                                  double train_fraction = 0.8);

// --- training ----------------------------------------------------------------

struct AugmentationFlags {
  bool translation = false;      // uniform offset in [-0.5, 0.5]^3
  bool scale = false;            // uniform factor in [0.5, 2]
  bool rotation_y = false;       // uniform angle about the y axis
  bool rotation_random = false;  // uniform angle about a random axis

  bool any() const { return translation || scale || rotation_y || rotation_random; }
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 0.1;
  double lr_decay = 0.95;  // per-epoch multiplicative decay
  AugmentationFlags augmentation;

  double epoch_learning_rate(int epoch) const {
    return learning_rate * std::pow(lr_decay, epoch);
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_test_accuracy = 0.0;
};

/// Mini-batch gradient descent on softmax cross-entropy. Single-threaded
/// and bit-reproducible for a fixed seed. Throws TrainingError on NaN loss.
TrainReport train(BuiltinClassifier& model, const SyntheticDataset& data,
                  const TrainConfig& cfg, std::uint64_t seed);

/// One descent step on a labeled batch; returns the summed cross-entropy.
/// Throws TrainingError when the loss is not finite.
double sgd_step(BuiltinClassifier& model, const std::vector<PointCloud>& batch,
                double learning_rate);

/// Augments one cloud in place according to the flags, consuming RNG draws
/// only for enabled augmentations. Shared by train and adversarial training.
PointCloud augment_cloud(const PointCloud& cloud, const AugmentationFlags& flags,
                         class Rng& rng);

double test_accuracy(const BuiltinClassifier& model,
                     const std::vector<PointCloud>& clouds);

}  // namespace pointprobe
