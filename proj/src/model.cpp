#include "pointprobe/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pointprobe/errors.hpp"
#include "pointprobe/parallel.hpp"
#include "pointprobe/rng.hpp"

namespace pointprobe {

using nlohmann::json;

std::vector<std::vector<double>> CoalitionEvaluator::embeddings(
    const std::vector<CoalitionMask>&, int) const {
  throw ArgumentError("this oracle does not expose embeddings");
}

std::vector<double> ModelOracle::embedding(const PointCloud&) const {
  throw ArgumentError("this oracle does not expose embeddings");
}

namespace {

/// Fallback coalition evaluator: materializes masked clouds and queries the
/// oracle through its public batch interface.
class GenericCoalitionEvaluator : public CoalitionEvaluator {
 public:
  GenericCoalitionEvaluator(const ModelOracle& oracle, PointCloud cloud,
                            RegionPartition part)
      : oracle_(oracle), cloud_(std::move(cloud)), part_(std::move(part)) {}

  int num_classes() const override { return oracle_.num_classes(); }

  std::vector<ProbVector> evaluate(const std::vector<CoalitionMask>& masks,
                                   int) const override {
    std::vector<PointCloud> batch;
    batch.reserve(masks.size());
    for (CoalitionMask m : masks) batch.push_back(mask_coalition(cloud_, part_, m));
    return oracle_.evaluate(batch);
  }

  std::vector<std::vector<double>> embeddings(const std::vector<CoalitionMask>& masks,
                                              int) const override {
    if (!oracle_.supports_embedding())
      throw ArgumentError("oracle does not expose embeddings");
    std::vector<std::vector<double>> out;
    out.reserve(masks.size());
    for (CoalitionMask m : masks)
      out.push_back(oracle_.embedding(mask_coalition(cloud_, part_, m)));
    return out;
  }

 private:
  const ModelOracle& oracle_;
  PointCloud cloud_;
  RegionPartition part_;
};

}  // namespace

std::unique_ptr<CoalitionEvaluator> ModelOracle::coalition_evaluator(
    const PointCloud& cloud, const RegionPartition& part) const {
  return std::make_unique<GenericCoalitionEvaluator>(*this, cloud, part);
}

void validate_probability_vector(const ProbVector& probs, int classes,
                                 const std::string& context) {
  if (static_cast<int>(probs.size()) != classes)
    throw OracleError(context + ": expected " + std::to_string(classes) +
                      " probabilities, got " + std::to_string(probs.size()));
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0)
      throw OracleError(context + ": invalid probability " + std::to_string(p));
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw OracleError(context + ": probabilities sum to " + std::to_string(sum));
}

void RewardSpec::validate() const {
  if (!(prob_clamp > 0.0 && prob_clamp < 0.5))
    throw ArgumentError("probability clamp must be in (0, 0.5)");
  if (kind == RewardKind::classification_logit && label < 0)
    throw ArgumentError("classification reward needs a ground-truth label");
}

double logit_reward(double p, double clamp) {
  const double q = std::clamp(p, clamp, 1.0 - clamp);
  return std::log(q / (1.0 - q));
}

double reward(const ModelOracle& oracle, const PointCloud& cloud,
              const RewardSpec& spec) {
  spec.validate();
  if (spec.kind != RewardKind::classification_logit)
    throw ArgumentError(
        "the projection reward is defined relative to a game's full/empty "
        "coalitions; construct it through the attribution layer");
  if (spec.label >= oracle.num_classes())
    throw ArgumentError("reward label out of range");
  const auto probs = oracle.evaluate({cloud});
  return logit_reward(probs.at(0).at(spec.label), spec.prob_clamp);
}

// --- built-in classifier -----------------------------------------------------

namespace {

constexpr int kHidden1 = 64;
constexpr int kHidden2 = 128;
constexpr int kHead = 64;

Eigen::MatrixXd points_matrix(const PointCloud& cloud) {
  Eigen::MatrixXd x(cloud.size(), 3);
  for (int p = 0; p < cloud.size(); ++p) x.row(p) = cloud.points[p].transpose();
  return x;
}

Eigen::MatrixXd encoder_features(const MlpWeights& w, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd h1 =
      ((x * w.w1.transpose()).rowwise() + w.b1.transpose()).cwiseMax(0.0);
  return ((h1 * w.w2.transpose()).rowwise() + w.b2.transpose()).cwiseMax(0.0);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd head_probs(const MlpWeights& w, const Eigen::VectorXd& pooled) {
  const Eigen::VectorXd h3 = (w.w3 * pooled + w.b3).cwiseMax(0.0);
  return softmax(w.w4 * h3 + w.b4);
}

ProbVector to_prob_vector(const Eigen::VectorXd& v) {
  return ProbVector(v.data(), v.data() + v.size());
}

struct ForwardCache {
  Eigen::MatrixXd x;       // P x 3
  Eigen::MatrixXd h1, h2;  // post-ReLU activations
  std::vector<int> argmax; // winning point per pooled channel
  Eigen::VectorXd pooled, h3, logits, probs;
};

ForwardCache forward_full(const MlpWeights& w, const PointCloud& cloud) {
  if (cloud.size() < 1) throw ArgumentError("classifier input is empty");
  ForwardCache c;
  c.x = points_matrix(cloud);
  c.h1 = ((c.x * w.w1.transpose()).rowwise() + w.b1.transpose()).cwiseMax(0.0);
  c.h2 = ((c.h1 * w.w2.transpose()).rowwise() + w.b2.transpose()).cwiseMax(0.0);
  c.argmax.resize(kHidden2);
  c.pooled.resize(kHidden2);
  for (int d = 0; d < kHidden2; ++d) {
    int best = 0;
    for (int p = 1; p < c.h2.rows(); ++p)
      if (c.h2(p, d) > c.h2(best, d)) best = p;
    c.argmax[d] = best;
    c.pooled[d] = c.h2(best, d);
  }
  c.h3 = (w.w3 * c.pooled + w.b3).cwiseMax(0.0);
  c.logits = w.w4 * c.h3 + w.b4;
  c.probs = softmax(c.logits);
  return c;
}

struct Gradients {
  MlpWeights g;

  explicit Gradients(const MlpWeights& like) {
    g.w1 = Eigen::MatrixXd::Zero(like.w1.rows(), like.w1.cols());
    g.w2 = Eigen::MatrixXd::Zero(like.w2.rows(), like.w2.cols());
    g.w3 = Eigen::MatrixXd::Zero(like.w3.rows(), like.w3.cols());
    g.w4 = Eigen::MatrixXd::Zero(like.w4.rows(), like.w4.cols());
    g.b1 = Eigen::VectorXd::Zero(like.b1.size());
    g.b2 = Eigen::VectorXd::Zero(like.b2.size());
    g.b3 = Eigen::VectorXd::Zero(like.b3.size());
    g.b4 = Eigen::VectorXd::Zero(like.b4.size());
  }
};

/// Cross-entropy loss plus weight gradients (accumulated) and input-point
/// gradient (optional).
double backward(const MlpWeights& w, const ForwardCache& c, int label,
                Gradients* grads, Eigen::MatrixXd* dx_out) {
  const double lse =
      c.logits.maxCoeff() +
      std::log((c.logits.array() - c.logits.maxCoeff()).exp().sum());
  const double loss = lse - c.logits[label];

  Eigen::VectorXd dlogits = c.probs;
  dlogits[label] -= 1.0;

  const Eigen::VectorXd dh3 =
      (w.w4.transpose() * dlogits).cwiseProduct((c.h3.array() > 0.0).cast<double>().matrix());
  const Eigen::VectorXd dpooled = w.w3.transpose() * dh3;

  Eigen::MatrixXd dh2 = Eigen::MatrixXd::Zero(c.h2.rows(), c.h2.cols());
  for (int d = 0; d < kHidden2; ++d) dh2(c.argmax[d], d) = dpooled[d];
  dh2 = dh2.cwiseProduct((c.h2.array() > 0.0).cast<double>().matrix());

  Eigen::MatrixXd dh1 = (dh2 * w.w2)
                            .cwiseProduct((c.h1.array() > 0.0).cast<double>().matrix());

  if (grads) {
    grads->g.w4 += dlogits * c.h3.transpose();
    grads->g.b4 += dlogits;
    grads->g.w3 += dh3 * c.pooled.transpose();
    grads->g.b3 += dh3;
    grads->g.w2 += dh2.transpose() * c.h1;
    grads->g.b2 += dh2.colwise().sum().transpose();
    grads->g.w1 += dh1.transpose() * c.x;
    grads->g.b1 += dh1.colwise().sum().transpose();
  }
  if (dx_out) *dx_out = dh1 * w.w1;
  return loss;
}

class BuiltinCoalitionEvaluator : public CoalitionEvaluator {
 public:
  BuiltinCoalitionEvaluator(const MlpWeights& w, int classes,
                            const PointCloud& cloud, const RegionPartition& part)
      : classes_(classes), full_(full_coalition(part.region_count)) {
    head_.w3 = w.w3;
    head_.b3 = w.b3;
    head_.w4 = w.w4;
    head_.b4 = w.b4;
    if (static_cast<int>(part.assignment.size()) != cloud.size())
      throw ArgumentError("coalition evaluator: partition does not match cloud");

    const Eigen::MatrixXd h2 = encoder_features(w, points_matrix(cloud));
    const int n = part.region_count;
    region_max_ = Eigen::MatrixXd::Constant(
        n, kHidden2, -std::numeric_limits<double>::infinity());
    for (int p = 0; p < cloud.size(); ++p) {
      const int r = part.assignment[p];
      region_max_.row(r) = region_max_.row(r).cwiseMax(h2.row(p));
    }

    Eigen::MatrixXd center(1, 3);
    center.row(0) = centroid(cloud).transpose();
    mask_feature_ = encoder_features(w, center).row(0).transpose();
  }

  int num_classes() const override { return classes_; }

  std::vector<ProbVector> evaluate(const std::vector<CoalitionMask>& masks,
                                   int workers) const override {
    std::vector<ProbVector> out(masks.size());
    parallel_for(masks.size(), workers, [&](std::size_t i) {
      out[i] = to_prob_vector(head_probs(head_, pooled(masks[i])));
    });
    return out;
  }

  std::vector<std::vector<double>> embeddings(const std::vector<CoalitionMask>& masks,
                                              int workers) const override {
    std::vector<std::vector<double>> out(masks.size());
    parallel_for(masks.size(), workers, [&](std::size_t i) {
      const Eigen::VectorXd v = pooled(masks[i]);
      out[i].assign(v.data(), v.data() + v.size());
    });
    return out;
  }

 private:
  // Masked points all sit at the cloud centroid, so the max-pool over a
  // masked cloud equals the max over surviving regions' feature maxima plus
  // the centroid feature whenever at least one point is masked.
  Eigen::VectorXd pooled(CoalitionMask mask) const {
    if ((mask & full_) == 0) return mask_feature_;
    Eigen::RowVectorXd acc =
        Eigen::RowVectorXd::Constant(kHidden2, -std::numeric_limits<double>::infinity());
    for (int r = 0; r < region_max_.rows(); ++r)
      if (coalition_contains(mask, r)) acc = acc.cwiseMax(region_max_.row(r));
    if ((mask & full_) != full_) acc = acc.cwiseMax(mask_feature_.transpose());
    return acc.transpose();
  }

  int classes_;
  CoalitionMask full_;
  MlpWeights head_;  // only w3/b3/w4/b4 are populated
  Eigen::MatrixXd region_max_;
  Eigen::VectorXd mask_feature_;
};

}  // namespace

BuiltinClassifier::BuiltinClassifier(int classes, std::uint64_t init_seed)
    : classes_(classes) {
  if (classes < 2) throw ArgumentError("classifier needs at least 2 classes");
  auto he_init = [&](Eigen::MatrixXd& m, int rows, int cols, std::uint64_t tag) {
    Rng rng(substream(init_seed, "init", tag));
    const double scale = std::sqrt(2.0 / cols);
    m.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  };
  he_init(w_.w1, kHidden1, 3, 1);
  he_init(w_.w2, kHidden2, kHidden1, 2);
  he_init(w_.w3, kHead, kHidden2, 3);
  he_init(w_.w4, classes, kHead, 4);
  w_.b1 = Eigen::VectorXd::Zero(kHidden1);
  w_.b2 = Eigen::VectorXd::Zero(kHidden2);
  w_.b3 = Eigen::VectorXd::Zero(kHead);
  w_.b4 = Eigen::VectorXd::Zero(classes);
}

ProbVector BuiltinClassifier::probabilities(const PointCloud& cloud) const {
  if (cloud.size() < 1) throw ArgumentError("classifier input is empty");
  const Eigen::MatrixXd h2 = encoder_features(w_, points_matrix(cloud));
  const Eigen::VectorXd pooled = h2.colwise().maxCoeff().transpose();
  return to_prob_vector(head_probs(w_, pooled));
}

std::vector<ProbVector> BuiltinClassifier::evaluate(
    const std::vector<PointCloud>& batch) const {
  std::vector<ProbVector> out;
  out.reserve(batch.size());
  for (const auto& cloud : batch) out.push_back(probabilities(cloud));
  return out;
}

std::vector<double> BuiltinClassifier::embedding(const PointCloud& cloud) const {
  const Eigen::MatrixXd h2 = encoder_features(w_, points_matrix(cloud));
  const Eigen::RowVectorXd pooled = h2.colwise().maxCoeff();
  return std::vector<double>(pooled.data(), pooled.data() + pooled.size());
}

std::unique_ptr<CoalitionEvaluator> BuiltinClassifier::coalition_evaluator(
    const PointCloud& cloud, const RegionPartition& part) const {
  return std::make_unique<BuiltinCoalitionEvaluator>(w_, classes_, cloud, part);
}

int BuiltinClassifier::predict(const PointCloud& cloud) const {
  const ProbVector p = probabilities(cloud);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double BuiltinClassifier::input_gradient(const PointCloud& cloud, int label,
                                         std::vector<Vec3>* grad_out) const {
  if (label < 0 || label >= classes_) throw ArgumentError("label out of range");
  const ForwardCache cache = forward_full(w_, cloud);
  Eigen::MatrixXd dx;
  const double loss = backward(w_, cache, label, nullptr, grad_out ? &dx : nullptr);
  if (grad_out) {
    grad_out->resize(cloud.size());
    for (int p = 0; p < cloud.size(); ++p) (*grad_out)[p] = dx.row(p).transpose();
  }
  return loss;
}

namespace {

json matrix_to_json(const std::string& name, const Eigen::MatrixXd& m,
                    const Eigen::VectorXd& b) {
  json layer;
  layer["name"] = name;
  layer["shape"] = {m.rows(), m.cols()};
  std::vector<double> values;
  values.reserve(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  layer["weights"] = values;
  layer["bias"] = std::vector<double>(b.data(), b.data() + b.size());
  return layer;
}

void matrix_from_json(const json& layer, Eigen::MatrixXd& m, Eigen::VectorXd& b) {
  const auto shape = layer.at("shape");
  const int rows = shape.at(0).get<int>();
  const int cols = shape.at(1).get<int>();
  const auto values = layer.at("weights").get<std::vector<double>>();
  if (static_cast<int>(values.size()) != rows * cols)
    throw IoError("weight file: value count does not match shape");
  m.resize(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = values[i * cols + j];
  const auto bias = layer.at("bias").get<std::vector<double>>();
  if (static_cast<int>(bias.size()) != rows)
    throw IoError("weight file: bias length does not match shape");
  b = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
}

}  // namespace

std::string BuiltinClassifier::to_json() const {
  json doc;
  doc["version"] = 1;
  doc["layers"] = json::array({
      matrix_to_json("encoder1", w_.w1, w_.b1),
      matrix_to_json("encoder2", w_.w2, w_.b2),
      matrix_to_json("head1", w_.w3, w_.b3),
      matrix_to_json("head2", w_.w4, w_.b4),
  });
  return doc.dump(1);
}

BuiltinClassifier BuiltinClassifier::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("weight file: bad JSON: ") + e.what());
  }
  if (!doc.contains("version") || doc["version"].get<int>() != 1)
    throw IoError("weight file: unsupported version");
  const auto& layers = doc.at("layers");
  if (!layers.is_array() || layers.size() != 4)
    throw IoError("weight file: expected 4 layers");

  MlpWeights w;
  matrix_from_json(layers[0], w.w1, w.b1);
  matrix_from_json(layers[1], w.w2, w.b2);
  matrix_from_json(layers[2], w.w3, w.b3);
  matrix_from_json(layers[3], w.w4, w.b4);
  if (w.w1.rows() != kHidden1 || w.w1.cols() != 3 || w.w2.rows() != kHidden2 ||
      w.w2.cols() != kHidden1 || w.w3.rows() != kHead || w.w3.cols() != kHidden2 ||
      w.w4.cols() != kHead)
    throw IoError("weight file: unexpected layer shapes");

  BuiltinClassifier model(static_cast<int>(w.w4.rows()));
  model.w_ = std::move(w);
  return model;
}

void BuiltinClassifier::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weight file: " + path);
  out << to_json() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

BuiltinClassifier BuiltinClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weight file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

// --- synthetic dataset -------------------------------------------------------

const std::vector<std::string>& default_shape_classes() {
  static const std::vector<std::string> names{
      "sphere-surface", "box-surface", "cylinder", "cone", "line-frame", "plane"};
  return names;
}

namespace {

Vec3 sample_surface_point(const std::string& cls, Rng& rng) {
  if (cls == "sphere-surface") {
    Vec3 g(rng.normal(), rng.normal(), rng.normal());
    while (g.norm() < 1e-9) g = Vec3(rng.normal(), rng.normal(), rng.normal());
    return g / g.norm();
  }
  if (cls == "box-surface") {
    const int face = rng.index(6);
    const double u = rng.uniform(-1.0, 1.0);
    const double v = rng.uniform(-1.0, 1.0);
    switch (face) {
      case 0: return {+1.0, u, v};
      case 1: return {-1.0, u, v};
      case 2: return {u, +1.0, v};
      case 3: return {u, -1.0, v};
      case 4: return {u, v, +1.0};
      default: return {u, v, -1.0};
    }
  }
  if (cls == "cylinder") {
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double y = rng.uniform(-1.0, 1.0);
    return {0.6 * std::cos(phi), y, 0.6 * std::sin(phi)};
  }
  if (cls == "cone") {
    const double u = std::sqrt(rng.uniform());  // area-uniform radius fraction
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    return {u * std::cos(phi), 1.0 - 2.0 * u, u * std::sin(phi)};
  }
  if (cls == "line-frame") {
    // The 12 edges of the cube [-1,1]^3.
    const int edge = rng.index(12);
    const double t = rng.uniform(-1.0, 1.0);
    const double a = (edge & 1) ? 1.0 : -1.0;
    const double b = (edge & 2) ? 1.0 : -1.0;
    switch (edge / 4) {
      case 0: return {t, a, b};
      case 1: return {a, t, b};
      default: return {a, b, t};
    }
  }
  if (cls == "plane") {
    return {rng.uniform(-1.0, 1.0), 0.0, rng.uniform(-1.0, 1.0)};
  }
  throw ArgumentError("unknown shape class: " + cls);
}

constexpr double kJitterSigma = 0.01;

}  // namespace

SyntheticDataset generate_dataset(const std::vector<std::string>& classes,
                                  int per_class, int points, std::uint64_t seed,
                                  double train_fraction) {
  if (per_class < 1) throw ArgumentError("per_class must be >= 1");
  if (points < 64) throw ArgumentError("point count must be >= 64");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ArgumentError("train fraction must be in [0, 1]");

  SyntheticDataset data;
  data.class_names = classes;
  data.points = points;
  data.seed = seed;

  const int train_per_class =
      static_cast<int>(std::llround(train_fraction * per_class));
  for (int c = 0; c < static_cast<int>(classes.size()); ++c) {
    for (int k = 0; k < per_class; ++k) {
      Rng rng(substream(seed, "sample", static_cast<std::uint64_t>(c),
                        static_cast<std::uint64_t>(k)));
      PointCloud cloud;
      cloud.points.reserve(points);
      for (int p = 0; p < points; ++p) {
        Vec3 q = sample_surface_point(classes[c], rng);
        q += kJitterSigma * Vec3(rng.normal(), rng.normal(), rng.normal());
        cloud.points.push_back(q);
      }
      const double angle = rng.uniform(0.0, 2.0 * kPi);
      const Mat3 ry = rotation_matrix(Vec3(0.0, angle, 0.0));
      for (auto& p : cloud.points) p = ry * p;
      cloud = normalize(cloud);
      cloud.label = c;
      cloud.id = classes[c] + "_" + std::to_string(k);
      if (k < train_per_class)
        data.train.push_back(std::move(cloud));
      else
        data.test.push_back(std::move(cloud));
    }
  }
  return data;
}

// --- training ----------------------------------------------------------------

PointCloud augment_cloud(const PointCloud& cloud, const AugmentationFlags& flags,
                         Rng& rng) {
  PointCloud out = cloud;
  if (flags.rotation_y) {
    const Mat3 r = rotation_matrix(Vec3(0.0, rng.uniform(-kPi, kPi), 0.0));
    for (auto& p : out.points) p = r * p;
  }
  if (flags.rotation_random) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    while (axis.norm() < 1e-9) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const double angle = rng.uniform(-kPi, kPi);
    const Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    for (auto& p : out.points) p = r * p;
  }
  if (flags.scale) {
    const double alpha = rng.uniform(kScaleMin, kScaleMax);
    for (auto& p : out.points) p *= alpha;
  }
  if (flags.translation) {
    const Vec3 delta(rng.uniform(-kTranslationBound, kTranslationBound),
                     rng.uniform(-kTranslationBound, kTranslationBound),
                     rng.uniform(-kTranslationBound, kTranslationBound));
    for (auto& p : out.points) p += delta;
  }
  return out;
}

double test_accuracy(const BuiltinClassifier& model,
                     const std::vector<PointCloud>& clouds) {
  if (clouds.empty()) return 0.0;
  int hits = 0;
  for (const auto& cloud : clouds) {
    if (!cloud.label.has_value())
      throw ArgumentError("test cloud without a label");
    if (model.predict(cloud) == *cloud.label) ++hits;
  }
  return static_cast<double>(hits) / clouds.size();
}

double sgd_step(BuiltinClassifier& model, const std::vector<PointCloud>& batch,
                double learning_rate) {
  if (batch.empty()) throw ArgumentError("sgd_step: empty batch");
  MlpWeights& w = model.weights();
  Gradients grads(w);
  double batch_loss = 0.0;
  for (const PointCloud& cloud : batch) {
    if (!cloud.label.has_value()) throw ArgumentError("sgd_step: cloud without a label");
    const ForwardCache cache = forward_full(w, cloud);
    batch_loss += backward(w, cache, *cloud.label, &grads, nullptr);
  }
  if (!std::isfinite(batch_loss))
    throw TrainingError("training diverged: batch loss " + std::to_string(batch_loss));
  const double step = learning_rate / batch.size();
  w.w1 -= step * grads.g.w1;
  w.b1 -= step * grads.g.b1;
  w.w2 -= step * grads.g.w2;
  w.b2 -= step * grads.g.b2;
  w.w3 -= step * grads.g.w3;
  w.b3 -= step * grads.g.b3;
  w.w4 -= step * grads.g.w4;
  w.b4 -= step * grads.g.b4;
  return batch_loss;
}

TrainReport train(BuiltinClassifier& model, const SyntheticDataset& data,
                  const TrainConfig& cfg, std::uint64_t seed) {
  if (data.train.empty()) throw ArgumentError("dataset has no train split");
  if (cfg.batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (cfg.epochs < 0) throw ArgumentError("epoch count must be >= 0");

  TrainReport report;
  Rng shuffle_rng(substream(seed, "shuffle"));
  Rng aug_rng(substream(seed, "augment"));
  const int train_size = static_cast<int>(data.train.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<int> order = shuffle_rng.permutation(train_size);
    double epoch_loss = 0.0;
    for (int start = 0; start < train_size; start += cfg.batch_size) {
      const int end = std::min(start + cfg.batch_size, train_size);
      std::vector<PointCloud> batch;
      batch.reserve(end - start);
      for (int b = start; b < end; ++b) {
        const PointCloud& base = data.train[order[b]];
        if (!base.label.has_value()) throw ArgumentError("train cloud without a label");
        batch.push_back(cfg.augmentation.any()
                            ? augment_cloud(base, cfg.augmentation, aug_rng)
                            : base);
        batch.back().label = base.label;
      }
      epoch_loss += sgd_step(model, batch, cfg.epoch_learning_rate(epoch));
    }
    EpochStats stats;
    stats.train_loss = epoch_loss / train_size;
    stats.test_accuracy = test_accuracy(model, data.test);
    report.epochs.push_back(stats);
  }
  report.final_test_accuracy = test_accuracy(model, data.test);
  return report;
}

}  // namespace pointprobe
