#include "pointprobe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pointprobe/errors.hpp"

namespace pointprobe {

std::vector<int> RegionPartition::region_points(int i) const {
  std::vector<int> out;
  for (int p = 0; p < static_cast<int>(assignment.size()); ++p)
    if (assignment[p] == i) out.push_back(p);
  return out;
}

const char* transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::rotation: return "rotation";
    case TransformKind::translation: return "translation";
    case TransformKind::scale: return "scale";
    case TransformKind::structure_edit: return "structure-edit";
  }
  return "?";
}

TransformSpec TransformSpec::identity() { return TransformSpec{}; }

TransformSpec TransformSpec::rotation(const Vec3& theta) {
  TransformSpec t;
  t.kind = TransformKind::rotation;
  t.theta = theta;
  t.validate();
  return t;
}

TransformSpec TransformSpec::translation(const Vec3& delta) {
  TransformSpec t;
  t.kind = TransformKind::translation;
  t.delta = delta;
  t.validate();
  return t;
}

TransformSpec TransformSpec::scale(double alpha) {
  TransformSpec t;
  t.kind = TransformKind::scale;
  t.alpha = alpha;
  t.validate();
  return t;
}

TransformSpec TransformSpec::structure_edit(int snapshot_index) {
  TransformSpec t;
  t.kind = TransformKind::structure_edit;
  t.edit_ref = snapshot_index;
  t.validate();
  return t;
}

void TransformSpec::validate() const {
  // Small slack so grid endpoints computed in floating point stay legal.
  constexpr double eps = 1e-12;
  switch (kind) {
    case TransformKind::identity:
      return;
    case TransformKind::rotation:
      for (int a = 0; a < 3; ++a)
        if (!(std::abs(theta[a]) <= kRotationBound + eps))
          throw ArgumentError("rotation angle out of [-pi/4, pi/4]: " + describe());
      return;
    case TransformKind::translation:
      for (int a = 0; a < 3; ++a)
        if (!(std::abs(delta[a]) <= kTranslationBound + eps))
          throw ArgumentError("translation offset out of [-0.5, 0.5]: " + describe());
      return;
    case TransformKind::scale:
      if (!(alpha >= kScaleMin - eps && alpha <= kScaleMax + eps))
        throw ArgumentError("scale factor out of [0.5, 2]: " + describe());
      return;
    case TransformKind::structure_edit:
      if (edit_ref < 0)
        throw ArgumentError("structure-edit transform needs a snapshot index");
      return;
  }
}

std::string TransformSpec::describe() const {
  char buf[128];
  switch (kind) {
    case TransformKind::identity:
      return "identity";
    case TransformKind::rotation:
      std::snprintf(buf, sizeof buf, "rotation(%.6g,%.6g,%.6g)", theta[0], theta[1], theta[2]);
      return buf;
    case TransformKind::translation:
      std::snprintf(buf, sizeof buf, "translation(%.6g,%.6g,%.6g)", delta[0], delta[1], delta[2]);
      return buf;
    case TransformKind::scale:
      std::snprintf(buf, sizeof buf, "scale(%.6g)", alpha);
      return buf;
    case TransformKind::structure_edit:
      std::snprintf(buf, sizeof buf, "structure-edit(step %d)", edit_ref);
      return buf;
  }
  return "?";
}

namespace {

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw ArgumentError("grid needs at least one value per axis");
  std::vector<double> v;
  if (count == 1) {
    v.push_back(0.5 * (lo + hi));
    return v;
  }
  for (int k = 0; k < count; ++k)
    v.push_back(lo + (hi - lo) * static_cast<double>(k) / (count - 1));
  return v;
}

bool has_identity(const std::vector<TransformSpec>& specs) {
  for (const auto& t : specs) {
    switch (t.kind) {
      case TransformKind::identity: return true;
      case TransformKind::rotation:
        if (t.theta.isZero(0.0)) return true;
        break;
      case TransformKind::translation:
        if (t.delta.isZero(0.0)) return true;
        break;
      case TransformKind::scale:
        if (t.alpha == 1.0) return true;
        break;
      default: break;
    }
  }
  return false;
}

}  // namespace

TransformGrid TransformGrid::rotation(int per_axis, bool include_identity) {
  TransformGrid g;
  g.kind = TransformKind::rotation;
  const auto vals = linspace(-kRotationBound, kRotationBound, per_axis);
  for (double a : vals)
    for (double b : vals)
      for (double c : vals) g.specs.push_back(TransformSpec::rotation({a, b, c}));
  if (include_identity && !has_identity(g.specs))
    g.specs.push_back(TransformSpec::rotation(Vec3::Zero()));
  return g;
}

TransformGrid TransformGrid::translation(int per_axis, bool include_identity) {
  TransformGrid g;
  g.kind = TransformKind::translation;
  const auto vals = linspace(-kTranslationBound, kTranslationBound, per_axis);
  for (double a : vals)
    for (double b : vals)
      for (double c : vals) g.specs.push_back(TransformSpec::translation({a, b, c}));
  if (include_identity && !has_identity(g.specs))
    g.specs.push_back(TransformSpec::translation(Vec3::Zero()));
  return g;
}

TransformGrid TransformGrid::scale(int count, bool include_identity) {
  TransformGrid g;
  g.kind = TransformKind::scale;
  if (count < 1) throw ArgumentError("scale grid needs at least one value");
  const double log_lo = std::log(kScaleMin);
  const double log_hi = std::log(kScaleMax);
  for (int k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.5 : static_cast<double>(k) / (count - 1);
    double alpha = std::exp(log_lo + (log_hi - log_lo) * t);
    alpha = std::clamp(alpha, kScaleMin, kScaleMax);
    g.specs.push_back(TransformSpec::scale(alpha));
  }
  if (include_identity && !has_identity(g.specs))
    g.specs.push_back(TransformSpec::scale(1.0));
  return g;
}

int NeighborGraph::edge_count() const {
  int total = 0;
  for (const auto& lst : neighbors) total += static_cast<int>(lst.size());
  return total / 2;
}

Vec3 centroid(const PointCloud& cloud) {
  if (cloud.points.empty()) throw ArgumentError("centroid of empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.points.size());
}

PointCloud normalize(const PointCloud& cloud) {
  if (cloud.size() < 2) throw DegenerateError("normalize needs at least 2 points");
  const Vec3 c = centroid(cloud);
  PointCloud out = cloud;
  double max_norm = 0.0;
  for (auto& p : out.points) {
    p -= c;
    max_norm = std::max(max_norm, p.norm());
  }
  if (max_norm <= 0.0)
    throw DegenerateError("degenerate cloud: all points coincide");
  for (auto& p : out.points) p /= max_norm;
  return out;
}

std::vector<int> farthest_point_sample(const PointCloud& cloud, int n) {
  const int count = cloud.size();
  if (n < 1) throw ArgumentError("farthest_point_sample: n must be >= 1");
  if (n > count)
    throw ArgumentError("farthest_point_sample: n exceeds point count");

  int first = 0;
  double best = -1.0;
  for (int i = 0; i < count; ++i) {
    const double d = cloud.points[i].norm();
    if (d > best) {
      best = d;
      first = i;
    }
  }

  std::vector<int> centers{first};
  std::vector<double> min_dist(count, std::numeric_limits<double>::infinity());
  int last = first;
  while (static_cast<int>(centers.size()) < n) {
    int next = -1;
    double next_dist = -1.0;
    for (int i = 0; i < count; ++i) {
      min_dist[i] = std::min(min_dist[i], (cloud.points[i] - cloud.points[last]).norm());
      if (min_dist[i] > next_dist) {
        next_dist = min_dist[i];
        next = i;
      }
    }
    centers.push_back(next);
    last = next;
  }
  return centers;
}

RegionPartition partition(const PointCloud& cloud, const std::vector<int>& centers) {
  if (centers.empty()) throw ArgumentError("partition: no centers");
  const int n = static_cast<int>(centers.size());
  const int count = cloud.size();
  for (int c : centers)
    if (c < 0 || c >= count) throw ArgumentError("partition: center index out of range");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (centers[i] == centers[j]) throw ArgumentError("partition: duplicate centers");

  RegionPartition part;
  part.region_count = n;
  part.centers = centers;
  part.assignment.resize(count);
  for (int p = 0; p < count; ++p) {
    int best = 0;
    double best_d = (cloud.points[p] - cloud.points[centers[0]]).squaredNorm();
    for (int r = 1; r < n; ++r) {
      const double d = (cloud.points[p] - cloud.points[centers[r]]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    part.assignment[p] = best;
  }

  std::vector<int> sizes(n, 0);
  for (int r : part.assignment) ++sizes[r];
  for (int r = 0; r < n; ++r)
    if (sizes[r] == 0)
      throw ArgumentError("partition: region " + std::to_string(r) + " is empty");
  return part;
}

Mat3 rotation_matrix(const Vec3& theta) {
  const double c1 = std::cos(theta[0]), s1 = std::sin(theta[0]);
  const double c2 = std::cos(theta[1]), s2 = std::sin(theta[1]);
  const double c3 = std::cos(theta[2]), s3 = std::sin(theta[2]);
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, c1, -s1, 0, s1, c1;
  ry << c2, 0, s2, 0, 1, 0, -s2, 0, c2;
  rz << c3, -s3, 0, s3, c3, 0, 0, 0, 1;
  return rz * ry * rx;
}

PointCloud apply_transform(const PointCloud& cloud, const TransformSpec& t) {
  t.validate();
  PointCloud out = cloud;
  switch (t.kind) {
    case TransformKind::identity:
      return out;
    case TransformKind::rotation: {
      const Mat3 r = rotation_matrix(t.theta);
      for (auto& p : out.points) p = r * p;
      return out;
    }
    case TransformKind::translation:
      for (auto& p : out.points) p += t.delta;
      return out;
    case TransformKind::scale:
      for (auto& p : out.points) p *= t.alpha;
      return out;
    case TransformKind::structure_edit:
      throw ArgumentError(
          "structure-edit transforms are realized from an edit trajectory, "
          "not via apply_transform");
  }
  return out;
}

PointCloud mask_coalition(const PointCloud& cloud, const RegionPartition& part,
                          CoalitionMask members) {
  if (static_cast<int>(part.assignment.size()) != cloud.size())
    throw ArgumentError("mask_coalition: partition does not match cloud");
  const Vec3 center = centroid(cloud);
  PointCloud out = cloud;
  for (int p = 0; p < cloud.size(); ++p)
    if (!coalition_contains(members, part.assignment[p])) out.points[p] = center;
  return out;
}

NeighborGraph build_neighbor_graph(const RegionPartition& part,
                                   const PointCloud& cloud,
                                   std::optional<double> radius) {
  const int n = part.region_count;
  std::vector<Vec3> centers(n);
  for (int i = 0; i < n; ++i) centers[i] = cloud.points[part.centers[i]];

  NeighborGraph graph;
  if (!radius.has_value()) {
    if (n < 2)
      throw ArgumentError("default neighbor radius needs at least two regions");
    double sum_nn = 0.0;
    for (int i = 0; i < n; ++i) {
      double nn = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j)
        if (j != i) nn = std::min(nn, (centers[i] - centers[j]).norm());
      sum_nn += nn;
    }
    graph.radius = 2.0 * sum_nn / n;
  } else {
    if (*radius <= 0.0) throw ArgumentError("neighbor radius must be positive");
    graph.radius = *radius;
  }

  graph.neighbors.resize(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i && (centers[i] - centers[j]).norm() <= graph.radius)
        graph.neighbors[i].push_back(j);

  for (int i = 0; i < n; ++i)
    if (graph.neighbors[i].empty())
      graph.warnings.push_back("region " + std::to_string(i) +
                               " is isolated at radius " + std::to_string(graph.radius));
  return graph;
}

PointCloud parse_cloud_text(const std::string& text, const std::string& id) {
  PointCloud cloud;
  cloud.id = id;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "label") {
        int label;
        if (!(hs >> label))
          throw IoError("bad #label header at line " + std::to_string(line_no));
        cloud.label = label;
      }
      continue;
    }
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p[0] >> p[1] >> p[2]))
      throw IoError("bad point line " + std::to_string(line_no) + ": " + line);
    if (!p.allFinite())
      throw IoError("non-finite coordinate at line " + std::to_string(line_no));
    cloud.points.push_back(p);
  }
  return cloud;
}

std::string format_cloud_text(const PointCloud& cloud) {
  std::string out;
  char buf[96];
  if (cloud.label.has_value()) {
    std::snprintf(buf, sizeof buf, "#label %d\n", *cloud.label);
    out += buf;
  }
  for (const auto& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out += buf;
  }
  return out;
}

PointCloud load_cloud_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point cloud file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string id = path;
  const auto slash = id.find_last_of('/');
  if (slash != std::string::npos) id = id.substr(slash + 1);
  const auto dot = id.find_last_of('.');
  if (dot != std::string::npos) id = id.substr(0, dot);
  return parse_cloud_text(buf.str(), id);
}

void save_cloud_text(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write point cloud file: " + path);
  out << format_cloud_text(cloud);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace pointprobe
