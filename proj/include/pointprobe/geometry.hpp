#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pointprobe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;

/// Enumeration ranges for the sensitivity transform families.
constexpr double kRotationBound = kPi / 4.0;      // per-axis Euler angle
constexpr double kTranslationBound = 0.5;         // per-axis offset
constexpr double kScaleMin = 0.5;
constexpr double kScaleMax = 2.0;

/// Fixed-size list of 3D points, the unit of analysis.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<int> label;
  std::string id;

  int size() const { return static_cast<int>(points.size()); }
};

/// Assignment of every point to one of n regions with designated center
/// points; regions are the players of the coalition game.
struct RegionPartition {
  int region_count = 0;
  std::vector<int> centers;     // point indices, one per region
  std::vector<int> assignment;  // per point, region index in [0, region_count)

  /// Point indices of region i.
  std::vector<int> region_points(int i) const;
};

/// Subset of regions as a bitmask (region i present iff bit i set).
/// Region counts are limited to 64 so a coalition fits one word.
using CoalitionMask = std::uint64_t;

inline CoalitionMask full_coalition(int n) {
  return n >= 64 ? ~CoalitionMask{0} : ((CoalitionMask{1} << n) - 1);
}
inline bool coalition_contains(CoalitionMask s, int i) {
  return (s >> i) & 1u;
}

enum class TransformKind { identity, rotation, translation, scale, structure_edit };

const char* transform_kind_name(TransformKind k);

/// One rigid/scale transform, or a reference into a structure-edit
/// trajectory. Parameters outside the enumeration ranges are rejected.
struct TransformSpec {
  TransformKind kind = TransformKind::identity;
  Vec3 theta = Vec3::Zero();  // Euler angles (radians), rotation only
  Vec3 delta = Vec3::Zero();  // offset, translation only
  double alpha = 1.0;         // factor, scale only
  int edit_ref = -1;          // snapshot index, structure_edit only

  static TransformSpec identity();
  static TransformSpec rotation(const Vec3& theta);
  static TransformSpec translation(const Vec3& delta);
  static TransformSpec scale(double alpha);
  static TransformSpec structure_edit(int snapshot_index);

  void validate() const;
  std::string describe() const;
};

/// Deterministic enumerated family of transforms for one sensitivity metric.
struct TransformGrid {
  TransformKind kind = TransformKind::identity;
  std::vector<TransformSpec> specs;

  /// per_axis values per Euler axis, linearly spaced over
  /// [-pi/4, pi/4]; identity appended when the grid misses it.
  static TransformGrid rotation(int per_axis, bool include_identity = true);
  /// per_axis values per axis over [-0.5, 0.5].
  static TransformGrid translation(int per_axis, bool include_identity = true);
  /// count values log-spaced over [0.5, 2].
  static TransformGrid scale(int count, bool include_identity = true);
};

/// Ball-query neighborhoods over region centers.
struct NeighborGraph {
  std::vector<std::vector<int>> neighbors;  // sorted, i excluded
  double radius = 0.0;
  std::vector<std::string> warnings;        // e.g. isolated regions

  int edge_count() const;
};

// --- operations ------------------------------------------------------------

Vec3 centroid(const PointCloud& cloud);

/// Recenters to zero centroid and rescales so the farthest point has norm 1.
/// Throws DegenerateError when all points coincide.
PointCloud normalize(const PointCloud& cloud);

/// Greedy farthest point sampling. The first center is the point with the
/// largest norm (lowest index on ties); every further center maximizes the
/// minimum distance to the centers chosen so far (lowest index on ties).
std::vector<int> farthest_point_sample(const PointCloud& cloud, int n);

/// Assigns every point to its nearest center, ties broken by the lowest
/// center index. Throws if any region ends up empty.
RegionPartition partition(const PointCloud& cloud, const std::vector<int>& centers);

/// Rotation matrix R = Rz(theta3) * Ry(theta2) * Rx(theta1): rotations
/// about the fixed axes applied in x, y, z order, about the origin.
Mat3 rotation_matrix(const Vec3& theta);

/// Applies a validated transform. structure_edit specs cannot be applied
/// here (their clouds come from the edit trajectory) and are rejected.
PointCloud apply_transform(const PointCloud& cloud, const TransformSpec& t);

/// Keeps points of regions in `members` untouched and moves every other
/// point to the centroid of the full input cloud.
PointCloud mask_coalition(const PointCloud& cloud, const RegionPartition& part,
                          CoalitionMask members);

/// Ball query over region centers. Default radius is twice the mean
/// nearest-neighbor distance among the centers. Isolated regions produce a
/// warning in the result, not an error.
NeighborGraph build_neighbor_graph(const RegionPartition& part,
                                   const PointCloud& cloud,
                                   std::optional<double> radius = std::nullopt);

// --- text format -----------------------------------------------------------
//
// One point per line, "x y z" whitespace-separated, optional leading header
// line "#label <int>". NaN/Inf coordinates are rejected.

PointCloud load_cloud_text(const std::string& path);
void save_cloud_text(const PointCloud& cloud, const std::string& path);

PointCloud parse_cloud_text(const std::string& text, const std::string& id = "");
std::string format_cloud_text(const PointCloud& cloud);

}  // namespace pointprobe
