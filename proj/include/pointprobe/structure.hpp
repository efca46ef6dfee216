#pragma once

#include <array>
#include <string>
#include <vector>

#include "pointprobe/geometry.hpp"

namespace pointprobe {

/// Eigenvalue-ratio measures of a region's local shape: edge-like
/// (linearity), surface-like (planarity) and mass-like (scattering)
/// significance. The three always sum to 1.
struct StructureMeasures {
  std::array<double, 3> lambdas{};  // covariance eigenvalues, descending
  double linearity = 0.0;           // (l1 - l2) / l1
  double planarity = 0.0;           // (l2 - l3) / l1
  double scattering = 0.0;          // l3 / l1
};

enum class StructureTarget { linearity, planarity, scattering };
enum class EditDirection { ascent, descent };

const char* structure_target_name(StructureTarget t);

/// Knobs of the constrained gradient-ascent structure editor.
struct EditConfig {
  double eta = 0.001;              // step size
  double gamma = 0.003;            // eigenvalue band half-width
  double max_displacement = 0.03;  // per-point L2 cap vs original position
  EditDirection direction = EditDirection::ascent;
  StructureTarget target = StructureTarget::linearity;
  int max_steps = 100;

  void validate() const;
};

enum class EditStop { eigen_band, displacement_cap, max_steps };

const char* edit_stop_name(EditStop s);

/// Trajectory of simultaneous per-region edits. snapshots[0] is the input
/// cloud; every snapshot respects the displacement cap and keeps each
/// region's eigenvalues inside the +-gamma band around their initial values.
struct StructureEdit {
  std::vector<std::vector<Vec3>> snapshots;               // [step][point]
  std::vector<std::vector<StructureMeasures>> measures;   // [step][region]
  std::vector<EditStop> termination;                      // per region
  std::vector<std::string> warnings;

  int steps() const { return static_cast<int>(snapshots.size()); }
  PointCloud snapshot_cloud(const PointCloud& base, int step) const;
};

/// Covariance (1/m normalization) about the region mean; eigenvalues sorted
/// descending. Throws DegenerateError when the leading eigenvalue vanishes.
StructureMeasures measures_of_points(const std::vector<Vec3>& points);
StructureMeasures region_measures(const PointCloud& cloud,
                                  const RegionPartition& part, int region);

/// Analytic per-point gradient of the target measure via
/// d(lambda_k)/dp = (2/m) (v_k . (p - mean)) v_k and the chain rule.
/// Falls back to central finite differences when the minimum eigenvalue gap
/// drops below 1e-9 (the result is then a subgradient choice).
std::vector<Vec3> measure_gradient(const std::vector<Vec3>& points,
                                   StructureTarget target);

/// Runs the editor on all regions at once: gradients are evaluated on the
/// same snapshot, steps applied simultaneously, points radially projected
/// onto the displacement ball, and a region freezes (reverting its last
/// step) as soon as an eigenvalue would leave its band.
StructureEdit enumerate_structure_edits(const PointCloud& cloud,
                                        const RegionPartition& part,
                                        const EditConfig& cfg);

/// Trajectory family for the structure-sensitivity metrics: snapshots of one
/// ascent and one descent run, each subsampled to at most
/// max_per_direction entries (endpoints kept).
std::vector<PointCloud> structure_transform_family(const PointCloud& cloud,
                                                   const RegionPartition& part,
                                                   StructureTarget target,
                                                   const EditConfig& base_cfg,
                                                   int max_per_direction);

}  // namespace pointprobe
