#include "pointprobe/structure.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "pointprobe/errors.hpp"

namespace pointprobe {

namespace {

constexpr double kEigenGapFallback = 1e-9;
constexpr double kFdStep = 1e-6;

struct EigenDecomp {
  Vec3 mean;
  std::array<double, 3> lambdas;  // descending
  std::array<Vec3, 3> vectors;
};

EigenDecomp decompose(const std::vector<Vec3>& points) {
  if (points.size() < 2)
    throw ArgumentError("structure measures need at least 2 points");
  const double m = static_cast<double>(points.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= m;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= m;
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  if (solver.info() != Eigen::Success)
    throw DegenerateError("covariance eigendecomposition failed");
  EigenDecomp out;
  out.mean = mean;
  // Eigen returns ascending order.
  for (int k = 0; k < 3; ++k) {
    out.lambdas[k] = solver.eigenvalues()[2 - k];
    out.vectors[k] = solver.eigenvectors().col(2 - k);
  }
  return out;
}

StructureMeasures measures_from(const EigenDecomp& eig) {
  const double l1 = eig.lambdas[0], l2 = eig.lambdas[1], l3 = eig.lambdas[2];
  if (!(l1 > 0.0))
    throw DegenerateError("degenerate region: all points collocated");
  StructureMeasures m;
  m.lambdas = eig.lambdas;
  m.linearity = (l1 - l2) / l1;
  m.planarity = (l2 - l3) / l1;
  m.scattering = l3 / l1;
  return m;
}

double target_value(const StructureMeasures& m, StructureTarget t) {
  switch (t) {
    case StructureTarget::linearity: return m.linearity;
    case StructureTarget::planarity: return m.planarity;
    case StructureTarget::scattering: return m.scattering;
  }
  return 0.0;
}

std::vector<Vec3> finite_difference_gradient(const std::vector<Vec3>& points,
                                             StructureTarget target) {
  std::vector<Vec3> grad(points.size(), Vec3::Zero());
  std::vector<Vec3> work = points;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const double orig = work[p][c];
      work[p][c] = orig + kFdStep;
      const double hi = target_value(measures_of_points(work), target);
      work[p][c] = orig - kFdStep;
      const double lo = target_value(measures_of_points(work), target);
      work[p][c] = orig;
      grad[p][c] = (hi - lo) / (2.0 * kFdStep);
    }
  }
  return grad;
}

}  // namespace

const char* structure_target_name(StructureTarget t) {
  switch (t) {
    case StructureTarget::linearity: return "linearity";
    case StructureTarget::planarity: return "planarity";
    case StructureTarget::scattering: return "scattering";
  }
  return "?";
}

const char* edit_stop_name(EditStop s) {
  switch (s) {
    case EditStop::eigen_band: return "eigen-band";
    case EditStop::displacement_cap: return "displacement-cap";
    case EditStop::max_steps: return "max-steps";
  }
  return "?";
}

void EditConfig::validate() const {
  if (!(eta > 0.0)) throw ArgumentError("edit eta must be > 0");
  if (!(gamma > 0.0)) throw ArgumentError("edit gamma must be > 0");
  if (!(max_displacement > 0.0)) throw ArgumentError("edit displacement cap must be > 0");
  if (max_steps < 1) throw ArgumentError("edit max_steps must be >= 1");
}

PointCloud StructureEdit::snapshot_cloud(const PointCloud& base, int step) const {
  if (step < 0 || step >= steps()) throw ArgumentError("snapshot index out of range");
  PointCloud out = base;
  out.points = snapshots[step];
  return out;
}

StructureMeasures measures_of_points(const std::vector<Vec3>& points) {
  return measures_from(decompose(points));
}

StructureMeasures region_measures(const PointCloud& cloud,
                                  const RegionPartition& part, int region) {
  if (region < 0 || region >= part.region_count)
    throw ArgumentError("region index out of range");
  std::vector<Vec3> pts;
  for (int p = 0; p < cloud.size(); ++p)
    if (part.assignment[p] == region) pts.push_back(cloud.points[p]);
  return measures_of_points(pts);
}

std::vector<Vec3> measure_gradient(const std::vector<Vec3>& points,
                                   StructureTarget target) {
  const EigenDecomp eig = decompose(points);
  const double l1 = eig.lambdas[0], l2 = eig.lambdas[1], l3 = eig.lambdas[2];
  if (!(l1 > 0.0))
    throw DegenerateError("degenerate region: all points collocated");
  const double gap = std::min(l1 - l2, l2 - l3);
  if (gap < kEigenGapFallback) return finite_difference_gradient(points, target);

  const double m = static_cast<double>(points.size());
  std::vector<Vec3> grad(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Vec3 d = points[p] - eig.mean;
    const Vec3 g1 = (2.0 / m) * eig.vectors[0].dot(d) * eig.vectors[0];
    const Vec3 g2 = (2.0 / m) * eig.vectors[1].dot(d) * eig.vectors[1];
    const Vec3 g3 = (2.0 / m) * eig.vectors[2].dot(d) * eig.vectors[2];
    switch (target) {
      case StructureTarget::linearity:
        grad[p] = (l2 * g1 - l1 * g2) / (l1 * l1);
        break;
      case StructureTarget::planarity:
        grad[p] = (g2 - g3) / l1 - (l2 - l3) * g1 / (l1 * l1);
        break;
      case StructureTarget::scattering:
        grad[p] = g3 / l1 - l3 * g1 / (l1 * l1);
        break;
    }
  }
  return grad;
}

StructureEdit enumerate_structure_edits(const PointCloud& cloud,
                                        const RegionPartition& part,
                                        const EditConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(part.assignment.size()) != cloud.size())
    throw ArgumentError("enumerate_structure_edits: partition does not match cloud");

  const int n = part.region_count;
  const double sign = cfg.direction == EditDirection::ascent ? 1.0 : -1.0;

  std::vector<std::vector<int>> region_pts(n);
  for (int p = 0; p < cloud.size(); ++p) region_pts[part.assignment[p]].push_back(p);

  StructureEdit edit;
  edit.termination.assign(n, EditStop::max_steps);
  std::vector<bool> active(n, true);

  const std::vector<Vec3>& original = cloud.points;
  std::vector<Vec3> current = original;

  auto gather = [&](const std::vector<Vec3>& pts, int r) {
    std::vector<Vec3> out;
    out.reserve(region_pts[r].size());
    for (int p : region_pts[r]) out.push_back(pts[p]);
    return out;
  };

  std::vector<StructureMeasures> initial(n);
  for (int r = 0; r < n; ++r) {
    try {
      initial[r] = measures_of_points(gather(current, r));
    } catch (const Error& e) {
      active[r] = false;
      edit.warnings.push_back("region " + std::to_string(r) +
                              " skipped: " + e.what());
    }
  }

  edit.snapshots.push_back(current);
  edit.measures.push_back(initial);
  std::vector<StructureMeasures> current_meas = initial;

  int accepted_steps = 0;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    bool any_active = false;
    for (int r = 0; r < n; ++r) any_active |= static_cast<bool>(active[r]);
    if (!any_active) break;

    // Simultaneous update: every region's gradient comes from the same
    // snapshot, then all accepted moves are applied together.
    std::vector<std::vector<Vec3>> grads(n);
    for (int r = 0; r < n; ++r)
      if (active[r]) grads[r] = measure_gradient(gather(current, r), cfg.target);

    bool any_accepted = false;
    std::vector<Vec3> next = current;
    for (int r = 0; r < n; ++r) {
      if (!active[r]) continue;
      bool clipped = false;
      double moved = 0.0;
      for (std::size_t k = 0; k < region_pts[r].size(); ++k) {
        const int p = region_pts[r][k];
        Vec3 cand = current[p] + sign * cfg.eta * grads[r][k];
        const Vec3 disp = cand - original[p];
        const double dn = disp.norm();
        if (dn > cfg.max_displacement) {
          cand = original[p] + disp * (cfg.max_displacement / dn);
          clipped = true;
        }
        moved = std::max(moved, (cand - current[p]).norm());
        next[p] = cand;
      }

      const StructureMeasures updated = measures_of_points(gather(next, r));
      bool band_ok = true;
      for (int k = 0; k < 3; ++k)
        band_ok &= std::abs(updated.lambdas[k] - initial[r].lambdas[k]) <= cfg.gamma;
      const double progress = sign * (target_value(updated, cfg.target) -
                                      target_value(current_meas[r], cfg.target));

      if (!band_ok || progress < -1e-15 || moved < 1e-15) {
        // Revert this region and freeze it at its last valid position.
        for (int p : region_pts[r]) next[p] = current[p];
        active[r] = false;
        if (!band_ok)
          edit.termination[r] = EditStop::eigen_band;
        else if (clipped)
          edit.termination[r] = EditStop::displacement_cap;
        else
          edit.termination[r] = EditStop::max_steps;
      } else {
        current_meas[r] = updated;
        any_accepted = true;
      }
    }

    if (!any_accepted) break;
    current = std::move(next);
    ++accepted_steps;

    edit.snapshots.push_back(current);
    edit.measures.push_back(current_meas);
  }

  if (accepted_steps == 0)
    edit.warnings.push_back("empty trajectory: no step was accepted");
  return edit;
}

namespace {

// Evenly spaced subsample of steps 1..last, keeping the last step.
std::vector<int> subsample_steps(int last, int max_count) {
  std::vector<int> idx;
  if (last < 1 || max_count < 1) return idx;
  if (last <= max_count) {
    for (int s = 1; s <= last; ++s) idx.push_back(s);
    return idx;
  }
  for (int k = 0; k < max_count; ++k) {
    const int s = 1 + static_cast<int>(std::llround(
                          static_cast<double>(k) * (last - 1) / (max_count - 1)));
    if (idx.empty() || idx.back() != s) idx.push_back(s);
  }
  return idx;
}

}  // namespace

std::vector<PointCloud> structure_transform_family(const PointCloud& cloud,
                                                   const RegionPartition& part,
                                                   StructureTarget target,
                                                   const EditConfig& base_cfg,
                                                   int max_per_direction) {
  std::vector<PointCloud> family;
  family.push_back(cloud);  // the unedited cloud anchors the family
  for (EditDirection dir : {EditDirection::ascent, EditDirection::descent}) {
    EditConfig cfg = base_cfg;
    cfg.target = target;
    cfg.direction = dir;
    const StructureEdit edit = enumerate_structure_edits(cloud, part, cfg);
    for (int s : subsample_steps(edit.steps() - 1, max_per_direction))
      family.push_back(edit.snapshot_cloud(cloud, s));
  }
  return family;
}

}  // namespace pointprobe
