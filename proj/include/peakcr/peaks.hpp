#pragma once

#include "peakcr/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace peakcr {

struct Ball {
  Vec center;
  double radius = 0.0;

  // Closed ball, with a little slack for points placed on the sphere.
  bool contains(const Vec& s) const { return (s - center).norm() <= radius * (1.0 + 1e-12); }
};

struct SearchSpec {
  /// Seeding grid evaluations per voxel per axis.
  int grid_refinement = 11;
  /// Search balls; must be pairwise disjoint and inside the domain.
  std::vector<Ball> balls;
  /// Convergence threshold on |grad f|, relative to the field's scale over the seed grid.
  double newton_tol = 1e-8;
  int max_iters = 50;
  /// Distance below which converged points are merged.
  double dedup_radius = 1e-4;
  /// Length of one voxel in domain units (lattice spacing, or frequency step).
  double voxel = 1.0;

  void validate(const Box& domain) const;
};

enum class PeakKind { Max, Min, Saddle, Degenerate };

const char* to_string(PeakKind k);

struct PeakEstimate {
  Vec location;
  double value = 0.0;
  double gradient_norm = 0.0;
  Mat hessian;
  PeakKind kind = PeakKind::Degenerate;
  std::optional<int> ball_index;
};

struct CriticalPoints {
  /// Sorted lexicographically by location.
  std::vector<PeakEstimate> points;
  int seeds = 0;
  /// Seeds whose iteration left the domain or failed to converge.
  int dropped = 0;
};

/// Eigenvalue classification with the threshold 1e-10 * |H|_F.
PeakKind classify_hessian(const Mat& h);

/// Seeds a grid over the field's domain (grid-local maxima and minima, and in
/// 2D local minima of |grad f|), refines each by safeguarded Newton iteration,
/// deduplicates and classifies the converged points.
CriticalPoints find_critical_points(const Field& field, const SearchSpec& spec);

/// Global maximizer of the field over the closed ball. Interior maxima come
/// from grid seeding plus Newton; if the boundary beats every interior
/// maximum the boundary point is returned with kind Degenerate.
PeakEstimate argmax_in_ball(const Field& field, const Ball& ball, const SearchSpec& spec);
/// Same for the minimum (via the negated field); kind Min on success.
PeakEstimate argmin_in_ball(const Field& field, const Ball& ball, const SearchSpec& spec);

/// Heuristic ball radius: half the smallest distance between distinct peaks.
double half_min_separation(const std::vector<Vec>& peaks);

}  // namespace peakcr
