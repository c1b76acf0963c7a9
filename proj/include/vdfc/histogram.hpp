#pragma once

#include <array>

#include "vdfc/pdf_grid.hpp"
#include "vdfc/synthdata.hpp"
#include "vdfc/types.hpp"

namespace vdfc {

/// Fixed-range 2D weight-count grid over one velocity plane.
///
/// Bins are left-closed right-open, the last bin along each axis is closed.
/// Particles falling outside the range accumulate in out_of_range_count, so
/// in_range + out_of_range always equals the total particle weight.
struct Histogram2D {
  Mat counts;  // n_bins x n_bins, [i][j] = x bin i, y bin j
  AxisRange range_x;
  AxisRange range_y;
  Plane plane = Plane::uv;
  int n_bins = 0;
  double out_of_range_count = 0.0;
  std::string species_label;

  double in_range_count() const { return counts.sum(); }
  bool degenerate() const { return !(in_range_count() > 0.0); }
  GridSpec grid() const { return GridSpec{n_bins, range_x, range_y}; }
};

/// Bin centers with their accumulated weights: the observed data fed to the
/// weighted EM fit. total_weight keeps the full in-range weight even when
/// zero-weight points were dropped.
struct WeightedPoints {
  Mat points;   // N x d
  Vec weights;  // N, >= 0, at least one > 0
  double total_weight = 0.0;

  Index count() const { return points.rows(); }
  int dimension() const { return static_cast<int>(points.cols()); }

  static WeightedPoints from(Mat pts, Vec w);
  void validate() const;
};

/// Default fixed range for one axis: +/- 5 nominal thermal speeds.
AxisRange default_axis_range(const ParticleSet& particles, int axis);

Histogram2D bin_particles(const ParticleSet& particles, Plane plane, int n_bins,
                          AxisRange range_x, AxisRange range_y);

/// The three marginal 2D histograms f1(u,v), f2(v,w), f3(u,w) of a d=3 set,
/// all over the same axis range.
std::array<Histogram2D, 3> all_planes(const ParticleSet& particles, int n_bins, AxisRange range);

WeightedPoints to_weighted_points(const Histogram2D& hist, bool drop_empty = true);

/// Counts scaled to a density: counts / (in-range weight * bin area).
PdfGrid to_pdf(const Histogram2D& hist);

/// Bilinear interpolation of the coarse pdf onto a finer grid over the same
/// range, renormalized. target_bins == n_bins returns to_pdf unchanged;
/// target_bins < n_bins is rejected.
PdfGrid refine_pdf(const Histogram2D& hist, int target_bins);

}  // namespace vdfc
