#include "vdfc/histogram.hpp"

#include <algorithm>
#include <cmath>

namespace vdfc {

WeightedPoints WeightedPoints::from(Mat pts, Vec w) {
  WeightedPoints out;
  out.total_weight = w.sum();
  out.points = std::move(pts);
  out.weights = std::move(w);
  out.validate();
  return out;
}

void WeightedPoints::validate() const {
  if (points.rows() != weights.size())
    throw std::invalid_argument("weighted points: weight count does not match point count");
  if (points.rows() == 0) throw std::invalid_argument("weighted points: empty");
  if (!(weights.array() >= 0.0).all())
    throw std::invalid_argument("weighted points: weights must be >= 0");
  if (!(weights.array() > 0.0).any())
    throw std::invalid_argument("weighted points: at least one weight must be > 0");
}

AxisRange default_axis_range(const ParticleSet& particles, int axis) {
  const double vth = std::sqrt(particles.nominal_temperature(axis));
  return {-5.0 * vth, 5.0 * vth};
}

namespace {

// Left-closed right-open bin index; the top edge belongs to the last bin.
// Returns -1 for out-of-range values.
inline int bin_index(double value, const AxisRange& r, int n, double inv_width) {
  if (value < r.lo || value > r.hi) return -1;
  int i = static_cast<int>(std::floor((value - r.lo) * inv_width));
  if (i >= n) i = n - 1;  // value == hi, or rounding at the top edge
  return i;
}

}  // namespace

Histogram2D bin_particles(const ParticleSet& particles, Plane plane, int n_bins,
                          AxisRange range_x, AxisRange range_y) {
  particles.validate();
  if (n_bins < 2) throw std::invalid_argument("n_bins must be >= 2");
  if (!range_x.valid() || !range_y.valid())
    throw std::invalid_argument("axis range must satisfy min < max");
  const auto [ax, ay] = plane_axes(plane);
  if (ay >= particles.dimension())
    throw std::invalid_argument("plane " + to_string(plane) + " requires the w axis, but particles are " +
                                std::to_string(particles.dimension()) + "-dimensional");

  Histogram2D h;
  h.counts = Mat::Zero(n_bins, n_bins);
  h.range_x = range_x;
  h.range_y = range_y;
  h.plane = plane;
  h.n_bins = n_bins;
  h.species_label = particles.species_label;

  const double inv_dx = n_bins / range_x.width();
  const double inv_dy = n_bins / range_y.width();
  for (Index n = 0; n < particles.count(); ++n) {
    const double w = particles.weight_of(n);
    const int i = bin_index(particles.velocities(n, ax), range_x, n_bins, inv_dx);
    const int j = bin_index(particles.velocities(n, ay), range_y, n_bins, inv_dy);
    if (i < 0 || j < 0)
      h.out_of_range_count += w;
    else
      h.counts(i, j) += w;
  }
  return h;
}

std::array<Histogram2D, 3> all_planes(const ParticleSet& particles, int n_bins, AxisRange range) {
  if (particles.dimension() != 3)
    throw std::invalid_argument("all_planes requires d=3 particles; use bin_particles for d=2");
  return {bin_particles(particles, Plane::uv, n_bins, range, range),
          bin_particles(particles, Plane::vw, n_bins, range, range),
          bin_particles(particles, Plane::uw, n_bins, range, range)};
}

WeightedPoints to_weighted_points(const Histogram2D& hist, bool drop_empty) {
  if (hist.degenerate())
    throw std::invalid_argument("degenerate histogram: no in-range weight");
  const GridSpec g = hist.grid();
  const int n = hist.n_bins;

  Index kept = drop_empty ? (hist.counts.array() > 0.0).count() : Index(n) * n;
  WeightedPoints out;
  out.points.resize(kept, 2);
  out.weights.resize(kept);
  Index r = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = hist.counts(i, j);
      if (drop_empty && !(w > 0.0)) continue;
      out.points(r, 0) = g.center_x(i);
      out.points(r, 1) = g.center_y(j);
      out.weights(r) = w;
      ++r;
    }
  }
  out.total_weight = hist.in_range_count();
  return out;
}

PdfGrid to_pdf(const Histogram2D& hist) {
  if (hist.degenerate())
    throw std::invalid_argument("degenerate histogram: no in-range weight");
  return PdfGrid::normalized(hist.grid(), hist.counts);
}

PdfGrid refine_pdf(const Histogram2D& hist, int target_bins) {
  if (target_bins < hist.n_bins)
    throw std::invalid_argument("refine_pdf: target_bins must be >= the histogram's n_bins");
  const PdfGrid coarse = to_pdf(hist);
  if (target_bins == hist.n_bins) return coarse;

  const int n = hist.n_bins;
  const GridSpec fine_spec{target_bins, hist.range_x, hist.range_y};
  const GridSpec& cg = coarse.spec;
  Mat fine(target_bins, target_bins);

  // Interpolate in coarse bin-center coordinates; cells are index-clamped so
  // fine centers outside the outermost coarse centers extrapolate linearly,
  // keeping the interpolant exact on linear functions all the way to the
  // domain edge. Negative extrapolated values are clamped before the
  // renormalization.
  for (int i = 0; i < target_bins; ++i) {
    const double tx = (fine_spec.center_x(i) - cg.center_x(0)) / cg.dx();
    const int k = std::clamp(static_cast<int>(std::floor(tx)), 0, n - 2);
    const double fx = tx - k;
    for (int j = 0; j < target_bins; ++j) {
      const double ty = (fine_spec.center_y(j) - cg.center_y(0)) / cg.dy();
      const int l = std::clamp(static_cast<int>(std::floor(ty)), 0, n - 2);
      const double fy = ty - l;
      const double v = (1 - fx) * ((1 - fy) * coarse.values(k, l) + fy * coarse.values(k, l + 1)) +
                       fx * ((1 - fy) * coarse.values(k + 1, l) + fy * coarse.values(k + 1, l + 1));
      fine(i, j) = std::max(v, 0.0);
    }
  }
  return PdfGrid::normalized(fine_spec, std::move(fine));
}

}  // namespace vdfc
