#pragma once

#include "vdfc/types.hpp"

namespace vdfc {

/// Discrete probability density on a GridSpec: non-negative values at bin
/// centers whose sum times the bin area is 1. Construction renormalizes.
struct PdfGrid {
  GridSpec spec;
  Mat values;  // n_bins x n_bins, [i][j] = x bin i, y bin j

  double bin_area() const { return spec.bin_area(); }

  /// Probability mass of one bin.
  double mass(Index i, Index j) const { return values(i, j) * spec.bin_area(); }

  bool aligned_with(const PdfGrid& other) const { return spec == other.spec; }

  /// Renormalizes `raw` to integrate to 1 over the grid. Throws on negative
  /// values or zero total.
  static PdfGrid normalized(const GridSpec& spec, Mat raw);
};

}  // namespace vdfc
