#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace vdfc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Velocity plane selecting two of the (u, v, w) axes.
enum class Plane : std::uint8_t { uv = 0, vw = 1, uw = 2 };

constexpr std::pair<int, int> plane_axes(Plane p) {
  switch (p) {
    case Plane::uv: return {0, 1};
    case Plane::vw: return {1, 2};
    case Plane::uw: return {0, 2};
  }
  return {0, 1};
}

std::string to_string(Plane p);
Plane plane_from_string(const std::string& s);

struct AxisRange {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo < hi; }
  bool operator==(const AxisRange&) const = default;
};

/// Uniform n x n grid of square-ish cells over a rectangle. Values attached to
/// such a grid live at cell centers.
struct GridSpec {
  int n_bins = 0;
  AxisRange x;
  AxisRange y;

  double dx() const { return x.width() / n_bins; }
  double dy() const { return y.width() / n_bins; }
  double bin_area() const { return dx() * dy(); }
  double center_x(int i) const { return x.lo + (i + 0.5) * dx(); }
  double center_y(int j) const { return y.lo + (j + 0.5) * dy(); }
  bool valid() const { return n_bins >= 1 && x.valid() && y.valid(); }
  bool operator==(const GridSpec&) const = default;
};

/// Per-axis affine change of coordinates z = (x - offset) / scale, used to map
/// data into the [-1,1] fitting frame and back.
struct AffineMap {
  Vec scale;
  Vec offset;

  static AffineMap identity(int dim) {
    AffineMap m;
    m.scale = Vec::Ones(dim);
    m.offset = Vec::Zero(dim);
    return m;
  }

  Index dim() const { return scale.size(); }
  bool is_identity() const {
    return (scale.array() == 1.0).all() && (offset.array() == 0.0).all();
  }

  Vec forward(const Vec& x) const { return (x - offset).cwiseQuotient(scale); }
  Vec inverse(const Vec& z) const { return z.cwiseProduct(scale) + offset; }

  /// |det| of the inverse map; multiplies densities expressed in the
  /// normalized frame when pulling them back to data space.
  double volume() const { return scale.prod(); }
};

enum class CodecErrc {
  bad_magic,
  unsupported_version,
  truncated,
  size_mismatch,
  bad_crc,
  non_spd_covariance,
  unknown_codec,
};

struct CodecError : std::runtime_error {
  CodecErrc kind;
  CodecError(CodecErrc k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

/// Thrown when diagonal loading cannot restore positive definiteness.
struct CovarianceRepairError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vdfc
