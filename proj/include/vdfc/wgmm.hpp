#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "vdfc/histogram.hpp"
#include "vdfc/pdf_grid.hpp"
#include "vdfc/types.hpp"

namespace vdfc {

struct GaussianComponent {
  double weight = 0.0;  // mixing coefficient, (0, 1]
  Vec mean;
  Mat covariance;  // kept exactly symmetric; assign through set_covariance

  /// Stores the upper triangle mirrored onto the lower one, so the symmetry
  /// invariant holds bit-for-bit.
  void set_covariance(Mat m);
};

/// A Gaussian mixture plus the affine map from data space to the frame the
/// components live in. Canonical (stored/fitted) models carry the identity
/// map; during fitting the map is the [-1,1] normalization.
struct GmmModel {
  std::vector<GaussianComponent> components;
  AffineMap normalization;
  int dimension = 0;

  int size() const { return static_cast<int>(components.size()); }

  /// Mixture density at a data-space point, including the Jacobian of the
  /// normalization map.
  double pdf(const Vec& x) const;

  void validate() const;
};

struct FitConfig {
  int initial_components = 12;
  int max_em_iterations = 100;
  double prune_threshold = 0.005;
  int prune_check_interval = 10;
  double loglik_rel_tolerance = 1e-6;
  std::uint64_t seed = 0;
  /// Previous-cycle model (canonical, data space); when present it replaces
  /// the random initialization.
  std::shared_ptr<const GmmModel> warm_start;
  /// Per-axis variance for the initial covariances, in data units. Unset:
  /// the weighted variance of the input points.
  std::optional<Vec> temperature;

  void validate() const;
};

struct PruneEvent {
  int iteration = 0;
  int component = 0;
  double weight = 0.0;
};

struct FitResult {
  GmmModel model;  // canonical, data space
  std::vector<double> loglik_trace;  // per-iteration E-step loglik, fitting frame
  int iterations_used = 0;
  std::vector<PruneEvent> pruning_events;
  bool converged = false;
};

/// Maps the per-axis [min,max] of the point coordinates onto [-1,1]. Throws
/// on axes with zero spread.
std::pair<WeightedPoints, AffineMap> normalize(const WeightedPoints& points);

/// Bakes the normalization map into the component parameters, producing an
/// identity-map model that evaluates identically in data space.
GmmModel denormalize_model(const GmmModel& model);

/// Initial mixture on normalized points: uniform weights, covariances
/// diag(temperature) expressed in the normalized frame, means drawn uniformly
/// over the point bounding box. A warm-start model is re-normalized into the
/// new frame instead. M is reduced (with a warning) when the data has fewer
/// distinct points.
GmmModel init_model(const WeightedPoints& normalized_points, const FitConfig& config,
                    const Vec& temperature, const AffineMap& map);

struct EStep {
  Mat responsibilities;  // M x N, columns sum to 1
  double loglik = 0.0;   // sum_n w_n log sum_j alpha_j N(x_n)
  std::vector<int> unrepairable;  // components whose covariance repair failed
};

/// Responsibilities and weighted log-likelihood, computed in the log domain
/// with per-point max subtraction. Numerically singular covariances are
/// repaired in place; unrepairable components are reported for pruning.
EStep e_step(GmmModel& model, const WeightedPoints& points);

/// Weighted log-likelihood only (no responsibility matrix).
double weighted_loglik(const GmmModel& model, const WeightedPoints& points);

/// Weighted M-step. Components whose responsibility mass falls below
/// total_weight * 1e-250 keep their previous parameters (weight excepted), as
/// do components whose updated covariance cannot be repaired; `degenerate`
/// (when given) receives those indices.
GmmModel m_step(const WeightedPoints& points, const Mat& responsibilities,
                const GmmModel& previous, std::vector<int>* degenerate = nullptr);

/// Removes at most one component: the smallest-weight one (ties to the lowest
/// index), only if its weight is strictly below the threshold and more than
/// one component remains. Remaining weights are rescaled to sum to 1.
std::optional<PruneEvent> prune_one(GmmModel& model, double threshold, int iteration = 0);

GmmModel prune(GmmModel model, double threshold);

/// Symmetrizes, then if Cholesky fails adds lambda*I with lambda from
/// 1e-8*trace/d, doubling up to 60 times. Throws CovarianceRepairError when
/// no loading succeeds. `doublings` (when given) receives -1 if no loading
/// was needed, otherwise the number of times the initial lambda was doubled.
Mat repair_covariance(const Mat& sigma, int* doublings = nullptr);

/// Full fitting loop: normalize, initialize (or warm-start), iterate E/M with
/// pruning checks every prune_check_interval iterations, stop on relative
/// log-likelihood change below tolerance or at the iteration cap. The
/// returned model is denormalized.
FitResult fit(const WeightedPoints& points, const FitConfig& config);

/// Mixture density evaluated at the bin centers of `grid`, in data space.
/// Raw values; wrap in PdfGrid::normalized for divergence comparisons.
Mat evaluate_pdf(const GmmModel& model, const GridSpec& grid);

/// Mixture mean and second moment (sum alpha_i (Sigma_i + mu_i mu_i^T)), in
/// data space.
std::pair<Vec, Mat> mixture_moments(const GmmModel& model);

/// Weighted mean and second moment of the data points.
std::pair<Vec, Mat> weighted_data_moments(const WeightedPoints& points);

}  // namespace vdfc
