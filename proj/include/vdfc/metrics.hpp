#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "vdfc/pdf_grid.hpp"
#include "vdfc/wgmm.hpp"

namespace vdfc {

/// Kullback-Leibler divergence sum p_n log(p_n / q_n) over bin probabilities,
/// in nats, with 0 log 0 = 0. Mass of P where Q vanishes makes the divergence
/// infinite; +inf is returned as the distinguished divergent value.
double kl_divergence(const PdfGrid& p, const PdfGrid& q);

/// Jensen-Shannon divergence via the mixture M = (P+Q)/2. Always finite,
/// in [0, ln 2]; the pre-clamp value is checked against that range.
double jsd(const PdfGrid& p, const PdfGrid& q);

/// Parameter count k = M (1 + d(d+3)/2) of an M-component, d-dimensional
/// Gaussian mixture.
int bic_parameter_count(int components, int dimension);

/// -2 loglik + k ln(n_observed).
double bic(double loglik, const GmmModel& model, double n_observed);

/// Relative L2 errors of the mixture mean and second moment against the
/// weighted data moments. The mean error is scaled by the RMS data magnitude
/// sqrt(trace of the second moment), which never vanishes for valid data.
std::pair<double, double> moment_errors(const GmmModel& model, const WeightedPoints& points);

double compression_ratio(std::uint64_t original_bytes, std::uint64_t compressed_bytes);

/// Aggregated quality numbers for one fitted model, serializable to JSON and
/// CSV. bic uses N = total particle weight; bic_bin_count uses the number of
/// observed grid points instead and is reported alongside.
struct MetricsReport {
  double jsd = 0.0;
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  double bic = 0.0;
  double bic_bin_count = 0.0;
  double mean_moment_error = 0.0;
  double second_moment_error = 0.0;
  double compression_ratio_vs_histogram = 0.0;
  double compression_ratio_vs_raw = 0.0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  static std::string csv_header();
  std::string csv_row() const;
};

}  // namespace vdfc
