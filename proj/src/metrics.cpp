#include "vdfc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

namespace vdfc {

double kl_divergence(const PdfGrid& p, const PdfGrid& q) {
  if (!p.aligned_with(q))
    throw std::invalid_argument("kl_divergence: grids are not aligned");
  const double area = p.bin_area();
  double sum = 0.0;
  for (Index i = 0; i < p.values.rows(); ++i) {
    for (Index j = 0; j < p.values.cols(); ++j) {
      const double pn = p.values(i, j) * area;
      if (!(pn > 0.0)) continue;
      const double qn = q.values(i, j) * area;
      if (!(qn > 0.0)) return std::numeric_limits<double>::infinity();
      sum += pn * std::log(pn / qn);
    }
  }
  return sum;
}

double jsd(const PdfGrid& p, const PdfGrid& q) {
  if (!p.aligned_with(q)) throw std::invalid_argument("jsd: grids are not aligned");
  const double area = p.bin_area();
  double sum = 0.0;
  for (Index i = 0; i < p.values.rows(); ++i) {
    for (Index j = 0; j < p.values.cols(); ++j) {
      const double pn = p.values(i, j) * area;
      const double qn = q.values(i, j) * area;
      const double mn = 0.5 * (pn + qn);
      if (pn > 0.0) sum += 0.5 * pn * std::log(pn / mn);
      if (qn > 0.0) sum += 0.5 * qn * std::log(qn / mn);
    }
  }
  constexpr double ln2 = 0.6931471805599453;
  if (sum < -1e-9 || sum > ln2 + 1e-9)
    throw std::logic_error("jsd outside [0, ln 2] beyond numerical slack");
  return std::clamp(sum, 0.0, ln2);
}

int bic_parameter_count(int components, int dimension) {
  return components * (1 + dimension * (dimension + 3) / 2);
}

double bic(double loglik, const GmmModel& model, double n_observed) {
  if (!(n_observed > 0.0)) throw std::invalid_argument("bic: n_observed must be > 0");
  const int k = bic_parameter_count(model.size(), model.dimension);
  return -2.0 * loglik + k * std::log(n_observed);
}

std::pair<double, double> moment_errors(const GmmModel& model, const WeightedPoints& points) {
  const auto [mix_mean, mix_m2] = mixture_moments(model);
  const auto [data_mean, data_m2] = weighted_data_moments(points);
  const double mean_scale = std::sqrt(data_m2.trace());
  const double mean_err = (mix_mean - data_mean).norm() / mean_scale;
  const double m2_err = (mix_m2 - data_m2).norm() / data_m2.norm();
  return {mean_err, m2_err};
}

double compression_ratio(std::uint64_t original_bytes, std::uint64_t compressed_bytes) {
  if (original_bytes == 0) throw std::invalid_argument("compression_ratio: zero original size");
  if (compressed_bytes == 0)
    throw std::invalid_argument("compression_ratio: zero compressed size");
  return static_cast<double>(original_bytes) / static_cast<double>(compressed_bytes);
}

nlohmann::json MetricsReport::to_json() const {
  return nlohmann::json{{"jsd", jsd},
                        {"kl_pq", kl_pq},
                        {"kl_qp", kl_qp},
                        {"bic", bic},
                        {"bic_bin_count", bic_bin_count},
                        {"mean_moment_error", mean_moment_error},
                        {"second_moment_error", second_moment_error},
                        {"compression_ratio_vs_histogram", compression_ratio_vs_histogram},
                        {"compression_ratio_vs_raw", compression_ratio_vs_raw}};
}

namespace {

// JSON has no infinities; divergent KL values serialize as null.
double json_number(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

}  // namespace

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.jsd = j.at("jsd").get<double>();
  r.kl_pq = json_number(j.at("kl_pq"));
  r.kl_qp = json_number(j.at("kl_qp"));
  r.bic = j.at("bic").get<double>();
  r.bic_bin_count = j.at("bic_bin_count").get<double>();
  r.mean_moment_error = j.at("mean_moment_error").get<double>();
  r.second_moment_error = j.at("second_moment_error").get<double>();
  r.compression_ratio_vs_histogram = j.at("compression_ratio_vs_histogram").get<double>();
  r.compression_ratio_vs_raw = j.at("compression_ratio_vs_raw").get<double>();
  return r;
}

std::string MetricsReport::csv_header() {
  return "jsd,kl_pq,kl_qp,bic,bic_bin_count,mean_moment_error,second_moment_error,"
         "compression_ratio_vs_histogram,compression_ratio_vs_raw";
}

std::string MetricsReport::csv_row() const {
  char buf[400];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                jsd, kl_pq, kl_qp, bic, bic_bin_count, mean_moment_error, second_moment_error,
                compression_ratio_vs_histogram, compression_ratio_vs_raw);
  return buf;
}

}  // namespace vdfc
