#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vdfc/codec.hpp"
#include "vdfc/metrics.hpp"
#include "vdfc/synthdata.hpp"
#include "vdfc/wgmm.hpp"

namespace vdfc {

/// Problems a caller can fix by changing arguments or paths (CLI exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  // Data source: exactly one of scenario / scenario_file / input_path.
  std::string scenario;
  std::string scenario_file;
  std::string input_path;
  std::int64_t particles = 10000;
  std::uint64_t seed = 1;

  // Histogram stage.
  int bins = 200;
  std::optional<AxisRange> vrange;  // default: +/-5 thermal speeds per axis
  std::string planes = "auto";      // uv|vw|uw|all|auto (all for d=3, uv for d=2)

  // Fit stage.
  FitConfig fit;
  bool drop_empty = true;
  int subdomains = 1;

  // Outputs.
  std::string out_dir = "out";
  bool write_json = true;
  bool write_csv = true;
  int repeat = 5;        // timing repeats in bench mode
  int refined_bins = 500;

  // Time-series demo.
  int cycles = 5;
  int da_interval = 50;
  double drift = 0.0;
  bool warm_start = true;

  void validate() const;
};

/// Scenario JSON document (schema in docs/scenario-schema.md).
ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

/// Raw particle file (.vpart + .vpart.json sidecar; layout in FORMATS.md).
void write_particles(const std::filesystem::path& path, const ParticleSet& particles);
ParticleSet read_particles(const std::filesystem::path& path);

/// Resolves the configured data source into particles.
ParticleSet load_input(const PipelineConfig& config);

struct PlaneFit {
  Plane plane;
  int subdomain = 0;
  Histogram2D hist;
  WeightedPoints points;
  FitResult fit;
  ModelMeta meta;
  MetricsReport metrics;
  double fit_seconds = 0.0;
};

struct PipelineOutcome {
  std::vector<PlaneFit> fits;
  std::filesystem::path out_dir;
};

/// generate -> bin -> fit -> encode -> score, with plane/subdomain fits run
/// concurrently; writes histograms, models, fit reports, metrics and a CSV
/// summary under out_dir.
PipelineOutcome run_pipeline(const PipelineConfig& config);

struct BenchmarkRow {
  std::string codec;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  double ratio = 0.0;
  double compress_ms = 0.0;  // median over `repeat` runs
  double io_ms = 0.0;        // single artifact write
  double jsd_vs_original = 0.0;
  double jsd_vs_histogram = 0.0;
  // GMM row only; NaN / 0 for baselines.
  double bic = std::numeric_limits<double>::quiet_NaN();
  int m_hat = 0;
  int em_iterations = 0;
};

struct BenchmarkOutcome {
  std::vector<BenchmarkRow> rows;
  PlaneFit gmm;
  std::filesystem::path out_dir;
};

/// Runs the GMM path and every registered baseline codec on identical inputs
/// (the first configured plane's histogram payload), timing each and writing
/// bench.csv plus the usual artifacts.
BenchmarkOutcome run_benchmark(const PipelineConfig& config,
                               const BaselineRegistry& registry = BaselineRegistry::with_builtins());

struct TimeseriesCycle {
  int cycle = 0;
  int sim_cycle = 0;
  int iterations = 0;
  bool converged = false;
  int m_hat = 0;
  double loglik = 0.0;
  double fit_seconds = 0.0;
};

struct TimeseriesReport {
  std::vector<TimeseriesCycle> cycles;
  std::filesystem::path out_dir;
};

/// Fits a sequence of slowly drifting datasets (mean advancing `drift` per
/// cycle along u; drift 0 reuses the same dataset), warm-starting each fit
/// from the previous model unless warm_start is off.
TimeseriesReport run_timeseries(const PipelineConfig& config);

std::string benchmark_csv_header();
std::string benchmark_csv_row(const BenchmarkRow& row);

}  // namespace vdfc
