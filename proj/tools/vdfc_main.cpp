#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "vdfc/pipeline.hpp"

namespace fs = std::filesystem;
using vdfc::PipelineConfig;

namespace {

vdfc::AxisRange parse_vrange(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw vdfc::UsageError("--vrange expects MIN:MAX, got '" + s + "'");
  try {
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw vdfc::UsageError("--vrange expects numeric MIN:MAX, got '" + s + "'");
  }
}

struct CliState {
  PipelineConfig cfg;
  std::string config_file;
  std::string vrange_text;
  std::string format = "json,csv";
  bool no_warm_start = false;
  bool keep_empty_bins = false;
  // reconstruct / metrics inputs
  std::string model_path;
  std::string hist_path;
};

void add_source_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--scenario", st.cfg.scenario, "Preset scenario name");
  cmd->add_option("--scenario-file", st.cfg.scenario_file, "Scenario spec JSON file");
  cmd->add_option("--input", st.cfg.input_path, "Raw particle file (.vpart)");
  cmd->add_option("--particles", st.cfg.particles, "Particle count for generated scenarios");
}

void add_common_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--seed", st.cfg.seed, "Seed for generation and fit initialization");
  cmd->add_option("--out", st.cfg.out_dir, "Output directory");
  cmd->add_option("--format", st.format, "Report formats: json, csv or json,csv");
  cmd->add_option("--config", st.config_file,
                  "JSON config file; values in it override command-line flags");
}

void add_histogram_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--bins", st.cfg.bins, "Histogram bins per axis");
  cmd->add_option("--vrange", st.vrange_text, "Fixed velocity range MIN:MAX for both axes");
  cmd->add_option("--plane", st.cfg.planes, "Velocity plane: uv, vw, uw or all");
}

void add_fit_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--components", st.cfg.fit.initial_components, "Initial mixture size M");
  cmd->add_option("--max-iters", st.cfg.fit.max_em_iterations, "EM iteration cap");
  cmd->add_option("--prune-threshold", st.cfg.fit.prune_threshold, "Mixing-weight prune threshold");
  cmd->add_option("--prune-interval", st.cfg.fit.prune_check_interval,
                  "Iterations between prune checks");
  cmd->add_option("--tol", st.cfg.fit.loglik_rel_tolerance,
                  "Relative log-likelihood convergence tolerance");
  cmd->add_option("--subdomains", st.cfg.subdomains,
                  "Split the particle set into k independently fitted parts");
  cmd->add_flag("--keep-empty-bins", st.keep_empty_bins,
                "Feed zero-weight bins to the fit as well");
}

void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j) {
  const auto set_str = [&](const char* key, std::string& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::string>();
  };
  set_str("scenario", cfg.scenario);
  set_str("scenario_file", cfg.scenario_file);
  set_str("input", cfg.input_path);
  set_str("planes", cfg.planes);
  set_str("out", cfg.out_dir);
  if (j.contains("particles")) cfg.particles = j.at("particles").get<std::int64_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("bins")) cfg.bins = j.at("bins").get<int>();
  if (j.contains("vrange"))
    cfg.vrange = vdfc::AxisRange{j.at("vrange").at(0).get<double>(),
                                 j.at("vrange").at(1).get<double>()};
  if (j.contains("components")) cfg.fit.initial_components = j.at("components").get<int>();
  if (j.contains("max_em_iterations"))
    cfg.fit.max_em_iterations = j.at("max_em_iterations").get<int>();
  if (j.contains("prune_threshold"))
    cfg.fit.prune_threshold = j.at("prune_threshold").get<double>();
  if (j.contains("prune_check_interval"))
    cfg.fit.prune_check_interval = j.at("prune_check_interval").get<int>();
  if (j.contains("loglik_rel_tolerance"))
    cfg.fit.loglik_rel_tolerance = j.at("loglik_rel_tolerance").get<double>();
  if (j.contains("drop_empty")) cfg.drop_empty = j.at("drop_empty").get<bool>();
  if (j.contains("subdomains")) cfg.subdomains = j.at("subdomains").get<int>();
  if (j.contains("repeat")) cfg.repeat = j.at("repeat").get<int>();
  if (j.contains("refined_bins")) cfg.refined_bins = j.at("refined_bins").get<int>();
  if (j.contains("cycles")) cfg.cycles = j.at("cycles").get<int>();
  if (j.contains("da_interval")) cfg.da_interval = j.at("da_interval").get<int>();
  if (j.contains("drift")) cfg.drift = j.at("drift").get<double>();
  if (j.contains("warm_start")) cfg.warm_start = j.at("warm_start").get<bool>();
  if (j.contains("format")) {
    cfg.write_json = cfg.write_csv = false;
    for (const auto& f : j.at("format")) {
      if (f == "json") cfg.write_json = true;
      if (f == "csv") cfg.write_csv = true;
    }
  }
}

nlohmann::json read_json_or_die(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vdfc::UsageError("input not found: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

vdfc::Bytes read_bytes_or_die(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vdfc::UsageError("input not found: " + path);
  return vdfc::Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void finalize_config(CliState& st) {
  if (!st.vrange_text.empty()) st.cfg.vrange = parse_vrange(st.vrange_text);
  st.cfg.write_json = st.format.find("json") != std::string::npos;
  st.cfg.write_csv = st.format.find("csv") != std::string::npos;
  if (!st.cfg.write_json && !st.cfg.write_csv)
    throw vdfc::UsageError("--format must name json, csv or both");
  st.cfg.drop_empty = !st.keep_empty_bins;
  if (st.no_warm_start) st.cfg.warm_start = false;
  st.cfg.fit.seed = st.cfg.seed;
  if (!st.config_file.empty()) apply_config_json(st.cfg, read_json_or_die(st.config_file));
}

int cmd_generate(CliState& st) {
  finalize_config(st);
  const vdfc::ParticleSet particles = vdfc::load_input(st.cfg);
  fs::create_directories(st.cfg.out_dir);
  const fs::path path = fs::path(st.cfg.out_dir) / "particles.vpart";
  vdfc::write_particles(path, particles);
  std::cout << "wrote " << path.string() << " (" << particles.count() << " particles, d="
            << particles.dimension() << ")\n";
  return 0;
}

int cmd_fit(CliState& st) {
  finalize_config(st);
  const auto outcome = vdfc::run_pipeline(st.cfg);
  for (const auto& pf : outcome.fits)
    std::cout << "plane " << vdfc::to_string(pf.plane) << " sd" << pf.subdomain << ": M_hat="
              << pf.fit.model.size() << " iterations=" << pf.fit.iterations_used
              << " jsd=" << pf.metrics.jsd << "\n";
  std::cout << "artifacts in " << outcome.out_dir.string() << "\n";
  return 0;
}

int cmd_reconstruct(CliState& st) {
  finalize_config(st);
  const vdfc::Bytes bytes = read_bytes_or_die(st.model_path);
  const vdfc::DecodedModel decoded = vdfc::decode_model(bytes);

  vdfc::GridSpec grid;
  grid.n_bins = st.cfg.bins;
  if (st.cfg.vrange) {
    grid.x = grid.y = *st.cfg.vrange;
  } else {
    grid.x = decoded.meta.axis_ranges.at(0);
    grid.y = decoded.meta.axis_ranges.at(1);
  }
  const vdfc::Mat values = vdfc::evaluate_pdf(decoded.model, grid);

  fs::create_directories(st.cfg.out_dir);
  const std::string plane =
      decoded.meta.plane ? vdfc::to_string(*decoded.meta.plane) : std::string("uv");
  vdfc::Bytes payload;
  payload.reserve(static_cast<std::size_t>(grid.n_bins) * grid.n_bins * 8);
  for (int i = 0; i < grid.n_bins; ++i)
    for (int j = 0; j < grid.n_bins; ++j) vdfc::io::put_f64_le(payload, values(i, j));
  const fs::path out = fs::path(st.cfg.out_dir) / ("recon_" + plane + ".h2d");
  std::ofstream f(out, std::ios::binary);
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));

  nlohmann::json sidecar{{"format", "pdf2d"},
                         {"version", 1},
                         {"n_bins", grid.n_bins},
                         {"plane", plane},
                         {"range_x", {grid.x.lo, grid.x.hi}},
                         {"range_y", {grid.y.lo, grid.y.hi}},
                         {"species", decoded.meta.species_label},
                         {"cycle", decoded.meta.cycle}};
  std::ofstream sf(out.string() + ".json");
  sf << sidecar.dump(2) << "\n";
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_metrics(CliState& st) {
  finalize_config(st);
  const vdfc::DecodedModel decoded = vdfc::decode_model(read_bytes_or_die(st.model_path));
  const vdfc::Histogram2D hist = vdfc::decode_histogram(
      read_bytes_or_die(st.hist_path), read_json_or_die(st.hist_path + ".json"));
  const vdfc::WeightedPoints points = vdfc::to_weighted_points(hist, st.cfg.drop_empty);

  const vdfc::PdfGrid hist_pdf = vdfc::to_pdf(hist);
  const vdfc::PdfGrid model_pdf =
      vdfc::PdfGrid::normalized(hist.grid(), vdfc::evaluate_pdf(decoded.model, hist.grid()));

  vdfc::MetricsReport r;
  r.jsd = vdfc::jsd(hist_pdf, model_pdf);
  r.kl_pq = vdfc::kl_divergence(hist_pdf, model_pdf);
  r.kl_qp = vdfc::kl_divergence(model_pdf, hist_pdf);
  const double loglik = vdfc::weighted_loglik(decoded.model, points);
  r.bic = vdfc::bic(loglik, decoded.model, points.total_weight);
  r.bic_bin_count =
      vdfc::bic(loglik, decoded.model, static_cast<double>(hist.n_bins) * hist.n_bins);
  std::tie(r.mean_moment_error, r.second_moment_error) =
      vdfc::moment_errors(decoded.model, points);
  const std::uint64_t model_bytes =
      vdfc::model_payload_bytes(decoded.model.size(), decoded.model.dimension);
  const std::uint64_t hist_bytes = static_cast<std::uint64_t>(hist.n_bins) * hist.n_bins * 8;
  // Standalone mode has no particle file; the raw size is estimated from the
  // histogram's total weight at the model's dimensionality.
  const double total_particles = hist.in_range_count() + hist.out_of_range_count;
  r.compression_ratio_vs_histogram = vdfc::compression_ratio(hist_bytes, model_bytes);
  r.compression_ratio_vs_raw = vdfc::compression_ratio(
      static_cast<std::uint64_t>(total_particles) * decoded.model.dimension * 8, model_bytes);

  fs::create_directories(st.cfg.out_dir);
  if (st.cfg.write_json) {
    std::ofstream f(fs::path(st.cfg.out_dir) / "metrics.json");
    f << r.to_json().dump(2) << "\n";
  }
  if (st.cfg.write_csv) {
    std::ofstream f(fs::path(st.cfg.out_dir) / "metrics.csv");
    f << vdfc::MetricsReport::csv_header() << "\n" << r.csv_row() << "\n";
  }
  std::cout << r.to_json().dump(2) << "\n";
  return 0;
}

int cmd_bench(CliState& st) {
  finalize_config(st);
  const auto outcome = vdfc::run_benchmark(st.cfg);
  std::cout << vdfc::benchmark_csv_header() << "\n";
  for (const auto& row : outcome.rows) std::cout << vdfc::benchmark_csv_row(row) << "\n";
  std::cout << "artifacts in " << outcome.out_dir.string() << "\n";
  return 0;
}

int cmd_timeseries(CliState& st) {
  finalize_config(st);
  const auto report = vdfc::run_timeseries(st.cfg);
  std::cout << "cycle sim_cycle iterations converged m_hat\n";
  for (const auto& c : report.cycles)
    std::cout << c.cycle << " " << c.sim_cycle << " " << c.iterations << " " << c.converged
              << " " << c.m_hat << "\n";
  std::cout << "artifacts in " << report.out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliState st;
  CLI::App app{"Velocity distribution compression: histogram + weighted-GMM pipeline"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Generate synthetic particles to a .vpart file");
  add_source_options(gen, st);
  add_common_options(gen, st);

  auto* fit = app.add_subcommand("fit", "Bin particles and fit weighted GMMs per plane");
  add_source_options(fit, st);
  add_common_options(fit, st);
  add_histogram_options(fit, st);
  add_fit_options(fit, st);

  auto* rec = app.add_subcommand("reconstruct", "Evaluate a stored model onto a pdf grid");
  rec->add_option("--model", st.model_path, "Model file (.gmmc)")->required();
  add_common_options(rec, st);
  rec->add_option("--bins", st.cfg.bins, "Grid bins per axis");
  rec->add_option("--vrange", st.vrange_text, "Grid range MIN:MAX (default: model header)");

  auto* met = app.add_subcommand("metrics", "Score a stored model against a histogram");
  met->add_option("--model", st.model_path, "Model file (.gmmc)")->required();
  met->add_option("--hist", st.hist_path, "Histogram file (.h2d)")->required();
  add_common_options(met, st);

  auto* bench = app.add_subcommand("bench", "Compare the GMM path against baseline codecs");
  add_source_options(bench, st);
  add_common_options(bench, st);
  add_histogram_options(bench, st);
  add_fit_options(bench, st);
  bench->add_option("--repeat", st.cfg.repeat, "Timing repeats (median reported)");
  bench->add_option("--refined-bins", st.cfg.refined_bins,
                    "Resolution of the refined 'original' reference");

  auto* ts = app.add_subcommand("timeseries", "Warm-start demo over drifting data");
  add_source_options(ts, st);
  add_common_options(ts, st);
  add_histogram_options(ts, st);
  add_fit_options(ts, st);
  ts->add_option("--cycles", st.cfg.cycles, "Number of analysis cycles");
  ts->add_option("--da-interval", st.cfg.da_interval, "Simulation cycles between fits");
  ts->add_option("--drift", st.cfg.drift, "Mean drift along u per cycle");
  ts->add_flag("--no-warm-start", st.no_warm_start, "Cold-start every cycle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(st);
    if (fit->parsed()) return cmd_fit(st);
    if (rec->parsed()) return cmd_reconstruct(st);
    if (met->parsed()) return cmd_metrics(st);
    if (bench->parsed()) return cmd_bench(st);
    if (ts->parsed()) return cmd_timeseries(st);
    return 2;
  } catch (const vdfc::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n"
              << nlohmann::json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n"
              << nlohmann::json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n"
              << nlohmann::json{{"error", e.what()}, {"kind", "runtime"}}.dump() << "\n";
    return 1;
  }
}
