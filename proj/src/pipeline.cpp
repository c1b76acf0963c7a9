#include "vdfc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vdfc/rng.hpp"

namespace fs = std::filesystem;

namespace vdfc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Bytes read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("input not found: " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("input not found: " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

void write_file_bytes(const fs::path& path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<Plane> resolve_planes(const std::string& spec, int dimension) {
  if (spec == "all") {
    if (dimension != 3)
      throw UsageError("--plane all requires 3-dimensional particles; use --plane uv");
    return {Plane::uv, Plane::vw, Plane::uw};
  }
  if (spec == "auto")
    return dimension == 3 ? std::vector<Plane>{Plane::uv, Plane::vw, Plane::uw}
                          : std::vector<Plane>{Plane::uv};
  return {plane_from_string(spec)};
}

std::vector<ParticleSet> split_subdomains(const ParticleSet& particles, int k,
                                          std::uint64_t seed) {
  if (k <= 1) return {particles};
  const Index n = particles.count();
  if (n < k) throw UsageError("fewer particles than subdomains");

  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Index i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.raw() % static_cast<std::uint64_t>(i + 1)]);

  std::vector<ParticleSet> out(k);
  for (int s = 0; s < k; ++s) {
    const Index lo = n * s / k;
    const Index hi = n * (s + 1) / k;
    ParticleSet part;
    part.species_label = particles.species_label;
    part.nominal_temperature = particles.nominal_temperature;
    part.velocities.resize(hi - lo, particles.dimension());
    if (particles.has_weights()) part.weights.resize(hi - lo);
    for (Index r = lo; r < hi; ++r) {
      part.velocities.row(r - lo) = particles.velocities.row(order[r]);
      if (particles.has_weights()) part.weights(r - lo) = particles.weights(order[r]);
    }
    out[s] = std::move(part);
  }
  return out;
}

MetricsReport assemble_metrics(const GmmModel& model, const Histogram2D& hist,
                               const WeightedPoints& points, Index raw_particle_count,
                               int raw_dimension) {
  const PdfGrid hist_pdf = to_pdf(hist);
  const PdfGrid model_pdf = PdfGrid::normalized(hist.grid(), evaluate_pdf(model, hist.grid()));

  MetricsReport r;
  r.jsd = jsd(hist_pdf, model_pdf);
  r.kl_pq = kl_divergence(hist_pdf, model_pdf);
  r.kl_qp = kl_divergence(model_pdf, hist_pdf);
  const double loglik = weighted_loglik(model, points);
  r.bic = bic(loglik, model, points.total_weight);
  r.bic_bin_count = bic(loglik, model, static_cast<double>(hist.n_bins) * hist.n_bins);
  std::tie(r.mean_moment_error, r.second_moment_error) = moment_errors(model, points);

  const std::uint64_t model_bytes = model_payload_bytes(model.size(), model.dimension);
  const std::uint64_t hist_bytes = static_cast<std::uint64_t>(hist.n_bins) * hist.n_bins * 8;
  const std::uint64_t raw_bytes =
      static_cast<std::uint64_t>(raw_particle_count) * raw_dimension * 8;
  r.compression_ratio_vs_histogram = compression_ratio(hist_bytes, model_bytes);
  r.compression_ratio_vs_raw = compression_ratio(raw_bytes, model_bytes);
  return r;
}

PlaneFit fit_one_plane(const ParticleSet& particles, Plane plane, const PipelineConfig& cfg,
                       int subdomain, std::int64_t cycle_tag) {
  const auto [a0, a1] = plane_axes(plane);
  const AxisRange rx = cfg.vrange.value_or(default_axis_range(particles, a0));
  const AxisRange ry = cfg.vrange.value_or(default_axis_range(particles, a1));

  PlaneFit pf;
  pf.plane = plane;
  pf.subdomain = subdomain;

  const auto t0 = Clock::now();
  pf.hist = bin_particles(particles, plane, cfg.bins, rx, ry);
  pf.points = to_weighted_points(pf.hist, cfg.drop_empty);

  FitConfig fc = cfg.fit;
  if (!fc.temperature) {
    Vec t(2);
    t << particles.nominal_temperature(a0), particles.nominal_temperature(a1);
    fc.temperature = t;
  }
  pf.fit = fit(pf.points, fc);
  pf.fit_seconds = seconds_since(t0);

  pf.meta.species_label = particles.species_label;
  pf.meta.plane = plane;
  pf.meta.cycle = cycle_tag;
  pf.meta.axis_ranges = {rx, ry};
  pf.metrics = assemble_metrics(pf.fit.model, pf.hist, pf.points, particles.count(),
                                particles.dimension());
  return pf;
}

nlohmann::json fit_report_json(const PlaneFit& pf) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& ev : pf.fit.pruning_events)
    events.push_back({{"iteration", ev.iteration},
                      {"component", ev.component},
                      {"weight", ev.weight}});
  return nlohmann::json{{"plane", to_string(pf.plane)},
                        {"subdomain", pf.subdomain},
                        {"iterations_used", pf.fit.iterations_used},
                        {"converged", pf.fit.converged},
                        {"m_hat", pf.fit.model.size()},
                        {"loglik_trace", pf.fit.loglik_trace},
                        {"pruning_events", events},
                        {"bic", pf.metrics.bic},
                        {"fit_seconds", pf.fit_seconds}};
}

std::string artifact_base(const PlaneFit& pf, int subdomains) {
  std::string base = to_string(pf.plane);
  if (subdomains > 1) base += "_sd" + std::to_string(pf.subdomain);
  return base;
}

void write_plane_artifacts(const fs::path& dir, const PlaneFit& pf, int subdomains,
                           bool write_json, double* io_seconds = nullptr) {
  const std::string base = artifact_base(pf, subdomains);
  const auto t0 = Clock::now();
  write_file_bytes(dir / ("hist_" + base + ".h2d"), encode_histogram(pf.hist));
  write_json_file(dir / ("hist_" + base + ".h2d.json"), histogram_sidecar(pf.hist));
  write_file_bytes(dir / ("model_" + base + ".gmmc"), encode_model(pf.fit.model, pf.meta));
  if (write_json)
    write_json_file(dir / ("model_" + base + ".gmm.json"),
                    model_to_json(pf.fit.model, pf.meta));
  if (io_seconds) *io_seconds = seconds_since(t0);
  write_json_file(dir / ("fit_" + base + ".json"), fit_report_json(pf));
  write_json_file(dir / ("metrics_" + base + ".json"), pf.metrics.to_json());
}

}  // namespace

void PipelineConfig::validate() const {
  fit.validate();
  if (bins < 2) throw UsageError("--bins must be >= 2");
  if (particles < 1) throw UsageError("--particles must be >= 1");
  if (subdomains < 1) throw UsageError("--subdomains must be >= 1");
  if (repeat < 1) throw UsageError("--repeat must be >= 1");
  if (cycles < 1) throw UsageError("--cycles must be >= 1");
  if (da_interval < 1) throw UsageError("--da-interval must be >= 1");
  if (refined_bins < bins) throw UsageError("--refined-bins must be >= --bins");
  if (vrange && !vrange->valid()) throw UsageError("--vrange must satisfy min < max");
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  s.dimension = j.at("dimension").get<int>();
  s.particle_count = j.value("particle_count", std::int64_t{0});
  s.seed = j.value("seed", std::uint64_t{0});
  s.species_label = j.value("species", std::string("synthetic"));
  for (const auto& jc : j.at("components")) {
    MixtureComponentSpec c;
    c.fraction = jc.at("fraction").get<double>();
    const auto mean = jc.at("mean").get<std::vector<double>>();
    c.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Index>(mean.size()));
    if (jc.contains("variance")) {
      const auto var = jc.at("variance").get<std::vector<double>>();
      c.covariance = Mat::Zero(var.size(), var.size());
      for (std::size_t a = 0; a < var.size(); ++a) c.covariance(a, a) = var[a];
    } else {
      const auto rows = jc.at("covariance").get<std::vector<std::vector<double>>>();
      c.covariance.resize(rows.size(), rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size())
          throw UsageError("scenario covariance must be square");
        for (std::size_t k = 0; k < rows.size(); ++k) c.covariance(i, k) = rows[i][k];
      }
    }
    s.components.push_back(std::move(c));
  }
  return s;
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : spec.components) {
    std::vector<std::vector<double>> cov(spec.dimension, std::vector<double>(spec.dimension));
    for (int i = 0; i < spec.dimension; ++i)
      for (int k = 0; k < spec.dimension; ++k) cov[i][k] = c.covariance(i, k);
    comps.push_back({{"fraction", c.fraction},
                     {"mean", std::vector<double>(c.mean.data(), c.mean.data() + spec.dimension)},
                     {"covariance", cov}});
  }
  return nlohmann::json{{"dimension", spec.dimension},
                        {"particle_count", spec.particle_count},
                        {"seed", spec.seed},
                        {"species", spec.species_label},
                        {"components", comps}};
}

void write_particles(const fs::path& path, const ParticleSet& particles) {
  particles.validate();
  Bytes payload;
  payload.reserve(static_cast<std::size_t>(particles.count()) *
                  (particles.dimension() + particles.has_weights()) * 8);
  for (Index n = 0; n < particles.count(); ++n)
    for (int a = 0; a < particles.dimension(); ++a)
      io::put_f64_le(payload, particles.velocities(n, a));
  if (particles.has_weights())
    for (Index n = 0; n < particles.count(); ++n) io::put_f64_le(payload, particles.weights(n));
  write_file_bytes(path, payload);

  const Vec& t = particles.nominal_temperature;
  write_json_file(fs::path(path.string() + ".json"),
                  nlohmann::json{{"format", "vpart"},
                                 {"version", 1},
                                 {"count", particles.count()},
                                 {"dimension", particles.dimension()},
                                 {"weighted", particles.has_weights()},
                                 {"species", particles.species_label},
                                 {"nominal_temperature",
                                  std::vector<double>(t.data(), t.data() + t.size())}});
}

ParticleSet read_particles(const fs::path& path) {
  const Bytes payload = read_file_bytes(path);
  const nlohmann::json j = read_json_file(fs::path(path.string() + ".json"));
  if (j.value("format", "") != "vpart")
    throw UsageError("not a vpart sidecar: " + path.string() + ".json");

  ParticleSet p;
  const Index n = j.at("count").get<Index>();
  const int d = j.at("dimension").get<int>();
  const bool weighted = j.at("weighted").get<bool>();
  const std::size_t expected = static_cast<std::size_t>(n) * (d + (weighted ? 1 : 0)) * 8;
  if (payload.size() != expected)
    throw CodecError(CodecErrc::size_mismatch, "vpart payload size mismatch vs sidecar");

  p.velocities.resize(n, d);
  const std::uint8_t* ptr = payload.data();
  for (Index r = 0; r < n; ++r)
    for (int a = 0; a < d; ++a, ptr += 8) p.velocities(r, a) = io::get_f64_le(ptr);
  if (weighted) {
    p.weights.resize(n);
    for (Index r = 0; r < n; ++r, ptr += 8) p.weights(r) = io::get_f64_le(ptr);
  }
  p.species_label = j.value("species", "");
  const auto temp = j.at("nominal_temperature").get<std::vector<double>>();
  p.nominal_temperature = Eigen::Map<const Vec>(temp.data(), static_cast<Index>(temp.size()));
  p.validate();
  return p;
}

ParticleSet load_input(const PipelineConfig& config) {
  const int sources = !config.scenario.empty() + !config.scenario_file.empty() +
                      !config.input_path.empty();
  if (sources == 0)
    throw UsageError("no input: give --scenario, --scenario-file or --input");
  if (sources > 1) throw UsageError("choose exactly one of --scenario, --scenario-file, --input");

  if (!config.input_path.empty()) return read_particles(config.input_path);

  ScenarioSpec spec;
  if (!config.scenario.empty()) {
    spec = preset(config.scenario, config.particles, config.seed);
  } else {
    spec = scenario_from_json(read_json_file(config.scenario_file));
    if (spec.particle_count == 0) spec.particle_count = config.particles;
    if (spec.seed == 0) spec.seed = config.seed;
  }
  return generate(spec);
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
  config.validate();
  const ParticleSet particles = load_input(config);
  const std::vector<Plane> planes = resolve_planes(config.planes, particles.dimension());
  const std::vector<ParticleSet> parts =
      split_subdomains(particles, config.subdomains, config.seed);

  std::vector<std::future<PlaneFit>> futures;
  for (int s = 0; s < static_cast<int>(parts.size()); ++s)
    for (Plane plane : planes)
      futures.push_back(std::async(std::launch::async, [&, s, plane] {
        return fit_one_plane(parts[s], plane, config, s, 0);
      }));

  PipelineOutcome out;
  out.out_dir = config.out_dir;
  for (auto& f : futures) out.fits.push_back(f.get());

  fs::create_directories(out.out_dir);
  for (const auto& pf : out.fits)
    write_plane_artifacts(out.out_dir, pf, config.subdomains, config.write_json);

  if (config.write_csv) {
    std::ostringstream csv;
    csv << "plane,subdomain," << MetricsReport::csv_header() << "\n";
    for (const auto& pf : out.fits)
      csv << to_string(pf.plane) << "," << pf.subdomain << "," << pf.metrics.csv_row() << "\n";
    write_text_file(out.out_dir / "metrics.csv", csv.str());
  }
  return out;
}

std::string benchmark_csv_header() {
  return "codec,bytes_in,bytes_out,ratio,compress_ms,io_ms,jsd_vs_original,jsd_vs_histogram,"
         "bic,m_hat,em_iterations";
}

std::string benchmark_csv_row(const BenchmarkRow& row) {
  std::ostringstream s;
  char num[64];
  s << row.codec << "," << row.bytes_in << "," << row.bytes_out << ",";
  const auto put = [&](double v) {
    std::snprintf(num, sizeof(num), "%.17g", v);
    s << num;
  };
  put(row.ratio);
  s << ",";
  put(row.compress_ms);
  s << ",";
  put(row.io_ms);
  s << ",";
  put(row.jsd_vs_original);
  s << ",";
  put(row.jsd_vs_histogram);
  s << ",";
  if (std::isfinite(row.bic)) {
    put(row.bic);
    s << "," << row.m_hat << "," << row.em_iterations;
  } else {
    s << ",,";
  }
  return s.str();
}

BenchmarkOutcome run_benchmark(const PipelineConfig& config, const BaselineRegistry& registry) {
  config.validate();
  const ParticleSet particles = load_input(config);
  const Plane plane = resolve_planes(config.planes, particles.dimension()).front();

  BenchmarkOutcome out;
  out.out_dir = config.out_dir;
  fs::create_directories(out.out_dir);

  // GMM path, timed over `repeat` identical runs (bin + fit, as deployed).
  std::vector<double> gmm_times;
  for (int r = 0; r < config.repeat; ++r) {
    const auto t0 = Clock::now();
    PlaneFit pf = fit_one_plane(particles, plane, config, 0, 0);
    gmm_times.push_back(seconds_since(t0));
    if (r == 0) out.gmm = std::move(pf);
  }

  const Bytes hist_payload = encode_histogram(out.gmm.hist);

  // "Original" reference: the particles binned directly at the refined
  // resolution over the same range.
  const Histogram2D fine_hist =
      bin_particles(particles, plane, config.refined_bins, out.gmm.meta.axis_ranges[0],
                    out.gmm.meta.axis_ranges[1]);
  const PdfGrid original = to_pdf(fine_hist);
  const PdfGrid hist_refined = refine_pdf(out.gmm.hist, config.refined_bins);

  double gmm_io = 0.0;
  write_plane_artifacts(out.out_dir, out.gmm, 1, config.write_json, &gmm_io);

  BenchmarkRow gmm_row;
  gmm_row.codec = "gmm";
  gmm_row.bytes_in = hist_payload.size();
  gmm_row.bytes_out = model_payload_bytes(out.gmm.fit.model.size(), out.gmm.fit.model.dimension);
  gmm_row.ratio = compression_ratio(gmm_row.bytes_in, gmm_row.bytes_out);
  gmm_row.compress_ms = 1e3 * median(gmm_times);
  gmm_row.io_ms = 1e3 * gmm_io;
  gmm_row.jsd_vs_histogram = out.gmm.metrics.jsd;
  gmm_row.jsd_vs_original =
      jsd(original, PdfGrid::normalized(original.spec, evaluate_pdf(out.gmm.fit.model, original.spec)));
  gmm_row.bic = out.gmm.metrics.bic;
  gmm_row.m_hat = out.gmm.fit.model.size();
  gmm_row.em_iterations = out.gmm.fit.iterations_used;
  out.rows.push_back(gmm_row);

  const PdfGrid hist_pdf = to_pdf(out.gmm.hist);
  const double lossless_jsd_vs_original = jsd(original, hist_refined);

  for (const std::string& name : registry.names()) {
    std::vector<double> times;
    BaselineResult res;
    for (int r = 0; r < config.repeat; ++r) {
      res = registry.run(name, hist_payload);
      times.push_back(res.seconds);
    }

    BenchmarkRow row;
    row.codec = name;
    row.bytes_in = hist_payload.size();
    row.bytes_out = res.data.size();
    row.ratio = compression_ratio(row.bytes_in, row.bytes_out);
    row.compress_ms = 1e3 * median(times);

    const auto t0 = Clock::now();
    write_file_bytes(out.out_dir / ("baseline_" + name + ".bin"), res.data);
    row.io_ms = 1e3 * seconds_since(t0);

    // Decompress and score what a reader would actually reconstruct.
    const Bytes back = registry.run_decompress(name, res.data).data;
    const Histogram2D decoded = decode_histogram(back, histogram_sidecar(out.gmm.hist));
    row.jsd_vs_histogram = jsd(hist_pdf, to_pdf(decoded));
    row.jsd_vs_original = registry.get(name).lossy
                              ? jsd(original, refine_pdf(decoded, config.refined_bins))
                              : lossless_jsd_vs_original;
    out.rows.push_back(row);
  }

  std::ostringstream csv;
  csv << benchmark_csv_header() << "\n";
  for (const auto& row : out.rows) csv << benchmark_csv_row(row) << "\n";
  write_text_file(out.out_dir / "bench.csv", csv.str());
  return out;
}

TimeseriesReport run_timeseries(const PipelineConfig& config) {
  config.validate();
  if (!config.input_path.empty() && config.drift != 0.0)
    throw UsageError("timeseries drift needs a scenario source, not --input");

  ScenarioSpec base;
  std::optional<ParticleSet> static_particles;
  if (!config.input_path.empty()) {
    static_particles = read_particles(config.input_path);
  } else if (!config.scenario.empty()) {
    base = preset(config.scenario, config.particles, config.seed);
  } else if (!config.scenario_file.empty()) {
    base = scenario_from_json(read_json_file(config.scenario_file));
    if (base.particle_count == 0) base.particle_count = config.particles;
    if (base.seed == 0) base.seed = config.seed;
  } else {
    throw UsageError("no input: give --scenario, --scenario-file or --input");
  }

  TimeseriesReport report;
  report.out_dir = config.out_dir;
  fs::create_directories(report.out_dir);

  std::shared_ptr<const GmmModel> previous;
  std::optional<ParticleSet> cached;

  for (int k = 0; k < config.cycles; ++k) {
    ParticleSet particles;
    if (static_particles) {
      particles = *static_particles;
    } else if (config.drift == 0.0) {
      if (!cached) cached = generate(base);
      particles = *cached;
    } else {
      ScenarioSpec spec = base;
      spec.seed = base.seed + static_cast<std::uint64_t>(k);
      for (auto& c : spec.components) c.mean(0) += config.drift * k;
      particles = generate(spec);
    }

    PipelineConfig cycle_cfg = config;
    cycle_cfg.fit.warm_start = config.warm_start ? previous : nullptr;
    const Plane plane = resolve_planes(config.planes, particles.dimension()).front();
    PlaneFit pf = fit_one_plane(particles, plane, cycle_cfg, 0,
                                static_cast<std::int64_t>(k) * config.da_interval);

    TimeseriesCycle row;
    row.cycle = k;
    row.sim_cycle = k * config.da_interval;
    row.iterations = pf.fit.iterations_used;
    row.converged = pf.fit.converged;
    row.m_hat = pf.fit.model.size();
    row.loglik = pf.fit.loglik_trace.empty() ? 0.0 : pf.fit.loglik_trace.back();
    row.fit_seconds = pf.fit_seconds;
    report.cycles.push_back(row);

    write_file_bytes(report.out_dir / ("model_" + to_string(plane) + "_c" +
                                       std::to_string(row.sim_cycle) + ".gmmc"),
                     encode_model(pf.fit.model, pf.meta));
    previous = std::make_shared<const GmmModel>(pf.fit.model);
  }

  std::ostringstream csv;
  csv << "cycle,sim_cycle,iterations,converged,m_hat,loglik,fit_seconds\n";
  nlohmann::json jcycles = nlohmann::json::array();
  for (const auto& c : report.cycles) {
    char num[64];
    std::snprintf(num, sizeof(num), "%.17g", c.loglik);
    csv << c.cycle << "," << c.sim_cycle << "," << c.iterations << ","
        << (c.converged ? 1 : 0) << "," << c.m_hat << "," << num << "," << c.fit_seconds
        << "\n";
    jcycles.push_back({{"cycle", c.cycle},
                       {"sim_cycle", c.sim_cycle},
                       {"iterations", c.iterations},
                       {"converged", c.converged},
                       {"m_hat", c.m_hat},
                       {"loglik", c.loglik},
                       {"fit_seconds", c.fit_seconds}});
  }
  write_text_file(report.out_dir / "timeseries.csv", csv.str());
  write_json_file(report.out_dir / "timeseries.json", nlohmann::json{{"cycles", jcycles}});
  return report;
}

}  // namespace vdfc
