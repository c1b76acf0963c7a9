#include "doctest.h"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vdfc/pipeline.hpp"

using namespace vdfc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "vdfc_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PipelineConfig small_config(const std::string& out) {
  PipelineConfig cfg;
  cfg.scenario = "maxwellian";
  cfg.particles = 10000;
  cfg.seed = 3;
  cfg.bins = 100;
  cfg.fit.initial_components = 8;
  cfg.fit.seed = 3;
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST_CASE("run_pipeline: maxwellian preset produces models and metrics") {
  const fs::path dir = fresh_dir("pipe_maxwellian");
  PipelineConfig cfg = small_config(dir.string());
  cfg.planes = "uv";

  const PipelineOutcome out = run_pipeline(cfg);
  REQUIRE(out.fits.size() == 1);
  CHECK(out.fits[0].metrics.jsd < 0.05);

  CHECK(fs::exists(dir / "model_uv.gmmc"));
  CHECK(fs::exists(dir / "model_uv.gmm.json"));
  CHECK(fs::exists(dir / "hist_uv.h2d"));
  CHECK(fs::exists(dir / "hist_uv.h2d.json"));
  CHECK(fs::exists(dir / "fit_uv.json"));
  CHECK(fs::exists(dir / "metrics_uv.json"));
  CHECK(fs::exists(dir / "metrics.csv"));

  // The stored model decodes back to the fitted one.
  std::ifstream f(dir / "model_uv.gmmc", std::ios::binary);
  const Bytes bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  const DecodedModel decoded = decode_model(bytes);
  CHECK(decoded.model.size() == out.fits[0].fit.model.size());
  CHECK(decoded.meta.species_label == "maxwellian");
}

TEST_CASE("run_pipeline: --planes all fans out to three models") {
  const fs::path dir = fresh_dir("pipe_allplanes");
  PipelineConfig cfg = small_config(dir.string());
  cfg.planes = "all";
  cfg.particles = 5000;
  cfg.fit.initial_components = 4;

  const PipelineOutcome out = run_pipeline(cfg);
  REQUIRE(out.fits.size() == 3);
  CHECK(fs::exists(dir / "model_uv.gmmc"));
  CHECK(fs::exists(dir / "model_vw.gmmc"));
  CHECK(fs::exists(dir / "model_uw.gmmc"));
}

TEST_CASE("run_pipeline: missing input file is a usage error") {
  PipelineConfig cfg;
  cfg.input_path = "/nonexistent/particles.vpart";
  cfg.out_dir = fresh_dir("pipe_missing").string();
  CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("input not found"), UsageError);
}

TEST_CASE("run_pipeline: subdomains split into independent fits") {
  const fs::path dir = fresh_dir("pipe_subdomains");
  PipelineConfig cfg = small_config(dir.string());
  cfg.planes = "uv";
  cfg.subdomains = 3;
  cfg.particles = 9000;
  cfg.fit.initial_components = 4;

  const PipelineOutcome out = run_pipeline(cfg);
  REQUIRE(out.fits.size() == 3);
  CHECK(fs::exists(dir / "model_uv_sd0.gmmc"));
  CHECK(fs::exists(dir / "model_uv_sd2.gmmc"));
}

TEST_CASE("particle file round trip") {
  const fs::path dir = fresh_dir("vpart");
  const ParticleSet p = generate(preset("drifting-beam", 2000, 8));
  write_particles(dir / "particles.vpart", p);

  const ParticleSet back = read_particles(dir / "particles.vpart");
  CHECK(back.velocities == p.velocities);
  CHECK(back.species_label == p.species_label);
  CHECK(back.nominal_temperature.isApprox(p.nominal_temperature, 1e-15));

  PipelineConfig cfg;
  cfg.input_path = (dir / "particles.vpart").string();
  cfg.out_dir = (dir / "out").string();
  cfg.bins = 64;
  cfg.fit.initial_components = 4;
  cfg.planes = "uv";
  const PipelineOutcome out = run_pipeline(cfg);
  CHECK(out.fits.size() == 1);
}

TEST_CASE("scenario JSON round trip and diagonal shorthand") {
  const ScenarioSpec s = preset("bump-on-tail", 1234, 5);
  const ScenarioSpec back = scenario_from_json(scenario_to_json(s));
  CHECK(back.dimension == 3);
  CHECK(back.particle_count == 1234);
  CHECK(back.components.size() == 2);
  CHECK(back.components[1].mean(0) == 4.0);

  const auto j = nlohmann::json::parse(R"({
    "dimension": 2, "particle_count": 50, "seed": 9,
    "components": [{"fraction": 1.0, "mean": [0, 0], "variance": [2.0, 0.5]}]
  })");
  const ScenarioSpec diag = scenario_from_json(j);
  CHECK(diag.components[0].covariance(0, 0) == 2.0);
  CHECK(diag.components[0].covariance(1, 1) == 0.5);
  CHECK(diag.components[0].covariance(0, 1) == 0.0);
  CHECK_NOTHROW(generate(diag));
}

TEST_CASE("run_benchmark: identity ratio 1, lossless rows have JSD 0") {
  const fs::path dir = fresh_dir("bench");
  PipelineConfig cfg = small_config(dir.string());
  cfg.planes = "uv";
  cfg.particles = 20000;
  cfg.repeat = 3;
  cfg.refined_bins = 200;

  const BenchmarkOutcome out = run_benchmark(cfg);
  REQUIRE(out.rows.size() == 3);  // gmm + raw + deflate

  const auto find = [&](const std::string& name) {
    for (const auto& r : out.rows)
      if (r.codec == name) return r;
    FAIL("row missing: " << name);
    return out.rows[0];
  };

  const BenchmarkRow raw = find("raw");
  CHECK(raw.ratio == 1.0);
  CHECK(raw.jsd_vs_histogram == 0.0);

  const BenchmarkRow deflate = find("deflate");
  CHECK(deflate.ratio > 1.0);
  CHECK(deflate.jsd_vs_histogram == 0.0);

  const BenchmarkRow gmm = find("gmm");
  CHECK(gmm.bytes_in == 80000);  // 100x100 doubles
  CHECK(gmm.bytes_out == model_payload_bytes(gmm.m_hat, 2));
  CHECK(gmm.ratio > 100.0);
  CHECK(std::isfinite(gmm.bic));

  // Bench row JSD matches the standalone metrics artifact bit for bit.
  std::ifstream mf(dir / "metrics_uv.json");
  nlohmann::json mj;
  mf >> mj;
  CHECK(mj.at("jsd").get<double>() == gmm.jsd_vs_histogram);

  CHECK(fs::exists(dir / "bench.csv"));
  CHECK(fs::exists(dir / "baseline_deflate.bin"));
}

TEST_CASE("run_timeseries: static data plus warm start cuts iterations") {
  const fs::path dir = fresh_dir("timeseries");
  PipelineConfig cfg;
  cfg.scenario = "counter-streaming";
  cfg.particles = 20000;
  cfg.seed = 7;
  cfg.bins = 100;
  cfg.planes = "uv";
  cfg.vrange = AxisRange{-6, 6};  // keep the +/-3 beams fully in range
  cfg.fit.initial_components = 2;
  cfg.fit.seed = 7;
  cfg.out_dir = dir.string();
  cfg.cycles = 5;
  cfg.da_interval = 50;
  cfg.drift = 0.0;

  const TimeseriesReport warm = run_timeseries(cfg);
  REQUIRE(warm.cycles.size() == 5);
  CHECK(warm.cycles[0].converged);
  for (std::size_t k = 1; k < 5; ++k) {
    CHECK(warm.cycles[k].iterations <= warm.cycles[0].iterations);
    CHECK(warm.cycles[k].converged);
  }
  CHECK(fs::exists(dir / "timeseries.csv"));
  CHECK(fs::exists(dir / "model_uv_c200.gmmc"));

  // Cold-started cycles repeat the full fit each time.
  PipelineConfig cold_cfg = cfg;
  cold_cfg.warm_start = false;
  cold_cfg.out_dir = fresh_dir("timeseries_cold").string();
  const TimeseriesReport cold = run_timeseries(cold_cfg);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(cold.cycles[k].iterations >= warm.cycles[k].iterations);
}

TEST_CASE("run_timeseries: drifting beam converges every cycle") {
  const fs::path dir = fresh_dir("timeseries_drift");
  PipelineConfig cfg;
  cfg.scenario_file = (dir / "scenario.json").string();
  {
    const auto j = nlohmann::json::parse(R"({
      "dimension": 2, "particle_count": 10000, "seed": 11, "species": "beam",
      "components": [
        {"fraction": 0.7, "mean": [0, 0], "variance": [1, 1]},
        {"fraction": 0.3, "mean": [3, 0], "variance": [0.25, 0.25]}
      ]
    })");
    std::ofstream f(dir / "scenario.json");
    f << j.dump(2);
  }
  cfg.planes = "uv";
  cfg.bins = 100;
  cfg.fit.initial_components = 2;
  cfg.fit.seed = 4;
  cfg.out_dir = (dir / "out").string();
  cfg.cycles = 5;
  cfg.drift = 0.05;

  const TimeseriesReport rep = run_timeseries(cfg);
  for (const auto& c : rep.cycles) CHECK(c.converged);
}

TEST_CASE("pipeline determinism: identical configs give identical artifacts") {
  PipelineConfig cfg = small_config(fresh_dir("det_a").string());
  cfg.planes = "uv";
  cfg.particles = 5000;
  cfg.fit.initial_components = 4;
  run_pipeline(cfg);

  PipelineConfig cfg2 = cfg;
  cfg2.out_dir = fresh_dir("det_b").string();
  run_pipeline(cfg2);

  for (const std::string name : {"model_uv.gmmc", "hist_uv.h2d", "metrics_uv.json"}) {
    std::ifstream a(fs::path(cfg.out_dir) / name, std::ios::binary);
    std::ifstream b(fs::path(cfg2.out_dir) / name, std::ios::binary);
    const std::string sa{std::istreambuf_iterator<char>(a), std::istreambuf_iterator<char>()};
    const std::string sb{std::istreambuf_iterator<char>(b), std::istreambuf_iterator<char>()};
    CHECK(sa == sb);
    CHECK(!sa.empty());
  }
}
