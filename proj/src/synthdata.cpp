#include "vdfc/synthdata.hpp"

#include <Eigen/Cholesky>

#include <sstream>

#include "vdfc/gaussian.hpp"
#include "vdfc/rng.hpp"

namespace vdfc {

void ParticleSet::validate() const {
  const int d = dimension();
  if (d != 2 && d != 3) throw std::invalid_argument("particle dimension must be 2 or 3");
  if (has_weights()) {
    if (weights.size() != count())
      throw std::invalid_argument("weights size does not match particle count");
    if (!(weights.array() > 0.0).all())
      throw std::invalid_argument("particle weights must all be > 0");
  }
  if (nominal_temperature.size() != d)
    throw std::invalid_argument("nominal_temperature must have one entry per axis");
  if (!(nominal_temperature.array() > 0.0).all())
    throw std::invalid_argument("nominal_temperature must be > 0 on every axis");
}

void ScenarioSpec::validate() const {
  if (dimension != 2 && dimension != 3)
    throw std::invalid_argument("scenario dimension must be 2 or 3");
  if (particle_count < 1) throw std::invalid_argument("particle_count must be >= 1");
  if (components.empty()) throw std::invalid_argument("scenario needs at least one component");

  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    std::ostringstream who;
    who << "component " << k;
    if (!(c.fraction >= 0.0)) throw std::invalid_argument(who.str() + ": fraction must be >= 0");
    total += c.fraction;
    if (c.mean.size() != dimension)
      throw std::invalid_argument(who.str() + ": mean dimension mismatch");
    if (c.covariance.rows() != dimension || c.covariance.cols() != dimension)
      throw std::invalid_argument(who.str() + ": covariance shape mismatch");
    if (!c.covariance.isApprox(c.covariance.transpose(), 1e-12))
      throw std::invalid_argument(who.str() + ": covariance is not symmetric");
    Eigen::LLT<Mat> llt(c.covariance);
    if (!llt_ok(llt))
      throw std::invalid_argument(who.str() + ": covariance is not symmetric positive definite");
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("fractions must sum to 1 (got " + std::to_string(total) + ")");
}

ParticleSet generate(const ScenarioSpec& spec) {
  spec.validate();
  const int d = spec.dimension;
  const std::size_t m = spec.components.size();

  std::vector<Mat> chol(m);
  std::vector<double> cdf(m);
  double acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    chol[k] = Eigen::LLT<Mat>(spec.components[k].covariance).matrixL();
    acc += spec.components[k].fraction;
    cdf[k] = acc;
  }
  cdf[m - 1] = 1.0;  // absorb rounding so the last component owns the tail

  ParticleSet out;
  out.velocities.resize(spec.particle_count, d);
  out.species_label = spec.species_label;
  out.nominal_temperature = Vec::Zero(d);
  for (const auto& c : spec.components)
    out.nominal_temperature += c.fraction * c.covariance.diagonal();

  Rng rng(spec.seed);
  Vec z(d);
  for (Index n = 0; n < spec.particle_count; ++n) {
    const double u = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < m && u >= cdf[k]) ++k;
    for (int a = 0; a < d; ++a) z(a) = rng.normal();
    out.velocities.row(n) = (spec.components[k].mean + chol[k] * z).transpose();
  }
  return out;
}

namespace {

MixtureComponentSpec comp3(double fraction, double mu_u, double mu_v, double mu_w,
                           double var_u, double var_v, double var_w) {
  MixtureComponentSpec c;
  c.fraction = fraction;
  c.mean = Vec(3);
  c.mean << mu_u, mu_v, mu_w;
  c.covariance = Mat::Zero(3, 3);
  c.covariance.diagonal() << var_u, var_v, var_w;
  return c;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "maxwellian", "drifting-beam", "counter-streaming", "bump-on-tail", "hot-core-cold-halo"};
  return names;
}

ScenarioSpec preset(const std::string& name, std::int64_t particle_count, std::uint64_t seed) {
  ScenarioSpec s;
  s.particle_count = particle_count;
  s.seed = seed;
  s.dimension = 3;
  s.species_label = name;

  // Parameter values are frozen in docs/presets.md; change them there first.
  if (name == "maxwellian") {
    s.components = {comp3(1.0, 0, 0, 0, 1, 1, 1)};
  } else if (name == "drifting-beam") {
    s.components = {comp3(0.8, 0, 0, 0, 1, 1, 1), comp3(0.2, 3, 0, 0, 0.25, 0.25, 0.25)};
  } else if (name == "counter-streaming") {
    s.components = {comp3(0.5, -3, 0, 0, 1, 1, 1), comp3(0.5, 3, 0, 0, 1, 1, 1)};
  } else if (name == "bump-on-tail") {
    s.components = {comp3(0.9, 0, 0, 0, 1, 1, 1), comp3(0.1, 4, 0, 0, 0.25, 0.25, 0.25)};
  } else if (name == "hot-core-cold-halo") {
    s.components = {comp3(0.5, 0, 0, 0, 2.25, 2.25, 2.25), comp3(0.5, 0, 0, 0, 0.25, 0.25, 0.25)};
  } else {
    std::ostringstream msg;
    msg << "unknown preset '" << name << "'; valid presets:";
    for (const auto& p : preset_names()) msg << " " << p;
    throw std::invalid_argument(msg.str());
  }
  return s;
}

}  // namespace vdfc
