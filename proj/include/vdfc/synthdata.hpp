#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdfc/types.hpp"

namespace vdfc {

/// Raw per-particle velocity samples, the uncompressed ground-truth source.
/// An empty `weights` vector means unit weight for every particle.
struct ParticleSet {
  Mat velocities;  // N x d, normalized thermal-speed units
  Vec weights;     // empty or N, strictly positive
  std::string species_label;
  Vec nominal_temperature;  // per-axis variance, used to seed GMM covariances

  Index count() const { return velocities.rows(); }
  int dimension() const { return static_cast<int>(velocities.cols()); }
  bool has_weights() const { return weights.size() > 0; }
  double weight_of(Index n) const { return has_weights() ? weights(n) : 1.0; }
  double total_weight() const {
    return has_weights() ? weights.sum() : static_cast<double>(count());
  }

  void validate() const;
};

struct MixtureComponentSpec {
  double fraction = 0.0;
  Vec mean;
  Mat covariance;
};

/// Parameters for one synthetic velocity population: a Gaussian mixture plus
/// sample count and seed. Stands in for a PIC simulation as the data source.
struct ScenarioSpec {
  std::vector<MixtureComponentSpec> components;
  std::int64_t particle_count = 0;
  std::uint64_t seed = 0;
  int dimension = 0;
  std::string species_label = "synthetic";

  void validate() const;
};

/// Draws `particle_count` samples from the scenario's mixture. Deterministic
/// for a fixed seed: per particle, one uniform selects the component by CDF
/// inversion, then d Box-Muller normals are transformed by the component's
/// Cholesky factor. nominal_temperature is set to the fraction-weighted
/// average of the component variances.
ParticleSet generate(const ScenarioSpec& spec);

/// Named scenarios with frozen parameters (see docs/presets.md). All presets
/// are three-dimensional.
ScenarioSpec preset(const std::string& name, std::int64_t particle_count, std::uint64_t seed);

const std::vector<std::string>& preset_names();

}  // namespace vdfc
