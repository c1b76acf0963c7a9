#pragma once

#include <cstdint>
#include <vector>

// Independent standard (unweighted, d=2) EM used as the oracle for the
// weighted/unweighted equivalence checks. Plain loops and direct-space
// density evaluation on purpose: it shares the protocol with the production
// fit (normalization, seeded init, prune cadence, convergence rule) but none
// of its arithmetic path (no Eigen, no log-domain trick, no compensated
// sums).
namespace refem {

struct Component {
  double alpha = 0.0;
  double mean[2] = {0.0, 0.0};
  double cov[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
};

struct Result {
  std::vector<Component> components;  // data space
  std::vector<double> loglik_trace;   // fitting frame
  int iterations = 0;
  bool converged = false;
};

struct Config {
  int initial_components = 4;
  int max_iterations = 100;
  double prune_threshold = 0.005;
  int prune_interval = 10;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  double temperature[2] = {1.0, 1.0};  // per-axis variance, data units
};

/// xs, ys: raw (data-space) coordinates, one unit-weight observation each.
Result fit(const std::vector<double>& xs, const std::vector<double>& ys, const Config& cfg);

}  // namespace refem
