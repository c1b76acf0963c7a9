#include "vdfc/wgmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "vdfc/gaussian.hpp"
#include "vdfc/rng.hpp"

namespace vdfc {

namespace {

constexpr double kMassFloorRel = 1e-250;

Vec weighted_axis_variance(const WeightedPoints& pts) {
  const auto [mean, m2] = weighted_data_moments(pts);
  return (m2.diagonal().array() - mean.array().square()).max(0.0).matrix();
}

}  // namespace

void GaussianComponent::set_covariance(Mat m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("covariance must be square");
  symmetrize_from_upper(m);
  covariance = std::move(m);
}

double GmmModel::pdf(const Vec& x) const {
  const Vec z = normalization.forward(x);
  double p = 0.0;
  for (const auto& c : components) {
    Eigen::LLT<Mat> llt(c.covariance);
    if (!llt_ok(llt)) throw std::runtime_error("model component covariance is not SPD");
    p += c.weight * std::exp(log_gaussian(z, c.mean, llt));
  }
  return p / normalization.volume();
}

void GmmModel::validate() const {
  if (dimension < 1) throw std::invalid_argument("model dimension must be positive");
  if (components.empty()) throw std::invalid_argument("model has no components");
  if (normalization.dim() != dimension)
    throw std::invalid_argument("normalization map dimension mismatch");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("component weight must be > 0");
    if (c.mean.size() != dimension || c.covariance.rows() != dimension ||
        c.covariance.cols() != dimension)
      throw std::invalid_argument("component dimension mismatch");
    if (c.covariance != c.covariance.transpose())
      throw std::invalid_argument("component covariance is not symmetric");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("component weights must sum to 1");
}

void FitConfig::validate() const {
  if (initial_components < 1) throw std::invalid_argument("initial_components must be >= 1");
  if (max_em_iterations < 1) throw std::invalid_argument("max_em_iterations must be >= 1");
  if (!(prune_threshold > 0.0)) throw std::invalid_argument("prune_threshold must be > 0");
  if (prune_threshold >= 1.0 / initial_components)
    throw std::invalid_argument("prune_threshold must be < 1/initial_components");
  if (prune_check_interval < 1) throw std::invalid_argument("prune_check_interval must be >= 1");
  if (!(loglik_rel_tolerance > 0.0))
    throw std::invalid_argument("loglik_rel_tolerance must be > 0");
  if (temperature && !(temperature->array() > 0.0).all())
    throw std::invalid_argument("temperature must be > 0 on every axis");
}

std::pair<WeightedPoints, AffineMap> normalize(const WeightedPoints& points) {
  points.validate();
  const int d = points.dimension();
  const Vec lo = points.points.colwise().minCoeff();
  const Vec hi = points.points.colwise().maxCoeff();

  AffineMap map;
  map.offset = 0.5 * (lo + hi);
  map.scale = 0.5 * (hi - lo);
  for (int a = 0; a < d; ++a) {
    if (!(map.scale(a) > 0.0)) {
      std::ostringstream msg;
      msg << "degenerate data: axis " << a << " has zero spread (all values "
          << lo(a) << ")";
      throw std::invalid_argument(msg.str());
    }
  }

  WeightedPoints out = points;
  out.points = (points.points.rowwise() - map.offset.transpose()).array().rowwise() /
               map.scale.transpose().array();
  return {std::move(out), std::move(map)};
}

GmmModel denormalize_model(const GmmModel& model) {
  GmmModel out;
  out.dimension = model.dimension;
  out.normalization = AffineMap::identity(model.dimension);
  if (model.normalization.is_identity()) {
    out.components = model.components;
    return out;
  }
  const auto S = model.normalization.scale.asDiagonal();
  out.components.reserve(model.components.size());
  for (const auto& c : model.components) {
    GaussianComponent t;
    t.weight = c.weight;
    t.mean = model.normalization.inverse(c.mean);
    t.set_covariance(S * c.covariance * S);
    out.components.push_back(std::move(t));
  }
  return out;
}

namespace {

Index count_distinct_points(const Mat& pts) {
  std::set<std::vector<double>> seen;
  std::vector<double> row(pts.cols());
  for (Index n = 0; n < pts.rows(); ++n) {
    for (Index a = 0; a < pts.cols(); ++a) row[a] = pts(n, a);
    seen.insert(row);
  }
  return static_cast<Index>(seen.size());
}

}  // namespace

GmmModel init_model(const WeightedPoints& normalized_points, const FitConfig& config,
                    const Vec& temperature, const AffineMap& map) {
  config.validate();
  const int d = normalized_points.dimension();
  if (map.dim() != d) throw std::invalid_argument("normalization map dimension mismatch");

  if (config.warm_start) {
    const GmmModel& warm = *config.warm_start;
    if (warm.dimension != d)
      throw std::invalid_argument("warm-start model dimension does not match the data");
    const GmmModel canonical =
        warm.normalization.is_identity() ? warm : denormalize_model(warm);
    GmmModel out;
    out.dimension = d;
    out.normalization = map;
    const auto D = map.scale.cwiseInverse().asDiagonal();
    out.components.reserve(canonical.components.size());
    for (const auto& c : canonical.components) {
      GaussianComponent t;
      t.weight = c.weight;
      t.mean = map.forward(c.mean);
      t.set_covariance(D * c.covariance * D);
      out.components.push_back(std::move(t));
    }
    return out;
  }

  if (temperature.size() != d || !(temperature.array() > 0.0).all())
    throw std::invalid_argument("temperature must be a positive per-axis variance");

  int m = config.initial_components;
  const Index distinct = count_distinct_points(normalized_points.points);
  if (distinct < m) {
    std::cerr << "[vdfc] warning: only " << distinct << " distinct points; reducing initial components from "
              << m << "\n";
    m = static_cast<int>(distinct);
  }

  const Vec lo = normalized_points.points.colwise().minCoeff();
  const Vec hi = normalized_points.points.colwise().maxCoeff();
  Mat base_cov = (temperature.array() / map.scale.array().square()).matrix().asDiagonal();

  Rng rng(config.seed);
  GmmModel out;
  out.dimension = d;
  out.normalization = map;
  out.components.resize(m);
  for (int i = 0; i < m; ++i) {
    auto& c = out.components[i];
    c.weight = 1.0 / m;
    c.mean.resize(d);
    for (int a = 0; a < d; ++a) c.mean(a) = rng.uniform(lo(a), hi(a));
    c.set_covariance(base_cov);
  }
  return out;
}

namespace {

// Per-component log densities for all points; rows of dead (unrepairable)
// components are -inf. `repair` toggles in-place covariance repair.
Mat log_component_densities(GmmModel& model, const Mat& pts, bool repair,
                            std::vector<int>* unrepairable) {
  const Index m = model.size();
  const Index n = pts.rows();
  Mat logp(m, n);
  for (Index i = 0; i < m; ++i) {
    auto& c = model.components[i];
    Eigen::LLT<Mat> llt(c.covariance);
    if (!llt_ok(llt)) {
      bool dead = false;
      if (repair) {
        try {
          c.set_covariance(repair_covariance(c.covariance));
          llt.compute(c.covariance);
          dead = !llt_ok(llt);
        } catch (const CovarianceRepairError&) {
          dead = true;
        }
      } else {
        dead = true;
      }
      if (dead) {
        if (unrepairable) unrepairable->push_back(static_cast<int>(i));
        logp.row(i).setConstant(-std::numeric_limits<double>::infinity());
        continue;
      }
    }
    const double log_alpha =
        c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
    logp.row(i) = (log_gaussian_rows(pts, c.mean, llt).array() + log_alpha).transpose();
  }
  return logp;
}

}  // namespace

EStep e_step(GmmModel& model, const WeightedPoints& points) {
  if (model.dimension != points.dimension())
    throw std::invalid_argument("model and points dimension mismatch");
  const Index m = model.size();
  const Index n = points.count();

  EStep out;
  Mat logp = log_component_densities(model, points.points, /*repair=*/true, &out.unrepairable);
  if (static_cast<Index>(out.unrepairable.size()) == m)
    throw std::runtime_error("all mixture components are degenerate");

  out.responsibilities.resize(m, n);
  detail::KahanSum ll;
  for (Index j = 0; j < n; ++j) {
    const double mx = logp.col(j).maxCoeff();
    const Vec u = (logp.col(j).array() - mx).exp();
    const double s = u.sum();
    out.responsibilities.col(j) = u / s;
    ll.add(points.weights(j) * (mx + std::log(s)));
  }
  out.loglik = ll.value();
  return out;
}

double weighted_loglik(const GmmModel& model, const WeightedPoints& points) {
  GmmModel scratch = model;  // repair-on-copy; caller's model stays untouched
  if (!scratch.normalization.is_identity()) scratch = denormalize_model(scratch);
  Mat logp = log_component_densities(scratch, points.points, /*repair=*/true, nullptr);
  detail::KahanSum ll;
  for (Index j = 0; j < points.count(); ++j) {
    const double mx = logp.col(j).maxCoeff();
    ll.add(points.weights(j) * (mx + std::log((logp.col(j).array() - mx).exp().sum())));
  }
  return ll.value();
}

GmmModel m_step(const WeightedPoints& points, const Mat& responsibilities,
                const GmmModel& previous, std::vector<int>* degenerate) {
  const Index m = previous.size();
  const Index n = points.count();
  if (responsibilities.rows() != m || responsibilities.cols() != n)
    throw std::invalid_argument("responsibility matrix shape mismatch");

  const double total = points.total_weight;
  if (!(total > 0.0)) throw std::runtime_error("m_step: zero total weight");
  const Vec mass = responsibilities * points.weights;  // per-component sum w_n gamma_i
  if (!mass.allFinite() || (mass.array() < 0.0).any())
    throw std::runtime_error("m_step: invalid responsibility mass");

  GmmModel out;
  out.dimension = previous.dimension;
  out.normalization = previous.normalization;
  out.components.resize(m);
  for (Index i = 0; i < m; ++i) {
    auto& c = out.components[i];
    c.weight = mass(i) / total;
    if (!(mass(i) > total * kMassFloorRel)) {
      // Starved component: freeze its parameters until the next prune check.
      c.mean = previous.components[i].mean;
      c.covariance = previous.components[i].covariance;
      continue;
    }
    const Vec wi = responsibilities.row(i).transpose().cwiseProduct(points.weights);
    c.mean = (points.points.transpose() * wi) / mass(i);
    const Mat centered = points.points.rowwise() - c.mean.transpose();
    Mat sigma = (centered.transpose() * wi.asDiagonal() * centered) / mass(i);
    symmetrize_from_upper(sigma);
    try {
      // A condition number beyond double resolution means the component has
      // collapsed onto one grid point or a line of them. Diagonal loading is
      // for rounding artifacts, not for these: freeze the component and hand
      // it to the pruner.
      Eigen::SelfAdjointEigenSolver<Mat> eig(sigma, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() <= 1e-14 * eig.eigenvalues().maxCoeff())
        throw CovarianceRepairError("collapsed component");
      int doublings = -1;
      Mat repaired = repair_covariance(sigma, &doublings);
      if (doublings > 2) throw CovarianceRepairError("collapsed component");
      c.set_covariance(std::move(repaired));
    } catch (const CovarianceRepairError&) {
      c.covariance = previous.components[i].covariance;
      if (degenerate) degenerate->push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::optional<PruneEvent> prune_one(GmmModel& model, double threshold, int iteration) {
  if (model.size() <= 1) return std::nullopt;
  int smallest = 0;
  for (int i = 1; i < model.size(); ++i)
    if (model.components[i].weight < model.components[smallest].weight) smallest = i;
  if (!(model.components[smallest].weight < threshold)) return std::nullopt;

  PruneEvent ev{iteration, smallest, model.components[smallest].weight};
  model.components.erase(model.components.begin() + smallest);
  double total = 0.0;
  for (const auto& c : model.components) total += c.weight;
  for (auto& c : model.components) c.weight /= total;
  return ev;
}

GmmModel prune(GmmModel model, double threshold) {
  prune_one(model, threshold);
  return model;
}

Mat repair_covariance(const Mat& sigma, int* doublings) {
  if (sigma.rows() != sigma.cols()) throw std::invalid_argument("covariance must be square");
  const Index d = sigma.rows();
  Mat sym = 0.5 * (sigma + sigma.transpose());
  symmetrize_from_upper(sym);
  if (doublings) *doublings = -1;

  Eigen::LLT<Mat> llt(sym);
  if (llt_ok(llt)) return sym;

  const double lambda0 = 1e-8 * sym.trace() / static_cast<double>(d);
  double lambda = lambda0;
  for (int k = 0; k <= 60; ++k, lambda *= 2.0) {
    Mat loaded = sym;
    loaded.diagonal().array() += lambda;
    llt.compute(loaded);
    if (llt_ok(llt)) {
      if (doublings) *doublings = k;
      return loaded;
    }
  }
  throw CovarianceRepairError("covariance repair failed after 60 doublings");
}

FitResult fit(const WeightedPoints& points, const FitConfig& config) {
  config.validate();
  auto [npts, map] = [&] {
    try {
      return normalize(points);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("fit: ") + e.what());
    }
  }();

  const Vec temperature = config.temperature ? *config.temperature : weighted_axis_variance(points);
  GmmModel model = init_model(npts, config, temperature, map);

  FitResult result;
  double prev_ll = std::numeric_limits<double>::quiet_NaN();
  int it = 0;
  for (it = 1; it <= config.max_em_iterations; ++it) {
    EStep es = e_step(model, npts);
    std::vector<int> degenerate = es.unrepairable;
    model = m_step(npts, es.responsibilities, model, &degenerate);
    result.loglik_trace.push_back(es.loglik);

    bool pruned = false;

    // Unrepairable components go immediately, highest index first so the
    // earlier indices stay valid.
    std::sort(degenerate.begin(), degenerate.end(), std::greater<int>());
    degenerate.erase(std::unique(degenerate.begin(), degenerate.end()), degenerate.end());
    for (int idx : degenerate) {
      if (model.size() <= 1) break;
      result.pruning_events.push_back({it, idx, model.components[idx].weight});
      model.components.erase(model.components.begin() + idx);
      pruned = true;
    }
    if (pruned) {
      double total = 0.0;
      for (const auto& c : model.components) total += c.weight;
      for (auto& c : model.components) c.weight /= total;
    }

    if (it % config.prune_check_interval == 0) {
      if (auto ev = prune_one(model, config.prune_threshold, it)) {
        result.pruning_events.push_back(*ev);
        pruned = true;
      }
    }

    if (!pruned && std::isfinite(prev_ll) &&
        std::abs(es.loglik - prev_ll) < config.loglik_rel_tolerance * std::abs(prev_ll)) {
      result.converged = true;
      break;
    }
    // A prune changes the model discontinuously; restart the comparison.
    prev_ll = pruned ? std::numeric_limits<double>::quiet_NaN() : es.loglik;
  }

  result.iterations_used = std::min(it, config.max_em_iterations);
  result.model = denormalize_model(model);
  return result;
}

Mat evaluate_pdf(const GmmModel& model, const GridSpec& grid) {
  model.validate();
  if (model.dimension != 2)
    throw std::invalid_argument("evaluate_pdf expects a 2-dimensional model");
  if (!grid.valid()) throw std::invalid_argument("invalid grid spec");

  const Index m = model.size();
  std::vector<Eigen::LLT<Mat>> llts;
  llts.reserve(m);
  for (const auto& c : model.components) {
    llts.emplace_back(c.covariance);
    if (!llt_ok(llts.back())) throw std::runtime_error("model component covariance is not SPD");
  }

  const double inv_vol = 1.0 / model.normalization.volume();
  Mat out(grid.n_bins, grid.n_bins);
  Vec x(2);
  for (int i = 0; i < grid.n_bins; ++i) {
    for (int j = 0; j < grid.n_bins; ++j) {
      x << grid.center_x(i), grid.center_y(j);
      const Vec z = model.normalization.forward(x);
      double p = 0.0;
      for (Index k = 0; k < m; ++k)
        p += model.components[k].weight * std::exp(log_gaussian(z, model.components[k].mean, llts[k]));
      out(i, j) = p * inv_vol;
    }
  }
  return out;
}

std::pair<Vec, Mat> mixture_moments(const GmmModel& model) {
  const int d = model.dimension;
  Vec mean = Vec::Zero(d);
  Mat m2 = Mat::Zero(d, d);
  for (const auto& c : model.components) {
    mean += c.weight * c.mean;
    m2 += c.weight * (c.covariance + c.mean * c.mean.transpose());
  }
  if (model.normalization.is_identity()) return {mean, m2};

  const auto S = model.normalization.scale.asDiagonal();
  const Vec& b = model.normalization.offset;
  const Vec mean_x = model.normalization.inverse(mean);
  Mat m2_x = S * m2 * S + S * mean * b.transpose() + b * (S * mean).transpose() +
             b * b.transpose();
  return {mean_x, m2_x};
}

std::pair<Vec, Mat> weighted_data_moments(const WeightedPoints& points) {
  const double total = points.weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weighted moments: zero total weight");
  const Vec mean = (points.points.transpose() * points.weights) / total;
  const Mat m2 =
      (points.points.transpose() * points.weights.asDiagonal() * points.points) / total;
  return {mean, m2};
}

}  // namespace vdfc
