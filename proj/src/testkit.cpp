#include "ebtree/testkit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include "ebtree/errors.hpp"
#include "ebtree/random.hpp"

namespace ebtree::testkit {

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ValidationError("need at least two classes");
  if (points_per_class == 0) throw ValidationError("points_per_class must be positive");
  if (raw_dimension < 2) throw ValidationError("raw dimension must be at least 2");
  if (!(cluster_separation > 0.0)) throw ValidationError("cluster separation must be positive");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise sigma must be non-negative");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
}

Vector ReferenceModel::probabilities(std::span<const double> x) const {
  if (x.size() != raw_dimension) throw DimensionError("raw sample has the wrong dimension");
  Vector logits(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    double z = bias[k];
    for (std::size_t d = 0; d < raw_dimension; ++d) z += weights[k * raw_dimension + d] * x[d];
    logits[k] = z / temperature;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    total += z;
  }
  for (double& z : logits) z /= total;
  return logits;
}

int ReferenceModel::predict(std::span<const double> x) const {
  const Vector p = probabilities(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<Vector> class_centers(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t k = spec.num_classes;
  std::vector<Vector> centers(k, Vector(spec.raw_dimension, 0.0));
  if (spec.raw_dimension >= k) {
    const double scale = spec.cluster_separation / std::numbers::sqrt2;
    for (std::size_t c = 0; c < k; ++c) centers[c][c] = scale;
  } else {
    const double radius = spec.cluster_separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(k)));
    for (std::size_t c = 0; c < k; ++c) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
      centers[c][0] = radius * std::cos(theta);
      centers[c][1] = radius * std::sin(theta);
    }
  }
  return centers;
}

RawDataset sample_raw(const SyntheticSpec& spec, std::span<const int> classes, std::size_t per_class,
                      std::uint64_t seed) {
  const auto centers = class_centers(spec);
  Rng rng(seed);
  RawDataset raw;
  raw.x.reserve(classes.size() * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c : classes) {
      if (c < 0 || static_cast<std::size_t>(c) >= spec.num_classes) throw ValidationError("class out of range");
      Vector x = centers[static_cast<std::size_t>(c)];
      for (double& v : x) v += spec.noise_sigma * rng.normal();
      raw.x.push_back(std::move(x));
      raw.y.push_back(c);
    }
  }
  return raw;
}

ReferenceModel fit_reference_model(const RawDataset& raw, std::size_t num_classes, double temperature) {
  if (raw.x.empty()) throw EmptyInputError("no samples to fit the reference model");
  const std::size_t dim = raw.x.front().size();
  const std::size_t k = num_classes;
  const std::size_t per = dim + 1;
  const auto n_params = static_cast<Eigen::Index>(k * per);
  const double n = static_cast<double>(raw.x.size());
  constexpr double kRidge = 1e-3;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_params);
  std::vector<double> feat(per);
  std::vector<double> prob(k);
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::VectorXd grad = kRidge * theta;
    Eigen::MatrixXd hess = kRidge * Eigen::MatrixXd::Identity(n_params, n_params);
    for (std::size_t i = 0; i < raw.x.size(); ++i) {
      for (std::size_t d = 0; d < dim; ++d) feat[d] = raw.x[i][d];
      feat[dim] = 1.0;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double z = 0.0;
        for (std::size_t d = 0; d < per; ++d) z += theta(static_cast<Eigen::Index>(c * per + d)) * feat[d];
        prob[c] = z;
        top = std::max(top, z);
      }
      double total = 0.0;
      for (double& p : prob) {
        p = std::exp(p - top);
        total += p;
      }
      for (double& p : prob) p /= total;
      for (std::size_t c = 0; c < k; ++c) {
        const double r = (prob[c] - (raw.y[i] == static_cast<int>(c) ? 1.0 : 0.0)) / n;
        for (std::size_t d = 0; d < per; ++d) grad(static_cast<Eigen::Index>(c * per + d)) += r * feat[d];
        for (std::size_t c2 = 0; c2 < k; ++c2) {
          const double h = prob[c] * ((c == c2 ? 1.0 : 0.0) - prob[c2]) / n;
          if (h == 0.0) continue;
          for (std::size_t d = 0; d < per; ++d) {
            for (std::size_t d2 = 0; d2 < per; ++d2) {
              hess(static_cast<Eigen::Index>(c * per + d), static_cast<Eigen::Index>(c2 * per + d2)) +=
                  h * feat[d] * feat[d2];
            }
          }
        }
      }
    }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    theta -= step;
    if (step.norm() < 1e-10 * (1.0 + theta.norm())) break;
  }

  ReferenceModel model;
  model.num_classes = k;
  model.raw_dimension = dim;
  model.temperature = temperature;
  model.weights.resize(k * dim);
  model.bias.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < dim; ++d) model.weights[c * dim + d] = theta(static_cast<Eigen::Index>(c * per + d));
    model.bias[c] = theta(static_cast<Eigen::Index>(c * per + dim));
  }
  return model;
}

EmbeddedData embed(const ReferenceModel& model, const RawDataset& raw, std::string_view id_prefix) {
  const int width = static_cast<int>(std::to_string(std::max<std::size_t>(raw.x.size(), 1) - 1).size());
  std::vector<EmbeddedPoint> points;
  Predictions predictions;
  points.reserve(raw.x.size());
  predictions.reserve(raw.x.size());
  for (std::size_t i = 0; i < raw.x.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*zu", width, i);
    Vector p = model.probabilities(raw.x[i]);
    const auto top = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    points.push_back({std::string(id_prefix) + buf, std::to_string(raw.y[i]), std::move(p), {}});
    predictions.push_back(std::to_string(top));
  }
  return {LabeledDataset(std::move(points)), std::move(predictions)};
}

Generated generate(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<int> classes(spec.num_classes);
  std::iota(classes.begin(), classes.end(), 0);
  Generated g;
  g.raw = sample_raw(spec, classes, spec.points_per_class, spec.seed);
  g.model = fit_reference_model(g.raw, spec.num_classes, spec.temperature);
  auto embedded = embed(g.model, g.raw);
  g.dataset = std::move(embedded.dataset);
  g.predictions = std::move(embedded.predictions);
  return g;
}

std::vector<std::size_t> brute_knn(std::span<const Vector> points, std::span<const double> query, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) s += (points[i][d] - query[d]) * (points[i][d] - query[d]);
    scored.emplace_back(s, i);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

std::string brute_1nn_classify(const BoundaryTree& tree, std::span<const double> query) {
  double best = std::numeric_limits<double>::infinity();
  std::string label;
  for (const auto& n : tree.nodes()) {
    double s = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) {
      const double diff = n.point.embedding[d] - query[d];
      s += diff * diff;
    }
    if (s < best) {
      best = s;
      label = n.label;
    }
  }
  return label;
}

namespace {

// Gaussian elimination with partial pivoting; false when (near) singular.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> rhs, std::vector<double>& out) {
  const std::size_t n = rhs.size();
  double scale = 0.0;
  for (const auto& row : a) {
    for (double v : row) scale = std::max(scale, std::abs(v));
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) <= 1e-12 * std::max(scale, 1.0)) return false;
    std::swap(a[pivot], a[col]);
    std::swap(rhs[pivot], rhs[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * out[c];
    out[i] = s / a[i][i];
  }
  return true;
}

}  // namespace

std::optional<ExactSvm> exact_small_svm(std::span<const Vector> xs, std::span<const int> ys) {
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  const std::size_t dim = xs.front().size();
  const std::size_t max_active = std::min(n, dim + 1);

  std::optional<ExactSvm> best;
  std::vector<std::size_t> subset;

  auto try_subset = [&] {
    bool pos = false, neg = false;
    for (std::size_t i : subset) (ys[i] > 0 ? pos : neg) = true;
    if (!pos || !neg) return;
    const std::size_t s = subset.size();
    std::vector<std::vector<double>> a(s + 1, std::vector<double>(s + 1, 0.0));
    std::vector<double> rhs(s + 1, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
      const std::size_t i = subset[r];
      for (std::size_t c = 0; c < s; ++c) {
        const std::size_t j = subset[c];
        double k = 0.0;
        for (std::size_t d = 0; d < dim; ++d) k += xs[i][d] * xs[j][d];
        a[r][c] = ys[i] * ys[j] * k;
      }
      a[r][s] = ys[i];
      a[s][r] = ys[i];
      rhs[r] = 1.0;
    }
    std::vector<double> sol;
    if (!solve_linear(std::move(a), std::move(rhs), sol)) return;
    Vector w(dim, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
      for (std::size_t d = 0; d < dim; ++d) w[d] += sol[r] * ys[subset[r]] * xs[subset[r]][d];
    }
    const double b = sol[s];
    for (std::size_t i = 0; i < n; ++i) {
      double f = b;
      for (std::size_t d = 0; d < dim; ++d) f += w[d] * xs[i][d];
      if (ys[i] * f < 1.0 - 1e-9) return;
    }
    double sq = 0.0;
    for (double v : w) sq += v * v;
    if (!best || 0.5 * sq < best->objective) best = ExactSvm{w, b, 0.5 * sq};
  };

  std::function<void(std::size_t)> recurse = [&](std::size_t start) {
    if (subset.size() >= 2) try_subset();
    if (subset.size() == max_active) return;
    for (std::size_t i = start; i < n; ++i) {
      subset.push_back(i);
      recurse(i + 1);
      subset.pop_back();
    }
  };
  recurse(0);
  return best;
}

}  // namespace ebtree::testkit
