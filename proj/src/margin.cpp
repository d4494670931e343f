#include "ebtree/margin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ebtree/errors.hpp"
#include "ebtree/random.hpp"

namespace ebtree {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr double kTau = 1e-12;

// Dense row-major copy of the training rows, permuted by the seed.
struct Problem {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sq_norm;

  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
};

class DualSolver {
 public:
  DualSolver(const Problem& p, double c) : p_(p), c_(c), alpha_(p.n, 0.0), grad_(p.n, -1.0), w_(p.dim, 0.0) {}

  // One pair update. Returns false when the KKT gap is below eps.
  bool step(double eps) {
    const std::size_t n = p_.n;
    const auto& y = p_.y;

    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (alpha_[t] < c_ && -grad_[t] >= gmax) {
          gmax = -grad_[t];
          i = t;
        }
      } else if (alpha_[t] > 0 && grad_[t] >= gmax) {
        gmax = grad_[t];
        i = t;
      }
    }
    if (i == n) return false;

    const auto xi = p_.row(i);
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      double grad_diff;
      if (y[t] > 0) {
        if (!(alpha_[t] > 0)) continue;
        grad_diff = gmax + grad_[t];
        gmax2 = std::max(gmax2, grad_[t]);
      } else {
        if (!(alpha_[t] < c_)) continue;
        grad_diff = gmax - grad_[t];
        gmax2 = std::max(gmax2, -grad_[t]);
      }
      if (grad_diff > 0) {
        double quad = p_.sq_norm[i] + p_.sq_norm[t] - 2.0 * dot(xi, p_.row(t));
        if (quad <= 0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (gmax + gmax2 < eps || j == n) return false;

    update_pair(i, j);
    return true;
  }

  double gap() const {
    double up = -std::numeric_limits<double>::infinity();
    double low = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < p_.n; ++t) {
      const double v = -p_.y[t] * grad_[t];
      const bool in_up = (p_.y[t] > 0 && alpha_[t] < c_) || (p_.y[t] < 0 && alpha_[t] > 0);
      const bool in_low = (p_.y[t] > 0 && alpha_[t] > 0) || (p_.y[t] < 0 && alpha_[t] < c_);
      if (in_up) up = std::max(up, v);
      if (in_low) low = std::max(low, -v);
    }
    return up + low;
  }

  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t free = 0;
    for (std::size_t t = 0; t < p_.n; ++t) {
      const double yg = p_.y[t] * grad_[t];
      if (alpha_[t] >= c_) {
        if (p_.y[t] < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (alpha_[t] <= 0) {
        if (p_.y[t] > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++free;
        sum_free += yg;
      }
    }
    const double rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
    return -rho;
  }

  const Vector& w() const { return w_; }

 private:
  void update_pair(std::size_t i, std::size_t j) {
    const auto& y = p_.y;
    const double old_ai = alpha_[i];
    const double old_aj = alpha_[j];
    const double kij = dot(p_.row(i), p_.row(j));
    double quad = p_.sq_norm[i] + p_.sq_norm[j] - 2.0 * kij;
    if (quad <= 0) quad = kTau;

    double& ai = alpha_[i];
    double& aj = alpha_[j];
    if (y[i] != y[j]) {
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > 0) {
        if (ai > c_) {
          ai = c_;
          aj = c_ - diff;
        }
      } else if (aj > c_) {
        aj = c_;
        ai = c_ + diff;
      }
    } else {
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) {
          ai = c_;
          aj = sum - c_;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > c_) {
        if (aj > c_) {
          aj = c_;
          ai = sum - c_;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }

    const double di = (ai - old_ai) * y[i];
    const double dj = (aj - old_aj) * y[j];
    Vector dw(p_.dim, 0.0);
    const auto xi = p_.row(i);
    const auto xj = p_.row(j);
    for (std::size_t d = 0; d < p_.dim; ++d) {
      dw[d] = di * xi[d] + dj * xj[d];
      w_[d] += dw[d];
    }
    for (std::size_t t = 0; t < p_.n; ++t) grad_[t] += y[t] * dot(dw, p_.row(t));
  }

  const Problem& p_;
  double c_;
  std::vector<double> alpha_;
  std::vector<double> grad_;  // (Q alpha - e)_t = y_t w.x_t - 1
  Vector w_;
};

double objective_of(const Problem& p, std::span<const double> w, double b, double c) {
  double hinge = 0.0;
  for (std::size_t t = 0; t < p.n; ++t) {
    hinge += std::max(0.0, 1.0 - p.y[t] * (dot(w, p.row(t)) + b));
  }
  return 0.5 * dot(w, w) + c * hinge;
}

}  // namespace

double Hyperplane::norm() const { return std::sqrt(dot(w, w)); }

double Hyperplane::decision(std::span<const double> x) const {
  if (x.size() != w.size()) throw DimensionError("point and hyperplane dimensions differ");
  return dot(w, x) + b;
}

Hyperplane make_hyperplane(std::string class_id, Vector w, double b) {
  const double n = std::sqrt(dot(w, w));
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateHyperplaneError("hyperplane normal is zero or non-finite");
  Hyperplane plane;
  plane.class_id = std::move(class_id);
  plane.w = std::move(w);
  plane.b = b;
  plane.margin = 2.0 / n;
  return plane;
}

double hinge_objective(std::span<const Vector> xs, std::span<const int> ys, std::span<const double> w, double b,
                       double c) {
  double hinge = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    hinge += std::max(0.0, 1.0 - ys[t] * (dot(w, xs[t]) + b));
  }
  return 0.5 * dot(w, w) + c * hinge;
}

BinaryFit fit_binary(std::span<const Vector> xs, std::span<const int> ys, const MarginFitConfig& cfg) {
  cfg.validate();
  if (xs.size() != ys.size()) throw ValidationError("sample and label counts differ");
  if (xs.empty()) throw EmptyInputError("no samples to fit");
  const bool has_pos = std::any_of(ys.begin(), ys.end(), [](int v) { return v > 0; });
  const bool has_neg = std::any_of(ys.begin(), ys.end(), [](int v) { return v < 0; });
  if (!has_pos || !has_neg) throw DegenerateDataError("a binary fit needs samples on both sides");

  Problem p;
  p.n = xs.size();
  p.dim = xs.front().size();
  std::vector<std::size_t> order(p.n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  rng.shuffle(order);
  p.x.reserve(p.n * p.dim);
  for (std::size_t idx : order) {
    if (xs[idx].size() != p.dim) throw DimensionError("samples have differing dimensions");
    if (ys[idx] != 1 && ys[idx] != -1) throw ValidationError("binary labels must be +1 or -1");
    p.x.insert(p.x.end(), xs[idx].begin(), xs[idx].end());
    p.y.push_back(static_cast<double>(ys[idx]));
  }
  p.sq_norm.resize(p.n);
  for (std::size_t t = 0; t < p.n; ++t) p.sq_norm[t] = dot(p.row(t), p.row(t));

  DualSolver solver(p, cfg.c);
  BinaryFit fit;
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&] {
    const double b = solver.bias();
    const double obj = objective_of(p, solver.w(), b, cfg.c);
    if (obj < best) {
      best = obj;
      fit.w = solver.w();
      fit.b = b;
      fit.objective = obj;
      fit.accepted_objectives.push_back(obj);
    }
  };

  const std::size_t checkpoint = std::max<std::size_t>(p.n, 64);
  std::size_t iter = 0;
  bool optimal = false;
  while (iter < cfg.max_iters) {
    if (!solver.step(cfg.tolerance)) {
      optimal = true;
      break;
    }
    ++iter;
    if (iter % checkpoint == 0) consider();
  }
  consider();
  fit.iterations = iter;
  fit.converged = optimal;
  return fit;
}

std::vector<Hyperplane> fit_one_vs_all(const LabeledDataset& dataset, std::span<const std::string> labels,
                                       const MarginFitConfig& cfg) {
  if (labels.size() != dataset.size()) throw ValidationError("label count does not match dataset size");
  const auto classes = sorted_class_order({labels.begin(), labels.end()});
  if (classes.size() < 2) throw DegenerateDataError("one-vs-all fitting needs at least two classes");

  std::vector<Vector> xs;
  xs.reserve(dataset.size());
  for (const auto& p : dataset.points()) xs.push_back(p.embedding);

  std::vector<Hyperplane> planes;
  planes.reserve(classes.size());
  std::vector<int> ys(dataset.size());
  for (const auto& cls : classes) {
    for (std::size_t i = 0; i < labels.size(); ++i) ys[i] = labels[i] == cls ? 1 : -1;
    BinaryFit fit = fit_binary(xs, ys, cfg);
    Hyperplane plane = make_hyperplane(cls, std::move(fit.w), fit.b);
    plane.converged = fit.converged;
    planes.push_back(std::move(plane));
  }
  return planes;
}

std::vector<Hyperplane> fit_one_vs_all(const LabeledDataset& dataset, const MarginFitConfig& cfg) {
  std::vector<std::string> labels;
  labels.reserve(dataset.size());
  for (const auto& p : dataset.points()) labels.push_back(p.label);
  return fit_one_vs_all(dataset, labels, cfg);
}

double distance_to_boundary(std::span<const double> x, const Hyperplane& plane) {
  if (x.size() != plane.w.size()) throw DimensionError("point and hyperplane dimensions differ");
  const double n = plane.norm();
  if (!(n > 0.0)) throw DegenerateHyperplaneError("hyperplane normal is zero");
  return std::abs(dot(plane.w, x) + plane.b) / n;
}

const Hyperplane* find_plane(std::span<const Hyperplane> planes, const std::string& class_id) {
  for (const auto& p : planes) {
    if (p.class_id == class_id) return &p;
  }
  return nullptr;
}

std::vector<RankedPoint> sort_by_boundary_distance(const LabeledDataset& dataset, std::span<const std::string> labels,
                                                   std::span<const Hyperplane> planes, DistanceMode mode) {
  if (labels.size() != dataset.size()) throw ValidationError("label count does not match dataset size");
  std::vector<RankedPoint> ranked(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& x = dataset[i].embedding;
    const Hyperplane* own = find_plane(planes, labels[i]);
    if (own == nullptr) throw MissingPlaneError("no hyperplane for class '" + labels[i] + "'");
    double d = distance_to_boundary(x, *own);
    if (mode == DistanceMode::kMinAll) {
      for (const auto& plane : planes) d = std::min(d, distance_to_boundary(x, plane));
    }
    ranked[i].index = i;
    ranked[i].boundary_distance = d;
  }
  std::sort(ranked.begin(), ranked.end(), [&](const RankedPoint& a, const RankedPoint& b) {
    if (a.boundary_distance != b.boundary_distance) return a.boundary_distance < b.boundary_distance;
    return dataset[a.index].id < dataset[b.index].id;
  });
  for (std::size_t r = 0; r < ranked.size(); ++r) ranked[r].rank = r;
  return ranked;
}

std::vector<RankedPoint> sort_by_boundary_distance(const LabeledDataset& dataset, std::span<const Hyperplane> planes,
                                                   DistanceMode mode) {
  std::vector<std::string> labels;
  labels.reserve(dataset.size());
  for (const auto& p : dataset.points()) labels.push_back(p.label);
  return sort_by_boundary_distance(dataset, labels, planes, mode);
}

}  // namespace ebtree
