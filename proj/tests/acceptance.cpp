// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ebtree/errors.hpp"
#include "ebtree/explain.hpp"
#include "ebtree/io.hpp"
#include "ebtree/lsh.hpp"
#include "ebtree/margin.hpp"
#include "ebtree/novelty.hpp"
#include "ebtree/random.hpp"
#include "ebtree/stitching.hpp"
#include "ebtree/testkit.hpp"
#include "fixtures.hpp"

using namespace ebtree;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome structural_invariants() {
  const auto t0 = Clock::now();
  std::size_t edges = 0, bad_edges = 0, queries = 0, non_monotone = 0, root_mismatch = 0, rebuild_diff = 0;
  for (int i = 0; i < 25; ++i) {
    testkit::SyntheticSpec spec;
    spec.num_classes = 2 + static_cast<std::size_t>(i % 9);
    const std::size_t total = 200 + static_cast<std::size_t>(i) * 200;  // 200 .. 5000
    spec.points_per_class = total / spec.num_classes;
    spec.seed = 1000 + static_cast<std::uint64_t>(i);
    const auto g = testkit::generate(spec);

    BuildConfig cfg;
    cfg.seed = spec.seed;
    cfg.lsh.seed = spec.seed;
    const auto planes = fit_one_vs_all(g.dataset, g.predictions, cfg.margin);
    const auto built = build_eb_tree(g.dataset, g.predictions, planes, cfg);
    const BoundaryTree& tree = built.tree;

    for (const auto& n : tree.nodes()) {
      if (!n.parent) continue;
      ++edges;
      if (tree.node(*n.parent).label == n.label) ++bad_edges;
    }
    if (!check_tree_invariants(tree).empty()) ++bad_edges;

    const auto ranked = sort_by_boundary_distance(g.dataset, g.predictions, planes, cfg.distance_mode);
    const std::set<std::string> predicted(g.predictions.begin(), g.predictions.end());
    if (predicted.size() > 1 && tree.node(0).point.id != g.dataset[ranked.front().index].id) {
      ++root_mismatch;
    }

    Rng rng(spec.seed * 7 + 3);
    for (int q = 0; q < 1000; ++q) {
      const Vector query = fixtures::random_softmax(rng, tree.dimension(), 3.0);
      const auto path = traverse(tree, query);
      ++queries;
      for (std::size_t s = 1; s < path.steps.size(); ++s) {
        if (!(path.steps[s].distance < path.steps[s - 1].distance)) {
          ++non_monotone;
          break;
        }
      }
    }

    const auto again = build_eb_tree(g.dataset, g.predictions, cfg);
    if (io::tree_to_json(again.tree) != io::tree_to_json(tree)) ++rebuild_diff;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = bad_edges == 0 && non_monotone == 0 && root_mismatch == 0 && rebuild_diff == 0 && secs < 120.0;
  o.detail = fmt("25 trees, %zu edges (%zu crossing violations), %zu/%zu monotone queries, %zu root mismatches, "
                 "%zu non-identical rebuilds, %.1f s (limit 120 s)",
                 edges, bad_edges, queries - non_monotone, queries, root_mismatch, rebuild_diff, secs);
  return o;
}

// ---------------------------------------------------------------------------

double angle_degrees(const Vector& a, const Vector& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double c = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Outcome max_margin() {
  MarginFitConfig cfg;
  cfg.c = 1e4;

  // Random separable instances against the exact enumeration oracle.
  Rng rng(20240611);
  int matched = 0, instances = 0;
  double worst_rel = 0.0;
  double worst_margin_err = 0.0;
  while (instances < 20) {
    const std::size_t n = 6 + rng.below(20);  // 6..25
    const std::size_t dim = 2 + rng.below(2);
    Vector dir(dim);
    for (auto& d : dir) d = rng.normal();
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (std::size_t i = 0; i < n; ++i) {
      const int y = i % 2 == 0 ? 1 : -1;
      Vector x(dim);
      for (std::size_t d = 0; d < dim; ++d) x[d] = rng.normal() + 2.0 * y * dir[d];
      xs.push_back(std::move(x));
      ys.push_back(y);
    }
    const auto exact = testkit::exact_small_svm(xs, ys);
    if (!exact) continue;  // not separable; draw again
    ++instances;
    const BinaryFit fit = fit_binary(xs, ys, cfg);
    double half_norm = 0.0;
    for (double v : fit.w) half_norm += 0.5 * v * v;
    const double rel = std::abs(half_norm - exact->objective) / exact->objective;
    worst_rel = std::max(worst_rel, rel);
    if (rel <= 0.01) ++matched;
    const Hyperplane h = make_hyperplane("pos", fit.w, fit.b);
    double norm = 0.0;
    for (double v : fit.w) norm += v * v;
    worst_margin_err = std::max(worst_margin_err, std::abs(h.margin - 2.0 / std::sqrt(norm)));
  }

  // Margin field on a testkit fit as well.
  testkit::SyntheticSpec spec;
  spec.num_classes = 4;
  spec.points_per_class = 150;
  spec.seed = 5;
  const auto g = testkit::generate(spec);
  for (const auto& h : fit_one_vs_all(g.dataset, g.predictions, MarginFitConfig{})) {
    double norm = 0.0;
    for (double v : h.w) norm += v * v;
    worst_margin_err = std::max(worst_margin_err, std::abs(h.margin - 2.0 / std::sqrt(norm)));
  }

  // Symmetric toys with analytic answers.
  MarginFitConfig toy;
  toy.c = 1000;
  const std::vector<Vector> pair_x{{-1.0}, {1.0}};
  const std::vector<int> pair_y{-1, 1};
  const BinaryFit f1 = fit_binary(pair_x, pair_y, toy);
  const double a1 = f1.w[0] > 0 ? 0.0 : 180.0;

  const std::vector<Vector> square_x{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  const std::vector<int> square_y{1, 1, -1, -1};
  const BinaryFit f2 = fit_binary(square_x, square_y, toy);
  const double a2 = angle_degrees(f2.w, {1, 0});

  const double th = std::numbers::pi / 6;
  const Vector u{std::cos(th), std::sin(th)};
  const std::vector<Vector> tilted_x{{u[0], u[1]}, {-u[0], -u[1]}, {u[0] - 0.5 * u[1], u[1] + 0.5 * u[0]},
                                     {-u[0] + 0.5 * u[1], -u[1] - 0.5 * u[0]}};
  const std::vector<int> tilted_y{1, -1, 1, -1};
  const BinaryFit f3 = fit_binary(tilted_x, tilted_y, toy);
  const double a3 = angle_degrees(f3.w, u);
  const double worst_angle = std::max({a1, a2, a3});

  Outcome o;
  o.pass = matched == 20 && worst_margin_err <= 1e-9 && worst_angle <= 1.0;
  o.detail = fmt("%d/20 instances within 1%% of the exact optimum (worst %.2e), margin field error %.1e (limit 1e-9), "
                 "toy angles %.3g/%.3g/%.3g deg (limit 1)",
                 matched, worst_rel, worst_margin_err, a1, a2, a3);
  return o;
}

// ---------------------------------------------------------------------------

Outcome lsh_quality() {
  Rng rng(77);
  std::vector<Vector> points;
  std::vector<std::pair<PointKey, Vector>> keyed;
  for (std::size_t i = 0; i < 1000; ++i) {
    points.push_back(fixtures::random_softmax(rng, 10));
    keyed.emplace_back(i, points.back());
  }
  LshIndex index = build_index(10, keyed, LshConfig{});
  double recall = 0.0;
  for (int q = 0; q < 100; ++q) {
    const Vector query = fixtures::random_softmax(rng, 10);
    const auto truth = testkit::brute_knn(points, query, 10);
    const auto got = index.query(query, 10);
    std::set<std::size_t> want(truth.begin(), truth.end());
    std::size_t hit = 0;
    for (const auto& nb : got) hit += want.count(nb.key);
    recall += static_cast<double>(hit) / 10.0;
  }
  recall /= 100.0;

  std::set<PointKey> removed;
  std::size_t leaks = 0;
  for (int cycle = 0; cycle < 100; ++cycle) {
    PointKey victim = rng.below(points.size());
    while (removed.contains(victim)) victim = rng.below(points.size());
    index.remove(victim);
    removed.insert(victim);
    for (const auto& q : {points[victim], fixtures::random_softmax(rng, 10)}) {
      for (const auto& nb : index.query(q, 50)) leaks += removed.count(nb.key);
    }
  }

  Outcome o;
  o.pass = recall >= 0.9 && leaks == 0;
  o.detail = fmt("recall@10 %.3f (need >= 0.9) on 1000 softmax-distributed 10-d points, %zu tombstone leaks in 100 cycles",
                 recall, leaks);
  return o;
}

// ---------------------------------------------------------------------------

Outcome model_mimicking() {
  const auto t0 = Clock::now();
  int seeds_ok = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    testkit::SyntheticSpec spec;
    spec.num_classes = 5;
    spec.points_per_class = 2000;  // 10k training points
    spec.seed = seed;
    const auto g = testkit::generate(spec);
    const std::vector<int> all{0, 1, 2, 3, 4};
    const auto held = testkit::embed(g.model, testkit::sample_raw(spec, all, 400, seed + 5000), "h");

    BuildConfig cfg;
    cfg.seed = seed;
    cfg.lsh.seed = seed;
    const auto eb = build_eb_tree(g.dataset, g.predictions, cfg);
    const double eb_fid = fidelity(eb.tree, held.dataset, held.predictions).macro_f;

    double basic_nodes = 0.0, basic_fid = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto basic = build_basic_boundary_tree(g.dataset, g.predictions, seed * 100 + s);
      basic_nodes += static_cast<double>(basic.tree.size());
      basic_fid += fidelity(basic.tree, held.dataset, held.predictions).macro_f;
    }
    basic_nodes /= 10.0;
    basic_fid /= 10.0;

    const bool c1 = eb_fid >= 0.99;
    const bool c2 = static_cast<double>(eb.tree.size()) <= 0.05 * static_cast<double>(g.dataset.size());
    const bool c3 = static_cast<double>(eb.tree.size()) < basic_nodes;
    const bool c4 = eb_fid >= basic_fid;
    const bool ok = c1 && c2 && c3 && c4;
    seeds_ok += ok;
    per_seed << fmt("\n    seed %llu: nodes %zu vs basic mean %.1f, fidelity %.4f vs basic mean %.4f [%c%c%c%c] %s",
                    static_cast<unsigned long long>(seed), eb.tree.size(), basic_nodes, eb_fid, basic_fid,
                    c1 ? '+' : '-', c2 ? '+' : '-', c3 ? '+' : '-', c4 ? '+' : '-', ok ? "ok" : "miss");
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = seeds_ok >= 4 && secs < 300.0;
  o.detail = fmt("%d/5 seeds meet all four conjuncts (need 4), %.1f s (limit 300 s)", seeds_ok, secs) + per_seed.str();
  return o;
}

// ---------------------------------------------------------------------------

Outcome conformal_detection() {
  testkit::SyntheticSpec spec;
  spec.num_classes = 6;
  spec.raw_dimension = 6;
  spec.cluster_separation = 10.0;
  spec.seed = 1;
  const std::vector<int> known{0, 1, 2, 3, 4};
  const std::vector<int> unseen{5};

  const auto raw = testkit::sample_raw(spec, known, 1000, spec.seed);
  const auto model = testkit::fit_reference_model(raw, known.size());
  const auto train = testkit::embed(model, raw, "t");
  BuildConfig cfg;
  cfg.seed = spec.seed;
  const auto tree = build_eb_tree(train.dataset, train.predictions, cfg).tree;

  auto novel_raw = testkit::sample_raw(spec, unseen, 1000, spec.seed + 1);
  const auto known_raw = testkit::sample_raw(spec, known, 200, spec.seed + 2);
  novel_raw.x.insert(novel_raw.x.end(), known_raw.x.begin(), known_raw.x.end());
  novel_raw.y.insert(novel_raw.y.end(), known_raw.y.begin(), known_raw.y.end());
  const auto stream = testkit::embed(model, novel_raw, "s");

  const NoveltyConfig ncfg;  // threshold 0.01
  const auto cohorts = route_training_points(tree, train.dataset, ncfg);
  const auto report = detect_stream(tree, cohorts, stream.dataset, ncfg);
  std::size_t detected = 0, false_flags = 0;
  for (std::size_t i = 0; i < report.verdicts.size(); ++i) {
    (i < 1000 ? detected : false_flags) += report.verdicts[i].is_novel;
  }
  const double det = static_cast<double>(detected) / 1000.0;
  const double ff = static_cast<double>(false_flags) / 1000.0;

  Outcome o;
  o.pass = det >= 0.90 && ff <= 0.05 && report.savings_ratio >= 0.80;
  o.detail = fmt("tree %zu nodes; held-out class detected %.3f (need >= 0.90), in-distribution flagged %.3f "
                 "(need <= 0.05), savings %.4f (need >= 0.80)",
                 tree.size(), det, ff, report.savings_ratio);
  return o;
}

// ---------------------------------------------------------------------------

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

// Direct transcription of the conformal definitions, sharing nothing with the library.
double oracle_p(const std::vector<std::vector<double>>& members, const std::vector<double>& z) {
  const std::size_t m = members.size();
  double az = 0.0;
  for (const auto& d : members) az += tv(z, d);
  az /= static_cast<double>(m);
  std::size_t count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double ai = 0.0;
    if (m > 1) {
      for (std::size_t j = 0; j < m; ++j) {
        if (j != i) ai += tv(members[i], members[j]);
      }
      ai /= static_cast<double>(m - 1);
    }
    if (ai >= az) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(m);
}

std::vector<double> random_distribution(Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) s += (x = -std::log(1.0 - rng.uniform()));
  for (auto& x : v) x /= s;
  return v;
}

NodeCohort make_cohort(const std::vector<std::vector<double>>& members, std::size_t family) {
  NodeCohort c;
  std::vector<NodeId> fam(family);
  for (std::size_t i = 0; i < family; ++i) fam[i] = i;
  for (std::size_t i = 0; i < members.size(); ++i) {
    c.members.push_back(i);
    c.distributions.push_back(LocalDistribution{fam, members[i]});
  }
  c.alphas = leave_one_out_alphas(c.distributions, NoveltyStatistic::kTotalVariation);
  return c;
}

Outcome conformal_arithmetic() {
  Rng rng(4242);
  int exact = 0;
  bool in_range = true;
  for (int t = 0; t < 50; ++t) {
    const std::size_t family = 1 + rng.below(6);
    const std::size_t m = 1 + rng.below(30);
    std::vector<std::vector<double>> members;
    for (std::size_t i = 0; i < m; ++i) members.push_back(random_distribution(rng, family));
    // Every fifth cohort scores one of its own members.
    const auto z = t % 5 == 0 ? members[rng.below(m)] : random_distribution(rng, family);
    const NodeCohort c = make_cohort(members, family);
    std::vector<NodeId> fam(family);
    for (std::size_t i = 0; i < family; ++i) fam[i] = i;
    const double p = p_value(c, LocalDistribution{fam, z}, NoveltyStatistic::kTotalVariation).p_value;
    exact += p == oracle_p(members, z);
    in_range = in_range && p >= 0.0 && p <= 1.0;
  }

  // p = 1: identical members and an identical query.
  const std::vector<std::vector<double>> same(6, {0.2, 0.3, 0.5});
  const double p_one = p_value(make_cohort(same, 3), LocalDistribution{{0, 1, 2}, {0.2, 0.3, 0.5}},
                               NoveltyStatistic::kTotalVariation)
                           .p_value;
  // p = 0: a query less conforming than every member.
  const double p_zero = p_value(make_cohort(same, 3), LocalDistribution{{0, 1, 2}, {1.0, 0.0, 0.0}},
                                NoveltyStatistic::kTotalVariation)
                            .p_value;

  Outcome o;
  o.pass = exact == 50 && in_range && p_one == 1.0 && p_zero == 0.0;
  o.detail = fmt("%d/50 cohorts equal to the brute-force oracle, p in [0,1]: %s, endpoints p=%g and p=%g", exact,
                 in_range ? "yes" : "no", p_one, p_zero);
  return o;
}

// ---------------------------------------------------------------------------

Outcome formats() {
  testkit::SyntheticSpec spec;
  spec.num_classes = 4;
  spec.points_per_class = 100;
  spec.seed = 9;
  const auto g = testkit::generate(spec);
  BuildConfig cfg;
  cfg.seed = 9;
  const auto tree = build_eb_tree(g.dataset, g.predictions, cfg).tree;

  const std::string json = io::tree_to_json(tree);
  const std::string again = io::tree_to_json(io::tree_from_json(json));
  const bool tree_ok = json == again;

  std::ostringstream csv;
  io::write_embeddings(csv, g.dataset, g.predictions);
  std::istringstream in(csv.str());
  const auto parsed = io::parse_embeddings(in);
  const bool csv_ok = parsed.dataset == g.dataset && parsed.predictions == g.predictions && parsed.has_predictions;

  const auto fixture = fixtures::ten_node_tree();
  const bool dot_ok = export_dot(fixture) == fixtures::read_file(fixtures::golden_dir() / "tree10.dot");
  const auto e = explain_prediction(fixture, fixtures::pt("q", "A", {2.5, 7.5}));
  const bool path_ok = export_dot(fixture, &e) == fixtures::read_file(fixtures::golden_dir() / "tree10_path.dot");

  Outcome o;
  o.pass = tree_ok && csv_ok && dot_ok && path_ok;
  o.detail = fmt("tree JSON byte-identical: %s; embeddings value-stable: %s; DOT golden: %s; path DOT golden: %s",
                 tree_ok ? "yes" : "no", csv_ok ? "yes" : "no", dot_ok ? "yes" : "no", path_ok ? "yes" : "no");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"structural invariants", structural_invariants},
      {"max-margin correctness", max_margin},
      {"LSH quality", lsh_quality},
      {"model-mimicking economy", model_mimicking},
      {"conformal detection", conformal_detection},
      {"conformal arithmetic", conformal_arithmetic},
      {"formats", formats},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
