// ebtree: build, query and inspect explicable boundary trees from embedding files.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include "CLI11.hpp"
#include "ebtree/core.hpp"
#include "ebtree/errors.hpp"
#include "ebtree/explain.hpp"
#include "ebtree/io.hpp"
#include "ebtree/novelty.hpp"
#include "ebtree/stitching.hpp"
#include "ebtree/testkit.hpp"

namespace {

using namespace ebtree;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

struct BuildArgs {
  std::string embeddings;
  std::string out;
  std::size_t k = 32;
  double c = 10.0;
  std::size_t lsh_tables = 8;
  std::size_t lsh_hashes = 4;
  double lsh_width = 1.0;
  std::size_t segments = 16;
  std::string distance_mode = "own";
  std::size_t max_children = 0;
  std::uint64_t seed = 0;
  bool baseline = false;
};

int run_build(const BuildArgs& a) {
  const auto input = io::load_embeddings(a.embeddings);
  const auto start = std::chrono::steady_clock::now();
  BuildResult result;
  if (a.baseline) {
    result = build_basic_boundary_tree(input.dataset, input.predictions, a.seed);
  } else {
    BuildConfig cfg;
    cfg.k = a.k;
    cfg.margin.c = a.c;
    cfg.margin.seed = a.seed;
    cfg.lsh.num_tables = a.lsh_tables;
    cfg.lsh.hashes_per_table = a.lsh_hashes;
    cfg.lsh.bucket_width = a.lsh_width;
    cfg.lsh.segments = a.segments;
    cfg.lsh.seed = a.seed;
    cfg.distance_mode = distance_mode_from_string(a.distance_mode);
    cfg.max_children = a.max_children;
    cfg.seed = a.seed;
    result = build_eb_tree(input.dataset, input.predictions, cfg);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::save_tree(a.out, result.tree);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::printf("nodes %zu of %zu points (%.3f%%)\n", result.tree.size(), input.dataset.size(),
              100.0 * static_cast<double>(result.tree.size()) / static_cast<double>(input.dataset.size()));
  if (!a.baseline) {
    std::printf("candidates: %zu stitched, %zu from queue head, %zu discarded\n", result.neighbor_picks,
                result.fallback_picks, result.discarded);
  }
  std::printf("build time %.3f s\n", seconds);
  return 0;
}

int run_classify(const std::string& tree_path, const std::string& input_path, const std::string& out_path,
                 bool explain) {
  const auto tree = io::load_tree(tree_path);
  const auto input = io::load_embeddings(input_path);
  auto out = open_out(out_path);
  for (const auto& p : input.dataset.points()) {
    if (explain) {
      out << io::explanation_record(explain_prediction(tree, p)) << '\n';
    } else {
      out << io::classification_record(p.id, traverse(tree, p.embedding)) << '\n';
    }
  }
  return 0;
}

int run_fidelity(const std::string& tree_path, const std::string& input_path) {
  const auto tree = io::load_tree(tree_path);
  const auto input = io::load_embeddings(input_path);
  const auto report = fidelity(tree, input.dataset, input.predictions);
  std::printf("macro_f %.6f\nmicro_f %.6f\nerror_rate %.6f\npoints %zu\n", report.macro_f, report.micro_f,
              error_rate(tree, input.dataset), report.evaluated);
  return 0;
}

int run_project(const std::string& tree_path, const std::string& class_a, const std::string& class_b,
                const std::string& out_path, const std::string& dot_path) {
  const auto tree = io::load_tree(tree_path);
  const auto segment = boundary_projection(tree, class_a, class_b);
  open_out(out_path) << io::segment_record(tree, segment);
  if (!dot_path.empty()) open_out(dot_path) << export_dot(tree, segment);
  std::printf("%zu boundary edges between '%s' and '%s'\n", segment.pairs.size(), class_a.c_str(), class_b.c_str());
  return 0;
}

int run_export_dot(const std::string& tree_path, const std::string& out_path, const std::string& path_for,
                   const std::string& input_path) {
  const auto tree = io::load_tree(tree_path);
  if (path_for.empty()) {
    open_out(out_path) << export_dot(tree);
    return 0;
  }
  if (input_path.empty()) throw ValidationError("--path-for needs --input");
  const auto input = io::load_embeddings(input_path);
  const auto idx = input.dataset.find(path_for);
  if (!idx) throw ValidationError("point '" + path_for + "' not found in " + input_path);
  const auto e = explain_prediction(tree, input.dataset[*idx]);
  open_out(out_path) << export_dot(tree, &e);
  return 0;
}

int run_detect(const std::string& tree_path, const std::string& train_path, const std::string& stream_path,
               const std::string& out_path, const NoveltyConfig& cfg) {
  const auto tree = io::load_tree(tree_path);
  const auto train = io::load_embeddings(train_path);
  const auto stream = io::load_embeddings(stream_path);
  const auto cohorts = route_training_points(tree, train.dataset, cfg);
  const auto report = detect_stream(tree, cohorts, stream.dataset, cfg);
  auto out = open_out(out_path);
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_label;  // flagged, total
  for (std::size_t i = 0; i < report.verdicts.size(); ++i) {
    out << io::verdict_record(report.verdicts[i]) << '\n';
    auto& slot = by_label[stream.dataset[i].label];
    slot.first += report.verdicts[i].is_novel;
    ++slot.second;
  }
  std::printf("flagged %zu of %zu (%zu with insufficient support)\n", report.flagged, report.verdicts.size(),
              report.insufficient);
  for (const auto& [label, counts] : by_label) {
    std::printf("  label %s: %zu of %zu flagged\n", label.c_str(), counts.first, counts.second);
  }
  std::printf("distance computations %zu vs %zu full scan, savings %.4f\n", report.distance_evaluations,
              report.baseline_evaluations, report.savings_ratio);
  return 0;
}

int run_gen(const testkit::SyntheticSpec& spec, const std::string& out_path) {
  const auto g = testkit::generate(spec);
  io::save_embeddings(out_path, g.dataset, g.predictions);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explicable boundary trees: compact, example-based surrogates of a classifier"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build", "Build a tree from an embedding file");
  build_cmd->add_option("--embeddings", build.embeddings, "Embedding CSV")->required();
  build_cmd->add_option("--out", build.out, "Tree JSON to write")->required();
  build_cmd->add_option("--k", build.k, "Neighbour candidates per step")->capture_default_str();
  build_cmd->add_option("--c", build.c, "Soft-margin penalty")->capture_default_str();
  build_cmd->add_option("--lsh-tables", build.lsh_tables)->capture_default_str();
  build_cmd->add_option("--lsh-hashes", build.lsh_hashes)->capture_default_str();
  build_cmd->add_option("--lsh-width", build.lsh_width)->capture_default_str();
  build_cmd->add_option("--segments", build.segments)->capture_default_str();
  build_cmd->add_option("--distance-mode", build.distance_mode, "own|min_all")->capture_default_str();
  build_cmd->add_option("--max-children", build.max_children, "0 = unbounded")->capture_default_str();
  build_cmd->add_option("--seed", build.seed)->capture_default_str();
  build_cmd->add_flag("--baseline", build.baseline, "Build a plain boundary tree from a seeded shuffle");

  std::string tree_path, input_path, out_path;
  bool explain = false;
  auto* classify_cmd = app.add_subcommand("classify", "Classify every point of an embedding file");
  classify_cmd->add_option("--tree", tree_path)->required();
  classify_cmd->add_option("--input", input_path)->required();
  classify_cmd->add_option("--out", out_path, "JSONL output")->required();
  classify_cmd->add_flag("--explain", explain, "Write full path explanations");

  auto* fidelity_cmd = app.add_subcommand("fidelity", "F-measure of the tree against the pred column");
  fidelity_cmd->add_option("--tree", tree_path)->required();
  fidelity_cmd->add_option("--input", input_path)->required();

  std::string class_a, class_b, dot_path;
  auto* project_cmd = app.add_subcommand("project", "Edges along the boundary between two classes");
  project_cmd->add_option("--tree", tree_path)->required();
  project_cmd->add_option("--class-a", class_a)->required();
  project_cmd->add_option("--class-b", class_b)->required();
  project_cmd->add_option("--out", out_path)->required();
  project_cmd->add_option("--dot", dot_path);

  std::string path_for;
  auto* dot_cmd = app.add_subcommand("export-dot", "Graphviz rendering of the tree");
  dot_cmd->add_option("--tree", tree_path)->required();
  dot_cmd->add_option("--out", out_path)->required();
  dot_cmd->add_option("--path-for", path_for, "Highlight the path of this point id");
  dot_cmd->add_option("--input", input_path, "Embedding file holding --path-for");

  std::string train_path, stream_path, stat = "tv";
  NoveltyConfig novelty;
  auto* detect_cmd = app.add_subcommand("detect", "Conformal detection of unseen classes in a stream");
  detect_cmd->add_option("--tree", tree_path)->required();
  detect_cmd->add_option("--train", train_path)->required();
  detect_cmd->add_option("--stream", stream_path)->required();
  detect_cmd->add_option("--out", out_path)->required();
  detect_cmd->add_option("--threshold", novelty.threshold)->capture_default_str();
  detect_cmd->add_option("--min-support", novelty.min_support)->capture_default_str();
  detect_cmd->add_option("--tau", novelty.temperature)->capture_default_str();
  detect_cmd->add_option("--stat", stat, "tv|skl")->capture_default_str();

  testkit::SyntheticSpec spec;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic embedding dataset");
  gen_cmd->add_option("--classes", spec.num_classes)->capture_default_str();
  gen_cmd->add_option("--per-class", spec.points_per_class)->capture_default_str();
  gen_cmd->add_option("--sep", spec.cluster_separation)->capture_default_str();
  gen_cmd->add_option("--sigma", spec.noise_sigma)->capture_default_str();
  gen_cmd->add_option("--raw-dim", spec.raw_dimension)->capture_default_str();
  gen_cmd->add_option("--seed", spec.seed)->capture_default_str();
  gen_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*build_cmd) return run_build(build);
    if (*classify_cmd) return run_classify(tree_path, input_path, out_path, explain);
    if (*fidelity_cmd) return run_fidelity(tree_path, input_path);
    if (*project_cmd) return run_project(tree_path, class_a, class_b, out_path, dot_path);
    if (*dot_cmd) return run_export_dot(tree_path, out_path, path_for, input_path);
    if (*detect_cmd) {
      novelty.statistic = novelty_statistic_from_string(stat);
      return run_detect(tree_path, train_path, stream_path, out_path, novelty);
    }
    if (*gen_cmd) return run_gen(spec, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
