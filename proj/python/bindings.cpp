#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ebtree/core.hpp"
#include "ebtree/errors.hpp"
#include "ebtree/explain.hpp"
#include "ebtree/io.hpp"
#include "ebtree/margin.hpp"
#include "ebtree/novelty.hpp"
#include "ebtree/stitching.hpp"
#include "ebtree/testkit.hpp"

namespace py = pybind11;
using namespace ebtree;

namespace {

void declare_types(py::module_& m) {
  py::register_exception<Error>(m, "EbtreeError", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", m.attr("EbtreeError").ptr());
  py::register_exception<ParseError>(m, "ParseError", m.attr("EbtreeError").ptr());
  py::register_exception<ValidationError>(m, "ValidationError", m.attr("EbtreeError").ptr());
  py::register_exception<DegenerateDataError>(m, "DegenerateDataError", m.attr("EbtreeError").ptr());
  py::register_exception<InsufficientSupportError>(m, "InsufficientSupportError", m.attr("EbtreeError").ptr());

  py::enum_<DistanceMode>(m, "DistanceMode")
      .value("OWN", DistanceMode::kOwn)
      .value("MIN_ALL", DistanceMode::kMinAll);
  py::enum_<NoveltyStatistic>(m, "NoveltyStatistic")
      .value("TV", NoveltyStatistic::kTotalVariation)
      .value("SKL", NoveltyStatistic::kSymmetricKl);

  py::class_<EmbeddedPoint>(m, "EmbeddedPoint")
      .def(py::init<>())
      .def(py::init([](std::string id, std::string label, Vector embedding, std::string source_ref) {
             return EmbeddedPoint{std::move(id), std::move(label), std::move(embedding), std::move(source_ref)};
           }),
           py::arg("id"), py::arg("label"), py::arg("embedding"), py::arg("source_ref") = "")
      .def_readwrite("id", &EmbeddedPoint::id)
      .def_readwrite("label", &EmbeddedPoint::label)
      .def_readwrite("embedding", &EmbeddedPoint::embedding)
      .def_readwrite("source_ref", &EmbeddedPoint::source_ref);

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def(py::init<std::vector<EmbeddedPoint>>(), py::arg("points"))
      .def("__len__", &LabeledDataset::size)
      .def("__getitem__", [](const LabeledDataset& d, std::size_t i) {
        if (i >= d.size()) throw py::index_error();
        return d[i];
      })
      .def_property_readonly("points", &LabeledDataset::points)
      .def_property_readonly("dimension", &LabeledDataset::dimension)
      .def_property_readonly("classes", &LabeledDataset::classes);

  py::class_<MarginFitConfig>(m, "MarginFitConfig")
      .def(py::init<>())
      .def_readwrite("c", &MarginFitConfig::c)
      .def_readwrite("max_iters", &MarginFitConfig::max_iters)
      .def_readwrite("tolerance", &MarginFitConfig::tolerance)
      .def_readwrite("seed", &MarginFitConfig::seed);

  py::class_<LshConfig>(m, "LshConfig")
      .def(py::init<>())
      .def_readwrite("num_tables", &LshConfig::num_tables)
      .def_readwrite("hashes_per_table", &LshConfig::hashes_per_table)
      .def_readwrite("bucket_width", &LshConfig::bucket_width)
      .def_readwrite("seed", &LshConfig::seed)
      .def_readwrite("segments", &LshConfig::segments);

  py::class_<BuildConfig>(m, "BuildConfig")
      .def(py::init<>())
      .def_readwrite("k", &BuildConfig::k)
      .def_readwrite("lsh", &BuildConfig::lsh)
      .def_readwrite("margin", &BuildConfig::margin)
      .def_readwrite("distance_mode", &BuildConfig::distance_mode)
      .def_readwrite("max_children", &BuildConfig::max_children)
      .def_readwrite("seed", &BuildConfig::seed)
      .def_readonly("baseline", &BuildConfig::baseline);

  py::class_<TreeNode>(m, "TreeNode")
      .def_readonly("node_id", &TreeNode::node_id)
      .def_readonly("point", &TreeNode::point)
      .def_readonly("label", &TreeNode::label)
      .def_readonly("parent", &TreeNode::parent)
      .def_readonly("children", &TreeNode::children);

  py::class_<BoundaryTree>(m, "BoundaryTree")
      .def("__len__", &BoundaryTree::size)
      .def("node", &BoundaryTree::node, py::return_value_policy::copy)
      .def_property_readonly("nodes", [](const BoundaryTree& t) {
        return std::vector<TreeNode>(t.nodes().begin(), t.nodes().end());
      })
      .def_property_readonly("dimension", &BoundaryTree::dimension)
      .def_property_readonly("config", &BoundaryTree::config)
      .def_property_readonly("provenance", &BoundaryTree::provenance)
      .def("to_json", &io::tree_to_json)
      .def_static("from_json", &io::tree_from_json);

  py::class_<PathStep>(m, "PathStep")
      .def_readonly("node_id", &PathStep::node_id)
      .def_readonly("distance", &PathStep::distance);

  py::class_<TraversalPath>(m, "TraversalPath")
      .def_readonly("steps", &TraversalPath::steps)
      .def_readonly("final_node", &TraversalPath::final_node)
      .def_readonly("predicted_label", &TraversalPath::predicted_label)
      .def_readonly("distance_evaluations", &TraversalPath::distance_evaluations);

  py::class_<Hyperplane>(m, "Hyperplane")
      .def_readonly("class_id", &Hyperplane::class_id)
      .def_readonly("w", &Hyperplane::w)
      .def_readonly("b", &Hyperplane::b)
      .def_readonly("margin", &Hyperplane::margin)
      .def_readonly("converged", &Hyperplane::converged);

  py::class_<RankedPoint>(m, "RankedPoint")
      .def_readonly("index", &RankedPoint::index)
      .def_readonly("boundary_distance", &RankedPoint::boundary_distance)
      .def_readonly("rank", &RankedPoint::rank);

  py::class_<BuildResult>(m, "BuildResult")
      .def_readonly("tree", &BuildResult::tree)
      .def_readonly("warnings", &BuildResult::warnings)
      .def_readonly("neighbor_picks", &BuildResult::neighbor_picks)
      .def_readonly("fallback_picks", &BuildResult::fallback_picks)
      .def_readonly("discarded", &BuildResult::discarded);

  py::class_<FidelityReport>(m, "FidelityReport")
      .def_readonly("macro_f", &FidelityReport::macro_f)
      .def_readonly("micro_f", &FidelityReport::micro_f)
      .def_readonly("evaluated", &FidelityReport::evaluated);

  py::class_<PathPoint>(m, "PathPoint")
      .def_readonly("node_id", &PathPoint::node_id)
      .def_readonly("point_id", &PathPoint::point_id)
      .def_readonly("label", &PathPoint::label)
      .def_readonly("truth_label", &PathPoint::truth_label)
      .def_readonly("source_ref", &PathPoint::source_ref)
      .def_readonly("distance", &PathPoint::distance);

  py::class_<Explanation>(m, "Explanation")
      .def_readonly("query_id", &Explanation::query_id)
      .def_readonly("predicted_label", &Explanation::predicted_label)
      .def_readonly("path", &Explanation::path)
      .def_readonly("path_points", &Explanation::path_points)
      .def_readonly("family_parent", &Explanation::family_parent)
      .def_readonly("family_children", &Explanation::family_children)
      .def("to_json", &io::explanation_record);

  py::class_<BoundaryPair>(m, "BoundaryPair")
      .def_readonly("node_a", &BoundaryPair::node_a)
      .def_readonly("node_b", &BoundaryPair::node_b)
      .def_readonly("edge_length", &BoundaryPair::edge_length)
      .def_readonly("ordering_coordinate", &BoundaryPair::ordering_coordinate)
      .def_readonly("a_mislabeled", &BoundaryPair::a_mislabeled)
      .def_readonly("b_mislabeled", &BoundaryPair::b_mislabeled);

  py::class_<BoundarySegment>(m, "BoundarySegment")
      .def_readonly("class_a", &BoundarySegment::class_a)
      .def_readonly("class_b", &BoundarySegment::class_b)
      .def_readonly("pairs", &BoundarySegment::pairs);

  py::class_<NoveltyConfig>(m, "NoveltyConfig")
      .def(py::init<>())
      .def_readwrite("threshold", &NoveltyConfig::threshold)
      .def_readwrite("min_support", &NoveltyConfig::min_support)
      .def_readwrite("temperature", &NoveltyConfig::temperature)
      .def_readwrite("statistic", &NoveltyConfig::statistic);

  py::class_<CohortIndex>(m, "CohortIndex")
      .def("support", [](const CohortIndex& c, NodeId n) { return c.at(n).support(); })
      .def("members", [](const CohortIndex& c, NodeId n) { return c.at(n).members; })
      .def_property_readonly("training_size", &CohortIndex::training_size);

  py::class_<NoveltyVerdict>(m, "NoveltyVerdict")
      .def_readonly("point_id", &NoveltyVerdict::point_id)
      .def_readonly("final_node", &NoveltyVerdict::final_node)
      .def_readonly("predicted_label", &NoveltyVerdict::predicted_label)
      .def_readonly("p_value", &NoveltyVerdict::p_value)
      .def_readonly("alpha", &NoveltyVerdict::alpha)
      .def_readonly("is_novel", &NoveltyVerdict::is_novel)
      .def_readonly("support", &NoveltyVerdict::support)
      .def_readonly("insufficient_support", &NoveltyVerdict::insufficient_support);

  py::class_<DetectionReport>(m, "DetectionReport")
      .def_readonly("verdicts", &DetectionReport::verdicts)
      .def_readonly("flagged", &DetectionReport::flagged)
      .def_readonly("insufficient", &DetectionReport::insufficient)
      .def_readonly("distance_evaluations", &DetectionReport::distance_evaluations)
      .def_readonly("baseline_evaluations", &DetectionReport::baseline_evaluations)
      .def_readonly("savings_ratio", &DetectionReport::savings_ratio);

  py::class_<io::EmbeddingFile>(m, "EmbeddingFile")
      .def_readonly("dataset", &io::EmbeddingFile::dataset)
      .def_readonly("predictions", &io::EmbeddingFile::predictions)
      .def_readonly("has_predictions", &io::EmbeddingFile::has_predictions);
}

void declare_operations(py::module_& m) {
  m.def("euclidean_distance", [](const Vector& a, const Vector& b) { return euclidean_distance(a, b); });
  m.def("traverse", [](const BoundaryTree& t, const Vector& q) { return traverse(t, q); });
  m.def("classify", [](const BoundaryTree& t, const Vector& q) {
    auto c = classify(t, q);
    return py::make_tuple(c.label, c.path);
  });

  m.def(
      "fit_one_vs_all",
      [](const LabeledDataset& d, const std::vector<std::string>& labels, const MarginFitConfig& cfg) {
        return fit_one_vs_all(d, labels, cfg);
      },
      py::arg("dataset"), py::arg("labels"), py::arg("config") = MarginFitConfig{});
  m.def("distance_to_boundary", [](const Vector& x, const Hyperplane& p) { return distance_to_boundary(x, p); });
  m.def(
      "sort_by_boundary_distance",
      [](const LabeledDataset& d, const std::vector<std::string>& labels, const std::vector<Hyperplane>& planes,
         DistanceMode mode) { return sort_by_boundary_distance(d, labels, planes, mode); },
      py::arg("dataset"), py::arg("labels"), py::arg("planes"), py::arg("mode") = DistanceMode::kOwn);

  m.def("build_eb_tree",
        py::overload_cast<const LabeledDataset&, const Predictions&, const BuildConfig&>(&build_eb_tree),
        py::arg("dataset"), py::arg("predictions"), py::arg("config") = BuildConfig{});
  m.def("build_basic_boundary_tree", &build_basic_boundary_tree, py::arg("dataset"), py::arg("predictions"),
        py::arg("shuffle_seed") = 0);
  m.def("fidelity", &fidelity, py::arg("tree"), py::arg("dataset"), py::arg("reference"));
  m.def("error_rate", &error_rate);

  m.def("explain_prediction", &explain_prediction);
  m.def(
      "boundary_projection",
      [](const BoundaryTree& t, const std::string& a, const std::string& b) { return boundary_projection(t, a, b); },
      py::arg("tree"), py::arg("class_a"), py::arg("class_b"));
  m.def(
      "export_dot",
      [](const BoundaryTree& t, const Explanation* e) { return export_dot(t, e); }, py::arg("tree"),
      py::arg("highlight") = nullptr);

  m.def("route_training_points", &route_training_points, py::arg("tree"), py::arg("training"),
        py::arg("config") = NoveltyConfig{});
  m.def("detect_stream", &detect_stream, py::arg("tree"), py::arg("cohorts"), py::arg("stream"),
        py::arg("config") = NoveltyConfig{});

  m.def("load_embeddings", &io::load_embeddings);
  m.def("save_embeddings", &io::save_embeddings);
  m.def("load_tree", &io::load_tree);
  m.def("save_tree", &io::save_tree);

  m.def(
      "generate",
      [](std::size_t classes, std::size_t per_class, double separation, double sigma, std::uint64_t seed,
         std::size_t raw_dimension) {
        testkit::SyntheticSpec spec;
        spec.num_classes = classes;
        spec.points_per_class = per_class;
        spec.cluster_separation = separation;
        spec.noise_sigma = sigma;
        spec.seed = seed;
        spec.raw_dimension = raw_dimension;
        auto g = testkit::generate(spec);
        return py::make_tuple(std::move(g.dataset), std::move(g.predictions));
      },
      py::arg("classes") = 3, py::arg("per_class") = 100, py::arg("separation") = 4.0, py::arg("sigma") = 1.0,
      py::arg("seed") = 0, py::arg("raw_dimension") = 2,
      "Synthetic softmax embeddings; returns (dataset, predictions).");
}

}  // namespace

PYBIND11_MODULE(_ebtree, m) {
  m.doc() = "Explicable boundary trees: build, query, explain and monitor classifier surrogates.";
  declare_types(m);
  declare_operations(m);
}
