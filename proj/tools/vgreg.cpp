// vgreg - command-line front end: synth, perturb, mst, register, benchmark.
//
// Exit codes: 0 success, 1 invalid arguments, 2 file or parse error,
// 3 degenerate geometry, 4 matcher failure, 5 any other error.

#include <vgreg/benchmark.hpp>
#include <vgreg/io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vgreg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kDegenerate = 3, kMatcher = 4, kOther = 5 };

class MatcherFailure : public Error {
 public:
  using Error::Error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

json vec_json(const Vec3& p) { return json::array({p.x(), p.y(), p.z()}); }

json mat_json(const Mat3& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) out.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return out;
}

json permutation_json(const Permutation& p) {
  json out = json::array();
  for (auto c : p) out.push_back(c == kUnassigned ? json(nullptr) : json(c));
  return out;
}

json with_history(json provenance, json step) {
  if (!provenance.is_object()) provenance = json::object();
  provenance["history"].push_back(std::move(step));
  return provenance;
}

// ---------------------------------------------------------------------------
// Shared option groups

struct AffinityFlags {
  std::vector<double> alpha{0.5, 0.5};
  std::vector<double> beta{0.25, 0.25, 0.5};
  std::size_t path_samples = 50;

  void add(CLI::App& app) {
    app.add_option("--alpha", alpha, "node weights (coordinates, degree)")->delimiter(',')->expected(2)->capture_default_str();
    app.add_option("--beta", beta, "edge weights (shape, length, energy)")->delimiter(',')->expected(3)->capture_default_str();
    app.add_option("--path-samples", path_samples, "resampled points per path")->capture_default_str()->check(CLI::PositiveNumber);
  }

  [[nodiscard]] AffinityWeights weights() const {
    AffinityWeights w;
    std::copy(alpha.begin(), alpha.end(), w.alpha.begin());
    std::copy(beta.begin(), beta.end(), w.beta.begin());
    w.validate();
    return w;
  }
  [[nodiscard]] DistanceOptions distances() const { return {path_samples}; }
};

struct RigidFlags {
  std::size_t starts = 24;
  double trim = 0.7;
  std::size_t max_iters = 100;
  double tol = 1e-7;
  std::size_t max_points = 2000;
  std::size_t spiral = RigidConfig{}.spiral_starts;
  std::size_t refine = RigidConfig{}.refine_top;

  void add(CLI::App& app) {
    app.add_option("--rigid-starts", starts, "group of initial rotations: 24 or 60")->capture_default_str();
    app.add_option("--spiral-starts", spiral, "extra near-uniform initial rotations")->capture_default_str();
    app.add_option("--refine-top", refine, "starts refined on the full clouds")->capture_default_str();
    app.add_option("--trim", trim, "fraction of closest pairs kept by ICP")->capture_default_str();
    app.add_option("--icp-iters", max_iters, "ICP iteration cap")->capture_default_str();
    app.add_option("--icp-tol", tol, "relative RMSE change to stop ICP")->capture_default_str();
    app.add_option("--max-points", max_points, "subsample cap per cloud (0 keeps all)")->capture_default_str();
  }

  [[nodiscard]] RigidConfig config() const {
    RigidConfig r;
    r.n_rotation_starts = starts;
    r.trim_fraction = trim;
    r.max_iters = max_iters;
    r.tol = tol;
    r.max_points = max_points;
    r.spiral_starts = spiral;
    r.refine_top = refine;
    r.validate();
    return r;
  }
};

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::size_t nodes = 80;
  double nu = 35.0;
  std::uint64_t seed = 1;
  std::string out, tree_out;
  bool labels = false;
};

int cmd_synth(const SynthArgs& a) {
  TreeSpec spec;
  spec.seed = a.seed;
  spec.n_nodes = a.nodes;
  auto tree = generate_tree(spec);
  if (a.labels) {
    std::vector<Node> nodes = tree.nodes();
    for (auto& n : nodes) n.label = "n" + std::to_string(n.id);
    tree = SpatialGraph(std::move(nodes), tree.edges(), DuplicateEdges::reject);
  }
  GvgOptions opt;
  opt.path_spacing = spec.path_spacing;
  opt.potential = potential_for(spec.bbox);
  auto gvg = build_gvg(tree, a.nu, opt);
  json prov = {{"generator", {{"command", "synth"}, {"seed", a.seed}, {"nodes", a.nodes}, {"nu", a.nu},
                              {"labels", a.labels}, {"path_spacing", spec.path_spacing}}}};
  save_graph(a.out, gvg.graph, prov);
  if (!a.tree_out.empty()) save_graph(a.tree_out, tree, prov);
  std::cout << "wrote " << a.out << ": " << gvg.graph.node_count() << " nodes, " << gvg.graph.edge_count()
            << " edges\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// perturb

struct PerturbArgs {
  std::string in, out;
  double deform = 0.0, prune = 0.0;
  std::uint64_t seed = 1;
  std::string prune_mode = "non-bridge-first";
  std::string energies = "reintegrate";
};

int cmd_perturb(const PerturbArgs& a) {
  auto doc = load_graph_document(a.in);
  const auto seeds = perturbation_seeds(0, a.seed);
  DeformOptions dopt;
  dopt.energies = a.energies == "keep" ? EnergyUpdate::keep : EnergyUpdate::reintegrate;
  // synthetic graphs carry the generator's field; anything else gets one sized to its box
  dopt.potential = doc.provenance.contains("generator") ? potential_for(TreeSpec{}.bbox)
                                                        : potential_for(doc.graph.bounding_box());
  const auto mode = a.prune_mode == "uniform" ? PruneMode::uniform : PruneMode::non_bridge_first;
  auto g = prune(deform(doc.graph, a.deform, seeds.deform, dopt), a.prune, seeds.prune, mode);
  auto prov = with_history(doc.provenance, {{"command", "perturb"},
                                            {"deform", a.deform},
                                            {"prune", a.prune},
                                            {"seed", a.seed},
                                            {"prune_mode", a.prune_mode},
                                            {"energies", a.energies}});
  save_graph(a.out, g, prov);
  std::cout << "wrote " << a.out << ": " << g.node_count() << " nodes, " << g.edge_count() << " edges\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// mst

struct MstArgs {
  std::string in, out;
  std::string weight = "energy";
};

int cmd_mst(const MstArgs& a) {
  auto doc = load_graph_document(a.in);
  const auto w = a.weight == "length" ? EdgeWeight::length : EdgeWeight::energy;
  auto r = minimum_spanning_tree(doc.graph, w);
  auto prov = with_history(doc.provenance, {{"command", "mst"}, {"weight", a.weight}});
  save_graph(a.out, r.tree, prov);
  std::cout << "wrote " << a.out << ": " << r.tree.edge_count() << " edges";
  if (r.spanning_forest) std::cout << " (spanning forest, " << r.components << " components)";
  std::cout << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// register

struct RegisterArgs {
  std::string a, b, out_dir = "register_out";
  std::string algorithm = "FGM";
  std::string truth = "none";
  bool no_rigid = false;
  bool deformable = false;
  double tps_lambda = 0.05;
  AffinityFlags affinity;
  RigidFlags rigid;
};

std::string polyline_csv(const SpatialGraph& g) {
  std::ostringstream os;
  os << "edge,a,b,point,x,y,z\n";
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto& ed = g.edges()[e];
    for (std::size_t k = 0; k < ed.path.size(); ++k)
      os << e << ',' << ed.a << ',' << ed.b << ',' << k << ',' << num(ed.path[k].x()) << ',' << num(ed.path[k].y())
         << ',' << num(ed.path[k].z()) << '\n';
  }
  return os.str();
}

std::string matches_csv(const SpatialGraph& A, const SpatialGraph& B, const Permutation& p) {
  std::ostringstream os;
  os << "a,b,ax,ay,az,bx,by,bz\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == kUnassigned) continue;
    const auto& pa = A.node(i).coord;
    const auto& pb = B.node(p[i]).coord;
    os << i << ',' << p[i] << ',' << num(pa.x()) << ',' << num(pa.y()) << ',' << num(pa.z()) << ',' << num(pb.x())
       << ',' << num(pb.y()) << ',' << num(pb.z()) << '\n';
  }
  return os.str();
}

json soft_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_register(const RegisterArgs& a) {
  const auto A = load_graph(a.a);
  const auto B = load_graph(a.b);
  if (A.empty() || B.empty()) throw DegenerateError("register: both graphs need at least one node");

  std::vector<Algorithm> algs;
  if (a.algorithm == "all") algs.assign(kAllAlgorithms.begin(), kAllAlgorithms.end());
  else
    for (const auto& s : split(a.algorithm, ',')) algs.push_back(parse_algorithm(s));
  if (algs.empty()) throw ArgumentError("--algorithm: nothing selected");

  std::optional<GroundTruth> truth;
  if (a.truth == "identity") truth = GroundTruth::identity(std::min(A.node_count(), B.node_count()));
  else if (a.truth == "labels") truth = GroundTruth::from_labels(A, B);
  if (truth && truth->pairs.empty()) throw ArgumentError("--truth " + a.truth + ": no ground-truth pairs");

  AffinityOptions aopt;
  aopt.weights = a.affinity.weights();
  aopt.distances = a.affinity.distances();
  const auto rcfg = a.rigid.config();

  AlignmentReport rep;
  if (!a.no_rigid) rep = rigid_align(collect_point_cloud(A), collect_point_cloud(B), rcfg);
  const auto moved = apply_transform(A, rep.transform);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  json rigid = {{"rotation", mat_json(rep.transform.rotation)},
                {"translation", vec_json(rep.transform.translation)},
                {"trimmed_rmse", rep.trimmed_rmse},
                {"inlier_fraction", rep.inlier_fraction},
                {"starts_evaluated", rep.starts_evaluated},
                {"best_start", rep.best_start},
                {"skipped", a.no_rigid}};
  write_text_file_atomic(dir / "rigid.json", rigid.dump(2) + "\n");
  write_text_file_atomic(dir / "polylines_A.csv", polyline_csv(moved));
  write_text_file_atomic(dir / "polylines_B.csv", polyline_csv(B));

  std::optional<AffinityFactors> factors;
  if (!a.deformable) factors = build_affinity(moved, B, aopt);

  json summary = {{"a", a.a},
                  {"b", a.b},
                  {"alpha", a.affinity.alpha},
                  {"beta", a.affinity.beta},
                  {"path_samples", a.affinity.path_samples},
                  {"rigid", rigid},
                  {"deformable", a.deformable},
                  {"results", json::array()}};
  bool failed = false;
  for (auto alg : algs) {
    const std::string name(algorithm_name(alg));
    MatcherConfig mc;
    mc.algorithm = alg;
    Assignment res;
    json stages = json::array();
    SpatialGraph final_a = moved;
    try {
      if (a.deformable) {
        DeformableConfig dc;
        dc.matcher = mc;
        dc.affinity = aopt;
        dc.tps_lambda = a.tps_lambda;
        auto d = deformable_match(moved, B, dc);
        for (std::size_t k = 0; k < d.transforms.size(); ++k)
          stages.push_back({{"transform", transform_kind_name(d.transforms[k].kind)}, {"objective", d.objectives[k + 1]}});
        res = std::move(d.assignment);
        final_a = std::move(d.warped);
      } else {
        res = run_matcher(*factors, mc);
      }
    } catch (const std::exception& e) {
      std::cerr << name << ": matcher failed: " << e.what() << '\n';
      summary["results"].push_back({{"algorithm", name}, {"error", e.what()}});
      failed = true;
      continue;
    }
    json r = {{"algorithm", name},
              {"objective", res.objective},
              {"converged", res.converged},
              {"iterations", res.iterations},
              {"assigned", res.assigned_count()}};
    if (truth) r["accuracy"] = matching_accuracy(res, *truth);
    if (a.deformable) r["stages"] = stages;
    json full = r;
    full["permutation"] = permutation_json(res.permutation);
    full["soft"] = soft_json(res.soft);
    write_text_file_atomic(dir / ("assignment_" + name + ".json"), full.dump(1) + "\n");
    write_text_file_atomic(dir / ("matches_" + name + ".csv"), matches_csv(final_a, B, res.permutation));
    summary["results"].push_back(r);
    std::cout << name << ": J = " << num(res.objective);
    if (truth) std::cout << ", accuracy = " << detail::fmt("%.2f", r["accuracy"].get<double>()) << '%';
    if (!res.converged) std::cout << " (not converged)";
    std::cout << '\n';
  }
  write_text_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  if (failed) throw MatcherFailure("at least one matcher failed");
  return kOk;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  std::size_t graphs = 10;
  std::size_t nodes = 80;
  double nu = 35.0;
  std::uint64_t graph_seed = 1;
  std::vector<std::string> inputs;
  std::string levels = "all";
  std::string algorithms = "all";
  std::string kinds = "GVG,MST";
  std::size_t seeds = 5;
  std::uint64_t base_seed = 1;
  std::size_t jobs = 1;
  std::string csv = "benchmark.csv";
  std::string table;
  std::string mst_mode = "from-perturbed-gvg";
  bool deformable = false;
  bool runtime = false;
  AffinityFlags affinity;
  RigidFlags rigid;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  BenchmarkConfig cfg;
  if (a.levels != "all") {
    cfg.cells.clear();
    for (const auto& s : split(a.levels, ',')) cfg.cells.push_back(parse_cell(s));
  }
  if (a.algorithms != "all") {
    cfg.algorithms.clear();
    for (const auto& s : split(a.algorithms, ',')) cfg.algorithms.push_back(parse_algorithm(s));
  }
  cfg.kinds.clear();
  for (const auto& s : split(a.kinds, ',')) {
    if (s == "GVG") cfg.kinds.push_back(GraphKind::GVG);
    else if (s == "MST") cfg.kinds.push_back(GraphKind::MST);
    else throw ArgumentError("--kinds: unknown graph kind '" + s + "'");
  }
  cfg.seeds_per_cell = a.seeds;
  cfg.base_seed = a.base_seed;
  cfg.weights = a.affinity.weights();
  cfg.distances = a.affinity.distances();
  cfg.rigid = a.rigid.config();
  cfg.deformable = a.deformable;
  cfg.mst_mode = a.mst_mode == "perturb-mst" ? MstMode::perturb_mst : MstMode::from_perturbed_gvg;
  cfg.jobs = a.jobs;
  cfg.record_runtime = a.runtime;
  cfg.validate();

  std::vector<SpatialGraph> dataset;
  auto prov = benchmark_provenance(cfg);
  if (!a.inputs.empty()) {
    std::string names;
    for (const auto& f : a.inputs) {
      dataset.push_back(load_graph(f));
      names += (names.empty() ? "" : ";") + f;
    }
    prov.insert(prov.begin(), {"dataset", "files:" + names});
  } else {
    if (a.graphs < 1) throw ArgumentError("--graphs must be >= 1");
    for (std::size_t g = 0; g < a.graphs; ++g) dataset.push_back(synthetic_gvg(a.graph_seed + g, a.nodes, a.nu));
    prov.insert(prov.begin(), {{"dataset", "synthetic"},
                               {"graphs", std::to_string(a.graphs)},
                               {"nodes", std::to_string(a.nodes)},
                               {"nu", num(a.nu)},
                               {"graph_seed", std::to_string(a.graph_seed)}});
  }
  for (const auto& [k, v] : prov) std::cerr << "# " << k << '=' << v << '\n';

  const auto records = run_benchmark(dataset, cfg);
  std::ostringstream csv;
  write_csv(csv, records, prov);
  write_text_file_atomic(a.csv, csv.str());

  std::ostringstream table;
  write_table(table, summarize(records));
  if (!a.table.empty()) write_text_file_atomic(a.table, table.str());
  std::cout << table.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vgreg: attributed spatial graph registration"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a TOML/INI file");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic over-connected graph");
  s->add_option("-n,--nodes", synth.nodes, "nodes")->capture_default_str()->check(CLI::Range(2, 100000));
  s->add_option("--nu", synth.nu, "over-connection radius")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  s->add_option("-o,--out", synth.out, "output graph document")->required();
  s->add_option("--tree-out", synth.tree_out, "also write the underlying tree");
  s->add_flag("--labels", synth.labels, "label nodes n0, n1, ...");

  PerturbArgs perturb;
  auto* p = app.add_subcommand("perturb", "deform and prune a graph");
  p->add_option("-i,--in", perturb.in, "input graph document")->required();
  p->add_option("-o,--out", perturb.out, "output graph document")->required();
  p->add_option("--deform", perturb.deform, "displacement, fraction of bbox diagonal")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  p->add_option("--prune", perturb.prune, "fraction of edges removed")->capture_default_str()->check(CLI::Range(0.0, 0.999999));
  p->add_option("--seed", perturb.seed, "perturbation seed")->capture_default_str();
  p->add_option("--prune-mode", perturb.prune_mode)->capture_default_str()->check(CLI::IsMember({"non-bridge-first", "uniform"}));
  p->add_option("--energies", perturb.energies, "edge energies after deformation")->capture_default_str()->check(CLI::IsMember({"reintegrate", "keep"}));

  MstArgs mst;
  auto* m = app.add_subcommand("mst", "minimum spanning tree of a graph");
  m->add_option("-i,--in", mst.in, "input graph document")->required();
  m->add_option("-o,--out", mst.out, "output graph document")->required();
  m->add_option("--weight", mst.weight)->capture_default_str()->check(CLI::IsMember({"energy", "length"}));

  RegisterArgs reg;
  auto* r = app.add_subcommand("register", "rigid alignment then graph matching of A onto B");
  r->add_option("a", reg.a, "moving graph document")->required();
  r->add_option("b", reg.b, "fixed graph document")->required();
  r->add_option("--out-dir", reg.out_dir, "output directory")->capture_default_str();
  r->add_option("--algorithm", reg.algorithm, "GA, SM, SMAC, PM, IPFP-U, IPFP-SM, RRWM, FGM, a comma list, or all")->capture_default_str();
  r->add_option("--truth", reg.truth, "ground truth for accuracy")->capture_default_str()->check(CLI::IsMember({"none", "identity", "labels"}));
  r->add_flag("--no-rigid", reg.no_rigid, "skip rigid pre-alignment");
  r->add_flag("--deformable", reg.deformable, "alternate matching with similarity, affine and TPS fits");
  r->add_option("--tps-lambda", reg.tps_lambda, "TPS regularization")->capture_default_str();
  reg.affinity.add(*r);
  reg.rigid.add(*r);

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "deformation x pruning x algorithm grid");
  b->add_option("--graphs", bench.graphs, "synthetic graphs")->capture_default_str();
  b->add_option("-n,--nodes", bench.nodes, "nodes per synthetic graph")->capture_default_str();
  b->add_option("--nu", bench.nu, "over-connection radius")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--graph-seed", bench.graph_seed, "seed of the first synthetic graph")->capture_default_str();
  b->add_option("--input", bench.inputs, "graph documents used instead of synthetic graphs");
  b->add_option("--levels", bench.levels, "comma list like D0T0,D40T30, or all")->capture_default_str();
  b->add_option("--algorithms", bench.algorithms, "comma list or all")->capture_default_str();
  b->add_option("--kinds", bench.kinds)->capture_default_str();
  b->add_option("--seeds", bench.seeds, "perturbation seeds per cell")->capture_default_str();
  b->add_option("--base-seed", bench.base_seed)->capture_default_str();
  b->add_option("-j,--jobs", bench.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--csv", bench.csv, "records CSV")->capture_default_str();
  b->add_option("--table", bench.table, "summary table file (also printed)");
  b->add_option("--mst-mode", bench.mst_mode)->capture_default_str()->check(CLI::IsMember({"from-perturbed-gvg", "perturb-mst"}));
  b->add_flag("--deformable", bench.deformable, "use deformable matching");
  b->add_flag("--runtime", bench.runtime, "record matcher runtime (makes the CSV machine dependent)");
  bench.affinity.add(*b);
  bench.rigid.add(*b);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*p) return cmd_perturb(perturb);
    if (*m) return cmd_mst(mst);
    if (*r) return cmd_register(reg);
    if (*b) return cmd_benchmark(bench);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const DegenerateError& e) {
    std::cerr << "error: degenerate geometry: " << e.what() << '\n';
    return kDegenerate;
  } catch (const MatcherFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMatcher;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kUsage;
}
