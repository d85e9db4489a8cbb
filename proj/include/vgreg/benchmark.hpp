// benchmark.hpp - the synthetic deformation x pruning x algorithm grid,
// its CSV export and the mean/SD/median summary table.
#pragma once

#include "deformable.hpp"
#include "eval.hpp"
#include "rigid.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace vgreg {

struct Cell {
  double deform = 0.0;
  double prune = 0.0;
  auto operator<=>(const Cell&) const = default;
};

/// "D40T30" for deform 0.4, prune 0.3.
inline std::string cell_name(const Cell& c) {
  return "D" + std::to_string(static_cast<int>(std::lround(c.deform * 100))) + "T" +
         std::to_string(static_cast<int>(std::lround(c.prune * 100)));
}

inline Cell parse_cell(std::string_view s) {
  auto fail = [&] { return ArgumentError("cannot parse level '" + std::string(s) + "' (expected e.g. D40T30)"); };
  const auto t = s.find('T');
  if (s.size() < 4 || s[0] != 'D' || t == std::string_view::npos || t < 2 || t + 1 >= s.size()) throw fail();
  auto number = [&](std::string_view part) {
    int v = 0;
    for (char ch : part) {
      if (ch < '0' || ch > '9') throw fail();
      v = v * 10 + (ch - '0');
    }
    if (v > 100) throw fail();
    return v / 100.0;
  };
  return {number(s.substr(1, t - 1)), number(s.substr(t + 1))};
}

/// Cross product of deformation and pruning levels.
inline std::vector<Cell> full_grid(const std::vector<double>& deform = {0.0, 0.3, 0.4, 0.5},
                                   const std::vector<double>& prune = {0.0, 0.3, 0.4, 0.5}) {
  std::vector<Cell> out;
  for (double d : deform)
    for (double t : prune) out.push_back({d, t});
  return out;
}

enum class GraphKind { GVG, MST };

inline std::string_view kind_name(GraphKind k) { return k == GraphKind::GVG ? "GVG" : "MST"; }

/// How the tree variant of a perturbed pair is produced.
enum class MstMode {
  from_perturbed_gvg,  // MST(perturb(GVG)) against MST(GVG)
  perturb_mst,         // perturb(MST(GVG)) against MST(GVG)
};

struct ExperimentRecord {
  std::size_t graph_id = 0;
  Algorithm algorithm = Algorithm::FGM;
  GraphKind kind = GraphKind::GVG;
  Cell cell;
  std::uint64_t seed = 0;
  std::optional<double> accuracy;  // missing for failed runs
  std::optional<double> runtime_ms;
  double objective = 0.0;
  std::string status = "ok";  // ok | unconverged | error: ...

  [[nodiscard]] bool failed() const { return !accuracy.has_value(); }
};

struct BenchmarkConfig {
  std::vector<Cell> cells = full_grid();
  std::vector<Algorithm> algorithms{kAllAlgorithms.begin(), kAllAlgorithms.end()};
  std::vector<GraphKind> kinds = {GraphKind::GVG, GraphKind::MST};
  std::size_t seeds_per_cell = 5;
  std::uint64_t base_seed = 1;
  AffinityWeights weights{};
  DistanceOptions distances{};
  RigidConfig rigid = [] {
    RigidConfig r;
    r.max_points = 2000;
    return r;
  }();
  MatcherConfig matcher{};
  bool deformable = false;
  std::vector<TransformKind> schedule = default_schedule();
  MstMode mst_mode = MstMode::from_perturbed_gvg;
  EdgeWeight mst_weight = EdgeWeight::energy;
  std::size_t jobs = 1;
  bool record_runtime = false;

  void validate() const {
    if (cells.empty() || algorithms.empty() || kinds.empty())
      throw ArgumentError("benchmark: cells, algorithms and kinds must be non-empty");
    if (seeds_per_cell < 1) throw ArgumentError("benchmark: seeds_per_cell must be >= 1");
    if (jobs < 1) throw ArgumentError("benchmark: jobs must be >= 1");
    for (const auto& c : cells) {
      if (!(c.deform >= 0.0 && c.deform <= 1.0)) throw ArgumentError("benchmark: deform level must be in [0, 1]");
      if (!(c.prune >= 0.0 && c.prune < 1.0)) throw ArgumentError("benchmark: prune level must be in [0, 1)");
    }
    weights.validate();
    rigid.validate();
    matcher.validate();
  }
};

/// Seeds of the displacement field and of the pruning draw for one
/// (graph, seed) pair. They do not depend on the level, so cells sharing a
/// deformation level share the field.
struct PerturbationSeeds {
  std::uint64_t deform = 0;
  std::uint64_t prune = 0;
};

inline PerturbationSeeds perturbation_seeds(std::size_t graph_id, std::uint64_t seed) {
  const std::uint64_t base = Rng::mix(Rng::mix(seed) ^ (static_cast<std::uint64_t>(graph_id) * 0x9E3779B97F4A7C15ULL));
  return {Rng::mix(base ^ 0xD1B54A32D192ED03ULL), Rng::mix(base ^ 0x8CB92BA72F3D8DD7ULL)};
}

/// Deform then prune.
inline SpatialGraph perturb(const SpatialGraph& g, const Cell& c, const PerturbationSeeds& s) {
  return prune(deform(g, c.deform, s.deform), c.prune, s.prune);
}

/// The (moving, fixed) graphs of one benchmark run.
inline std::pair<SpatialGraph, SpatialGraph> benchmark_pair(const SpatialGraph& gvg, GraphKind kind, const Cell& c,
                                                            const PerturbationSeeds& s, MstMode mode,
                                                            EdgeWeight weight) {
  if (kind == GraphKind::GVG) return {perturb(gvg, c, s), gvg};
  SpatialGraph tree = minimum_spanning_tree(gvg, weight).tree;
  if (mode == MstMode::perturb_mst) return {perturb(tree, c, s), tree};
  return {minimum_spanning_tree(perturb(gvg, c, s), weight).tree, tree};
}

namespace detail {

struct BenchTask {
  std::size_t graph_id;
  Cell cell;
  std::uint64_t seed;
  GraphKind kind;
};

inline std::string sanitize(std::string s) {
  for (auto& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ' ';
  return s;
}

inline std::vector<ExperimentRecord> run_task(const SpatialGraph& gvg, const BenchTask& t, const BenchmarkConfig& cfg) {
  std::vector<ExperimentRecord> out;
  auto record = [&](Algorithm a) {
    ExperimentRecord r;
    r.graph_id = t.graph_id;
    r.algorithm = a;
    r.kind = t.kind;
    r.cell = t.cell;
    r.seed = t.seed;
    return r;
  };
  std::optional<AffinityFactors> factors;
  SpatialGraph moving, fixed;
  std::string setup_error;
  try {
    auto [a, b] = benchmark_pair(gvg, t.kind, t.cell, perturbation_seeds(t.graph_id, t.seed), cfg.mst_mode,
                                 cfg.mst_weight);
    const auto rep = rigid_align(collect_point_cloud(a), collect_point_cloud(b), cfg.rigid);
    moving = apply_transform(a, rep.transform);
    fixed = std::move(b);
    AffinityOptions opt;
    opt.weights = cfg.weights;
    opt.distances = cfg.distances;
    if (!cfg.deformable) factors = build_affinity(moving, fixed, opt);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  const auto truth = GroundTruth::identity(gvg.node_count());
  for (const auto alg : cfg.algorithms) {
    auto r = record(alg);
    if (!setup_error.empty()) {
      r.status = "error: " + sanitize(setup_error);
      out.push_back(std::move(r));
      continue;
    }
    try {
      MatcherConfig mc = cfg.matcher;
      mc.algorithm = alg;
      const auto t0 = std::chrono::steady_clock::now();
      Assignment a;
      if (cfg.deformable) {
        DeformableConfig dc;
        dc.matcher = mc;
        dc.affinity.weights = cfg.weights;
        dc.affinity.distances = cfg.distances;
        dc.schedule = cfg.schedule;
        a = deformable_match(moving, fixed, dc).assignment;
      } else {
        a = run_matcher(*factors, mc);
      }
      const auto t1 = std::chrono::steady_clock::now();
      if (cfg.record_runtime) r.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      r.objective = a.objective;
      if (a.converged) {
        r.accuracy = matching_accuracy(a, truth);
      } else {
        r.status = "unconverged";
      }
    } catch (const std::exception& e) {
      r.status = "error: " + sanitize(e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

/// Canonical record order: graph, level, algorithm, seed, kind.
inline bool record_less(const ExperimentRecord& a, const ExperimentRecord& b) {
  auto alg_index = [](Algorithm x) { return static_cast<int>(x); };
  return std::tuple(a.graph_id, a.cell, alg_index(a.algorithm), a.seed, static_cast<int>(a.kind)) <
         std::tuple(b.graph_id, b.cell, alg_index(b.algorithm), b.seed, static_cast<int>(b.kind));
}

/// Runs every (graph, level, seed, kind) task on `cfg.jobs` threads. The
/// result is sorted canonically and does not depend on the thread count.
inline std::vector<ExperimentRecord> run_benchmark(const std::vector<SpatialGraph>& dataset,
                                                   const BenchmarkConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw ArgumentError("run_benchmark: empty dataset");
  std::vector<detail::BenchTask> tasks;
  for (std::size_t g = 0; g < dataset.size(); ++g)
    for (const auto& c : cfg.cells)
      for (std::size_t s = 0; s < cfg.seeds_per_cell; ++s)
        for (const auto k : cfg.kinds) tasks.push_back({g, c, cfg.base_seed + s, k});

  std::vector<std::vector<ExperimentRecord>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++)
      results[i] = detail::run_task(dataset[tasks[i].graph_id], tasks[i], cfg);
  };
  const std::size_t threads = std::min(cfg.jobs, tasks.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<ExperimentRecord> out;
  for (auto& r : results)
    for (auto& rec : r) out.push_back(std::move(rec));
  std::stable_sort(out.begin(), out.end(), record_less);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader =
    "graph_id,algorithm,kind,deform,prune,seed,accuracy,runtime_ms,objective,status";

namespace detail {
inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
}  // namespace detail

/// Provenance lines ("# key=value") followed by the fixed header and one row
/// per record. Missing values are empty fields.
inline void write_csv(std::ostream& os, const std::vector<ExperimentRecord>& records,
                      const std::vector<std::pair<std::string, std::string>>& provenance = {}) {
  for (const auto& [k, v] : provenance) os << "# " << k << '=' << v << '\n';
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.graph_id << ',' << algorithm_name(r.algorithm) << ',' << kind_name(r.kind) << ','
       << detail::fmt("%.2f", r.cell.deform) << ',' << detail::fmt("%.2f", r.cell.prune) << ',' << r.seed << ','
       << (r.accuracy ? detail::fmt("%.4f", *r.accuracy) : "") << ','
       << (r.runtime_ms ? detail::fmt("%.3f", *r.runtime_ms) : "") << ',' << detail::fmt("%.17g", r.objective) << ','
       << r.status << '\n';
  }
}

/// Every configuration value that influences the records.
inline std::vector<std::pair<std::string, std::string>> benchmark_provenance(const BenchmarkConfig& c) {
  std::vector<std::pair<std::string, std::string>> p;
  auto num = [](double v) { return detail::fmt("%.17g", v); };
  auto join = [](const auto& items, auto f) {
    std::string s;
    for (const auto& x : items) s += (s.empty() ? "" : ";") + std::string(f(x));
    return s;
  };
  p.emplace_back("levels", join(c.cells, [](const Cell& x) { return cell_name(x); }));
  p.emplace_back("algorithms", join(c.algorithms, [](Algorithm a) { return std::string(algorithm_name(a)); }));
  p.emplace_back("kinds", join(c.kinds, [](GraphKind k) { return std::string(kind_name(k)); }));
  p.emplace_back("seeds_per_cell", std::to_string(c.seeds_per_cell));
  p.emplace_back("base_seed", std::to_string(c.base_seed));
  p.emplace_back("alpha", num(c.weights.alpha[0]) + ";" + num(c.weights.alpha[1]));
  p.emplace_back("beta", num(c.weights.beta[0]) + ";" + num(c.weights.beta[1]) + ";" + num(c.weights.beta[2]));
  p.emplace_back("path_samples", std::to_string(c.distances.path_samples));
  p.emplace_back("rigid.starts", std::to_string(c.rigid.n_rotation_starts));
  p.emplace_back("rigid.trim", num(c.rigid.trim_fraction));
  p.emplace_back("rigid.max_iters", std::to_string(c.rigid.max_iters));
  p.emplace_back("rigid.tol", num(c.rigid.tol));
  p.emplace_back("rigid.max_points", std::to_string(c.rigid.max_points));
  p.emplace_back("deformable", c.deformable ? "1" : "0");
  p.emplace_back("schedule",
                 join(c.schedule, [](TransformKind k) { return std::string(transform_kind_name(k)); }));
  p.emplace_back("mst_mode", c.mst_mode == MstMode::from_perturbed_gvg ? "from_perturbed_gvg" : "perturb_mst");
  p.emplace_back("mst_weight", c.mst_weight == EdgeWeight::energy ? "energy" : "length");
  p.emplace_back("record_runtime", c.record_runtime ? "1" : "0");
  const auto& m = c.matcher;
  p.emplace_back("matcher",
                 "power_max_iters=" + std::to_string(m.power_max_iters) + ";power_tol=" + num(m.power_tol) +
                     ";sinkhorn_iters=" + std::to_string(m.sinkhorn_iters) + ";sinkhorn_tol=" + num(m.sinkhorn_tol) +
                     ";ga_beta0=" + num(m.ga_beta0) + ";ga_rate=" + num(m.ga_rate) + ";ga_beta_max=" +
                     num(m.ga_beta_max) + ";ga_inner_iters=" + std::to_string(m.ga_inner_iters) +
                     ";ipfp_max_iters=" + std::to_string(m.ipfp_max_iters) + ";rrwm_inflation=" +
                     num(m.rrwm_inflation) + ";rrwm_jump=" + num(m.rrwm_jump) + ";rrwm_max_iters=" +
                     std::to_string(m.rrwm_max_iters) + ";rrwm_tol=" + num(m.rrwm_tol) +
                     ";pm_sinkhorn_iters=" + std::to_string(m.pm_sinkhorn_iters) + ";fgm_path_step=" +
                     num(m.fgm_path_step) + ";fgm_inner_iters=" + std::to_string(m.fgm_inner_iters) +
                     ";fgm_tol=" + num(m.fgm_tol));
  return p;
}

// ---------------------------------------------------------------------------
// Summary table

struct SummaryRow {
  Algorithm algorithm = Algorithm::FGM;
  GraphKind kind = GraphKind::GVG;
  Cell cell;
  Summary stats;
  std::size_t failures = 0;
  std::optional<double> p_value;  // GVG vs MST, on MST rows
};

/// Mean/SD/median of accuracy per (algorithm, kind, level); MST rows carry
/// the paired Wilcoxon p value against GVG on the same (graph, seed) runs.
inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw ArgumentError("summarize: no records");
  using Key = std::tuple<int, int, Cell>;
  std::map<Key, std::vector<const ExperimentRecord*>> groups;
  for (const auto& r : records)
    groups[{static_cast<int>(r.algorithm), static_cast<int>(r.kind), r.cell}].push_back(&r);
  std::vector<SummaryRow> rows;
  for (const auto& [key, recs] : groups) {
    SummaryRow row;
    row.algorithm = static_cast<Algorithm>(std::get<0>(key));
    row.kind = static_cast<GraphKind>(std::get<1>(key));
    row.cell = std::get<2>(key);
    std::vector<double> acc;
    for (const auto* r : recs) {
      if (r->accuracy) acc.push_back(*r->accuracy);
      else ++row.failures;
    }
    row.stats = describe(acc);
    if (row.kind == GraphKind::MST) {
      auto it = groups.find({std::get<0>(key), static_cast<int>(GraphKind::GVG), row.cell});
      if (it != groups.end()) {
        std::map<std::pair<std::size_t, std::uint64_t>, double> gvg;
        for (const auto* r : it->second)
          if (r->accuracy) gvg[{r->graph_id, r->seed}] = *r->accuracy;
        std::vector<double> a, b;
        for (const auto* r : recs)
          if (r->accuracy)
            if (auto g = gvg.find({r->graph_id, r->seed}); g != gvg.end()) {
              a.push_back(g->second);
              b.push_back(*r->accuracy);
            }
        if (a.size() >= 2) row.p_value = wilcoxon_signed_rank(a, b).p_value;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

/// "mean ± sd (median)" with one decimal; "-" when every run failed.
inline std::string format_summary_cell(const SummaryRow& r) {
  if (r.stats.count == 0) return "-";
  std::string s = detail::fmt("%.1f", r.stats.mean) + " ± " + detail::fmt("%.1f", r.stats.sd) + " (" +
                  detail::fmt("%.1f", r.stats.median) + ")";
  if (r.p_value && *r.p_value < 0.05) s += " *";
  return s;
}

/// One line per (algorithm, kind), one column per level; "*" marks MST
/// cells that differ from GVG with p < 0.05 (paired Wilcoxon).
inline void write_table(std::ostream& os, const std::vector<SummaryRow>& rows) {
  std::vector<Cell> cells;
  std::vector<std::pair<Algorithm, GraphKind>> lines;
  for (const auto& r : rows) {
    if (std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);
    if (std::find(lines.begin(), lines.end(), std::pair(r.algorithm, r.kind)) == lines.end())
      lines.emplace_back(r.algorithm, r.kind);
  }
  std::sort(cells.begin(), cells.end());
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head = {"algorithm", "kind"};
  for (const auto& c : cells) head.push_back(cell_name(c));
  grid.push_back(head);
  bool any_fail = false;
  for (const auto& [alg, kind] : lines) {
    std::vector<std::string> line = {std::string(algorithm_name(alg)), std::string(kind_name(kind))};
    for (const auto& c : cells) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const SummaryRow& r) { return r.algorithm == alg && r.kind == kind && r.cell == c; });
      std::string s = it == rows.end() ? "" : format_summary_cell(*it);
      if (it != rows.end() && it->failures > 0) {
        s += " [" + std::to_string(it->failures) + " failed]";
        any_fail = true;
      }
      line.push_back(s);
    }
    grid.push_back(line);
  }
  // display width: "±" is two bytes in UTF-8
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> colw(head.size(), 0);
  for (const auto& line : grid)
    for (std::size_t k = 0; k < line.size(); ++k) colw[k] = std::max(colw[k], width(line[k]));
  for (const auto& line : grid) {
    for (std::size_t k = 0; k < line.size(); ++k) {
      os << line[k];
      if (k + 1 < line.size()) os << std::string(colw[k] - width(line[k]) + 2, ' ');
    }
    os << '\n';
  }
  os << "Values are mean ± SD (median) accuracy in %; * = p<0.05 (paired Wilcoxon, MST vs GVG)\n";
  if (any_fail) os << "[n failed] counts runs excluded from the statistics\n";
}

}  // namespace vgreg
