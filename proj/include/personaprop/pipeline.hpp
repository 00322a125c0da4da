#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "personaprop/catalog.hpp"
#include "personaprop/exact.hpp"
#include "personaprop/graph.hpp"
#include "personaprop/io.hpp"
#include "personaprop/labeling.hpp"
#include "personaprop/persona_matrix.hpp"
#include "personaprop/reverse_push.hpp"

namespace personaprop {

enum class SolverKind { Exact, RevAff };

struct PipelineConfig {
  // Budget: fraction of |U| when budget_fraction >= 0, absolute count
  // otherwise. Must cover at least one user per iteration.
  double budget_fraction = -1.0;
  std::uint64_t budget = 0;

  std::uint32_t iterations = 10;  // T
  std::uint32_t cutoff = 5;       // k, final personas per user
  std::uint32_t walk_cap = 1;
  double beta = 0.5;
  double epsilon = 0.001;
  SolverKind solver = SolverKind::RevAff;
  std::uint64_t seed = 0;
  std::uint32_t k_max = 5;  // persona cap in the labeling prompt
  NodeId dense_user_limit = 20000;
  unsigned threads = 0;
  double smoothing_delta = 1e-12;

  std::uint64_t resolve_budget(NodeId user_count) const;
  void validate(NodeId user_count) const;
};

struct IterationReport {
  std::uint32_t iteration = 0;
  std::size_t requested = 0;
  std::size_t labeled = 0;
  std::size_t zero_label = 0;  // unrepresentable answers
  std::size_t failed = 0;
  std::size_t calls = 0;  // labeler invocations, cache hits excluded
  double solver_ms = 0.0;
  std::uint64_t pushes = 0;
};

struct RunReport {
  std::uint64_t budget = 0;
  std::uint64_t budget_spent = 0;
  std::vector<IterationReport> iterations;
  std::size_t prototypes = 0;
  std::size_t unrepresentable = 0;
  std::size_t propagated = 0;
  std::size_t unreached = 0;
  std::vector<std::string> warnings;
  double total_ms = 0.0;
};

struct RunResult {
  PersonaMatrix pa;
  AffinityMatrix affinity;
  SolveReport solver_report;
  RunReport report;
};

// Indices of the k largest strictly-positive entries, ascending; ties break
// toward the smaller persona index. All-zero rows return the empty set: such
// users are reported as unreached rather than given filler personas.
std::vector<std::uint32_t> assign_topk(std::span<const double> row, std::uint32_t k);

// Full orchestration: T rounds of sample -> label -> affinity recompute, then
// top-k assignment for every non-prototype user. The label cache doubles as
// the checkpoint, so an aborted run resumes without repeat model calls. If
// every request of an iteration fails, the run aborts (resumable) with
// LabelerError after the cache has been flushed.
RunResult run_pipeline(const GraphBundle& bundle, const PersonaCatalog& catalog,
                       Labeler& labeler, const PipelineConfig& config,
                       LabelCache* cache = nullptr);

// Solver-only path: treats every cached label as a prototype, recomputes the
// affinity and the final assignment without touching the labeler.
RunResult propagate_from_cache(const GraphBundle& bundle, const PersonaCatalog& catalog,
                               const LabelCache& cache, const PipelineConfig& config);

// Item-side labeling for the tripartite export.
std::vector<ItemPersonaEdge> label_items(Labeler& labeler, std::span<const NodeId> items,
                                         const GraphBundle& bundle, const PersonaCatalog& catalog,
                                         std::uint32_t k_max = 5);

void write_run_report_json(std::ostream& out, const RunReport& report);

}  // namespace personaprop
