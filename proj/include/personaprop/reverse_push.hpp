#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "personaprop/exact.hpp"
#include "personaprop/graph.hpp"
#include "personaprop/persona_matrix.hpp"

namespace personaprop {

// Telemetry for one approximate column solve.
struct PushReport {
  double epsilon = 0.0;
  std::uint64_t pushes = 0;
  double wall_time_ms = 0.0;
  std::size_t max_frontier = 0;  // peak live residual entries across hops
};

// Final per-hop estimate and residual vectors, for diagnostics and the
// hop-wise error-bound tests. Hop t is supported on users for even t and on
// items for odd t; entries are node-sorted.
struct FrontierSnapshot {
  std::vector<std::vector<std::pair<NodeId, double>>> estimates;  // s_0 .. s_{2*walk_cap}
  std::vector<std::vector<std::pair<NodeId, double>>> residuals;  // p_0 .. p_{2*walk_cap}
};

struct ColumnSolve {
  std::vector<double> affinity;  // dense over users
  PushReport report;
};

// Reverse residual push for one persona column. Starting from the label
// weights at hop 0, residual mass is pushed outward hop by hop: a push from
// node w at hop t adds p_t[w] / degree(neighbor) to each neighbor's hop-t+1
// estimate and residual. Residuals below epsilon / (2 * walk_cap) are never
// pushed, and hop 2*walk_cap is terminal. The returned column averages the
// even-hop user estimates over round-trip lengths 1..walk_cap and deviates
// from the exact column by at most epsilon per entry.
//
// Push order is max-residual-first through a lazy-deletion priority queue;
// ties break toward the smaller hop, then the smaller node index, making the
// solve fully deterministic.
ColumnSolve reverse_push_column(const BipartiteGraph& graph,
                                std::span<const std::pair<NodeId, double>> label_column,
                                double epsilon, std::uint32_t walk_cap,
                                FrontierSnapshot* snapshot = nullptr);

struct SolveReport {
  std::vector<PushReport> per_persona;
  std::uint64_t total_pushes = 0;
  double wall_time_ms = 0.0;
};

// Column-wise application over every persona; columns are independent and run
// concurrently over the shared immutable graph.
AffinityMatrix reverse_push_all(const BipartiteGraph& graph, const LabelMatrix& label,
                                double epsilon, std::uint32_t walk_cap,
                                SolveReport* report = nullptr, unsigned threads = 0);

}  // namespace personaprop
