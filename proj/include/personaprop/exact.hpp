#pragma once

#include <cstdint>
#include <vector>

#include "personaprop/graph.hpp"
#include "personaprop/persona_matrix.hpp"

namespace personaprop {

// Dense user-by-user attention: the mean over round-trip lengths 1..walk_cap
// of the walk-endpoint distributions. The identity (length 0) term is
// excluded; a user's own label reaches it only through an actual round trip.
struct AttentionMatrix {
  std::vector<double> values;  // row-major user x user
  NodeId user_count = 0;
  std::uint32_t walk_cap = 1;
  bool had_isolated_users = false;  // isolated rows are all-zero

  double at(NodeId i, NodeId k) const { return values[std::size_t(i) * user_count + k]; }
};

// User-by-persona affinity scores with the recorded error bound (0 when
// computed exactly).
struct AffinityMatrix {
  std::vector<double> values;  // row-major user x persona
  NodeId user_count = 0;
  std::uint32_t persona_count = 0;
  double epsilon = 0.0;
  std::uint32_t walk_cap = 1;

  double at(NodeId u, std::uint32_t m) const { return values[std::size_t(u) * persona_count + m]; }
  const double* row(NodeId u) const { return values.data() + std::size_t(u) * persona_count; }
};

struct ExactOptions {
  // Materializing user x user refuses above this; large graphs go through the
  // reverse-push solver instead.
  NodeId dense_user_limit = 20000;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Materializes the attention matrix row by row. Throws BuildError when the
// user count exceeds options.dense_user_limit.
AttentionMatrix attention(const BipartiteGraph& graph, std::uint32_t walk_cap,
                          const ExactOptions& options = {});

// Exact affinity column by column, never materializing user x user:
// walk_cap alternating-side averaging passes applied to each label column.
// Serves as the correctness oracle for the approximate solver.
AffinityMatrix exact_affinity(const BipartiteGraph& graph, const LabelMatrix& label,
                              std::uint32_t walk_cap, unsigned threads = 0);

// Monte-Carlo estimate of one attention row: simulates n_walks round trips of
// every length 1..walk_cap from start_user and averages endpoint frequencies.
// Independent of the closed-form path; used as an oracle against it.
std::vector<double> mc_attention(const BipartiteGraph& graph, NodeId start_user,
                                 std::uint32_t walk_cap, std::size_t n_walks,
                                 std::uint64_t seed);

}  // namespace personaprop
