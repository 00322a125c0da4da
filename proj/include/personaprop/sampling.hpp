#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "personaprop/exact.hpp"
#include "personaprop/graph.hpp"

namespace personaprop {

// Normalizes an affinity row into a probability distribution with additive
// smoothing. An all-zero row becomes uniform: exactly the users propagation
// has not reached yet, so they score maximally for labeling.
std::vector<double> normalize_affinity_row(std::span<const double> row, double delta = 1e-12);

// Diversity-uncertainty score: KL(q || q_u) + H(q_u), natural log,
// 0 * log 0 = 0. Nonnegative for valid distributions.
double du_score(std::span<const double> q, std::span<const double> q_u);

struct ScoredUser {
  NodeId user;
  double score;
};

// Scores every pool user against the collected persona distribution q.
std::vector<ScoredUser> du_scores(std::span<const double> q, const AffinityMatrix& affinity,
                                  std::span<const NodeId> pool, double delta = 1e-12);

// Batch selection for iteration t: uniform without replacement at t = 1,
// top-batch_size by score afterwards (ties toward the smaller user index).
// q may be empty when no label has been collected yet; selection then falls
// back to uniform sampling. Returns the whole pool when it is smaller than
// batch_size.
std::vector<NodeId> select_batch(std::uint32_t iteration, std::span<const double> q,
                                 const AffinityMatrix& affinity, std::size_t batch_size,
                                 std::span<const NodeId> pool, std::uint64_t seed);

}  // namespace personaprop
