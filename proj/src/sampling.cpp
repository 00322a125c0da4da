#include "personaprop/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "personaprop/errors.hpp"

namespace personaprop {

std::vector<double> normalize_affinity_row(std::span<const double> row, double delta) {
  if (delta <= 0.0) throw ConfigError("smoothing delta must be > 0");
  std::vector<double> q(row.begin(), row.end());
  double total = 0.0;
  for (double v : q) total += v;
  if (total <= 0.0) {
    std::fill(q.begin(), q.end(), 1.0 / static_cast<double>(q.size()));
    return q;
  }
  // Normalize, then smooth and renormalize so every entry stays positive.
  const double denom = 1.0 + delta * static_cast<double>(q.size());
  for (double& v : q) v = (v / total + delta) / denom;
  return q;
}

double du_score(std::span<const double> q, std::span<const double> q_u) {
  double score = 0.0;
  for (std::size_t m = 0; m < q.size(); ++m) {
    if (q[m] > 0.0) score += q[m] * std::log(q[m] / q_u[m]);
    if (q_u[m] > 0.0) score -= q_u[m] * std::log(q_u[m]);
  }
  return score;
}

std::vector<ScoredUser> du_scores(std::span<const double> q, const AffinityMatrix& affinity,
                                  std::span<const NodeId> pool, double delta) {
  std::vector<ScoredUser> scored;
  scored.reserve(pool.size());
  for (const NodeId u : pool) {
    const auto q_u = normalize_affinity_row(
        std::span<const double>(affinity.row(u), affinity.persona_count), delta);
    scored.push_back(ScoredUser{u, du_score(q, q_u)});
  }
  return scored;
}

namespace {

// Partial Fisher-Yates; pinned here (rather than std::sample) so seeded
// selections are reproducible across standard libraries.
std::vector<NodeId> uniform_sample(std::span<const NodeId> pool, std::size_t batch_size,
                                   std::uint64_t seed) {
  std::vector<NodeId> shuffled(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(batch_size, shuffled.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j =
        i + std::uniform_int_distribution<std::size_t>(0, shuffled.size() - 1 - i)(rng);
    std::swap(shuffled[i], shuffled[j]);
  }
  shuffled.resize(take);
  std::sort(shuffled.begin(), shuffled.end());
  return shuffled;
}

}  // namespace

std::vector<NodeId> select_batch(std::uint32_t iteration, std::span<const double> q,
                                 const AffinityMatrix& affinity, std::size_t batch_size,
                                 std::span<const NodeId> pool, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pool.empty()) return {};
  if (iteration <= 1 || q.empty()) return uniform_sample(pool, batch_size, seed);

  std::vector<ScoredUser> scored = du_scores(q, affinity, pool);
  const std::size_t take = std::min(batch_size, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                    [](const ScoredUser& a, const ScoredUser& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.user < b.user;
                    });
  std::vector<NodeId> batch;
  batch.reserve(take);
  for (std::size_t i = 0; i < take; ++i) batch.push_back(scored[i].user);
  std::sort(batch.begin(), batch.end());
  return batch;
}

}  // namespace personaprop
