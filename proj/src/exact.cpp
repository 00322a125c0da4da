#include "personaprop/exact.hpp"

#include <algorithm>
#include <random>
#include <thread>

#include "personaprop/errors.hpp"
#include "personaprop/kernels.hpp"

namespace personaprop {

namespace {

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Static chunking over [0, n); fn(begin, end) per worker.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::min<std::size_t>(threads, n);
  if (threads <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::size_t(t) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

AttentionMatrix attention(const BipartiteGraph& graph, std::uint32_t walk_cap,
                          const ExactOptions& options) {
  if (walk_cap < 1) throw ConfigError("walk_cap must be >= 1");
  if (graph.user_count() == 0) throw BuildError("attention on an empty graph");
  if (graph.user_count() > options.dense_user_limit) {
    throw BuildError("refusing to materialize " + std::to_string(graph.user_count()) +
                     "x" + std::to_string(graph.user_count()) +
                     " attention (limit " + std::to_string(options.dense_user_limit) +
                     "); use the reverse-push solver");
  }

  const auto& ops = kernels::active();
  const NodeId n_users = graph.user_count();
  const NodeId n_items = graph.item_count();

  AttentionMatrix att;
  att.user_count = n_users;
  att.walk_cap = walk_cap;
  att.had_isolated_users = !graph.isolated_users().empty();
  att.values.assign(std::size_t(n_users) * n_users, 0.0);

  const double* inv_udeg = graph.inv_user_degrees().data();
  const double* inv_vdeg = graph.inv_item_degrees().data();

  // Row i is the forward distribution from user i: left-multiplication by the
  // two transition matrices, each an adjoint step gathering sources weighted
  // by their own inverse degree.
  parallel_chunks(n_users, resolve_threads(options.threads), [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(n_users), items(n_items), next(n_users);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(x.begin(), x.end(), 0.0);
      x[i] = 1.0;
      double* row = att.values.data() + i * n_users;
      for (std::uint32_t step = 0; step < walk_cap; ++step) {
        ops.csr_weighted_gather(graph.item_offsets(), graph.item_indices(), inv_udeg, x.data(),
                                items.data(), n_items);
        ops.csr_weighted_gather(graph.user_offsets(), graph.user_indices(), inv_vdeg,
                                items.data(), next.data(), n_users);
        x.swap(next);
        ops.axpy(1.0, x.data(), row, n_users);
      }
      ops.scale(1.0 / walk_cap, row, n_users);
    }
  });
  return att;
}

AffinityMatrix exact_affinity(const BipartiteGraph& graph, const LabelMatrix& label,
                              std::uint32_t walk_cap, unsigned threads) {
  if (walk_cap < 1) throw ConfigError("walk_cap must be >= 1");
  for (NodeId u : label.users) {
    if (u >= graph.user_count()) {
      throw BuildError("label matrix row " + std::to_string(u) + " is outside the graph");
    }
  }
  const NodeId n_users = graph.user_count();
  const NodeId n_items = graph.item_count();

  AffinityMatrix aff;
  aff.user_count = n_users;
  aff.persona_count = label.persona_count;
  aff.epsilon = 0.0;
  aff.walk_cap = walk_cap;
  aff.values.assign(std::size_t(n_users) * label.persona_count, 0.0);
  if (label.empty()) return aff;

  const auto& ops = kernels::active();

  parallel_chunks(label.persona_count, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    std::vector<double> items(n_items), next(n_users), acc(n_users);
    for (std::size_t m = begin; m < end; ++m) {
      std::vector<double> x = label.dense_column(static_cast<std::uint32_t>(m), n_users);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::uint32_t step = 0; step < walk_cap; ++step) {
        // One round trip: items average their buyers, users average their items.
        ops.csr_mean_gather(graph.item_offsets(), graph.item_indices(), x.data(), items.data(),
                            n_items);
        ops.csr_mean_gather(graph.user_offsets(), graph.user_indices(), items.data(),
                            next.data(), n_users);
        x.swap(next);
        ops.axpy(1.0, x.data(), acc.data(), n_users);
      }
      for (NodeId u = 0; u < n_users; ++u) {
        aff.values[std::size_t(u) * label.persona_count + m] = acc[u] / walk_cap;
      }
    }
  });
  return aff;
}

std::vector<double> mc_attention(const BipartiteGraph& graph, NodeId start_user,
                                 std::uint32_t walk_cap, std::size_t n_walks,
                                 std::uint64_t seed) {
  if (walk_cap < 1) throw ConfigError("walk_cap must be >= 1");
  if (n_walks < 1) throw ConfigError("n_walks must be >= 1");
  if (graph.degree(Side::User, start_user) == 0) {
    throw IsolatedNodeError("cannot simulate walks from isolated user " +
                            std::to_string(start_user));
  }

  std::mt19937_64 rng(seed);
  std::vector<double> row(graph.user_count(), 0.0);
  for (std::uint32_t len = 1; len <= walk_cap; ++len) {
    std::vector<std::size_t> hits(graph.user_count(), 0);
    for (std::size_t w = 0; w < n_walks; ++w) {
      NodeId user = start_user;
      for (std::uint32_t step = 0; step < len; ++step) {
        auto items = graph.items_of(user);
        const NodeId item = items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
        auto users = graph.users_of(item);
        user = users[std::uniform_int_distribution<std::size_t>(0, users.size() - 1)(rng)];
      }
      ++hits[user];
    }
    for (NodeId u = 0; u < graph.user_count(); ++u) {
      row[u] += static_cast<double>(hits[u]) / static_cast<double>(n_walks);
    }
  }
  for (double& v : row) v /= walk_cap;
  return row;
}

}  // namespace personaprop
