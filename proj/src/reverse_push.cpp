#include "personaprop/reverse_push.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <queue>
#include <thread>
#include <unordered_map>

#include "personaprop/errors.hpp"

namespace personaprop {

namespace {

// Hop-local value map. Starts hashed and migrates to a dense array once the
// support crosses half the side's node count.
class HopValues {
 public:
  explicit HopValues(NodeId dim) : dim_(dim) {}

  double get(NodeId i) const {
    if (dense_) return values_[i];
    auto it = map_.find(i);
    return it == map_.end() ? 0.0 : it->second;
  }

  void add(NodeId i, double delta) {
    if (dense_) {
      values_[i] += delta;
      return;
    }
    map_[i] += delta;
    if (map_.size() * 2 > dim_) densify();
  }

  void set_zero(NodeId i) {
    if (dense_) {
      values_[i] = 0.0;
    } else {
      map_.erase(i);
    }
  }

  std::vector<std::pair<NodeId, double>> sorted_entries() const {
    std::vector<std::pair<NodeId, double>> out;
    if (dense_) {
      for (NodeId i = 0; i < dim_; ++i) {
        if (values_[i] != 0.0) out.emplace_back(i, values_[i]);
      }
    } else {
      out.assign(map_.begin(), map_.end());
      std::sort(out.begin(), out.end());
    }
    return out;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    if (dense_) {
      for (NodeId i = 0; i < dim_; ++i) {
        if (values_[i] != 0.0) fn(i, values_[i]);
      }
    } else {
      for (const auto& [i, v] : map_) fn(i, v);
    }
  }

 private:
  void densify() {
    values_.assign(dim_, 0.0);
    for (const auto& [i, v] : map_) values_[i] = v;
    map_.clear();
    dense_ = true;
  }

  NodeId dim_;
  bool dense_ = false;
  std::unordered_map<NodeId, double> map_;
  std::vector<double> values_;
};

struct QueueEntry {
  double value;
  std::uint32_t hop;
  NodeId node;
};

// Max-heap ordering: largest residual first, ties toward the smaller hop then
// the smaller node index.
struct QueueLess {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.value != b.value) return a.value < b.value;
    if (a.hop != b.hop) return a.hop > b.hop;
    return a.node > b.node;
  }
};

}  // namespace

ColumnSolve reverse_push_column(const BipartiteGraph& graph,
                                std::span<const std::pair<NodeId, double>> label_column,
                                double epsilon, std::uint32_t walk_cap,
                                FrontierSnapshot* snapshot) {
  if (walk_cap < 1) throw ConfigError("walk_cap must be >= 1");
  if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
  const auto started = std::chrono::steady_clock::now();

  const std::uint32_t last_hop = 2 * walk_cap;
  const double threshold = epsilon / static_cast<double>(last_hop);

  // Even hops live on the user side, odd hops on the item side.
  std::vector<HopValues> estimates;
  std::vector<HopValues> residuals;
  estimates.reserve(last_hop + 1);
  residuals.reserve(last_hop + 1);
  for (std::uint32_t t = 0; t <= last_hop; ++t) {
    const NodeId dim = (t % 2 == 0) ? graph.user_count() : graph.item_count();
    estimates.emplace_back(dim);
    residuals.emplace_back(dim);
  }

  std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueLess> queue;
  std::size_t live = 0;

  ColumnSolve solve;
  solve.report.epsilon = epsilon;

  for (const auto& [user, weight] : label_column) {
    if (user >= graph.user_count()) {
      throw BuildError("label column user " + std::to_string(user) + " is outside the graph");
    }
    if (weight == 0.0) continue;
    if (weight < 0.0 || weight > 1.0) {
      throw ConfigError("label weights must lie in [0, 1]");
    }
    estimates[0].add(user, weight);
    residuals[0].add(user, weight);
    ++live;
    if (weight >= threshold) queue.push({weight, 0, user});
  }
  solve.report.max_frontier = live;

  while (!queue.empty()) {
    const QueueEntry top = queue.top();
    queue.pop();
    const double current = residuals[top.hop].get(top.node);
    if (current != top.value) continue;  // stale entry

    residuals[top.hop].set_zero(top.node);
    --live;
    ++solve.report.pushes;

    const std::uint32_t next_hop = top.hop + 1;
    const bool to_users = (next_hop % 2 == 0);
    const auto neighbors =
        (top.hop % 2 == 0) ? graph.items_of(top.node) : graph.users_of(top.node);
    for (const NodeId w : neighbors) {
      // The receiving node's degree divides: a walk leaving w picks each of
      // its neighbors uniformly.
      const NodeId deg = to_users ? graph.degree(Side::User, w) : graph.degree(Side::Item, w);
      const double delta = current / static_cast<double>(deg);
      estimates[next_hop].add(w, delta);
      if (next_hop == last_hop) continue;  // terminal residuals are never pushed
      const double before = residuals[next_hop].get(w);
      residuals[next_hop].add(w, delta);
      if (before == 0.0) {
        ++live;
        solve.report.max_frontier = std::max(solve.report.max_frontier, live);
      }
      const double after = before + delta;
      if (after >= threshold && after > 0.0) queue.push({after, next_hop, w});
    }
  }

  // The estimate alone is returned; whatever residual mass was never pushed
  // is exactly the error the threshold accounts for.
  solve.affinity.assign(graph.user_count(), 0.0);
  for (std::uint32_t trip = 1; trip <= walk_cap; ++trip) {
    estimates[2 * trip].for_each(
        [&](NodeId u, double v) { solve.affinity[u] += v; });
  }
  const double inv_cap = 1.0 / static_cast<double>(walk_cap);
  for (double& v : solve.affinity) v *= inv_cap;

  if (snapshot) {
    snapshot->estimates.clear();
    snapshot->residuals.clear();
    for (std::uint32_t t = 0; t <= last_hop; ++t) {
      snapshot->estimates.push_back(estimates[t].sorted_entries());
      snapshot->residuals.push_back(residuals[t].sorted_entries());
    }
  }

  solve.report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return solve;
}

AffinityMatrix reverse_push_all(const BipartiteGraph& graph, const LabelMatrix& label,
                                double epsilon, std::uint32_t walk_cap, SolveReport* report,
                                unsigned threads) {
  const auto started = std::chrono::steady_clock::now();

  AffinityMatrix aff;
  aff.user_count = graph.user_count();
  aff.persona_count = label.persona_count;
  aff.epsilon = epsilon;
  aff.walk_cap = walk_cap;
  aff.values.assign(std::size_t(graph.user_count()) * label.persona_count, 0.0);

  std::vector<PushReport> reports(label.persona_count);
  if (!label.empty()) {
    unsigned workers = threads > 0 ? threads : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<unsigned>(workers, label.persona_count);

    std::atomic<std::uint32_t> next{0};
    auto run = [&] {
      while (true) {
        const std::uint32_t m = next.fetch_add(1);
        if (m >= label.persona_count) break;
        const auto column = label.sparse_column(m);
        ColumnSolve solved = reverse_push_column(graph, column, epsilon, walk_cap);
        reports[m] = solved.report;
        for (NodeId u = 0; u < graph.user_count(); ++u) {
          aff.values[std::size_t(u) * label.persona_count + m] = solved.affinity[u];
        }
      }
    };
    if (workers == 1) {
      run();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run);
      for (auto& th : pool) th.join();
    }
  }

  if (report) {
    report->per_persona = std::move(reports);
    report->total_pushes = 0;
    for (const auto& r : report->per_persona) report->total_pushes += r.pushes;
    report->wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
  }
  return aff;
}

}  // namespace personaprop
