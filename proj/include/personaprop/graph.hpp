#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "personaprop/errors.hpp"

namespace personaprop {

using NodeId = std::uint32_t;

enum class Side { User, Item };

enum class EdgeFormat { Csv, Tsv };

// One parsed edge-list row. The purchase count is kept for prompt
// serialization only; transitions stay uniform regardless of multiplicity.
struct EdgeRecord {
  std::string user_id;
  std::string item_id;
  std::uint64_t count = 1;
};

// Immutable user-item purchase graph with dual CSR adjacency. Both directions
// describe the same edge set; adjacency lists are strictly increasing.
// Safe for unsynchronized shared reads once built.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  // Builds from per-user adjacency (items may end up isolated). Counts, when
  // given, must be parallel to user_adj.
  static BipartiteGraph from_adjacency(std::vector<std::vector<NodeId>> user_adj,
                                       NodeId item_count,
                                       std::vector<std::vector<std::uint64_t>> counts = {});

  NodeId user_count() const { return user_count_; }
  NodeId item_count() const { return item_count_; }
  std::size_t edge_count() const { return user_indices_.size(); }

  std::span<const NodeId> items_of(NodeId u) const {
    return {user_indices_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
  }
  std::span<const NodeId> users_of(NodeId v) const {
    return {item_indices_.data() + item_offsets_[v], item_offsets_[v + 1] - item_offsets_[v]};
  }
  std::span<const std::uint64_t> counts_of(NodeId u) const {
    return {edge_counts_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
  }

  NodeId degree(Side side, NodeId node) const {
    return side == Side::User ? user_offsets_[node + 1] - user_offsets_[node]
                              : item_offsets_[node + 1] - item_offsets_[node];
  }

  const std::vector<NodeId>& isolated_users() const { return isolated_users_; }
  const std::vector<NodeId>& isolated_items() const { return isolated_items_; }
  bool has_isolated_nodes() const {
    return !isolated_users_.empty() || !isolated_items_.empty();
  }

  // 1/degree per node; 0 for isolated nodes. Used as gather weights.
  const std::vector<double>& inv_user_degrees() const { return inv_user_deg_; }
  const std::vector<double>& inv_item_degrees() const { return inv_item_deg_; }

  // Raw CSR access for the kernels.
  const std::uint32_t* user_offsets() const { return user_offsets_.data(); }
  const NodeId* user_indices() const { return user_indices_.data(); }
  const std::uint32_t* item_offsets() const { return item_offsets_.data(); }
  const NodeId* item_indices() const { return item_indices_.data(); }

  // Exhaustive invariant check: mutual consistency of the dual adjacency,
  // strict ordering, degree bookkeeping. Full edge scan up to 1e5 edges.
  void validate() const;

 private:
  NodeId user_count_ = 0;
  NodeId item_count_ = 0;
  std::vector<std::uint32_t> user_offsets_;
  std::vector<NodeId> user_indices_;
  std::vector<std::uint64_t> edge_counts_;  // parallel to user_indices_
  std::vector<std::uint32_t> item_offsets_;
  std::vector<NodeId> item_indices_;
  std::vector<double> inv_user_deg_;
  std::vector<double> inv_item_deg_;
  std::vector<NodeId> isolated_users_;
  std::vector<NodeId> isolated_items_;

  void finalize();
};

// External key <-> dense index bijection, first-appearance order.
struct IdMap {
  std::vector<std::string> keys;
  std::unordered_map<std::string, NodeId> index;

  NodeId intern(const std::string& key) {
    auto [it, inserted] = index.emplace(key, static_cast<NodeId>(keys.size()));
    if (inserted) keys.push_back(key);
    return it->second;
  }
  const std::string& key_of(NodeId id) const { return keys[id]; }
};

struct GraphBundle {
  BipartiteGraph graph;
  IdMap users;
  IdMap items;
};

// Parses delimiter-separated `user_id,item_id[,count]` rows. Duplicate
// (user,item) pairs are merged with counts summed. Malformed rows raise
// ParseError naming the 1-based line number.
std::vector<EdgeRecord> load_edges(std::istream& in, EdgeFormat format, bool has_header);

// Dense indices assigned in first-appearance order, so identical input order
// reproduces identical graphs.
GraphBundle build_graph(const std::vector<EdgeRecord>& edges);

// Uniform single-hop transition from `node` to the opposite side:
// 1/degree mass on each neighbor. Throws IsolatedNodeError on degree 0.
std::vector<std::pair<NodeId, double>> walk_step_distribution(const BipartiteGraph& graph,
                                                              Side side, NodeId node);

// Round-trip serialization of the edge list (one row per edge, counts kept).
void write_edge_file(const GraphBundle& bundle, std::ostream& out, EdgeFormat format,
                     bool header);

// Two-column sidecar: dense index <tab> external key.
void write_id_map(const IdMap& map, std::ostream& out);

GraphBundle load_graph_file(const std::string& path, EdgeFormat format, bool has_header);

}  // namespace personaprop
