#include "personaprop/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace personaprop {

namespace {

constexpr std::size_t kExhaustiveScanLimit = 100000;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      fields.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    fields.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

std::vector<EdgeRecord> load_edges(std::istream& in, EdgeFormat format, bool has_header) {
  const char delim = format == EdgeFormat::Csv ? ',' : '\t';
  std::vector<EdgeRecord> records;
  // Key -> position in records, so duplicates merge while first-appearance
  // order is preserved.
  std::map<std::pair<std::string, std::string>, std::size_t> seen;

  std::string line;
  std::size_t line_no = 0;
  bool skip_header = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip_header) {
      skip_header = false;
      continue;
    }
    if (trim(line).empty()) continue;

    auto fields = split_row(line, delim);
    if (fields.size() != 2 && fields.size() != 3) {
      throw ParseError("edge file line " + std::to_string(line_no) + ": expected 2 or 3 fields, got " +
                       std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError("edge file line " + std::to_string(line_no) + ": empty id");
    }
    std::uint64_t count = 1;
    if (fields.size() == 3) {
      errno = 0;
      char* end = nullptr;
      const long long parsed = std::strtoll(fields[2].c_str(), &end, 10);
      if (errno != 0 || end == fields[2].c_str() || *end != '\0' || parsed <= 0) {
        throw ParseError("edge file line " + std::to_string(line_no) + ": count must be a positive integer, got '" +
                         fields[2] + "'");
      }
      count = static_cast<std::uint64_t>(parsed);
    }

    auto key = std::make_pair(fields[0], fields[1]);
    auto it = seen.find(key);
    if (it != seen.end()) {
      records[it->second].count += count;
    } else {
      seen.emplace(std::move(key), records.size());
      records.push_back(EdgeRecord{fields[0], fields[1], count});
    }
  }
  return records;
}

void BipartiteGraph::finalize() {
  inv_user_deg_.assign(user_count_, 0.0);
  inv_item_deg_.assign(item_count_, 0.0);
  isolated_users_.clear();
  isolated_items_.clear();
  for (NodeId u = 0; u < user_count_; ++u) {
    const NodeId d = user_offsets_[u + 1] - user_offsets_[u];
    if (d == 0) {
      isolated_users_.push_back(u);
    } else {
      inv_user_deg_[u] = 1.0 / static_cast<double>(d);
    }
  }
  for (NodeId v = 0; v < item_count_; ++v) {
    const NodeId d = item_offsets_[v + 1] - item_offsets_[v];
    if (d == 0) {
      isolated_items_.push_back(v);
    } else {
      inv_item_deg_[v] = 1.0 / static_cast<double>(d);
    }
  }
}

BipartiteGraph BipartiteGraph::from_adjacency(std::vector<std::vector<NodeId>> user_adj,
                                              NodeId item_count,
                                              std::vector<std::vector<std::uint64_t>> counts) {
  BipartiteGraph g;
  g.user_count_ = static_cast<NodeId>(user_adj.size());
  g.item_count_ = item_count;

  g.user_offsets_.assign(g.user_count_ + 1, 0);
  std::vector<std::uint32_t> item_deg(item_count, 0);
  for (NodeId u = 0; u < g.user_count_; ++u) {
    auto& items = user_adj[u];
    std::sort(items.begin(), items.end());
    if (std::adjacent_find(items.begin(), items.end()) != items.end()) {
      throw BuildError("duplicate edge in adjacency of user " + std::to_string(u));
    }
    g.user_offsets_[u + 1] = g.user_offsets_[u] + static_cast<std::uint32_t>(items.size());
    for (NodeId v : items) {
      if (v >= item_count) throw BuildError("item index out of range");
      ++item_deg[v];
    }
  }
  g.user_indices_.reserve(g.user_offsets_.back());
  g.edge_counts_.reserve(g.user_offsets_.back());
  for (NodeId u = 0; u < g.user_count_; ++u) {
    for (std::size_t k = 0; k < user_adj[u].size(); ++k) {
      g.user_indices_.push_back(user_adj[u][k]);
      g.edge_counts_.push_back(counts.empty() ? 1 : counts[u][k]);
    }
  }

  g.item_offsets_.assign(item_count + 1, 0);
  for (NodeId v = 0; v < item_count; ++v) g.item_offsets_[v + 1] = g.item_offsets_[v] + item_deg[v];
  std::vector<std::uint32_t> cursor(g.item_offsets_.begin(), g.item_offsets_.end() - 1);
  g.item_indices_.resize(g.user_indices_.size());
  for (NodeId u = 0; u < g.user_count_; ++u) {
    for (NodeId v : g.items_of(u)) g.item_indices_[cursor[v]++] = u;
  }
  // Users are visited in increasing order, so each item list comes out sorted.

  g.finalize();
  return g;
}

GraphBundle build_graph(const std::vector<EdgeRecord>& edges) {
  if (edges.empty()) throw BuildError("cannot build a graph from an empty edge list");

  GraphBundle bundle;
  std::vector<std::vector<NodeId>> user_adj;
  std::vector<std::vector<std::uint64_t>> counts;
  NodeId item_count = 0;
  for (const auto& e : edges) {
    if (e.user_id.empty() || e.item_id.empty()) throw BuildError("edge with empty id");
    if (e.count == 0) throw BuildError("edge with zero count");
    const NodeId u = bundle.users.intern(e.user_id);
    const NodeId v = bundle.items.intern(e.item_id);
    if (u >= user_adj.size()) {
      user_adj.resize(u + 1);
      counts.resize(u + 1);
    }
    item_count = std::max(item_count, static_cast<NodeId>(v + 1));
    user_adj[u].push_back(v);
    counts[u].push_back(e.count);
  }
  // Sort each adjacency with its counts attached; duplicates were already
  // merged at load time, but adjacency built directly may carry them.
  for (NodeId u = 0; u < user_adj.size(); ++u) {
    std::vector<std::pair<NodeId, std::uint64_t>> row(user_adj[u].size());
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = {user_adj[u][k], counts[u][k]};
    std::sort(row.begin(), row.end());
    for (std::size_t k = 0; k + 1 < row.size(); ++k) {
      if (row[k].first == row[k + 1].first) {
        throw BuildError("duplicate edge (" + bundle.users.key_of(u) + ", " +
                         bundle.items.key_of(row[k].first) + ") in edge list");
      }
    }
    for (std::size_t k = 0; k < row.size(); ++k) {
      user_adj[u][k] = row[k].first;
      counts[u][k] = row[k].second;
    }
  }

  bundle.graph = BipartiteGraph::from_adjacency(std::move(user_adj), item_count, std::move(counts));
  bundle.graph.validate();
  return bundle;
}

void BipartiteGraph::validate() const {
  if (user_offsets_.size() != user_count_ + 1u || item_offsets_.size() != item_count_ + 1u) {
    throw BuildError("offset arrays inconsistent with node counts");
  }
  if (user_indices_.size() != item_indices_.size()) {
    throw BuildError("edge count mismatch between the two adjacency directions");
  }
  std::uint64_t user_total = 0, item_total = 0;
  for (NodeId u = 0; u < user_count_; ++u) {
    auto items = items_of(u);
    user_total += items.size();
    for (std::size_t k = 0; k + 1 < items.size(); ++k) {
      if (items[k] >= items[k + 1]) throw BuildError("user adjacency not strictly increasing");
    }
  }
  for (NodeId v = 0; v < item_count_; ++v) {
    auto users = users_of(v);
    item_total += users.size();
    for (std::size_t k = 0; k + 1 < users.size(); ++k) {
      if (users[k] >= users[k + 1]) throw BuildError("item adjacency not strictly increasing");
    }
  }
  if (user_total != edge_count() || item_total != edge_count()) {
    throw BuildError("degree sums disagree with |E|");
  }
  if (edge_count() > kExhaustiveScanLimit) return;
  // Mutual consistency: (u,v) in user_adj[u] iff u in item_adj[v].
  for (NodeId u = 0; u < user_count_; ++u) {
    for (NodeId v : items_of(u)) {
      auto users = users_of(v);
      if (!std::binary_search(users.begin(), users.end(), u)) {
        throw BuildError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                         ") missing from item adjacency");
      }
    }
  }
}

std::vector<std::pair<NodeId, double>> walk_step_distribution(const BipartiteGraph& graph,
                                                              Side side, NodeId node) {
  const NodeId deg = graph.degree(side, node);
  if (deg == 0) {
    throw IsolatedNodeError("node " + std::to_string(node) + " is isolated; no walk step exists");
  }
  const double p = 1.0 / static_cast<double>(deg);
  auto neighbors = side == Side::User ? graph.items_of(node) : graph.users_of(node);
  std::vector<std::pair<NodeId, double>> dist;
  dist.reserve(neighbors.size());
  for (NodeId w : neighbors) dist.emplace_back(w, p);
  return dist;
}

void write_edge_file(const GraphBundle& bundle, std::ostream& out, EdgeFormat format,
                     bool header) {
  const char delim = format == EdgeFormat::Csv ? ',' : '\t';
  if (header) out << "user_id" << delim << "item_id" << delim << "count" << '\n';
  const auto& g = bundle.graph;
  for (NodeId u = 0; u < g.user_count(); ++u) {
    auto items = g.items_of(u);
    auto counts = g.counts_of(u);
    for (std::size_t k = 0; k < items.size(); ++k) {
      out << bundle.users.key_of(u) << delim << bundle.items.key_of(items[k]) << delim
          << counts[k] << '\n';
    }
  }
}

void write_id_map(const IdMap& map, std::ostream& out) {
  for (NodeId i = 0; i < map.keys.size(); ++i) out << i << '\t' << map.keys[i] << '\n';
}

GraphBundle load_graph_file(const std::string& path, EdgeFormat format, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open edge file: " + path);
  return build_graph(load_edges(in, format, has_header));
}

}  // namespace personaprop
