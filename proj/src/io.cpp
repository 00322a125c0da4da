#include "personaprop/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include "json.hpp"
#include "personaprop/errors.hpp"

namespace personaprop {

void write_affinity_tsv(std::ostream& out, const AffinityMatrix& affinity,
                        const GraphBundle& bundle, const PersonaCatalog& catalog) {
  out << "user_id";
  for (std::uint32_t m = 0; m < catalog.size(); ++m) out << '\t' << catalog.name_of(m);
  out << '\n';
  char buf[32];
  for (NodeId u = 0; u < affinity.user_count; ++u) {
    out << bundle.users.key_of(u);
    for (std::uint32_t m = 0; m < affinity.persona_count; ++m) {
      std::snprintf(buf, sizeof(buf), "%.6f", affinity.at(u, m));
      out << '\t' << buf;
    }
    out << '\n';
  }
}

void write_pa_jsonl(std::ostream& out, const PersonaMatrix& pa, const GraphBundle& bundle,
                    const PersonaCatalog& catalog) {
  for (NodeId u = 0; u < pa.user_count(); ++u) {
    nlohmann::ordered_json doc;
    doc["user"] = bundle.users.key_of(u);
    auto names = nlohmann::ordered_json::array();
    for (std::uint32_t m : pa.personas_of(u)) names.push_back(catalog.name_of(m));
    doc["personas"] = std::move(names);
    const char* source = pa.is_prototype(u)        ? "llm"
                         : doc["personas"].empty() ? "unreached"
                                                   : "propagated";
    doc["source"] = source;
    out << doc.dump() << '\n';
  }
}

void write_scores_tsv(std::ostream& out, std::span<const ScoredUser> scores,
                      const GraphBundle& bundle) {
  char buf[32];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "%.6f", s.score);
    out << bundle.users.key_of(s.user) << '\t' << buf << '\n';
  }
}

void write_solver_report_json(std::ostream& out, const SolveReport& report,
                              const PersonaCatalog& catalog) {
  nlohmann::ordered_json doc;
  doc["total_pushes"] = report.total_pushes;
  doc["wall_time_ms"] = report.wall_time_ms;
  auto personas = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < report.per_persona.size(); ++m) {
    const auto& r = report.per_persona[m];
    personas.push_back({{"persona", catalog.name_of(static_cast<std::uint32_t>(m))},
                        {"epsilon", r.epsilon},
                        {"pushes", r.pushes},
                        {"wall_time_ms", r.wall_time_ms},
                        {"max_frontier", r.max_frontier}});
  }
  doc["per_persona"] = std::move(personas);
  out << doc.dump(2) << '\n';
}

void write_tripartite(std::ostream& out, const GraphBundle& bundle, const PersonaMatrix& pa,
                      const PersonaCatalog& catalog,
                      std::span<const ItemPersonaEdge> item_edges) {
  const auto& g = bundle.graph;
  for (NodeId u = 0; u < g.user_count(); ++u) {
    for (NodeId v : g.items_of(u)) {
      out << "U\t" << bundle.users.key_of(u) << '\t' << bundle.items.key_of(v) << '\n';
    }
  }
  for (NodeId u = 0; u < pa.user_count(); ++u) {
    for (std::uint32_t m : pa.personas_of(u)) {
      out << "P\t" << bundle.users.key_of(u) << '\t' << catalog.name_of(m) << '\n';
    }
  }
  // De-duplicated, order-stable item rows.
  std::map<std::pair<NodeId, std::uint32_t>, bool> seen;
  for (const auto& edge : item_edges) {
    auto item_it = bundle.items.index.find(edge.item_key);
    if (item_it == bundle.items.index.end()) {
      throw BuildError("item '" + edge.item_key + "' in item-persona edges is not in the graph");
    }
    auto persona = catalog.find(edge.persona_name);
    if (!persona) {
      throw BuildError("unknown persona '" + edge.persona_name + "' in item-persona edges");
    }
    seen.emplace(std::make_pair(item_it->second, *persona), true);
  }
  for (const auto& [key, _] : seen) {
    out << "Q\t" << bundle.items.key_of(key.first) << '\t' << catalog.name_of(key.second) << '\n';
  }
}

std::vector<ItemPersonaEdge> load_item_labels(const std::string& path,
                                              const PersonaCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open item labels: " + path);
  std::vector<ItemPersonaEdge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("item") || !doc.contains("personas")) {
      throw ParseError("item labels " + path + " line " + std::to_string(line_no) + " is malformed");
    }
    for (const auto& name : doc.at("personas")) {
      const std::string persona = name.get<std::string>();
      if (fold_name(persona) == "unrepresentable") continue;
      if (!catalog.find(persona)) {
        throw ParseError("item labels line " + std::to_string(line_no) + ": unknown persona '" +
                         persona + "'");
      }
      edges.push_back(ItemPersonaEdge{doc.at("item").get<std::string>(), persona});
    }
  }
  return edges;
}

void write_item_labels(std::ostream& out, std::span<const ItemPersonaEdge> edges) {
  std::map<std::string, std::vector<std::string>> grouped;
  for (const auto& e : edges) grouped[e.item_key].push_back(e.persona_name);
  for (const auto& [item, personas] : grouped) {
    nlohmann::ordered_json doc;
    doc["item"] = item;
    doc["personas"] = personas;
    out << doc.dump() << '\n';
  }
}

}  // namespace personaprop
