#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "personaprop/catalog.hpp"
#include "personaprop/exact.hpp"
#include "personaprop/graph.hpp"
#include "personaprop/persona_matrix.hpp"
#include "personaprop/reverse_push.hpp"
#include "personaprop/sampling.hpp"

namespace personaprop {

// TSV: header `user_id <tab> persona names...`, one row per user, 6-decimal
// fixed point.
void write_affinity_tsv(std::ostream& out, const AffinityMatrix& affinity,
                        const GraphBundle& bundle, const PersonaCatalog& catalog);

// JSONL {"user": key, "personas": [names], "source": "llm"|"propagated"|"unreached"}.
void write_pa_jsonl(std::ostream& out, const PersonaMatrix& pa, const GraphBundle& bundle,
                    const PersonaCatalog& catalog);

// TSV `user_id <tab> du_score` audit dump.
void write_scores_tsv(std::ostream& out, std::span<const ScoredUser> scores,
                      const GraphBundle& bundle);

// JSON: per-persona {epsilon, pushes, wall_time_ms, max_frontier}.
void write_solver_report_json(std::ostream& out, const SolveReport& report,
                              const PersonaCatalog& catalog);

// Item-persona edges as names; validated against id maps and catalog.
struct ItemPersonaEdge {
  std::string item_key;
  std::string persona_name;
};

// Typed tripartite edge list: `U <tab> user <tab> item`, `P <tab> user <tab>
// persona`, `Q <tab> item <tab> persona`.
void write_tripartite(std::ostream& out, const GraphBundle& bundle, const PersonaMatrix& pa,
                      const PersonaCatalog& catalog,
                      std::span<const ItemPersonaEdge> item_edges);

// JSONL {"item": key, "personas": [names]} used for the optional item side of
// the tripartite export.
std::vector<ItemPersonaEdge> load_item_labels(const std::string& path,
                                              const PersonaCatalog& catalog);
void write_item_labels(std::ostream& out, std::span<const ItemPersonaEdge> edges);

}  // namespace personaprop
