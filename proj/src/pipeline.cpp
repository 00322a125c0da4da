#include "personaprop/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "personaprop/errors.hpp"
#include "personaprop/sampling.hpp"

namespace personaprop {

std::uint64_t PipelineConfig::resolve_budget(NodeId user_count) const {
  if (budget_fraction >= 0.0) {
    return static_cast<std::uint64_t>(std::llround(budget_fraction * user_count));
  }
  return budget;
}

void PipelineConfig::validate(NodeId user_count) const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (cutoff < 1) throw ConfigError("cutoff must be >= 1");
  if (walk_cap < 1) throw ConfigError("walk_cap must be >= 1");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
  if (budget_fraction > 1.0) throw ConfigError("budget fraction must be <= 1");
  const std::uint64_t b = resolve_budget(user_count);
  if (b < iterations) {
    throw ConfigError("budget " + std::to_string(b) + " cannot cover " +
                      std::to_string(iterations) + " iterations (need >= 1 user each)");
  }
}

std::vector<std::uint32_t> assign_topk(std::span<const double> row, std::uint32_t k) {
  if (k < 1) throw ConfigError("cutoff k must be >= 1");
  std::vector<std::pair<double, std::uint32_t>> positive;
  for (std::uint32_t m = 0; m < row.size(); ++m) {
    if (row[m] > 0.0) positive.emplace_back(row[m], m);
  }
  const std::size_t take = std::min<std::size_t>(k, positive.size());
  std::partial_sort(positive.begin(), positive.begin() + take, positive.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::uint32_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(positive[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

AffinityMatrix zero_affinity(const GraphBundle& bundle, const PersonaCatalog& catalog,
                             const PipelineConfig& config) {
  AffinityMatrix aff;
  aff.user_count = bundle.graph.user_count();
  aff.persona_count = catalog.size();
  aff.walk_cap = config.walk_cap;
  aff.epsilon = config.solver == SolverKind::RevAff ? config.epsilon : 0.0;
  aff.values.assign(std::size_t(aff.user_count) * aff.persona_count, 0.0);
  return aff;
}

AffinityMatrix compute_affinity(const GraphBundle& bundle, const PersonaCatalog& catalog,
                                const PersonaMatrix& pa, const PipelineConfig& config,
                                SolveReport* solver_report, double* solver_ms) {
  const auto started = std::chrono::steady_clock::now();
  AffinityMatrix aff;
  if (pa.prototype_count() == 0) {
    aff = zero_affinity(bundle, catalog, config);
  } else {
    const LabelMatrix label = build_label_matrix(pa, config.beta);
    if (config.solver == SolverKind::Exact) {
      aff = exact_affinity(bundle.graph, label, config.walk_cap, config.threads);
      if (solver_report) *solver_report = SolveReport{};
    } else {
      aff = reverse_push_all(bundle.graph, label, config.epsilon, config.walk_cap,
                             solver_report, config.threads);
    }
  }
  if (solver_ms) {
    *solver_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
  }
  return aff;
}

std::vector<NodeId> unlabeled_pool(const GraphBundle& bundle, const PersonaMatrix& pa) {
  std::vector<NodeId> pool;
  for (NodeId u = 0; u < bundle.graph.user_count(); ++u) {
    // Isolated users are not prompt-eligible (nothing to serialize) and
    // propagation cannot reach them either.
    if (!pa.is_labeled(u) && bundle.graph.degree(Side::User, u) > 0) pool.push_back(u);
  }
  return pool;
}

void finalize_assignment(const GraphBundle& bundle, const PersonaCatalog& catalog,
                         const PipelineConfig& config, RunResult& result) {
  for (NodeId u = 0; u < bundle.graph.user_count(); ++u) {
    if (result.pa.is_prototype(u)) continue;
    const auto personas = assign_topk(
        std::span<const double>(result.affinity.row(u), catalog.size()), config.cutoff);
    result.pa.set_propagated_row(u, personas);
    if (personas.empty()) {
      ++result.report.unreached;
    } else {
      ++result.report.propagated;
    }
  }
  result.report.prototypes = result.pa.prototype_count();
  result.report.unrepresentable = result.pa.unrepresentables().size();
}

}  // namespace

RunResult run_pipeline(const GraphBundle& bundle, const PersonaCatalog& catalog,
                       Labeler& labeler, const PipelineConfig& config, LabelCache* cache) {
  const auto started = std::chrono::steady_clock::now();
  const NodeId n_users = bundle.graph.user_count();
  config.validate(n_users);
  const std::uint64_t budget = config.resolve_budget(n_users);
  const std::uint64_t per_iteration = (budget + config.iterations - 1) / config.iterations;

  RunResult result;
  result.pa = PersonaMatrix(n_users, catalog.size());
  result.affinity = zero_affinity(bundle, catalog, config);
  result.report.budget = budget;

  for (std::uint32_t t = 1; t <= config.iterations; ++t) {
    const std::uint64_t remaining = budget - result.report.budget_spent;
    if (remaining == 0) {
      result.report.warnings.push_back("budget exhausted before iteration " + std::to_string(t));
      break;
    }
    const auto pool = unlabeled_pool(bundle, result.pa);
    if (pool.empty()) {
      result.report.warnings.push_back("unlabeled pool empty at iteration " + std::to_string(t) +
                                       "; budget under-spent");
      break;
    }

    std::vector<double> q;
    if (t > 1 && result.pa.prototype_count() > 0) q = persona_distribution(result.pa);

    const std::size_t batch_size =
        static_cast<std::size_t>(std::min<std::uint64_t>(per_iteration, remaining));
    const std::vector<NodeId> batch = select_batch(t, q, result.affinity, batch_size, pool,
                                                   config.seed + t);
    result.report.budget_spent += batch.size();

    IterationReport iter;
    iter.iteration = t;
    iter.requested = batch.size();

    LabelBatchReport labeled =
        label_users(labeler, batch, bundle, catalog, result.pa, config.k_max, cache);
    iter.labeled = labeled.labeled.size();
    iter.failed = labeled.failed.size();
    iter.calls = labeled.calls;
    for (NodeId u : labeled.labeled) {
      if (result.pa.is_unrepresentable(u)) ++iter.zero_label;
    }
    for (auto& w : labeled.warnings) result.report.warnings.push_back(std::move(w));

    if (!batch.empty() && labeled.labeled.empty()) {
      // Nothing usable came back; completed iterations are already in the
      // cache, so the run can resume from here.
      throw LabelerError("iteration " + std::to_string(t) +
                         ": every labeling request failed; aborting (resume with the same "
                         "seed and label cache)");
    }

    SolveReport solver_report;
    result.affinity = compute_affinity(bundle, catalog, result.pa, config, &solver_report,
                                       &iter.solver_ms);
    iter.pushes = solver_report.total_pushes;
    result.solver_report = std::move(solver_report);

    result.report.iterations.push_back(iter);
  }

  finalize_assignment(bundle, catalog, config, result);
  result.report.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return result;
}

RunResult propagate_from_cache(const GraphBundle& bundle, const PersonaCatalog& catalog,
                               const LabelCache& cache, const PipelineConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  result.pa = PersonaMatrix(bundle.graph.user_count(), catalog.size());

  for (const auto& [key, names] : cache.entries()) {
    auto it = bundle.users.index.find(key);
    if (it == bundle.users.index.end()) {
      result.report.warnings.push_back("cached user '" + key + "' not in the graph; skipped");
      continue;
    }
    std::vector<std::uint32_t> personas;
    for (const auto& name : names) {
      if (fold_name(name) == "unrepresentable") continue;
      if (auto idx = catalog.find(name)) {
        personas.push_back(*idx);
      } else {
        result.report.warnings.push_back("cached persona '" + name + "' unknown; dropped");
      }
    }
    std::sort(personas.begin(), personas.end());
    personas.erase(std::unique(personas.begin(), personas.end()), personas.end());
    result.pa.set_labeled_row(it->second, personas);
  }

  double solver_ms = 0.0;
  result.affinity =
      compute_affinity(bundle, catalog, result.pa, config, &result.solver_report, &solver_ms);
  finalize_assignment(bundle, catalog, config, result);
  result.report.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return result;
}

std::vector<ItemPersonaEdge> label_items(Labeler& labeler, std::span<const NodeId> items,
                                         const GraphBundle& bundle, const PersonaCatalog& catalog,
                                         std::uint32_t k_max) {
  std::vector<ItemPersonaEdge> edges;
  for (const NodeId v : items) {
    const std::string& key = bundle.items.key_of(v);
    LabelRequest request{key, render_item_prompt(key, catalog, k_max)};
    std::string response;
    try {
      response = labeler.complete(request);
    } catch (const LabelerError&) {
      continue;  // item stays unlabeled
    }
    ParseOutcome outcome = parse_label_response(response, catalog);
    auto it = outcome.by_key.find(key);
    if (it == outcome.by_key.end()) continue;
    for (std::uint32_t m : it->second.personas) {
      edges.push_back(ItemPersonaEdge{key, catalog.name_of(m)});
    }
  }
  return edges;
}

void write_run_report_json(std::ostream& out, const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["budget"] = report.budget;
  doc["budget_spent"] = report.budget_spent;
  auto iterations = nlohmann::ordered_json::array();
  for (const auto& it : report.iterations) {
    iterations.push_back({{"iteration", it.iteration},
                          {"requested", it.requested},
                          {"labeled", it.labeled},
                          {"zero_label", it.zero_label},
                          {"failed", it.failed},
                          {"calls", it.calls},
                          {"solver_ms", it.solver_ms},
                          {"pushes", it.pushes}});
  }
  doc["iterations"] = std::move(iterations);
  doc["prototypes"] = report.prototypes;
  doc["unrepresentable"] = report.unrepresentable;
  doc["propagated"] = report.propagated;
  doc["unreached"] = report.unreached;
  doc["warnings"] = report.warnings;
  doc["total_ms"] = report.total_ms;
  out << doc.dump(2) << '\n';
}

}  // namespace personaprop
