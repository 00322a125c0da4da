#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "personaprop/catalog.hpp"
#include "personaprop/exact.hpp"
#include "personaprop/graph.hpp"
#include "personaprop/io.hpp"
#include "personaprop/labeler.hpp"
#include "personaprop/pipeline.hpp"
#include "personaprop/sampling.hpp"

namespace pp = personaprop;
namespace fs = std::filesystem;

namespace {

// Key-value config file with [section] headers; section keys flatten to
// "section.key". Values supply defaults; command-line flags override.
class IniConfig {
 public:
  IniConfig() = default;

  static IniConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pp::ConfigError("cannot open config file: " + path);
    IniConfig config;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      std::string body = line.substr(first, last - first + 1);
      if (body[0] == '#' || body[0] == ';') continue;
      if (body.front() == '[' && body.back() == ']') {
        section = body.substr(1, body.size() - 2);
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw pp::ConfigError("config line " + std::to_string(line_no) + " is not key=value");
      }
      auto strip = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = strip(body.substr(0, eq));
      if (key.empty()) throw pp::ConfigError("config line " + std::to_string(line_no) + ": empty key");
      config.values_[section.empty() ? key : section + "." + key] = strip(body.substr(eq + 1));
    }
    return config;
  }

  // Applies `key` to `target` unless the flag was given on the command line.
  template <typename T>
  void apply(const CLI::App& cmd, const std::string& flag, const std::string& key,
             T& target) const {
    auto it = values_.find(key);
    if (it == values_.end() || cmd.count(flag) > 0) return;
    if constexpr (std::is_same_v<T, std::string>) {
      target = it->second;
    } else if constexpr (std::is_same_v<T, bool>) {
      target = it->second == "true" || it->second == "1" || it->second == "yes";
    } else {
      std::istringstream parse(it->second);
      T value{};
      if (!(parse >> value)) {
        throw pp::ConfigError("config value for '" + key + "' is not valid: " + it->second);
      }
      target = value;
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

struct EdgeOptions {
  std::string path;
  std::string format = "csv";
  bool header = false;
};

void add_edge_options(CLI::App* cmd, EdgeOptions& opts) {
  cmd->add_option("--edges", opts.path, "Edge list file: user_id,item_id[,count]")->required();
  cmd->add_option("--format", opts.format, "Edge file delimiter")
      ->check(CLI::IsMember({"csv", "tsv"}));
  cmd->add_flag("--header", opts.header, "Edge file has a header row");
}

pp::GraphBundle load_bundle(const EdgeOptions& opts) {
  return pp::load_graph_file(opts.path,
                             opts.format == "tsv" ? pp::EdgeFormat::Tsv : pp::EdgeFormat::Csv,
                             opts.header);
}

struct SolverOptions {
  std::string solver = "revaff";
  double epsilon = 0.001;
  std::uint32_t walk_cap = 1;
  double beta = 0.5;
  unsigned threads = 0;
  std::uint32_t dense_user_limit = 20000;
};

void add_solver_options(CLI::App* cmd, SolverOptions& opts) {
  cmd->add_option("--solver", opts.solver, "Affinity solver")
      ->check(CLI::IsMember({"exact", "revaff"}));
  cmd->add_option("--epsilon", opts.epsilon, "Absolute error bound for the revaff solver")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--walk-cap", opts.walk_cap, "Max round-trip walk length")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--beta", opts.beta, "De-bias exponent")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", opts.threads, "Worker threads (0 = auto)");
  cmd->add_option("--dense-user-limit", opts.dense_user_limit,
                  "Refuse dense attention above this many users");
}

void apply_solver_options(pp::PipelineConfig& config, const SolverOptions& opts) {
  config.solver = opts.solver == "exact" ? pp::SolverKind::Exact : pp::SolverKind::RevAff;
  config.epsilon = opts.epsilon;
  config.walk_cap = opts.walk_cap;
  config.beta = opts.beta;
  config.threads = opts.threads;
  config.dense_user_limit = opts.dense_user_limit;
}

struct LabelerOptions {
  std::string kind = "synthetic";
  std::string truth_path;
  pp::HttpLabelerConfig http;
};

void add_labeler_options(CLI::App* cmd, LabelerOptions& opts) {
  cmd->add_option("--labeler", opts.kind, "Labeling backend")
      ->check(CLI::IsMember({"synthetic", "http"}));
  cmd->add_option("--truth", opts.truth_path,
                  "Planted labels JSONL for the synthetic labeler");
  cmd->add_option("--labeler.url", opts.http.url, "Chat-completion endpoint URL");
  cmd->add_option("--labeler.model", opts.http.model, "Model name");
  cmd->add_option("--labeler.temperature", opts.http.temperature, "Sampling temperature");
  cmd->add_option("--labeler.timeout", opts.http.timeout_s, "Request timeout, seconds");
  cmd->add_option("--labeler.retries", opts.http.max_retries, "Max retries per request");
  cmd->add_option("--labeler.backoff-ms", opts.http.backoff_ms, "Initial retry backoff");
  cmd->add_option("--labeler.api-key-env", opts.http.api_key_env,
                  "Environment variable holding the API key");
  cmd->add_option("--labeler.max-inflight", opts.http.max_inflight,
                  "Concurrent in-flight requests");
}

void apply_ini_solver(const IniConfig& ini, const CLI::App& cmd, SolverOptions& opts) {
  ini.apply(cmd, "--solver", "solver.solver", opts.solver);
  ini.apply(cmd, "--epsilon", "solver.epsilon", opts.epsilon);
  ini.apply(cmd, "--walk-cap", "solver.walk-cap", opts.walk_cap);
  ini.apply(cmd, "--beta", "solver.beta", opts.beta);
  ini.apply(cmd, "--threads", "solver.threads", opts.threads);
  ini.apply(cmd, "--dense-user-limit", "solver.dense-user-limit", opts.dense_user_limit);
}

void apply_ini_labeler(const IniConfig& ini, const CLI::App& cmd, LabelerOptions& opts) {
  ini.apply(cmd, "--labeler", "labeler.kind", opts.kind);
  ini.apply(cmd, "--truth", "labeler.truth", opts.truth_path);
  ini.apply(cmd, "--labeler.url", "labeler.url", opts.http.url);
  ini.apply(cmd, "--labeler.model", "labeler.model", opts.http.model);
  ini.apply(cmd, "--labeler.temperature", "labeler.temperature", opts.http.temperature);
  ini.apply(cmd, "--labeler.timeout", "labeler.timeout", opts.http.timeout_s);
  ini.apply(cmd, "--labeler.retries", "labeler.retries", opts.http.max_retries);
  ini.apply(cmd, "--labeler.backoff-ms", "labeler.backoff-ms", opts.http.backoff_ms);
  ini.apply(cmd, "--labeler.api-key-env", "labeler.api-key-env", opts.http.api_key_env);
  ini.apply(cmd, "--labeler.max-inflight", "labeler.max-inflight", opts.http.max_inflight);
}

std::unique_ptr<pp::Labeler> make_labeler(const LabelerOptions& opts) {
  if (opts.kind == "http") {
    if (opts.http.url.empty()) throw pp::ConfigError("--labeler.url is required for http");
    return std::make_unique<pp::HttpLabeler>(opts.http);
  }
  if (opts.truth_path.empty()) {
    throw pp::ConfigError("--truth is required for the synthetic labeler");
  }
  if (!fs::exists(opts.truth_path)) {
    throw pp::ConfigError("planted labels file not found: " + opts.truth_path);
  }
  return std::make_unique<pp::SyntheticLabeler>(
      pp::SyntheticLabeler::from_cache(pp::LabelCache::load(opts.truth_path)));
}

void write_outputs(const fs::path& out_dir, const pp::GraphBundle& bundle,
                   const pp::PersonaCatalog& catalog, const pp::RunResult& result) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "pa.jsonl");
    pp::write_pa_jsonl(out, result.pa, bundle, catalog);
  }
  {
    std::ofstream out(out_dir / "affinity.tsv");
    pp::write_affinity_tsv(out, result.affinity, bundle, catalog);
  }
  {
    std::ofstream out(out_dir / "run_report.json");
    pp::write_run_report_json(out, result.report);
  }
  {
    std::ofstream out(out_dir / "solver_report.json");
    pp::write_solver_report_json(out, result.solver_report, catalog);
  }
}

void write_id_maps(const fs::path& out_dir, const pp::GraphBundle& bundle) {
  fs::create_directories(out_dir);
  std::ofstream users(out_dir / "users.map");
  pp::write_id_map(bundle.users, users);
  std::ofstream items(out_dir / "items.map");
  pp::write_id_map(bundle.items, items);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persona propagation engine for bipartite purchase graphs"};
  app.require_subcommand(1);

  // ---- ingest ----
  EdgeOptions ingest_edges;
  std::string ingest_out = ".";
  auto* ingest = app.add_subcommand("ingest", "Validate an edge list and emit id maps");
  add_edge_options(ingest, ingest_edges);
  ingest->add_option("--out", ingest_out, "Output directory");

  // ---- run ----
  EdgeOptions run_edges;
  SolverOptions run_solver;
  LabelerOptions run_labeler;
  std::string run_catalog, run_out = "out", run_cache, run_config_path;
  pp::PipelineConfig run_config;
  bool run_scores_dump = false;
  auto* run = app.add_subcommand("run", "Execute the full labeling + propagation pipeline");
  run->add_option("--config", run_config_path,
                  "Key-value configuration file with [solver]/[labeler]/[sampler] sections; "
                  "flags override config values");
  add_edge_options(run, run_edges);
  run->add_option("--catalog", run_catalog, "Persona catalog JSON")->required();
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--budget", run_config.budget, "Labeling budget, user count");
  run->add_option("--budget-fraction", run_config.budget_fraction,
                  "Labeling budget as a fraction of |U|");
  run->add_option("--iterations", run_config.iterations, "Sampling iterations T")
      ->check(CLI::PositiveNumber);
  run->add_option("--cutoff", run_config.cutoff, "Final personas per user (top-k)")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", run_config.seed, "Sampling seed");
  run->add_option("--k-max", run_config.k_max, "Persona cap in the labeling prompt");
  run->add_option("--smoothing-delta", run_config.smoothing_delta,
                  "Additive smoothing for affinity distributions");
  run->add_option("--label-cache", run_cache, "Label cache JSONL (resume checkpoint)");
  run->add_flag("--scores-dump", run_scores_dump, "Dump final pool scores to scores.tsv");
  add_solver_options(run, run_solver);
  add_labeler_options(run, run_labeler);

  // ---- propagate ----
  EdgeOptions prop_edges;
  SolverOptions prop_solver;
  std::string prop_catalog, prop_labels, prop_out = "out", prop_config_path;
  std::uint32_t prop_cutoff = 5;
  auto* prop = app.add_subcommand("propagate",
                                  "Solver only: affinity + assignment from a label cache");
  prop->add_option("--config", prop_config_path, "Configuration file ([solver] section applies)");
  add_edge_options(prop, prop_edges);
  prop->add_option("--catalog", prop_catalog, "Persona catalog JSON")->required();
  prop->add_option("--labels", prop_labels, "Label cache JSONL with prototype labels")->required();
  prop->add_option("--out", prop_out, "Output directory");
  prop->add_option("--cutoff", prop_cutoff, "Final personas per user (top-k)")
      ->check(CLI::PositiveNumber);
  add_solver_options(prop, prop_solver);

  // ---- sample ----
  EdgeOptions sample_edges;
  SolverOptions sample_solver;
  std::string sample_catalog, sample_labels, sample_scores, sample_config_path;
  std::size_t sample_batch = 0;
  std::uint32_t sample_iteration = 2;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Dry-run batch selection from the current state");
  sample->add_option("--config", sample_config_path,
                     "Configuration file ([solver]/[sampler] sections apply)");
  add_edge_options(sample, sample_edges);
  sample->add_option("--catalog", sample_catalog, "Persona catalog JSON")->required();
  sample->add_option("--labels", sample_labels, "Label cache JSONL with collected labels");
  sample->add_option("--batch", sample_batch, "Batch size")->required()->check(CLI::PositiveNumber);
  sample->add_option("--iteration", sample_iteration,
                     "Iteration number (1 samples uniformly, >1 ranks by score)");
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--scores", sample_scores, "Write all pool scores to this TSV");
  add_solver_options(sample, sample_solver);

  // ---- export-tripartite ----
  EdgeOptions tri_edges;
  LabelerOptions tri_labeler;
  std::string tri_catalog, tri_pa, tri_item_labels, tri_out;
  bool tri_label_items = false;
  auto* tri = app.add_subcommand("export-tripartite",
                                 "Export user/item/persona edges for recommender training");
  add_edge_options(tri, tri_edges);
  tri->add_option("--catalog", tri_catalog, "Persona catalog JSON")->required();
  tri->add_option("--pa", tri_pa, "Final persona assignment JSONL")->required();
  tri->add_option("--item-labels", tri_item_labels, "Item-persona JSONL for Q rows");
  tri->add_flag("--label-items", tri_label_items,
                "Query the labeler for item personas (experimental)");
  tri->add_option("--out", tri_out, "Output edge file")->required();
  add_labeler_options(tri, tri_labeler);

  // ---- report ----
  std::string report_path;
  auto* report = app.add_subcommand("report", "Summarize a run report");
  report->add_option("--run", report_path, "run_report.json produced by `run`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      auto bundle = load_bundle(ingest_edges);
      write_id_maps(ingest_out, bundle);
      std::cout << "users: " << bundle.graph.user_count()
                << "\nitems: " << bundle.graph.item_count()
                << "\nedges: " << bundle.graph.edge_count()
                << "\nisolated users: " << bundle.graph.isolated_users().size()
                << "\nisolated items: " << bundle.graph.isolated_items().size() << '\n';
    } else if (*run) {
      if (!run_config_path.empty()) {
        const IniConfig ini = IniConfig::load(run_config_path);
        ini.apply(*run, "--budget", "budget", run_config.budget);
        ini.apply(*run, "--budget-fraction", "budget-fraction", run_config.budget_fraction);
        ini.apply(*run, "--iterations", "iterations", run_config.iterations);
        ini.apply(*run, "--cutoff", "cutoff", run_config.cutoff);
        ini.apply(*run, "--out", "out", run_out);
        ini.apply(*run, "--label-cache", "label-cache", run_cache);
        ini.apply(*run, "--scores-dump", "scores-dump", run_scores_dump);
        ini.apply(*run, "--seed", "sampler.seed", run_config.seed);
        ini.apply(*run, "--smoothing-delta", "sampler.smoothing-delta",
                  run_config.smoothing_delta);
        ini.apply(*run, "--k-max", "labeler.k-max", run_config.k_max);
        apply_ini_solver(ini, *run, run_solver);
        apply_ini_labeler(ini, *run, run_labeler);
      }
      auto bundle = load_bundle(run_edges);
      auto catalog = pp::PersonaCatalog::from_json_file(run_catalog);
      apply_solver_options(run_config, run_solver);
      auto labeler = make_labeler(run_labeler);

      fs::create_directories(run_out);
      const std::string cache_path =
          run_cache.empty() ? (fs::path(run_out) / "label_cache.jsonl").string() : run_cache;
      pp::LabelCache cache = pp::LabelCache::load(cache_path);

      auto result = pp::run_pipeline(bundle, catalog, *labeler, run_config, &cache);
      write_outputs(run_out, bundle, catalog, result);
      write_id_maps(run_out, bundle);
      if (run_scores_dump) {
        std::vector<pp::NodeId> pool;
        for (pp::NodeId u = 0; u < bundle.graph.user_count(); ++u) pool.push_back(u);
        const auto q = result.pa.prototype_count() > 0
                           ? pp::persona_distribution(result.pa)
                           : std::vector<double>(catalog.size(), 0.0);
        auto scores = pp::du_scores(q, result.affinity, pool, run_config.smoothing_delta);
        std::ofstream out(fs::path(run_out) / "scores.tsv");
        pp::write_scores_tsv(out, scores, bundle);
      }
      std::cout << "labeled " << result.report.prototypes << " prototypes ("
                << result.report.unrepresentable << " unrepresentable), propagated "
                << result.report.propagated << ", unreached " << result.report.unreached
                << "; outputs in " << run_out << '\n';
    } else if (*prop) {
      if (!prop_config_path.empty()) {
        const IniConfig ini = IniConfig::load(prop_config_path);
        ini.apply(*prop, "--cutoff", "cutoff", prop_cutoff);
        apply_ini_solver(ini, *prop, prop_solver);
      }
      auto bundle = load_bundle(prop_edges);
      auto catalog = pp::PersonaCatalog::from_json_file(prop_catalog);
      pp::PipelineConfig config;
      apply_solver_options(config, prop_solver);
      config.cutoff = prop_cutoff;
      auto cache = pp::LabelCache::load(prop_labels);
      if (cache.size() == 0) throw pp::ConfigError("label cache is empty: " + prop_labels);
      auto result = pp::propagate_from_cache(bundle, catalog, cache, config);
      write_outputs(prop_out, bundle, catalog, result);
      std::cout << "propagated " << result.report.propagated << ", unreached "
                << result.report.unreached << "; outputs in " << prop_out << '\n';
    } else if (*sample) {
      if (!sample_config_path.empty()) {
        const IniConfig ini = IniConfig::load(sample_config_path);
        ini.apply(*sample, "--seed", "sampler.seed", sample_seed);
        apply_ini_solver(ini, *sample, sample_solver);
      }
      auto bundle = load_bundle(sample_edges);
      auto catalog = pp::PersonaCatalog::from_json_file(sample_catalog);
      pp::PipelineConfig config;
      apply_solver_options(config, sample_solver);

      pp::PersonaMatrix pa(bundle.graph.user_count(), catalog.size());
      pp::AffinityMatrix affinity;
      std::vector<double> q;
      if (!sample_labels.empty()) {
        auto cache = pp::LabelCache::load(sample_labels);
        auto seeded = pp::propagate_from_cache(bundle, catalog, cache, config);
        pa = std::move(seeded.pa);
        affinity = std::move(seeded.affinity);
        if (pa.prototype_count() > 0) q = pp::persona_distribution(pa);
      } else {
        affinity.user_count = bundle.graph.user_count();
        affinity.persona_count = catalog.size();
        affinity.values.assign(std::size_t(affinity.user_count) * affinity.persona_count, 0.0);
      }

      std::vector<pp::NodeId> pool;
      for (pp::NodeId u = 0; u < bundle.graph.user_count(); ++u) {
        if (!pa.is_labeled(u) && bundle.graph.degree(pp::Side::User, u) > 0) pool.push_back(u);
      }
      auto batch = pp::select_batch(sample_iteration, q, affinity, sample_batch, pool, sample_seed);
      for (pp::NodeId u : batch) std::cout << bundle.users.key_of(u) << '\n';
      if (!sample_scores.empty() && !q.empty()) {
        auto scores = pp::du_scores(q, affinity, pool, config.smoothing_delta);
        std::ofstream out(sample_scores);
        pp::write_scores_tsv(out, scores, bundle);
      }
    } else if (*tri) {
      auto bundle = load_bundle(tri_edges);
      auto catalog = pp::PersonaCatalog::from_json_file(tri_catalog);

      pp::PersonaMatrix pa(bundle.graph.user_count(), catalog.size());
      {
        auto assignments = pp::LabelCache::load(tri_pa);
        if (assignments.size() == 0) throw pp::ConfigError("empty assignment file: " + tri_pa);
        for (const auto& [key, names] : assignments.entries()) {
          auto it = bundle.users.index.find(key);
          if (it == bundle.users.index.end()) continue;
          std::vector<std::uint32_t> personas;
          for (const auto& name : names) {
            if (auto idx = catalog.find(name)) personas.push_back(*idx);
          }
          std::sort(personas.begin(), personas.end());
          pa.set_labeled_row(it->second, personas);
        }
      }

      std::vector<pp::ItemPersonaEdge> item_edges;
      if (!tri_item_labels.empty()) {
        item_edges = pp::load_item_labels(tri_item_labels, catalog);
      } else if (tri_label_items) {
        auto labeler = make_labeler(tri_labeler);
        std::vector<pp::NodeId> items;
        for (pp::NodeId v = 0; v < bundle.graph.item_count(); ++v) items.push_back(v);
        item_edges = pp::label_items(*labeler, items, bundle, catalog);
      }

      std::ofstream out(tri_out);
      pp::write_tripartite(out, bundle, pa, catalog, item_edges);
      std::cout << "wrote " << tri_out << '\n';
    } else if (*report) {
      std::ifstream in(report_path);
      if (!in) throw pp::ConfigError("cannot open " + report_path);
      nlohmann::json doc = nlohmann::json::parse(in);
      std::cout << "budget: " << doc.value("budget_spent", 0) << " / " << doc.value("budget", 0)
                << '\n';
      for (const auto& it : doc.value("iterations", nlohmann::json::array())) {
        std::cout << "  iteration " << it.value("iteration", 0) << ": requested "
                  << it.value("requested", 0) << ", labeled " << it.value("labeled", 0)
                  << " (" << it.value("zero_label", 0) << " zero-label), failed "
                  << it.value("failed", 0) << ", solver " << it.value("solver_ms", 0.0)
                  << " ms, pushes " << it.value("pushes", 0) << '\n';
      }
      std::cout << "prototypes: " << doc.value("prototypes", 0)
                << ", unrepresentable: " << doc.value("unrepresentable", 0)
                << ", propagated: " << doc.value("propagated", 0)
                << ", unreached: " << doc.value("unreached", 0) << '\n';
      for (const auto& w : doc.value("warnings", nlohmann::json::array())) {
        std::cout << "warning: " << w.get<std::string>() << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
