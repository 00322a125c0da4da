#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "personaprop/catalog.hpp"
#include "personaprop/graph.hpp"
#include "personaprop/persona_matrix.hpp"

namespace personaprop {

struct LabelPrompt {
  std::string system;
  std::string user;
};

struct Purchase {
  std::string item_name;
  std::uint64_t count = 1;
};

struct LabelRequest {
  std::string key;  // user or item key; echoed back by the model
  LabelPrompt prompt;
};

// One model call per request; implementations retry internally and throw
// LabelerError once the retry budget is spent.
class Labeler {
 public:
  virtual ~Labeler() = default;
  virtual std::string complete(const LabelRequest& request) = 0;
  virtual std::size_t max_inflight() const { return 1; }
};

// Serializes a user's purchase log and the persona list into the labeling
// prompt. The answer format is one JSON object {"<key>": ["Persona", ...]}
// with "Unrepresentable" as the escape hatch; parse_label_response consumes
// exactly this shape.
LabelPrompt render_label_prompt(const std::string& user_key, std::span<const Purchase> purchases,
                                const PersonaCatalog& catalog, std::uint32_t k_max = 5);

// Item-side analogue: asks which personas an item pertains to, based on the
// persona descriptions. Experimental surface for the tripartite export.
LabelPrompt render_item_prompt(const std::string& item_key, const PersonaCatalog& catalog,
                               std::uint32_t k_max = 5);

struct ParsedLabel {
  std::vector<std::uint32_t> personas;  // catalog indices, sorted, unique
  bool unrepresentable = false;
  std::vector<std::string> warnings;  // unknown names, mixed answers
};

struct ParseOutcome {
  std::map<std::string, ParsedLabel> by_key;
  std::vector<std::string> errors;  // unparseable chunks
};

// Defensive parser for model answers: accepts a single JSON object, a JSON
// array of objects, or one object per line, with or without code fences.
// Persona names match case-insensitively after trimming; unknown names are
// dropped with a warning. An entry whose only content is "Unrepresentable"
// yields the empty set with the unrepresentable flag.
ParseOutcome parse_label_response(std::string_view text, const PersonaCatalog& catalog);

// JSONL store {"user": key, "personas": [names]} so runs resume without
// re-querying the model. Also the file format for planted ground truth.
class LabelCache {
 public:
  LabelCache() = default;

  static LabelCache load(const std::string& path);  // missing file -> empty cache
  void attach(const std::string& path) { path_ = path; }

  std::optional<std::vector<std::string>> lookup(const std::string& key) const;
  void put(const std::string& key, std::vector<std::string> personas);  // appends to file if attached
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
  std::string path_;
};

struct LabelBatchReport {
  std::vector<NodeId> labeled;  // rows set, including zero-label answers
  std::vector<NodeId> failed;   // returned to the unlabeled pool
  std::vector<std::string> warnings;
  std::size_t calls = 0;  // labeler invocations (cache hits excluded)
};

// Labels a batch of users: renders prompts from their purchase logs, calls
// the labeler (cache first), parses answers and writes Pa rows. Answers for
// users outside the batch are ignored with a warning. Requests run with up to
// labeler.max_inflight() concurrent calls; matrix writes stay single-threaded.
LabelBatchReport label_users(Labeler& labeler, std::span<const NodeId> users,
                             const GraphBundle& bundle, const PersonaCatalog& catalog,
                             PersonaMatrix& pa, std::uint32_t k_max = 5,
                             LabelCache* cache = nullptr);

}  // namespace personaprop
