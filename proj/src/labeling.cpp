#include "personaprop/labeling.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "personaprop/errors.hpp"

namespace personaprop {

namespace {

std::string persona_name_list(const PersonaCatalog& catalog) {
  std::string out;
  for (std::uint32_t m = 0; m < catalog.size(); ++m) {
    if (m) out += ", ";
    out += catalog.name_of(m);
  }
  return out;
}

std::string persona_descriptions(const PersonaCatalog& catalog) {
  std::string out;
  for (std::uint32_t m = 0; m < catalog.size(); ++m) {
    out += "- " + catalog.at(m).name;
    if (!catalog.at(m).description.empty()) out += ": " + catalog.at(m).description;
    out += "\n";
  }
  return out;
}

std::string format_instructions(const std::string& key_kind, std::uint32_t k_max) {
  std::ostringstream os;
  os << "Select at least one persona and at most " << k_max
     << " personas from the given persona list, and only use the exact given names.\n"
        "Provide the output in json format, preferring arrays over comma separated strings, "
        "as one object per line:\n"
        "{\"" << key_kind << "\": [\"Persona1\", \"Persona2\"]}\n"
        "If no persona from the list properly describes the " << key_kind
     << ", answer exactly:\n"
        "{\"" << key_kind << "\": [\"Unrepresentable\"]}\n"
        "Do not explain the result; respond with the required format only.\n";
  return os.str();
}

}  // namespace

LabelPrompt render_label_prompt(const std::string& user_key, std::span<const Purchase> purchases,
                                const PersonaCatalog& catalog, std::uint32_t k_max) {
  if (purchases.empty()) {
    throw LabelerError("user " + user_key + " has no purchases; nothing to serialize");
  }
  if (k_max < 1) throw ConfigError("k_max must be >= 1");

  LabelPrompt prompt;
  prompt.system =
      "You are an e-commerce domain assistant, skilled at summarizing purchase behavior and "
      "assigning high-level consumer personas from a fixed list.";

  std::ostringstream os;
  os << "Your goal is to identify a user's shopping behavior from the products they have "
        "bought and label the user with personas from the given list. Ground every assignment "
        "in the purchase transactions below.\n\n";
  os << format_instructions("user_number", k_max) << "\n";
  os << "Here is the persona list you should choose from: " << persona_name_list(catalog)
     << "\n\n";
  os << "The user_number in your answer must be exactly " << user_key
     << ", taken from the transaction data.\n\n";
  os << "Here is the data of user " << user_key << "'s transactions: the user has purchased "
     << purchases.size()
     << " unique products, each product name followed by its purchased times: he bought: ";
  for (std::size_t i = 0; i < purchases.size(); ++i) {
    if (i) os << "; ";
    os << purchases[i].item_name << ", " << purchases[i].count << " times";
  }
  os << ".";
  prompt.user = os.str();
  return prompt;
}

LabelPrompt render_item_prompt(const std::string& item_key, const PersonaCatalog& catalog,
                               std::uint32_t k_max) {
  if (k_max < 1) throw ConfigError("k_max must be >= 1");
  LabelPrompt prompt;
  prompt.system =
      "You are an e-commerce domain assistant, skilled at matching products to high-level "
      "consumer personas from a fixed list.";
  std::ostringstream os;
  os << "Your goal is to identify which personas a product pertains to, using the persona "
        "descriptions below.\n\n";
  os << format_instructions("product_id", k_max) << "\n";
  os << "Here is the persona list with descriptions:\n" << persona_descriptions(catalog) << "\n";
  os << "The product_id in your answer must be exactly " << item_key << ".\n\n";
  os << "The product is: " << item_key << ".";
  prompt.user = os.str();
  return prompt;
}

namespace {

// Interprets one (key, value) JSON entry as a persona answer.
void absorb_entry(const std::string& key, const nlohmann::json& value,
                  const PersonaCatalog& catalog, ParseOutcome& outcome) {
  std::vector<std::string> names;
  if (value.is_array()) {
    for (const auto& item : value) {
      if (item.is_string()) {
        names.push_back(item.get<std::string>());
      } else {
        outcome.errors.push_back("entry for '" + key + "' contains a non-string persona");
        return;
      }
    }
  } else if (value.is_string()) {
    // Tolerated fallback: comma separated string instead of an array.
    std::stringstream ss(value.get<std::string>());
    std::string piece;
    while (std::getline(ss, piece, ',')) names.push_back(piece);
  } else {
    outcome.errors.push_back("entry for '" + key + "' is neither an array nor a string");
    return;
  }

  ParsedLabel parsed;
  bool saw_unrepresentable = false;
  for (const auto& raw : names) {
    const std::string folded = fold_name(raw);
    if (folded.empty()) continue;
    if (folded == "unrepresentable") {
      saw_unrepresentable = true;
      continue;
    }
    if (auto idx = catalog.find(raw)) {
      parsed.personas.push_back(*idx);
    } else {
      parsed.warnings.push_back("unknown persona '" + raw + "' for '" + key + "' dropped");
    }
  }
  std::sort(parsed.personas.begin(), parsed.personas.end());
  parsed.personas.erase(std::unique(parsed.personas.begin(), parsed.personas.end()),
                        parsed.personas.end());
  if (parsed.personas.empty()) {
    parsed.unrepresentable = saw_unrepresentable || !names.empty();
  } else if (saw_unrepresentable) {
    parsed.warnings.push_back("'" + key + "' mixed Unrepresentable with persona names; names kept");
  }
  outcome.by_key[key] = std::move(parsed);
}

void absorb_json(const nlohmann::json& doc, const PersonaCatalog& catalog, ParseOutcome& outcome) {
  if (doc.is_object()) {
    for (auto it = doc.begin(); it != doc.end(); ++it) absorb_entry(it.key(), it.value(), catalog, outcome);
  } else if (doc.is_array()) {
    for (const auto& el : doc) {
      if (el.is_object()) {
        absorb_json(el, catalog, outcome);
      } else {
        outcome.errors.push_back("array element is not an object");
      }
    }
  } else {
    outcome.errors.push_back("payload is not a JSON object or array");
  }
}

std::string strip_code_fences(std::string_view text) {
  std::string out;
  std::stringstream ss{std::string(text)};
  std::string line;
  while (std::getline(ss, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line.compare(first, 3, "```") == 0) continue;
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

ParseOutcome parse_label_response(std::string_view text, const PersonaCatalog& catalog) {
  ParseOutcome outcome;
  const std::string cleaned = strip_code_fences(text);

  // Whole-payload parse first, then line by line.
  {
    nlohmann::json doc = nlohmann::json::parse(cleaned, nullptr, false);
    if (!doc.is_discarded()) {
      absorb_json(doc, catalog, outcome);
      return outcome;
    }
  }
  std::stringstream ss(cleaned);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
      outcome.errors.push_back("response line " + std::to_string(line_no) + " is not valid JSON");
      continue;
    }
    absorb_json(doc, catalog, outcome);
  }
  return outcome;
}

LabelCache LabelCache::load(const std::string& path) {
  LabelCache cache;
  cache.path_ = path;
  std::ifstream in(path);
  if (!in) return cache;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    // Keyed by "user" normally; "item" for item-label files sharing the format.
    const char* key_field = doc.is_object() && doc.contains("item") ? "item" : "user";
    if (doc.is_discarded() || !doc.is_object() || !doc.contains(key_field) ||
        !doc.contains("personas")) {
      throw ParseError("label cache " + path + " line " + std::to_string(line_no) + " is malformed");
    }
    cache.entries_[doc.at(key_field).get<std::string>()] =
        doc.at("personas").get<std::vector<std::string>>();
  }
  return cache;
}

std::optional<std::vector<std::string>> LabelCache::lookup(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void LabelCache::put(const std::string& key, std::vector<std::string> personas) {
  if (entries_.count(key)) return;
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    nlohmann::ordered_json doc;
    doc["user"] = key;
    doc["personas"] = personas;
    out << doc.dump() << '\n';
  }
  entries_[key] = std::move(personas);
}

namespace {

std::vector<Purchase> purchases_of(const GraphBundle& bundle, NodeId u) {
  auto items = bundle.graph.items_of(u);
  auto counts = bundle.graph.counts_of(u);
  std::vector<Purchase> purchases;
  purchases.reserve(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    purchases.push_back(Purchase{bundle.items.key_of(items[k]), counts[k]});
  }
  return purchases;
}

}  // namespace

LabelBatchReport label_users(Labeler& labeler, std::span<const NodeId> users,
                             const GraphBundle& bundle, const PersonaCatalog& catalog,
                             PersonaMatrix& pa, std::uint32_t k_max, LabelCache* cache) {
  LabelBatchReport report;

  struct Pending {
    std::size_t slot;
    NodeId user;
    LabelRequest request;
  };
  std::vector<Pending> pending;

  // Raw responses per batch slot; empty optional = transport failure.
  std::vector<std::optional<std::string>> responses(users.size());
  std::vector<bool> resolved(users.size(), false);

  for (std::size_t i = 0; i < users.size(); ++i) {
    const NodeId u = users[i];
    const std::string& key = bundle.users.key_of(u);
    if (cache) {
      if (auto hit = cache->lookup(key)) {
        std::vector<std::uint32_t> personas;
        for (const auto& name : *hit) {
          if (fold_name(name) == "unrepresentable") continue;
          if (auto idx = catalog.find(name)) {
            personas.push_back(*idx);
          } else {
            report.warnings.push_back("cached persona '" + name + "' for " + key + " unknown; dropped");
          }
        }
        std::sort(personas.begin(), personas.end());
        personas.erase(std::unique(personas.begin(), personas.end()), personas.end());
        pa.set_labeled_row(u, personas);
        report.labeled.push_back(u);
        resolved[i] = true;
        continue;
      }
    }
    if (bundle.graph.degree(Side::User, u) == 0) {
      report.failed.push_back(u);
      report.warnings.push_back("user " + key + " is isolated; not prompt-eligible");
      resolved[i] = true;
      continue;
    }
    auto purchases = purchases_of(bundle, u);
    pending.push_back(Pending{i, u, LabelRequest{key, render_label_prompt(key, purchases, catalog, k_max)}});
  }

  // Fan requests out across up to max_inflight threads; responses land in
  // slot order so the apply phase below is deterministic.
  const std::size_t inflight = std::max<std::size_t>(1, labeler.max_inflight());
  report.calls = pending.size();
  if (!pending.empty()) {
    const std::size_t workers = std::min(inflight, pending.size());
    std::vector<std::thread> threads;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      while (true) {
        const std::size_t j = next.fetch_add(1);
        if (j >= pending.size()) break;
        try {
          responses[pending[j].slot] = labeler.complete(pending[j].request);
        } catch (const std::exception&) {
          responses[pending[j].slot] = std::nullopt;
        }
      }
    };
    if (workers == 1) {
      work();
    } else {
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
      for (auto& t : threads) t.join();
    }
  }

  // Single-writer apply phase.
  for (const auto& p : pending) {
    const std::string& key = bundle.users.key_of(p.user);
    if (!responses[p.slot].has_value()) {
      report.failed.push_back(p.user);
      report.warnings.push_back("labeler failed for user " + key + " after retries");
      continue;
    }
    ParseOutcome outcome = parse_label_response(*responses[p.slot], catalog);
    for (const auto& err : outcome.errors) report.warnings.push_back(key + ": " + err);
    for (const auto& [answer_key, parsed] : outcome.by_key) {
      if (answer_key != key) {
        report.warnings.push_back("response for unrequested id '" + answer_key + "' ignored");
      }
    }
    auto it = outcome.by_key.find(key);
    if (it == outcome.by_key.end()) {
      report.failed.push_back(p.user);
      report.warnings.push_back("no usable answer for user " + key + "; returned to pool");
      continue;
    }
    for (const auto& w : it->second.warnings) report.warnings.push_back(w);
    pa.set_labeled_row(p.user, it->second.personas);
    report.labeled.push_back(p.user);
    if (cache) {
      std::vector<std::string> names;
      if (it->second.personas.empty()) {
        names.push_back("Unrepresentable");
      } else {
        for (std::uint32_t m : it->second.personas) names.push_back(catalog.name_of(m));
      }
      cache->put(key, std::move(names));
    }
  }

  std::sort(report.labeled.begin(), report.labeled.end());
  std::sort(report.failed.begin(), report.failed.end());
  return report;
}

}  // namespace personaprop
