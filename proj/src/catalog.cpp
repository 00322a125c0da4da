#include "personaprop/catalog.hpp"

#include <cctype>
#include <fstream>

#include "json.hpp"
#include "personaprop/errors.hpp"

namespace personaprop {

std::string fold_name(std::string_view name) {
  std::size_t b = 0, e = name.size();
  while (b < e && std::isspace(static_cast<unsigned char>(name[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(name[e - 1]))) --e;
  std::string folded;
  folded.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(name[i]))));
  }
  return folded;
}

PersonaCatalog::PersonaCatalog(std::vector<Persona> personas) : personas_(std::move(personas)) {
  if (personas_.empty()) throw BuildError("persona catalog is empty");
  for (std::uint32_t m = 0; m < personas_.size(); ++m) {
    const std::string folded = fold_name(personas_[m].name);
    if (folded.empty()) throw BuildError("persona with empty name at index " + std::to_string(m));
    if (!by_folded_name_.emplace(folded, m).second) {
      throw BuildError("duplicate persona name: " + personas_[m].name);
    }
  }
}

PersonaCatalog PersonaCatalog::from_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("persona catalog is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("persona catalog must be a JSON array");
  std::vector<Persona> personas;
  personas.reserve(doc.size());
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("name")) {
      throw ParseError("persona catalog entries must be objects with a 'name' field");
    }
    personas.push_back(Persona{entry.at("name").get<std::string>(),
                               entry.value("description", std::string())});
  }
  return PersonaCatalog(std::move(personas));
}

PersonaCatalog PersonaCatalog::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open persona catalog: " + path);
  return from_json(in);
}

std::optional<std::uint32_t> PersonaCatalog::find(std::string_view name) const {
  auto it = by_folded_name_.find(fold_name(name));
  if (it == by_folded_name_.end()) return std::nullopt;
  return it->second;
}

}  // namespace personaprop
