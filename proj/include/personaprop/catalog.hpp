#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace personaprop {

struct Persona {
  std::string name;
  std::string description;
};

// Ordered persona set; the order fixes the column indices of every matrix in
// a run. Names are unique; lookups are case-insensitive after trimming.
class PersonaCatalog {
 public:
  explicit PersonaCatalog(std::vector<Persona> personas);

  // JSON array of {"name": ..., "description": ...}.
  static PersonaCatalog from_json(std::istream& in);
  static PersonaCatalog from_json_file(const std::string& path);

  std::uint32_t size() const { return static_cast<std::uint32_t>(personas_.size()); }
  const Persona& at(std::uint32_t m) const { return personas_[m]; }
  const std::string& name_of(std::uint32_t m) const { return personas_[m].name; }
  const std::vector<Persona>& personas() const { return personas_; }

  std::optional<std::uint32_t> find(std::string_view name) const;

 private:
  std::vector<Persona> personas_;
  std::unordered_map<std::string, std::uint32_t> by_folded_name_;
};

// Lowercased, whitespace-trimmed copy used for persona-name matching.
std::string fold_name(std::string_view name);

}  // namespace personaprop
