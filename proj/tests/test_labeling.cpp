#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "personaprop/labeler.hpp"
#include "personaprop/labeling.hpp"
#include "support/synthetic.hpp"

using namespace personaprop;
namespace ts = personaprop::testsupport;

namespace {

PersonaCatalog mba_catalog() {
  return PersonaCatalog({{"Home Decor Aficionado", "decorates the home"},
                         {"Vintage and Retro Enthusiast", "collects vintage pieces"},
                         {"Garden Lover", "tends a garden"}});
}

std::string read_fixture(const char* name) {
  std::ifstream in(std::string(PERSONAPROP_FIXTURE_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("render_label_prompt serializes purchases and constraints") {
  auto catalog = mba_catalog();
  std::vector<Purchase> purchases = {{"FAIRY CAKE DESIGN UMBRELLA", 4},
                                     {"CERAMIC STRAWBERRY DESIGN MUG", 24}};
  auto prompt = render_label_prompt("12358", purchases, catalog, 5);

  CHECK(prompt.user.find("CERAMIC STRAWBERRY DESIGN MUG, 24 times") != std::string::npos);
  CHECK(prompt.user.find("he bought: FAIRY CAKE DESIGN UMBRELLA, 4 times") != std::string::npos);
  CHECK(prompt.user.find("at most 5 personas") != std::string::npos);
  CHECK(prompt.user.find("Unrepresentable") != std::string::npos);
  CHECK(prompt.user.find("json format") != std::string::npos);
  CHECK(prompt.user.find("12358") != std::string::npos);
  for (std::uint32_t m = 0; m < catalog.size(); ++m) {
    CHECK(prompt.user.find(catalog.name_of(m)) != std::string::npos);
  }
  CHECK(!prompt.system.empty());

  SUBCASE("k_max substitutes into the instruction") {
    auto small = render_label_prompt("7", purchases, catalog, 3);
    CHECK(small.user.find("at most 3 personas") != std::string::npos);
  }
  SUBCASE("single-persona catalog lists exactly that persona") {
    PersonaCatalog single(std::vector<Persona>{{"Garden Lover", ""}});
    auto p = render_label_prompt("7", purchases, single, 5);
    CHECK(p.user.find("Garden Lover") != std::string::npos);
    CHECK(p.user.find("Home Decor") == std::string::npos);
  }
  SUBCASE("empty purchase list is an error") {
    CHECK_THROWS_AS(render_label_prompt("7", {}, catalog, 5), LabelerError);
  }
}

TEST_CASE("parse_label_response fixture fidelity") {
  auto catalog = mba_catalog();
  SUBCASE("two-persona answer") {
    auto outcome = parse_label_response(read_fixture("label_response_basic.json"), catalog);
    REQUIRE(outcome.errors.empty());
    REQUIRE(outcome.by_key.count("12358") == 1);
    const auto& parsed = outcome.by_key.at("12358");
    CHECK(parsed.personas == std::vector<std::uint32_t>{0, 1});
    CHECK(!parsed.unrepresentable);
    CHECK(parsed.warnings.empty());
  }
  SUBCASE("unrepresentable answer") {
    auto outcome =
        parse_label_response(read_fixture("label_response_unrepresentable.json"), catalog);
    REQUIRE(outcome.by_key.count("12999") == 1);
    const auto& parsed = outcome.by_key.at("12999");
    CHECK(parsed.personas.empty());
    CHECK(parsed.unrepresentable);
  }
}

TEST_CASE("parse_label_response is defensive") {
  auto catalog = mba_catalog();
  SUBCASE("unknown persona names drop with a warning") {
    auto outcome = parse_label_response(R"({"7": ["NoSuchPersona"]})", catalog);
    const auto& parsed = outcome.by_key.at("7");
    CHECK(parsed.personas.empty());
    REQUIRE(parsed.warnings.size() == 1);
    CHECK(parsed.warnings[0].find("NoSuchPersona") != std::string::npos);
  }
  SUBCASE("case-insensitive matching after trim") {
    auto outcome = parse_label_response(R"({"7": ["  garden lover "]})", catalog);
    CHECK(outcome.by_key.at("7").personas == std::vector<std::uint32_t>{2});
  }
  SUBCASE("multiple JSONL lines") {
    auto outcome = parse_label_response("{\"1\": [\"Garden Lover\"]}\n{\"2\": [\"Home Decor Aficionado\"]}\n",
                                        catalog);
    CHECK(outcome.by_key.size() == 2);
  }
  SUBCASE("code fences are stripped") {
    auto outcome = parse_label_response("```json\n{\"1\": [\"Garden Lover\"]}\n```\n", catalog);
    CHECK(outcome.by_key.at("1").personas == std::vector<std::uint32_t>{2});
  }
  SUBCASE("comma separated string tolerated") {
    auto outcome = parse_label_response(R"({"1": "Garden Lover, Home Decor Aficionado"})", catalog);
    CHECK(outcome.by_key.at("1").personas == std::vector<std::uint32_t>{0, 2});
  }
  SUBCASE("garbage payload reports errors and labels nobody") {
    auto outcome = parse_label_response("sorry, I cannot help with that", catalog);
    CHECK(outcome.by_key.empty());
    CHECK(!outcome.errors.empty());
  }
  SUBCASE("duplicate names collapse") {
    auto outcome = parse_label_response(R"({"1": ["Garden Lover", "garden lover"]})", catalog);
    CHECK(outcome.by_key.at("1").personas == std::vector<std::uint32_t>{2});
  }
}

TEST_CASE("label_users applies oracle answers exactly") {
  auto bundle = ts::random_bipartite(12, 8, 3, 3);
  auto catalog = ts::numbered_catalog(4);
  std::map<std::string, std::vector<std::string>> planted;
  for (NodeId u = 0; u < 12; ++u) {
    planted[bundle.users.key_of(u)] = {catalog.name_of(u % 4)};
  }
  SyntheticLabeler labeler(planted);
  PersonaMatrix pa(12, 4);
  std::vector<NodeId> batch = {0, 3, 7};
  auto report = label_users(labeler, batch, bundle, catalog, pa, 5, nullptr);

  CHECK(report.labeled == std::vector<NodeId>{0, 3, 7});
  CHECK(report.failed.empty());
  CHECK(report.calls == 3);
  for (NodeId u : batch) {
    CHECK(pa.is_prototype(u));
    CHECK(pa.personas_of(u) == std::vector<std::uint32_t>{u % 4});
  }
  CHECK(!pa.is_labeled(1));
}

namespace {

// Breaks the answer for one chosen key and answers for a stranger on another.
class MisbehavingLabeler final : public Labeler {
 public:
  MisbehavingLabeler(std::string broken_key, std::string hijack_key)
      : broken_(std::move(broken_key)), hijack_(std::move(hijack_key)) {}
  std::string complete(const LabelRequest& request) override {
    if (request.key == broken_) return "I am sorry, no JSON today";
    if (request.key == hijack_) return "{\"stranger\": [\"P0\"]}";
    return "{\"" + request.key + "\": [\"P0\"]}";
  }

 private:
  std::string broken_;
  std::string hijack_;
};

}  // namespace

TEST_CASE("label_users error contract") {
  auto bundle = ts::random_bipartite(6, 5, 3, 11);
  auto catalog = ts::numbered_catalog(2);
  MisbehavingLabeler labeler(bundle.users.key_of(1), bundle.users.key_of(2));
  PersonaMatrix pa(6, 2);
  std::vector<NodeId> batch = {0, 1, 2};
  auto report = label_users(labeler, batch, bundle, catalog, pa, 5, nullptr);

  CHECK(report.labeled == std::vector<NodeId>{0});
  CHECK(report.failed == std::vector<NodeId>{1, 2});
  CHECK(pa.is_prototype(0));
  CHECK(!pa.is_labeled(1));
  CHECK(!pa.is_labeled(2));
  bool saw_unrequested = false;
  for (const auto& w : report.warnings) {
    if (w.find("unrequested") != std::string::npos) saw_unrequested = true;
  }
  CHECK(saw_unrequested);
}

TEST_CASE("label cache avoids repeat calls and survives reload") {
  auto bundle = ts::random_bipartite(5, 4, 2, 23);
  auto catalog = ts::numbered_catalog(3);
  std::map<std::string, std::vector<std::string>> planted;
  for (NodeId u = 0; u < 5; ++u) planted[bundle.users.key_of(u)] = {catalog.name_of(0)};
  SyntheticLabeler labeler(planted);

  const std::string path = "test_label_cache.jsonl";
  std::remove(path.c_str());
  {
    LabelCache cache;
    cache.attach(path);
    PersonaMatrix pa(5, 3);
    std::vector<NodeId> batch = {0, 1};
    auto first = label_users(labeler, batch, bundle, catalog, pa, 5, &cache);
    CHECK(first.calls == 2);
  }
  {
    LabelCache cache = LabelCache::load(path);
    CHECK(cache.size() == 2);
    PersonaMatrix pa(5, 3);
    std::vector<NodeId> batch = {0, 1, 4};
    auto second = label_users(labeler, batch, bundle, catalog, pa, 5, &cache);
    CHECK(second.calls == 1);  // only user 4 reaches the labeler
    CHECK(second.labeled.size() == 3);
    CHECK(pa.is_prototype(0));
  }
  std::remove(path.c_str());
}

TEST_CASE("synthetic labeler round-trips the planted assignment") {
  auto catalog = ts::numbered_catalog(5);
  std::map<std::string, std::vector<std::string>> planted = {
      {"a", {"P0", "P3"}}, {"b", {"P4"}}, {"c", {}}};
  SyntheticLabeler labeler(planted);
  for (const auto& [key, names] : planted) {
    LabelRequest request{key, {}};
    auto outcome = parse_label_response(labeler.complete(request), catalog);
    REQUIRE(outcome.by_key.count(key) == 1);
    const auto& parsed = outcome.by_key.at(key);
    std::vector<std::uint32_t> expected;
    for (const auto& n : names) expected.push_back(*catalog.find(n));
    CHECK(parsed.personas == expected);
    CHECK(parsed.unrepresentable == names.empty());
  }
}

TEST_CASE("persona_distribution counts prototype labels") {
  SUBCASE("two prototypes") {
    PersonaMatrix pa(4, 2);
    pa.set_labeled_row(0, std::vector<std::uint32_t>{0});
    pa.set_labeled_row(1, std::vector<std::uint32_t>{0, 1});
    auto q = persona_distribution(pa);
    CHECK(q[0] == doctest::Approx(2.0 / 3.0));
    CHECK(q[1] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("single shared persona") {
    PersonaMatrix pa(3, 3);
    pa.set_labeled_row(0, std::vector<std::uint32_t>{0});
    pa.set_labeled_row(2, std::vector<std::uint32_t>{0});
    auto q = persona_distribution(pa);
    CHECK(q[0] == doctest::Approx(1.0));
    CHECK(q[1] == doctest::Approx(0.0));
  }
  SUBCASE("hand-counted column sums (3,2,1)") {
    PersonaMatrix pa(4, 3);
    pa.set_labeled_row(0, std::vector<std::uint32_t>{0, 1});
    pa.set_labeled_row(1, std::vector<std::uint32_t>{0, 1, 2});
    pa.set_labeled_row(2, std::vector<std::uint32_t>{0});
    auto q = persona_distribution(pa);
    CHECK(q[0] == doctest::Approx(0.5));
    CHECK(q[1] == doctest::Approx(1.0 / 3.0));
    CHECK(q[2] == doctest::Approx(1.0 / 6.0));
  }
  SUBCASE("no labels is an error") {
    PersonaMatrix pa(4, 2);
    CHECK_THROWS_AS(persona_distribution(pa), DistributionError);
    pa.set_labeled_row(0, std::vector<std::uint32_t>{});  // unrepresentable only
    CHECK_THROWS_AS(persona_distribution(pa), DistributionError);
  }
}

TEST_CASE("build_label_matrix") {
  SUBCASE("beta 0 disables de-biasing") {
    PersonaMatrix pa(4, 3);
    pa.set_labeled_row(0, std::vector<std::uint32_t>{0, 2});
    pa.set_labeled_row(1, std::vector<std::uint32_t>{1});
    auto label = build_label_matrix(pa, 0.0);
    for (double c : label.coefficients) CHECK(c == doctest::Approx(1.0));
    CHECK(label.at(0, 0) == doctest::Approx(0.5));
    CHECK(label.at(0, 2) == doctest::Approx(0.5));
    CHECK(label.at(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("coefficients for Q=(0.6,0.3,0.1) at beta 0.5") {
    // 5 users with {0}, 2 with {1}, 1 with {2}, 1 with {0,1}: column sums
    // (6,3,1) over 10 labels.
    PersonaMatrix pa(10, 3);
    for (NodeId u = 0; u < 5; ++u) pa.set_labeled_row(u, std::vector<std::uint32_t>{0});
    pa.set_labeled_row(5, std::vector<std::uint32_t>{1});
    pa.set_labeled_row(6, std::vector<std::uint32_t>{1});
    pa.set_labeled_row(7, std::vector<std::uint32_t>{2});
    pa.set_labeled_row(8, std::vector<std::uint32_t>{0, 1});
    auto label = build_label_matrix(pa, 0.5);
    CHECK(label.coefficients[0] == doctest::Approx(0.4082).epsilon(1e-3));
    CHECK(label.coefficients[1] == doctest::Approx(0.5774).epsilon(1e-3));
    CHECK(label.coefficients[2] == doctest::Approx(1.0));
    // Row with Pa = (1,1,0) gets c/2 per assigned persona.
    const auto row = std::find(label.users.begin(), label.users.end(), 8) - label.users.begin();
    CHECK(label.at(row, 0) == doctest::Approx(0.2041).epsilon(1e-3));
    CHECK(label.at(row, 1) == doctest::Approx(0.2887).epsilon(1e-3));
    CHECK(label.at(row, 2) == doctest::Approx(0.0));
  }
  SUBCASE("coefficients are antitone in Q and peak at 1") {
    PersonaMatrix pa(20, 4);
    std::mt19937_64 rng(2);
    for (NodeId u = 0; u < 12; ++u) {
      std::vector<std::uint32_t> row = {std::uniform_int_distribution<std::uint32_t>(0, 3)(rng)};
      pa.set_labeled_row(u, row);
    }
    auto q = persona_distribution(pa);
    auto label = build_label_matrix(pa, 0.7);
    double max_c = 0.0;
    for (std::uint32_t a = 0; a < 4; ++a) {
      max_c = std::max(max_c, label.coefficients[a]);
      for (std::uint32_t b = 0; b < 4; ++b) {
        if (q[a] > 0.0 && q[b] > 0.0 && q[a] <= q[b]) {
          CHECK(label.coefficients[a] >= label.coefficients[b] - 1e-12);
        }
      }
    }
    CHECK(max_c == doctest::Approx(1.0));
    // Row sums never exceed the largest coefficient.
    for (std::size_t r = 0; r < label.users.size(); ++r) {
      double row_sum = 0.0;
      for (std::uint32_t m = 0; m < 4; ++m) row_sum += label.at(r, m);
      CHECK(row_sum <= max_c + 1e-12);
      CHECK(row_sum <= 1.0 + 1e-12);
    }
  }
  SUBCASE("beta 0 equals plain row normalization") {
    auto pa = ts::random_prototypes(30, 5, 10, 77);
    auto label = build_label_matrix(pa, 0.0);
    for (std::size_t r = 0; r < label.users.size(); ++r) {
      const NodeId u = label.users[r];
      const double expect = 1.0 / pa.row_sum(u);
      for (std::uint32_t m = 0; m < 5; ++m) {
        CHECK(label.at(r, m) == doctest::Approx(pa.at(u, m) ? expect : 0.0));
      }
    }
  }
  SUBCASE("unrepresentable users contribute no rows") {
    PersonaMatrix pa(4, 2);
    pa.set_labeled_row(0, std::vector<std::uint32_t>{1});
    pa.set_labeled_row(1, std::vector<std::uint32_t>{});
    auto label = build_label_matrix(pa, 0.5);
    CHECK(label.users == std::vector<NodeId>{0});
  }
}
