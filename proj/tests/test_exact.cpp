#include <cmath>
#include <random>

#include "doctest.h"
#include "personaprop/exact.hpp"
#include "support/synthetic.hpp"

using namespace personaprop;
namespace ts = personaprop::testsupport;

namespace {

LabelMatrix single_label(NodeId user, std::uint32_t persona_count = 1, double weight = 1.0) {
  LabelMatrix label;
  label.users = {user};
  label.persona_count = persona_count;
  label.values.assign(persona_count, 0.0);
  label.values[0] = weight;
  label.coefficients.assign(persona_count, 1.0);
  return label;
}

}  // namespace

TEST_CASE("attention on the shared-item graph") {
  auto bundle = ts::shared_item_graph();
  auto att1 = attention(bundle.graph, 1);
  for (NodeId i = 0; i < 2; ++i) {
    for (NodeId k = 0; k < 2; ++k) CHECK(att1.at(i, k) == doctest::Approx(0.5));
  }
  // The round-trip operator is idempotent here, so longer caps change nothing.
  auto att2 = attention(bundle.graph, 2);
  for (NodeId i = 0; i < 2; ++i) {
    for (NodeId k = 0; k < 2; ++k) CHECK(att2.at(i, k) == doctest::Approx(0.5));
  }
}

TEST_CASE("attention rows on the path graph, walks enumerated by hand") {
  auto bundle = ts::path_graph();
  auto att = attention(bundle.graph, 1);
  CHECK(att.at(0, 0) == doctest::Approx(0.5));
  CHECK(att.at(0, 1) == doctest::Approx(0.5));
  CHECK(att.at(0, 2) == doctest::Approx(0.0));
  CHECK(att.at(2, 0) == doctest::Approx(0.0));
  CHECK(att.at(2, 1) == doctest::Approx(0.5));
  CHECK(att.at(2, 2) == doctest::Approx(0.5));
}

TEST_CASE("attention rows are stochastic without isolated users") {
  auto bundle = ts::random_bipartite(40, 20, 4, 13);
  for (std::uint32_t cap : {1u, 2u, 3u}) {
    auto att = attention(bundle.graph, cap);
    CHECK(!att.had_isolated_users);
    for (NodeId i = 0; i < att.user_count; ++i) {
      double total = 0.0;
      for (NodeId k = 0; k < att.user_count; ++k) {
        CHECK(att.at(i, k) >= 0.0);
        CHECK(att.at(i, k) <= 1.0 + 1e-12);
        total += att.at(i, k);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("attention is symmetric on degree-regular graphs") {
  // Complete bipartite: every user degree 3, every item degree 4.
  std::vector<std::vector<NodeId>> complete(4);
  for (NodeId u = 0; u < 4; ++u) complete[u] = {0, 1, 2};
  auto regular = ts::make_bundle(std::move(complete), 3);
  for (std::uint32_t cap : {1u, 2u}) {
    auto att = attention(regular.graph, cap);
    for (NodeId i = 0; i < 4; ++i) {
      for (NodeId k = 0; k < 4; ++k) {
        CHECK(att.at(i, k) == doctest::Approx(att.at(k, i)).epsilon(1e-12));
      }
    }
  }
  // Alternating cycle: all degrees 2.
  auto cycle = ts::make_bundle({{0, 3}, {0, 1}, {1, 2}, {2, 3}}, 4);
  auto att = attention(cycle.graph, 2);
  for (NodeId i = 0; i < 4; ++i) {
    for (NodeId k = 0; k < 4; ++k) {
      CHECK(att.at(i, k) == doctest::Approx(att.at(k, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("isolated users produce zero attention rows and a flag") {
  auto bundle = ts::make_bundle({{0}, {0}, {}}, 1);
  auto att = attention(bundle.graph, 1);
  CHECK(att.had_isolated_users);
  for (NodeId k = 0; k < 3; ++k) CHECK(att.at(2, k) == doctest::Approx(0.0));
}

TEST_CASE("attention refuses to materialize above the user limit") {
  auto bundle = ts::random_bipartite(30, 10, 3, 1);
  ExactOptions options;
  options.dense_user_limit = 10;
  CHECK_THROWS_AS(attention(bundle.graph, 1, options), BuildError);
}

TEST_CASE("exact_affinity hand cases") {
  SUBCASE("shared item, one prototype") {
    auto bundle = ts::shared_item_graph();
    auto aff = exact_affinity(bundle.graph, single_label(0), 1);
    CHECK(aff.at(0, 0) == doctest::Approx(0.5));
    CHECK(aff.at(1, 0) == doctest::Approx(0.5));
    CHECK(aff.epsilon == 0.0);
  }
  SUBCASE("path graph, one prototype") {
    auto bundle = ts::path_graph();
    auto aff = exact_affinity(bundle.graph, single_label(0), 1);
    CHECK(aff.at(0, 0) == doctest::Approx(0.5));
    CHECK(aff.at(1, 0) == doctest::Approx(0.25));
    CHECK(aff.at(2, 0) == doctest::Approx(0.0));
  }
  SUBCASE("empty label matrix gives the zero matrix") {
    auto bundle = ts::path_graph();
    LabelMatrix empty;
    empty.persona_count = 2;
    auto aff = exact_affinity(bundle.graph, empty, 2);
    for (double v : aff.values) CHECK(v == 0.0);
  }
  SUBCASE("label rows outside the graph are a dimension error") {
    auto bundle = ts::path_graph();
    auto label = single_label(7);
    CHECK_THROWS_AS(exact_affinity(bundle.graph, label, 1), BuildError);
  }
}

TEST_CASE("exact_affinity agrees with attention times label") {
  auto bundle = ts::random_bipartite(30, 15, 4, 21);
  auto pa = ts::random_prototypes(30, 3, 6, 22);
  auto label = build_label_matrix(pa, 0.5);
  for (std::uint32_t cap : {1u, 3u}) {
    auto att = attention(bundle.graph, cap);
    auto aff = exact_affinity(bundle.graph, label, cap);
    std::vector<double> column_max(3, 0.0);
    for (std::size_t r = 0; r < label.users.size(); ++r) {
      for (std::uint32_t m = 0; m < 3; ++m) column_max[m] = std::max(column_max[m], label.at(r, m));
    }
    for (NodeId u = 0; u < 30; ++u) {
      for (std::uint32_t m = 0; m < 3; ++m) {
        double expect = 0.0;
        for (std::size_t r = 0; r < label.users.size(); ++r) {
          expect += att.at(u, label.users[r]) * label.at(r, m);
        }
        CHECK(aff.at(u, m) == doctest::Approx(expect).epsilon(1e-10));
        // Scores never exceed the strongest label weight in the column.
        CHECK(aff.at(u, m) >= 0.0);
        CHECK(aff.at(u, m) <= column_max[m] + 1e-12);
        CHECK(aff.at(u, m) <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("exact_affinity is linear in the label matrix") {
  auto bundle = ts::random_bipartite(25, 12, 4, 31);
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> weight(0.0, 0.5);
  LabelMatrix l1, l2, sum;
  l1.persona_count = l2.persona_count = sum.persona_count = 2;
  for (NodeId u = 0; u < 8; ++u) {
    l1.users.push_back(u);
    l2.users.push_back(u);
    sum.users.push_back(u);
    for (int m = 0; m < 2; ++m) {
      const double a = weight(rng), b = weight(rng);
      l1.values.push_back(a);
      l2.values.push_back(b);
      sum.values.push_back(a + b);
    }
  }
  auto a1 = exact_affinity(bundle.graph, l1, 2);
  auto a2 = exact_affinity(bundle.graph, l2, 2);
  auto a_sum = exact_affinity(bundle.graph, sum, 2);
  for (std::size_t i = 0; i < a_sum.values.size(); ++i) {
    CHECK(a_sum.values[i] == doctest::Approx(a1.values[i] + a2.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("mc_attention hand cases") {
  SUBCASE("single-edge graph is deterministic") {
    auto bundle = ts::make_bundle({{0}}, 1);
    auto row = mc_attention(bundle.graph, 0, 1, 10, 5);
    REQUIRE(row.size() == 1);
    CHECK(row[0] == doctest::Approx(1.0));
  }
  SUBCASE("shared-item graph converges to one half") {
    auto bundle = ts::shared_item_graph();
    auto row = mc_attention(bundle.graph, 0, 1, 100000, 7);
    CHECK(std::fabs(row[0] - 0.5) <= 0.01);
    CHECK(std::fabs(row[1] - 0.5) <= 0.01);
  }
  SUBCASE("path graph from u2 reaches only u1 and u2 in one step") {
    auto bundle = ts::path_graph();
    auto row = mc_attention(bundle.graph, 2, 1, 20000, 9);
    CHECK(row[0] == doctest::Approx(0.0));
    CHECK(row[1] + row[2] == doctest::Approx(1.0));
  }
  SUBCASE("isolated start user raises") {
    auto bundle = ts::make_bundle({{0}, {}}, 1);
    CHECK_THROWS_AS(mc_attention(bundle.graph, 1, 1, 10, 1), IsolatedNodeError);
  }
}

TEST_CASE("mc_attention agrees with the closed form within the sampling bound") {
  const std::size_t n_walks = 20000;
  const double bound = 3.0 * std::sqrt(0.25 / static_cast<double>(n_walks));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto bundle = ts::random_bipartite(30, 15, 4, seed);
    auto att = attention(bundle.graph, 2);
    const NodeId start = static_cast<NodeId>(seed % bundle.graph.user_count());
    auto row = mc_attention(bundle.graph, start, 2, n_walks, seed * 101);
    for (NodeId k = 0; k < att.user_count; ++k) {
      CHECK(std::fabs(row[k] - att.at(start, k)) <= bound);
    }
  }
}
