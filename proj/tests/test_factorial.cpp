#include <doctest.h>

#include <algorithm>
#include <set>

#include "core/error.hpp"
#include "core/types.hpp"

using namespace mooclet;

namespace {

Mooclet make_factor(const std::string& name, int n_versions) {
  Mooclet m;
  m.id = name;
  m.name = name;
  for (int i = 1; i <= n_versions; ++i) {
    Version v;
    v.id = "v" + std::to_string(i);
    v.label = v.id;
    m.versions.push_back(std::move(v));
  }
  return m;
}

FactorialDesign make_design(const std::vector<int>& sizes) {
  FactorialDesign d;
  d.name = "design";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    d.factors.push_back(make_factor("f" + std::to_string(i + 1), sizes[i]));
  }
  return d;
}

}  // namespace

TEST_CASE("3x3x3 design enumerates exactly 27 combinations") {
  auto combos = enumerate_combinations(make_design({3, 3, 3}));
  CHECK(combos.size() == 27);
  std::set<Combination> unique(combos.begin(), combos.end());
  CHECK(unique.size() == 27);
  // lexicographic in factor order, rightmost fastest
  CHECK(combos.front() == Combination{"v1", "v1", "v1"});
  CHECK(combos[1] == Combination{"v1", "v1", "v2"});
  CHECK(combos.back() == Combination{"v3", "v3", "v3"});
}

TEST_CASE("single factor with one version yields that version") {
  auto combos = enumerate_combinations(make_design({1}));
  REQUIRE(combos.size() == 1);
  CHECK(combos[0] == Combination{"v1"});
}

TEST_CASE("2x3x4 design matches a brute-force cross product") {
  auto design = make_design({2, 3, 4});
  auto combos = enumerate_combinations(design);

  // Independent oracle: generate every index triple and deduplicate.
  std::set<Combination> expected;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 4; ++c)
        expected.insert({design.factors[0].versions[a].id, design.factors[1].versions[b].id,
                         design.factors[2].versions[c].id});
  CHECK(expected.size() == 24);
  CHECK(combos.size() == 24);
  CHECK(std::set<Combination>(combos.begin(), combos.end()) == expected);
}

TEST_CASE("every combination holds exactly one version per factor") {
  auto design = make_design({2, 5, 3});
  for (const auto& combo : enumerate_combinations(design)) {
    REQUIRE(combo.size() == design.factors.size());
    for (std::size_t f = 0; f < combo.size(); ++f) {
      CHECK(design.factors[f].has_version(combo[f]));
    }
  }
}

TEST_CASE("degenerate designs are rejected") {
  CHECK_THROWS_AS(enumerate_combinations(FactorialDesign{}), Error);
  try {
    enumerate_combinations(FactorialDesign{});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_design);
  }

  auto design = make_design({2, 0});
  try {
    enumerate_combinations(design);
    FAIL("expected EmptyFactor");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_factor);
  }
}

TEST_CASE("composite cell ids are auditable strings") {
  auto design = make_design({3, 3, 3});
  auto combos = enumerate_combinations(design);
  CHECK(composite_cell_id(design, combos[0]) == "f1=v1|f2=v1|f3=v1");
  CHECK(composite_cell_id(design, Combination{"v2", "v1", "v3"}) == "f1=v2|f2=v1|f3=v3");
}
