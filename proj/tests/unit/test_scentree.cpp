// Copyright 2026 The Epistoch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"

#ifdef EPISTOCH_HAVE_BOOST
#include <boost/math/distributions/normal.hpp>
#endif

using namespace epistoch;

TEST_CASE("inverse normal CDF at reference quantiles") {
  // Standard table values.
  CHECK(inverse_normal_cdf(0.5) == 0.0);
  CHECK(inverse_normal_cdf(0.15) == doctest::Approx(-1.0364333894937898).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.85) == doctest::Approx(1.0364333894937898).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-9));
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::domain_error);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::domain_error);
}

TEST_CASE("inverse normal CDF is the inverse of the CDF and antisymmetric") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
  for (int i = 0; i < 2000; ++i) {
    const double p = u(rng);
    const double x = inverse_normal_cdf(p);
    CHECK(normal_cdf(x) == doctest::Approx(p).epsilon(1e-12));
    CHECK(inverse_normal_cdf(1.0 - p) == doctest::Approx(-x).epsilon(1e-8));
  }
}

#ifdef EPISTOCH_HAVE_BOOST
TEST_CASE("inverse normal CDF agrees with Boost.Math") {
  const boost::math::normal_distribution<double> n;
  for (double p = 0.001; p < 1.0; p += 0.001) {
    CHECK(inverse_normal_cdf(p) == doctest::Approx(boost::math::quantile(n, p)).epsilon(1e-12));
  }
}
#endif

TEST_CASE("node realizations use mean + sigma * z_q with a floor") {
  const std::vector<double> q{0.15, 0.5, 0.85};
  const auto v = node_realizations(0.54, 0.10, q);
  CHECK(v[0] == doctest::Approx(0.54 - 0.10 * 1.0364333894937898));
  CHECK(v[1] == doctest::Approx(0.54));
  CHECK(v[2] == doctest::Approx(0.54 + 0.10 * 1.0364333894937898));
  const auto floored = node_realizations(0.01, 0.5, q, 1e-6);
  CHECK(floored[0] == 1e-6);
  CHECK_THROWS_AS(node_realizations(0.5, 0.0, q), std::invalid_argument);
}

TEST_CASE("two-stage tree: 13 nodes and the case-study path probabilities") {
  const Instance inst = builtin_west_africa();
  const ScenarioTree tree = build_tree(inst, 2);
  CHECK(tree.size() == 13);
  CHECK(tree.leaves().size() == 9);
  const auto paths = scenario_paths(tree);
  REQUIRE(paths.size() == 9);
  // Leaves are breadth-first: (low,low) first, (medium,high) sixth.
  CHECK(paths[0].labels == std::vector<std::string>{"low", "low"});
  CHECK(paths[0].probability == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(paths[5].labels == std::vector<std::string>{"medium", "high"});
  CHECK(paths[5].probability == doctest::Approx(0.12).epsilon(1e-15));
  const double total = std::accumulate(paths.begin(), paths.end(), 0.0,
                                       [](double s, const ScenarioPath& p) { return s + p.probability; });
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("tree invariants: BFS ids, child probabilities, rates follow parents") {
  const Instance inst = builtin_west_africa();
  const ScenarioTree tree = build_tree(inst, 3);
  CHECK(tree.size() == 1 + 3 + 9 + 27);
  for (const auto& n : tree.nodes()) {
    if (n.parent) CHECK(*n.parent < n.id);
    if (n.children.empty()) {
      CHECK(n.stage == 3);
      continue;
    }
    double sum = 0.0;
    for (int c : n.children) {
      sum += tree.node(c).branch_prob;
      CHECK(tree.node(c).stage == n.stage + 1);
      for (std::size_t r = 0; r < inst.region_count(); ++r) {
        const auto expect = node_realizations(n.mean[r], n.sigma[r], tree.spec().quantiles);
        CHECK(tree.node(c).rate[r] == doctest::Approx(expect[static_cast<std::size_t>(tree.node(c).branch_index)]));
      }
    }
    CHECK(sum == doctest::Approx(1.0));
  }
  CHECK(tree.path_to(tree.leaves().back()).size() == 4);
  CHECK(tree.leaves_under(0).size() == 27);
  CHECK(tree.leaves_under(1).size() == 9);
}

TEST_CASE("eight-stage tree has 3^8 leaves with probabilities summing to one") {
  const Instance inst = builtin_west_africa();
  const ScenarioTree tree = build_tree(inst, 8);
  const auto leaves = tree.leaves();
  CHECK(leaves.size() == 6561);
  double total = 0.0;
  for (int id : leaves) total += tree.node(id).path_prob;
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("sigma rules") {
  CHECK(SigmaRule::parse("constant").kind == SigmaRule::Kind::kConstant);
  const SigmaRule s = SigmaRule::parse("scale:0.5");
  CHECK(s.kind == SigmaRule::Kind::kStageScale);
  CHECK(s.factor == 0.5);
  CHECK(SigmaRule::parse(s.to_string()).factor == 0.5);
  CHECK_THROWS_AS(SigmaRule::parse("scale:-1"), std::invalid_argument);
  CHECK_THROWS_AS(SigmaRule::parse("wobbly"), std::invalid_argument);

  const Instance inst = builtin_west_africa();
  TreeSpec spec = TreeSpec::from_instance(inst);
  spec.sigma_rule = SigmaRule::parse("scale:0.5");
  const ScenarioTree tree = build_tree(inst, 2, spec);
  const auto& stage2 = tree.node(tree.nodes_at_stage(2).front());
  CHECK(stage2.sigma[0] == doctest::Approx(inst.regions[0].chi1_sigma * 0.25));
}

TEST_CASE("single-path tree and the expected-value path") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 3, testing::binary_spec());
  const auto ev = expected_value_path(tree);
  REQUIRE(ev.size() == 4);
  // Symmetric quantiles with equal weights average back to the parent mean.
  CHECK(ev[1][0] == doctest::Approx(inst.regions[0].chi1_mean));
  const ScenarioTree path = single_path_tree(ev);
  CHECK(path.size() == 4);
  CHECK(path.stages() == 3);
  CHECK(scenario_paths(path).size() == 1);
  CHECK(scenario_paths(path)[0].probability == 1.0);
  CHECK_THROWS_AS(single_path_tree({{0.5}}), std::invalid_argument);
}

TEST_CASE("build_tree rejects bad arguments") {
  const Instance inst = testing::toy_instance();
  CHECK_THROWS_AS(build_tree(inst, 0), std::invalid_argument);
  TreeSpec spec;
  spec.quantiles = {0.5};
  spec.probs = {0.5, 0.5};
  CHECK_THROWS_AS(build_tree(inst, 2, spec), std::invalid_argument);
}
