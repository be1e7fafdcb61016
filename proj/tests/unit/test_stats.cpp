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
#include <random>

#include "doctest.h"
#include "epistoch/analysis.hpp"

#ifdef EPISTOCH_HAVE_BOOST
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#endif

using namespace epistoch;

TEST_CASE("paired t-test on differences 1, 2, 3") {
  const std::vector<double> a{2.0, 4.0, 6.0}, b{1.0, 2.0, 3.0};
  const TTestResult r = paired_t_test(a, b);
  CHECK(r.df == 2);
  CHECK(r.t_stat == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
  CHECK(std::abs(r.t_stat - 3.4641) < 1e-3);
  // With two degrees of freedom the two-tailed p-value is 1 - |t| / sqrt(t^2 + 2).
  const double closed = 1.0 - r.t_stat / std::sqrt(r.t_stat * r.t_stat + 2.0);
  CHECK(r.p_value == doctest::Approx(closed).epsilon(1e-12));
  CHECK(std::abs(r.p_value - 0.0742) < 1e-3);
}

TEST_CASE("identical series and antisymmetry") {
  const std::vector<double> a{1.0, 5.0, 2.5, 7.0};
  const TTestResult same = paired_t_test(a, a);
  CHECK(same.t_stat == 0.0);
  CHECK(same.p_value == 1.0);
  CHECK_FALSE(same.degenerate);
  const std::vector<double> b{0.5, 4.0, 3.0, 6.0};
  const TTestResult ab = paired_t_test(a, b), ba = paired_t_test(b, a);
  CHECK(ab.t_stat == doctest::Approx(-ba.t_stat));
  CHECK(ab.p_value == doctest::Approx(ba.p_value));
  const std::vector<double> shifted{2.0, 6.0, 3.5, 8.0};
  const TTestResult d = paired_t_test(shifted, a);
  CHECK(d.degenerate);
  CHECK(d.p_value == 0.0);
  CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("incomplete beta closed forms") {
  // I_x(1, 1) = x, I_x(a, 1) = x^a, I_x(1, b) = 1 - (1 - x)^b.
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    CHECK(regularized_incomplete_beta(x, 1.0, 1.0) == doctest::Approx(x).epsilon(1e-13));
    CHECK(regularized_incomplete_beta(x, 3.0, 1.0) == doctest::Approx(std::pow(x, 3.0)).epsilon(1e-13));
    CHECK(regularized_incomplete_beta(x, 1.0, 2.5) == doctest::Approx(1.0 - std::pow(1.0 - x, 2.5)).epsilon(1e-13));
  }
  CHECK(regularized_incomplete_beta(0.3, 2.0, 5.0) + regularized_incomplete_beta(0.7, 5.0, 2.0) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(regularized_incomplete_beta(1.5, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(regularized_incomplete_beta(0.5, 0.0, 1.0), std::invalid_argument);
  // One degree of freedom is Cauchy: p = 1 - 2 atan(|t|) / pi.
  CHECK(student_t_two_tailed(1.7, 1.0) == doctest::Approx(1.0 - 2.0 * std::atan(1.7) / M_PI).epsilon(1e-12));
}

#ifdef EPISTOCH_HAVE_BOOST
TEST_CASE("Student t tails agree with Boost.Math") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int i = 0; i < 500; ++i) {
    const double t = u(rng), df = 1.0 + std::floor(u(rng) * 10.0);
    const boost::math::students_t dist(df);
    const double want = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    CHECK(student_t_two_tailed(t, df) == doctest::Approx(want).epsilon(1e-10));
    const double x = u(rng) / 6.0, a = 0.5 + u(rng), b = 0.5 + u(rng);
    CHECK(regularized_incomplete_beta(x, a, b) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-11));
  }
}
#endif
