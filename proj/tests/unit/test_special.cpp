// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <initializer_list>

#include "doctest.h"
#include "sawtopics/special.hpp"

using namespace sawtopics;

TEST_CASE("lgamma at exact points") {
  CHECK(special::lgamma_pos(1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(special::lgamma_pos(2.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(special::lgamma_pos(4.0) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  CHECK(special::lgamma_pos(0.5) == doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-14));
}

TEST_CASE("lgamma accuracy against libm") {
  // Absolute error where the magnitude of the result allows it, relative
  // error across the full working range.
  for (double x : {1e-3, 0.01, 0.1, 0.37, 1.5, 3.0, 6.7, 10.0, 25.0}) {
    CHECK(std::abs(special::lgamma_pos(x) - std::lgamma(x)) < 1e-10);
  }
  for (double x : {1e-3, 0.2, 1.0, 17.0, 123.0, 4567.0, 9.9e4, 1e6}) {
    const double ref = std::lgamma(x);
    const double err = std::abs(special::lgamma_pos(x) - ref);
    CHECK(err <= 1e-11 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("digamma matches lgamma slope and known values") {
  CHECK(special::digamma(1.0) ==
        doctest::Approx(-special::kEulerMascheroni).epsilon(1e-12));
  // psi(2) = 1 - gamma
  CHECK(special::digamma(2.0) ==
        doctest::Approx(1.0 - special::kEulerMascheroni).epsilon(1e-12));
  // psi(1/2) = -gamma - 2 ln 2
  CHECK(special::digamma(0.5) ==
        doctest::Approx(-special::kEulerMascheroni - 2.0 * std::log(2.0)).epsilon(1e-12));

  for (double x : {1e-3, 0.05, 0.9, 2.3, 7.7, 42.0, 1e4}) {
    const double h = 1e-6 * std::max(1.0, x);
    const double slope =
        (special::lgamma_pos(x + h) - special::lgamma_pos(x - h)) / (2.0 * h);
    CHECK(special::digamma(x) == doctest::Approx(slope).epsilon(1e-6));
  }
}

TEST_CASE("trigamma matches digamma slope and known values") {
  // psi'(1) = pi^2/6
  CHECK(special::trigamma(1.0) == doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-12));
  for (double x : {0.02, 0.6, 3.1, 12.0, 300.0}) {
    const double h = 1e-6 * std::max(1.0, x);
    const double slope = (special::digamma(x + h) - special::digamma(x - h)) / (2.0 * h);
    CHECK(special::trigamma(x) == doctest::Approx(slope).epsilon(1e-6));
  }
}

TEST_CASE("softplus and sigmoid") {
  CHECK(special::softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(special::softplus(800.0) == doctest::Approx(800.0));
  CHECK(special::softplus(-800.0) == doctest::Approx(0.0));
  CHECK(special::sigmoid(0.0) == doctest::Approx(0.5));
  CHECK(special::sigmoid(-40.0) > 0.0);
  CHECK(special::sigmoid(30.0) < 1.0);
  CHECK(special::sigmoid(800.0) == 1.0);  // saturates cleanly, no NaN
}
