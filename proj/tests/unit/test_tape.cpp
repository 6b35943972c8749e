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
#include <string>
#include <vector>

#include "doctest.h"
#include "sawtopics/tape.hpp"
#include "test_util.hpp"

using namespace sawtopics;
using sawtest::nudge_away_from;
using sawtest::uniform_matrix;

using M = Mat<double>;

TEST_CASE("softmax of zeros is uniform, columns sum to one") {
  Tape<double> tape;
  const ValueId y = softmax_cols(tape, tape.constant(M::Zero(3, 2)));
  const M& v = tape.value(y);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 2; ++j) {
      CHECK(v(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
  for (Index j = 0; j < 2; ++j) {
    CHECK(std::abs(v.col(j).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax columns sum to one and stay in (0,1)") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    Tape<double> tape;
    M logits = uniform_matrix(rng, 5, 4, -15.0, 15.0);
    const M& v = tape.value(softmax_cols(tape, tape.constant(logits)));
    for (Index j = 0; j < v.cols(); ++j) {
      CHECK(std::abs(v.col(j).sum() - 1.0) < 1e-12);
    }
    CHECK((v.array() > 0.0).all());
    CHECK((v.array() < 1.0).all());
  }
  // Max subtraction keeps extreme logits finite and normalized.
  for (int rep = 0; rep < 5; ++rep) {
    Tape<double> tape;
    M logits = uniform_matrix(rng, 5, 4, -300.0, 300.0);
    const M& v = tape.value(softmax_cols(tape, tape.constant(logits)));
    CHECK(v.allFinite());
    for (Index j = 0; j < v.cols(); ++j) {
      CHECK(std::abs(v.col(j).sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("softplus and lgamma forward values") {
  Tape<double> tape;
  M x(1, 1);
  x << 0.0;
  CHECK(tape.value(softplus(tape, tape.constant(x)))(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  M g(1, 2);
  g << 1.0, 4.0;
  const M& lg = tape.value(lgamma(tape, tape.constant(g)));
  CHECK(lg(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lg(0, 1) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
}

TEST_CASE("sum backward is all ones") {
  Tape<double> tape;
  Rng rng(3);
  const ValueId x = tape.constant(uniform_matrix(rng, 4, 5, -2.0, 2.0));
  tape.backward(sum(tape, x));
  CHECK(tape.grad(x).isApprox(M::Ones(4, 5)));
}

TEST_CASE("sum of softmax columns has zero gradient") {
  Tape<double> tape;
  Rng rng(4);
  const ValueId w = tape.constant(uniform_matrix(rng, 6, 3, -3.0, 3.0));
  tape.backward(sum(tape, softmax_cols(tape, w)));
  CHECK(tape.grad(w).array().abs().maxCoeff() < 1e-12);
}

TEST_CASE("non-scalar loss is rejected") {
  Tape<double> tape;
  const ValueId x = tape.constant(M::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(x), ShapeError);
}

TEST_CASE("domain errors name the op and the offending index") {
  Tape<double> tape;
  M x(2, 2);
  x << 1.0, 2.0, -0.5, 3.0;
  const ValueId id = tape.constant(x);
  CHECK_THROWS_WITH_AS(log(tape, id), doctest::Contains("log: non-positive input at (1,0)"),
                       DomainError);
  CHECK_THROWS_AS(lgamma(tape, id), DomainError);
  CHECK_THROWS_AS(pow(tape, id, 0.5), DomainError);
}

TEST_CASE("shape mismatch reports both shapes") {
  Tape<double> tape;
  const ValueId a = tape.constant(M::Ones(2, 3));
  const ValueId b = tape.constant(M::Ones(2, 2));
  CHECK_THROWS_WITH_AS(matmul(tape, a, b), doctest::Contains("2x3"), ShapeError);
  CHECK_THROWS_WITH_AS(add(tape, a, b), doctest::Contains("2x2"), ShapeError);
}

TEST_CASE("concat_rows then split recovers inputs exactly") {
  Tape<double> tape;
  Rng rng(5);
  M a = uniform_matrix(rng, 3, 4, -1.0, 1.0);
  M b = uniform_matrix(rng, 2, 4, -1.0, 1.0);
  const M& cat = tape.value(concat_rows(tape, tape.constant(a), tape.constant(b)));
  CHECK(M(cat.topRows(3)) == a);
  CHECK(M(cat.bottomRows(2)) == b);
}

TEST_CASE("tape evaluation is deterministic") {
  auto run = [] {
    Tape<double> tape;
    Rng rng(17);
    const ValueId x = tape.constant(uniform_matrix(rng, 4, 4, 0.3, 2.0));
    const ValueId y =
        sum(tape, mul(tape, softmax_cols(tape, x), lgamma(tape, x)));
    return tape.value(y)(0, 0);
  };
  CHECK(run() == run());
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(7);
  std::vector<M> params = {uniform_matrix(rng, 4, 3, -1.0, 1.0),
                           uniform_matrix(rng, 3, 2, -1.0, 1.0)};
  M weight = uniform_matrix(rng, 4, 2, -1.0, 1.0);
  const double err = gradient_check<double>(
      [&](Tape<double>& t, const std::vector<ValueId>& ids) {
        return sum(t, mul(t, matmul(t, ids[0], ids[1]), t.constant(weight)));
      },
      params, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("gradient_check on a square is exact to 1e-9") {
  std::vector<M> params = {M::Constant(1, 1, 3.0)};
  const double err = gradient_check<double>(
      [](Tape<double>& t, const std::vector<ValueId>& ids) {
        return sum(t, mul(t, ids[0], ids[0]));
      },
      params, 1e-5);
  CHECK(err < 1e-9);
}

// Every kernel's reverse rule against central differences at random points.
TEST_CASE("kernel backward rules match finite differences") {
  Rng rng(23);
  const double h = 1e-5;

  auto check_unary = [&](const std::string& name, auto&& apply, double lo, double hi,
                         double knot = std::nan(""), int points = 20) {
    for (int rep = 0; rep < points; ++rep) {
      std::vector<M> params = {uniform_matrix(rng, 3, 2, lo, hi)};
      if (!std::isnan(knot)) nudge_away_from(params[0], knot, 1e-3);
      M weight = uniform_matrix(rng, 3, 2, -1.0, 1.0);
      const double err = gradient_check<double>(
          [&](Tape<double>& t, const std::vector<ValueId>& ids) {
            return sum(t, mul(t, apply(t, ids[0]), t.constant(weight)));
          },
          params, h);
      INFO(name, " rep ", rep);
      CHECK(err < 1e-4);
    }
  };

  check_unary("relu", [](Tape<double>& t, ValueId x) { return relu(t, x); }, -2.0, 2.0,
              0.0);
  check_unary("softplus", [](Tape<double>& t, ValueId x) { return softplus(t, x); },
              -4.0, 4.0);
  check_unary("log", [](Tape<double>& t, ValueId x) { return log(t, x); }, 0.2, 4.0);
  check_unary("exp", [](Tape<double>& t, ValueId x) { return exp(t, x); }, -2.0, 2.0);
  check_unary("pow", [](Tape<double>& t, ValueId x) { return pow(t, x, 1.7); }, 0.2,
              4.0);
  check_unary("pow_inv", [](Tape<double>& t, ValueId x) { return pow(t, x, -1.0); },
              0.2, 4.0);
  check_unary("lgamma", [](Tape<double>& t, ValueId x) { return lgamma(t, x); }, 0.2,
              6.0);
  check_unary("digamma", [](Tape<double>& t, ValueId x) { return digamma(t, x); }, 0.2,
              6.0);
  check_unary("softmax_cols",
              [](Tape<double>& t, ValueId x) { return softmax_cols(t, x); }, -3.0, 3.0);
  check_unary("scale", [](Tape<double>& t, ValueId x) { return scale(t, x, -2.5); },
              -2.0, 2.0);
  check_unary("add_scalar",
              [](Tape<double>& t, ValueId x) { return add_scalar(t, x, 0.3); }, -2.0,
              2.0);
  check_unary("clamp_min",
              [](Tape<double>& t, ValueId x) { return clamp_min(t, x, 0.5); }, 0.0, 2.0,
              0.5);

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<M> params = {uniform_matrix(rng, 3, 2, -2.0, 2.0),
                             uniform_matrix(rng, 3, 2, -2.0, 2.0)};
    M weight = uniform_matrix(rng, 3, 2, -1.0, 1.0);
    for (auto op : {OpKind::kAdd, OpKind::kSub, OpKind::kMul}) {
      const double err = gradient_check<double>(
          [&](Tape<double>& t, const std::vector<ValueId>& ids) {
            ValueId y = op == OpKind::kAdd   ? add(t, ids[0], ids[1])
                        : op == OpKind::kSub ? sub(t, ids[0], ids[1])
                                             : mul(t, ids[0], ids[1]);
            return sum(t, mul(t, y, t.constant(weight)));
          },
          params, h);
      CHECK(err < 1e-4);
    }
    const double cat_err = gradient_check<double>(
        [&](Tape<double>& t, const std::vector<ValueId>& ids) {
          M w6 = M::Ones(6, 2);
          return sum(t, mul(t, concat_rows(t, ids[0], ids[1]), t.constant(w6)));
        },
        params, h);
    CHECK(cat_err < 1e-4);
  }

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<M> params = {uniform_matrix(rng, 4, 1, -2.0, 2.0)};
    M weight = uniform_matrix(rng, 4, 3, -1.0, 1.0);
    const double err = gradient_check<double>(
        [&](Tape<double>& t, const std::vector<ValueId>& ids) {
          return sum(t, mul(t, broadcast_row(t, ids[0], 3), t.constant(weight)));
        },
        params, h);
    CHECK(err < 1e-4);
  }

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<M> params = {uniform_matrix(rng, 3, 2, -2.0, 2.0)};
    M weight = uniform_matrix(rng, 2, 3, -1.0, 1.0);
    const double err = gradient_check<double>(
        [&](Tape<double>& t, const std::vector<ValueId>& ids) {
          return sum(t, mul(t, transpose(t, ids[0]), t.constant(weight)));
        },
        params, h);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gradient of a node unused downstream is zero") {
  Tape<double> tape;
  const ValueId x = tape.constant(M::Ones(2, 2));
  const ValueId unused = exp(tape, x);
  const ValueId loss = sum(tape, x);
  tape.backward(loss);
  CHECK(tape.grad(unused).array().abs().maxCoeff() == 0.0);
}

TEST_CASE("broadcast_row replicates a column") {
  Tape<double> tape;
  M v(3, 1);
  v << 1.0, 2.0, 3.0;
  const M& out = tape.value(broadcast_row(tape, tape.constant(v), 4));
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 4);
  for (Index j = 0; j < 4; ++j) {
    CHECK(out(0, j) == 1.0);
    CHECK(out(2, j) == 3.0);
  }
}
