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

#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "sawtopics/corpus.hpp"
#include "sawtopics/model.hpp"
#include "sawtopics/special.hpp"
#include "sawtopics/tape.hpp"

namespace sawtopics {

inline constexpr double kRateFloor = 1e-10;

// Topic matrix at layer l (column-stochastic, K_{l-1} x K_l). Sawtooth shares
// the embedding chain between adjacent layers; the unshared variant keeps a
// separate pair per layer; the direct variant softmaxes raw logits.
template <typename Scalar>
ValueId compute_phi(Tape<Scalar>& tape, const TapeModel<Scalar>& model, int l) {
  const int L = model.params->num_layers();
  if (l < 1 || l > L) {
    throw std::runtime_error("compute_phi: layer " + std::to_string(l) +
                             " out of range 1.." + std::to_string(L));
  }
  switch (model.params->variant) {
    case DecoderKind::kSawtooth:
      return softmax_cols(
          tape, matmul(tape, transpose(tape, model.alpha[l - 1]), model.alpha[l]));
    case DecoderKind::kUnsharedDetm:
      return softmax_cols(
          tape, matmul(tape, transpose(tape, model.detm_out[l]), model.detm_in[l]));
    case DecoderKind::kDirectDntm:
      return softmax_cols(tape, model.dntm_w[l]);
  }
  throw std::runtime_error("compute_phi: unreachable");
}

// All topic matrices, 0-based: result[l-1] holds layer l.
template <typename Scalar>
std::vector<ValueId> compute_phi_stack(Tape<Scalar>& tape, const TapeModel<Scalar>& model) {
  std::vector<ValueId> phis;
  const int L = model.params->num_layers();
  phis.reserve(L);
  for (int l = 1; l <= L; ++l) phis.push_back(compute_phi(tape, model, l));
  return phis;
}

// Forward-only evaluation of the topic matrices as plain values.
template <typename Scalar>
std::vector<Mat<Scalar>> phi_values(const ModelParams<Scalar>& params) {
  Tape<Scalar> tape;
  const TapeModel<Scalar> staged = stage_model(tape, params);
  std::vector<Mat<Scalar>> out;
  for (ValueId id : compute_phi_stack(tape, staged)) out.push_back(tape.value(id));
  return out;
}

// Poisson log-likelihood sum_v [x_v log(rate_v) - rate_v - lgamma(x_v + 1)],
// summed over the whole batch. The rate is floored at 1e-10 inside the log
// (and its gradient); the lgamma(x+1) term is a data constant and is kept so
// reported values are true log-pmfs.
template <typename Scalar>
ValueId poisson_loglik(Tape<Scalar>& tape, const Mat<Scalar>& counts, ValueId rate) {
  const auto& rv = tape.value(rate);
  if (counts.rows() != rv.rows() || counts.cols() != rv.cols()) {
    throw ShapeError("poisson_loglik: shape mismatch (" +
                     shape_str(counts.rows(), counts.cols()) + " vs " +
                     shape_str(rv.rows(), rv.cols()) + ")");
  }
  double lgamma_const = 0.0;
  for (Index i = 0; i < counts.rows(); ++i) {
    for (Index j = 0; j < counts.cols(); ++j) {
      const double x = static_cast<double>(counts(i, j));
      if (x < 0.0) {
        throw DomainError("poisson_loglik: negative count at (" + std::to_string(i) +
                          "," + std::to_string(j) + ")");
      }
      lgamma_const += special::lgamma_pos(x + 1.0);
    }
  }
  const ValueId x_const = tape.constant(counts);
  const ValueId floored = clamp_min(tape, rate, static_cast<Scalar>(kRateFloor));
  const ValueId weighted = sum(tape, mul(tape, x_const, log(tape, floored)));
  const ValueId total_rate = sum(tape, rate);
  return add_scalar(tape, sub(tape, weighted, total_rate),
                    static_cast<Scalar>(-lgamma_const));
}

// Projection of layer-l topics to the vocabulary: the product of the topic
// matrices below it. phis is 0-based (phis[0] = layer 1).
template <typename Scalar>
Mat<Scalar> project_topics(const std::vector<Mat<Scalar>>& phis, int l) {
  if (l < 1 || l > static_cast<int>(phis.size())) {
    throw std::runtime_error("project_topics: layer " + std::to_string(l) +
                             " out of range");
  }
  Mat<Scalar> projected = phis[0];
  for (int t = 2; t <= l; ++t) projected = projected * phis[t - 1];
  return projected;
}

// Indices of the n highest-probability words per topic (column), ties broken
// by ascending word id.
template <typename Scalar>
std::vector<std::vector<int>> top_word_ids(const Mat<Scalar>& projected, int n) {
  if (n > projected.rows()) {
    throw std::runtime_error("top_word_ids: n exceeds vocabulary size");
  }
  std::vector<std::vector<int>> result;
  result.reserve(projected.cols());
  for (Index topic = 0; topic < projected.cols(); ++topic) {
    std::vector<int> order(projected.rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (projected(a, topic) != projected(b, topic)) {
        return projected(a, topic) > projected(b, topic);
      }
      return a < b;
    });
    order.resize(n);
    result.push_back(std::move(order));
  }
  return result;
}

template <typename Scalar>
std::vector<std::vector<std::string>> top_words(const Mat<Scalar>& projected, int n,
                                                const Vocabulary& vocab) {
  std::vector<std::vector<std::string>> result;
  for (const auto& ids : top_word_ids(projected, n)) {
    std::vector<std::string> words;
    words.reserve(ids.size());
    for (int id : ids) words.push_back(vocab.terms[id]);
    result.push_back(std::move(words));
  }
  return result;
}

}  // namespace sawtopics
