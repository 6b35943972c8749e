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

#include <string>
#include <utility>
#include <vector>

#include "sawtopics/model.hpp"
#include "sawtopics/rng.hpp"
#include "sawtopics/tape.hpp"

namespace sawtopics {

inline constexpr double kShapeMin = 0.1;     // Weibull shape clamp
inline constexpr double kScaleFloor = 1e-6;  // Weibull scale floor
inline constexpr double kNoiseClip = 1e-6;   // uniform noise clipped to (clip, 1-clip)

template <typename Scalar>
struct UpwardIds {
  std::vector<ValueId> h;        // h[0..L], all H x batch
  std::vector<ValueId> k_hat;    // [l-1]: layer l head, K_l x batch
  std::vector<ValueId> lam_hat;  // [l-1]: layer l head, K_l x batch
};

// Residual deterministic path: the counts are projected to the hidden width
// once, then h^{(l)} = h^{(l-1)} + MLP(h^{(l-1)}) with relu heads per layer.
template <typename Scalar>
UpwardIds<Scalar> upward_pass(Tape<Scalar>& tape, const TapeModel<Scalar>& model,
                              ValueId x) {
  const int L = model.params->num_layers();
  UpwardIds<Scalar> up;
  up.h.push_back(relu(tape, affine(tape, model.input_proj, x)));
  for (int l = 1; l <= L; ++l) {
    const auto& ids = model.enc_layers[l - 1];
    const ValueId prev = up.h.back();
    const ValueId hidden = relu(tape, affine(tape, ids.mlp1, prev));
    const ValueId residual = affine(tape, ids.mlp2, hidden);
    up.h.push_back(add(tape, prev, residual));
    up.k_hat.push_back(relu(tape, affine(tape, ids.head_shape, up.h.back())));
    up.lam_hat.push_back(relu(tape, affine(tape, ids.head_scale, up.h.back())));
  }
  return up;
}

// Combines the prior term (Phi^{(l+1)} theta^{(l+1)}, or the broadcast top
// prior at the top layer) with the upward head to produce the posterior
// Weibull parameters. The shape is clamped to >= 0.1 and the scale floored.
template <typename Scalar>
std::pair<ValueId, ValueId> downward_step(Tape<Scalar>& tape, const EncoderLayerIds& ids,
                                          ValueId prior_term, ValueId k_hat,
                                          ValueId lam_hat) {
  const ValueId shape = clamp_min(
      tape, softplus(tape, affine(tape, ids.comb_shape, concat_rows(tape, prior_term, k_hat))),
      static_cast<Scalar>(kShapeMin));
  const ValueId scale = add_scalar(
      tape, softplus(tape, affine(tape, ids.comb_scale, concat_rows(tape, prior_term, lam_hat))),
      static_cast<Scalar>(kScaleFloor));
  return {shape, scale};
}

// theta = lambda * (-ln(1 - eps))^{1/k}; the noise is a constant, so the
// pathwise gradient flows to k and lambda only.
template <typename Scalar>
ValueId sample_weibull(Tape<Scalar>& tape, ValueId k, ValueId lam,
                       const Mat<Scalar>& eps) {
  const auto& kv = tape.value(k);
  if (eps.rows() != kv.rows() || eps.cols() != kv.cols()) {
    throw ShapeError("sample_weibull: noise shape mismatch (" +
                     shape_str(eps.rows(), eps.cols()) + " vs " +
                     shape_str(kv.rows(), kv.cols()) + ")");
  }
  Mat<Scalar> log_neg_log(eps.rows(), eps.cols());
  for (Index i = 0; i < eps.rows(); ++i) {
    for (Index j = 0; j < eps.cols(); ++j) {
      const double e = static_cast<double>(eps(i, j));
      if (e <= 0.0 || e >= 1.0) {
        throw DomainError("sample_weibull: noise outside (0,1) at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
      }
      log_neg_log(i, j) = static_cast<Scalar>(std::log(-std::log1p(-e)));
    }
  }
  // lambda * exp(log(-ln(1-eps)) / k)
  return mul(tape, lam,
             exp(tape, mul(tape, pow(tape, k, Scalar(-1)), tape.constant(log_neg_log))));
}

template <typename Scalar>
struct PosteriorIds {
  // All 0-based: index l-1 holds layer l, each K_l x batch.
  std::vector<ValueId> shape;  // k
  std::vector<ValueId> scale;  // lambda
  std::vector<ValueId> theta;
  std::vector<ValueId> prior_term;  // Phi^{(l+1)} theta^{(l+1)}, top prior at l = L
};

// Full posterior pass: upward heads first, then top-down sampling layer by
// layer. Noise is one matrix per layer, eps[l-1] of shape K_l x batch.
template <typename Scalar>
PosteriorIds<Scalar> infer(Tape<Scalar>& tape, const TapeModel<Scalar>& model,
                           const std::vector<ValueId>& phis, ValueId x,
                           const std::vector<Mat<Scalar>>& eps) {
  const int L = model.params->num_layers();
  if (static_cast<int>(eps.size()) != L) {
    throw std::runtime_error("infer: expected " + std::to_string(L) +
                             " noise matrices, got " + std::to_string(eps.size()));
  }
  const Index batch = tape.value(x).cols();
  const UpwardIds<Scalar> up = upward_pass(tape, model, x);

  PosteriorIds<Scalar> post;
  post.shape.resize(L);
  post.scale.resize(L);
  post.theta.resize(L);
  post.prior_term.resize(L);

  for (int l = L; l >= 1; --l) {
    const ValueId prior = l == L
                              ? broadcast_row(tape, model.top_prior, batch)
                              : matmul(tape, phis[l], post.theta[l]);
    post.prior_term[l - 1] = prior;
    auto [shape, scale] = downward_step(tape, model.enc_layers[l - 1], prior,
                                        up.k_hat[l - 1], up.lam_hat[l - 1]);
    post.shape[l - 1] = shape;
    post.scale[l - 1] = scale;
    post.theta[l - 1] = sample_weibull(tape, shape, scale, eps[l - 1]);
    if (!tape.value(post.theta[l - 1]).allFinite()) {
      throw DomainError("infer: non-finite theta at layer " + std::to_string(l));
    }
  }
  return post;
}

// Noise for one minibatch, drawn layer by layer from the given stream and
// clipped away from the endpoints.
template <typename Scalar>
std::vector<Mat<Scalar>> draw_noise(Rng& rng, const std::vector<int>& layer_widths,
                                    Index batch) {
  std::vector<Mat<Scalar>> eps;
  eps.reserve(layer_widths.size());
  for (int width : layer_widths) {
    Mat<Scalar> e(width, batch);
    for (Index i = 0; i < e.rows(); ++i) {
      for (Index j = 0; j < e.cols(); ++j) {
        e(i, j) = static_cast<Scalar>(rng.uniform_open(kNoiseClip));
      }
    }
    eps.push_back(std::move(e));
  }
  return eps;
}

// Posterior mean lambda * Gamma(1 + 1/k) of the layer-l Weibull, the
// deterministic document representation used downstream.
template <typename Scalar>
Mat<Scalar> weibull_mean(const Mat<Scalar>& shape, const Mat<Scalar>& scale) {
  Mat<Scalar> mean(shape.rows(), shape.cols());
  for (Index i = 0; i < shape.rows(); ++i) {
    for (Index j = 0; j < shape.cols(); ++j) {
      const double k = static_cast<double>(shape(i, j));
      mean(i, j) = static_cast<Scalar>(
          static_cast<double>(scale(i, j)) *
          std::exp(special::lgamma_pos(1.0 + 1.0 / k)));
    }
  }
  return mean;
}

}  // namespace sawtopics
