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

#include <cmath>
#include <string>
#include <vector>

#include "sawtopics/rng.hpp"
#include "sawtopics/tape.hpp"
#include "sawtopics/types.hpp"

namespace sawtopics {

enum class DecoderKind { kSawtooth, kUnsharedDetm, kDirectDntm };

inline std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kSawtooth: return "sawetm";
    case DecoderKind::kUnsharedDetm: return "detm";
    case DecoderKind::kDirectDntm: return "dntm";
  }
  return "sawetm";
}

inline DecoderKind decoder_kind_from_string(const std::string& s) {
  if (s == "sawetm") return DecoderKind::kSawtooth;
  if (s == "detm") return DecoderKind::kUnsharedDetm;
  if (s == "dntm") return DecoderKind::kDirectDntm;
  throw std::runtime_error("unknown decoder variant: " + s +
                           " (expected sawetm|detm|dntm)");
}

template <typename Scalar>
struct AffineParams {
  Mat<Scalar> w;  // out x in
  Mat<Scalar> b;  // out x 1, broadcast over batch columns
};

template <typename Scalar>
struct EncoderLayerParams {
  AffineParams<Scalar> mlp1, mlp2;              // H -> H -> H residual block
  AffineParams<Scalar> head_shape, head_scale;  // H -> K_l
  AffineParams<Scalar> comb_shape, comb_scale;  // 2 K_l -> K_l
};

template <typename Scalar>
struct EncoderParams {
  AffineParams<Scalar> input_proj;  // V -> H
  std::vector<EncoderLayerParams<Scalar>> layers;
};

// All learnable state of one model. Decoder storage depends on the variant:
// sawtooth holds the shared embedding chain alpha[0..L], the unshared variant
// holds per-layer (output-side, input-side) pairs, and the direct variant
// holds raw logit matrices.
template <typename Scalar>
struct ModelParams {
  DecoderKind variant = DecoderKind::kSawtooth;
  int vocab_size = 0;
  std::vector<int> layer_widths;  // K_1..K_L
  int embed_dim = 0;
  int hidden = 0;
  bool log1p_input = false;

  std::vector<Mat<Scalar>> alpha;     // [0]: D x V, [l]: D x K_l
  std::vector<Mat<Scalar>> detm_out;  // [l]: D x K_{l-1}, index 0 unused
  std::vector<Mat<Scalar>> detm_in;   // [l]: D x K_l, index 0 unused
  std::vector<Mat<Scalar>> dntm_w;    // [l]: K_{l-1} x K_l, index 0 unused

  Mat<Scalar> top_prior_raw;  // K_L x 1; the prior shape is softplus of this
  EncoderParams<Scalar> encoder;

  int num_layers() const { return static_cast<int>(layer_widths.size()); }
  int width(int l) const { return l == 0 ? vocab_size : layer_widths[l - 1]; }

  // Visits every parameter matrix in a fixed canonical order; gradient
  // merging, Adam state, and checkpoints all rely on this order.
  template <typename Fn>
  void for_each_param(Fn&& fn) {
    const int L = num_layers();
    switch (variant) {
      case DecoderKind::kSawtooth:
        for (int l = 0; l <= L; ++l) fn("alpha" + std::to_string(l), alpha[l]);
        break;
      case DecoderKind::kUnsharedDetm:
        for (int l = 1; l <= L; ++l) {
          fn("detm_out" + std::to_string(l), detm_out[l]);
          fn("detm_in" + std::to_string(l), detm_in[l]);
        }
        break;
      case DecoderKind::kDirectDntm:
        for (int l = 1; l <= L; ++l) fn("dntm_w" + std::to_string(l), dntm_w[l]);
        break;
    }
    fn("top_prior_raw", top_prior_raw);
    fn("enc_in_w", encoder.input_proj.w);
    fn("enc_in_b", encoder.input_proj.b);
    for (int l = 1; l <= L; ++l) {
      auto& layer = encoder.layers[l - 1];
      const std::string p = "enc" + std::to_string(l) + "_";
      fn(p + "mlp1_w", layer.mlp1.w);
      fn(p + "mlp1_b", layer.mlp1.b);
      fn(p + "mlp2_w", layer.mlp2.w);
      fn(p + "mlp2_b", layer.mlp2.b);
      fn(p + "head_shape_w", layer.head_shape.w);
      fn(p + "head_shape_b", layer.head_shape.b);
      fn(p + "head_scale_w", layer.head_scale.w);
      fn(p + "head_scale_b", layer.head_scale.b);
      fn(p + "comb_shape_w", layer.comb_shape.w);
      fn(p + "comb_shape_b", layer.comb_shape.b);
      fn(p + "comb_scale_w", layer.comb_scale.w);
      fn(p + "comb_scale_b", layer.comb_scale.b);
    }
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    const_cast<ModelParams*>(this)->for_each_param(
        [&fn](const std::string& name, Mat<Scalar>& m) {
          fn(name, static_cast<const Mat<Scalar>&>(m));
        });
  }

  std::size_t num_param_matrices() const {
    std::size_t n = 0;
    for_each_param([&n](const std::string&, const Mat<Scalar>&) { ++n; });
    return n;
  }
};

namespace detail {

template <typename Scalar>
Mat<Scalar> normal_init(Rng& rng, Index rows, Index cols, double stddev) {
  Mat<Scalar> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = static_cast<Scalar>(stddev * rng.normal());
    }
  }
  return m;
}

template <typename Scalar>
AffineParams<Scalar> affine_init(Rng& rng, Index out, Index in) {
  // He-style scaling for the relu pathways.
  return {normal_init<Scalar>(rng, out, in, std::sqrt(2.0 / static_cast<double>(in))),
          Mat<Scalar>::Zero(out, 1)};
}

}  // namespace detail

// Embeddings start at N(0, 0.02) so initial topic matrices sit near uniform;
// the raw top prior starts at softplus^{-1}(1) so the prior shape vector is
// all-ones.
template <typename Scalar>
ModelParams<Scalar> init_model(DecoderKind variant, int vocab_size,
                               std::vector<int> layer_widths, int embed_dim, int hidden,
                               std::uint32_t seed, bool log1p_input = false) {
  if (vocab_size < 1 || layer_widths.empty() || embed_dim < 1 || hidden < 1) {
    throw std::runtime_error("init_model: sizes must be positive");
  }
  ModelParams<Scalar> model;
  model.variant = variant;
  model.vocab_size = vocab_size;
  model.layer_widths = std::move(layer_widths);
  model.embed_dim = embed_dim;
  model.hidden = hidden;
  model.log1p_input = log1p_input;
  const int L = model.num_layers();

  Rng rng({seed, 0x1a17u});
  constexpr double kEmbedStd = 0.02;

  switch (variant) {
    case DecoderKind::kSawtooth:
      model.alpha.resize(L + 1);
      for (int l = 0; l <= L; ++l) {
        model.alpha[l] =
            detail::normal_init<Scalar>(rng, embed_dim, model.width(l), kEmbedStd);
      }
      break;
    case DecoderKind::kUnsharedDetm:
      model.detm_out.resize(L + 1);
      model.detm_in.resize(L + 1);
      for (int l = 1; l <= L; ++l) {
        model.detm_out[l] =
            detail::normal_init<Scalar>(rng, embed_dim, model.width(l - 1), kEmbedStd);
        model.detm_in[l] =
            detail::normal_init<Scalar>(rng, embed_dim, model.width(l), kEmbedStd);
      }
      break;
    case DecoderKind::kDirectDntm:
      model.dntm_w.resize(L + 1);
      for (int l = 1; l <= L; ++l) {
        model.dntm_w[l] =
            detail::normal_init<Scalar>(rng, model.width(l - 1), model.width(l), kEmbedStd);
      }
      break;
  }

  const double raw_one = std::log(std::exp(1.0) - 1.0);
  model.top_prior_raw = Mat<Scalar>::Constant(model.width(L), 1, static_cast<Scalar>(raw_one));

  model.encoder.input_proj = detail::affine_init<Scalar>(rng, hidden, vocab_size);
  model.encoder.layers.resize(L);
  for (int l = 1; l <= L; ++l) {
    auto& layer = model.encoder.layers[l - 1];
    const int k = model.width(l);
    layer.mlp1 = detail::affine_init<Scalar>(rng, hidden, hidden);
    layer.mlp2 = detail::affine_init<Scalar>(rng, hidden, hidden);
    layer.head_shape = detail::affine_init<Scalar>(rng, k, hidden);
    layer.head_scale = detail::affine_init<Scalar>(rng, k, hidden);
    layer.comb_shape = detail::affine_init<Scalar>(rng, k, 2 * k);
    layer.comb_scale = detail::affine_init<Scalar>(rng, k, 2 * k);
  }
  return model;
}

// --- Tape staging -----------------------------------------------------------

struct AffineIds {
  ValueId w, b;
};

struct EncoderLayerIds {
  AffineIds mlp1, mlp2, head_shape, head_scale, comb_shape, comb_scale;
};

// Parameter leaves of one model staged on a tape, in canonical order, plus
// the derived positive top-prior node.
template <typename Scalar>
struct TapeModel {
  const ModelParams<Scalar>* params = nullptr;
  std::vector<ValueId> leaves;  // aligned with for_each_param order

  std::vector<ValueId> alpha;
  std::vector<ValueId> detm_out, detm_in, dntm_w;
  ValueId top_prior_raw;
  AffineIds input_proj;
  std::vector<EncoderLayerIds> enc_layers;

  ValueId top_prior;  // softplus(top_prior_raw), K_L x 1
};

template <typename Scalar>
TapeModel<Scalar> stage_model(Tape<Scalar>& tape, const ModelParams<Scalar>& params) {
  TapeModel<Scalar> staged;
  staged.params = &params;

  std::vector<ValueId> ids;
  params.for_each_param([&](const std::string&, const Mat<Scalar>& m) {
    ids.push_back(tape.constant(m));
  });
  staged.leaves = ids;

  std::size_t next = 0;
  auto take = [&] { return ids.at(next++); };
  const int L = params.num_layers();
  switch (params.variant) {
    case DecoderKind::kSawtooth:
      staged.alpha.resize(L + 1);
      for (int l = 0; l <= L; ++l) staged.alpha[l] = take();
      break;
    case DecoderKind::kUnsharedDetm:
      staged.detm_out.resize(L + 1);
      staged.detm_in.resize(L + 1);
      for (int l = 1; l <= L; ++l) {
        staged.detm_out[l] = take();
        staged.detm_in[l] = take();
      }
      break;
    case DecoderKind::kDirectDntm:
      staged.dntm_w.resize(L + 1);
      for (int l = 1; l <= L; ++l) staged.dntm_w[l] = take();
      break;
  }
  staged.top_prior_raw = take();
  staged.input_proj = {take(), take()};
  staged.enc_layers.resize(L);
  for (int l = 0; l < L; ++l) {
    auto& ids_l = staged.enc_layers[l];
    ids_l.mlp1 = {take(), take()};
    ids_l.mlp2 = {take(), take()};
    ids_l.head_shape = {take(), take()};
    ids_l.head_scale = {take(), take()};
    ids_l.comb_shape = {take(), take()};
    ids_l.comb_scale = {take(), take()};
  }

  staged.top_prior = softplus(tape, staged.top_prior_raw);
  return staged;
}

// w * x + b with the bias replicated over batch columns.
template <typename Scalar>
ValueId affine(Tape<Scalar>& tape, const AffineIds& p, ValueId x) {
  return add(tape, matmul(tape, p.w, x),
             broadcast_row(tape, p.b, tape.value(x).cols()));
}

}  // namespace sawtopics
