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

#include <chrono>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sawtopics/corpus.hpp"
#include "sawtopics/decoder.hpp"
#include "sawtopics/encoder.hpp"
#include "sawtopics/model.hpp"

namespace sawtopics {

inline constexpr double kPriorShapeFloor = 1e-10;  // guards lgamma near zero
inline constexpr double kGammaRate = 1.0;          // fixed c for every layer

// Analytic KL(Weibull(k, lambda) || Gamma(alpha, beta)) with beta a rate,
// elementwise over equal-shaped matrices and summed:
//   gamma*alpha/k - alpha ln lambda + ln k + beta lambda Gamma(1 + 1/k)
//   - gamma - 1 - alpha ln beta + ln Gamma(alpha)
template <typename Scalar>
ValueId kl_weibull_gamma(Tape<Scalar>& tape, ValueId k, ValueId lam, ValueId alpha,
                         ValueId beta) {
  const Scalar gamma_c = static_cast<Scalar>(special::kEulerMascheroni);
  const ValueId inv_k = pow(tape, k, Scalar(-1));
  const ValueId mean_term = exp(tape, lgamma(tape, add_scalar(tape, inv_k, Scalar(1))));
  const ValueId positive = add(
      tape,
      add(tape, scale(tape, mul(tape, alpha, inv_k), gamma_c), log(tape, k)),
      add(tape, mul(tape, beta, mul(tape, lam, mean_term)), lgamma(tape, alpha)));
  const ValueId negative =
      add(tape, mul(tape, alpha, log(tape, lam)), mul(tape, alpha, log(tape, beta)));
  const ValueId elem =
      add_scalar(tape, sub(tape, positive, negative), Scalar(-gamma_c - 1));
  return sum(tape, elem);
}

template <typename Scalar>
struct ElboIds {
  ValueId loss;   // 1x1, beta_warm * sum KL - reconstruction log-likelihood
  ValueId recon;  // 1x1 Poisson log-likelihood of the batch
  std::vector<ValueId> kl_layers;
};

// Negative warm-up ELBO of one minibatch. The KL prior shape at layer l is
// the same Phi^{(l+1)} theta^{(l+1)} node the downward pass consumed (the
// broadcast top prior at l = L), floored before entering lgamma.
template <typename Scalar>
ElboIds<Scalar> elbo(Tape<Scalar>& tape, const TapeModel<Scalar>& model,
                     const std::vector<ValueId>& phis, const Mat<Scalar>& counts,
                     const PosteriorIds<Scalar>& post, double beta_warm,
                     double gamma_rate = kGammaRate) {
  if (!(beta_warm >= 0.0 && beta_warm <= 1.0)) {
    throw DomainError("elbo: beta_warm must lie in [0,1]");
  }
  const int L = static_cast<int>(post.theta.size());
  ElboIds<Scalar> out;

  const ValueId rate = matmul(tape, phis[0], post.theta[0]);
  out.recon = poisson_loglik(tape, counts, rate);

  ValueId kl_total{-1};
  for (int l = 1; l <= L; ++l) {
    const ValueId alpha_l =
        clamp_min(tape, post.prior_term[l - 1], static_cast<Scalar>(kPriorShapeFloor));
    const auto& shape_value = tape.value(post.shape[l - 1]);
    const ValueId beta_l = tape.constant(Mat<Scalar>::Constant(
        shape_value.rows(), shape_value.cols(), static_cast<Scalar>(gamma_rate)));
    const ValueId kl_l =
        kl_weibull_gamma(tape, post.shape[l - 1], post.scale[l - 1], alpha_l, beta_l);
    out.kl_layers.push_back(kl_l);
    kl_total = l == 1 ? kl_l : add(tape, kl_total, kl_l);
  }

  out.loss = sub(tape, scale(tape, kl_total, static_cast<Scalar>(beta_warm)), out.recon);

  const double loss_value = static_cast<double>(tape.value(out.loss)(0, 0));
  if (!std::isfinite(loss_value)) {
    std::ostringstream msg;
    msg << "elbo: non-finite loss (recon=" << tape.value(out.recon)(0, 0);
    for (int l = 1; l <= L; ++l) {
      msg << ", kl_" << l << "=" << tape.value(out.kl_layers[l - 1])(0, 0);
    }
    msg << ")";
    throw DomainError(msg.str());
  }
  return out;
}

// Linear warm-up: 0 at epoch 0, 1 from epoch N on; N = 0 disables warm-up.
inline double warmup_beta(int epoch, int warmup_epochs) {
  if (warmup_epochs < 0) throw DomainError("warmup_beta: N must be >= 0");
  if (warmup_epochs == 0) return 1.0;
  return std::min(1.0, static_cast<double>(epoch) / warmup_epochs);
}

template <typename Scalar>
double global_grad_norm(const std::vector<Mat<Scalar>>& grads) {
  double sum_sq = 0.0;
  for (const auto& g : grads) sum_sq += static_cast<double>(g.squaredNorm());
  return std::sqrt(sum_sq);
}

// Scales every gradient by threshold / ||g|| when the global L2 norm exceeds
// the threshold. Returns the pre-clip norm.
template <typename Scalar>
double clip_gradients(std::vector<Mat<Scalar>>& grads, double threshold) {
  if (!(threshold > 0.0)) throw DomainError("clip_gradients: threshold must be > 0");
  const double norm = global_grad_norm(grads);
  if (norm > threshold) {
    const Scalar factor = static_cast<Scalar>(threshold / norm);
    for (auto& g : grads) g *= factor;
  }
  return norm;
}

template <typename Scalar>
struct AdamState {
  std::vector<Mat<Scalar>> m, v;
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(ModelParams<Scalar>& model) {
  AdamState<Scalar> state;
  model.for_each_param([&](const std::string&, Mat<Scalar>& p) {
    state.m.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
    state.v.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
  });
  return state;
}

// One bias-corrected Adam update over all parameters, in canonical order.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& model, const std::vector<Mat<Scalar>>& grads,
               AdamState<Scalar>& state, double lr) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  std::size_t i = 0;
  model.for_each_param([&](const std::string&, Mat<Scalar>& p) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    m = static_cast<Scalar>(state.beta1) * m + static_cast<Scalar>(1.0 - state.beta1) * g;
    v.array() = static_cast<Scalar>(state.beta2) * v.array() +
                static_cast<Scalar>(1.0 - state.beta2) * g.array().square();
    p.array() -= static_cast<Scalar>(lr) * (m.array() / static_cast<Scalar>(bc1)) /
                 ((v.array() / static_cast<Scalar>(bc2)).sqrt() + static_cast<Scalar>(state.eps));
    ++i;
  });
}

struct TrainConfig {
  std::vector<int> layer_widths{64};
  int embed_dim = 100;
  int hidden = 256;
  double learning_rate = 1e-2;
  int batch_size = 200;
  int epochs = 100;
  int warmup_epochs = 20;
  double clip_norm = 20.0;
  std::uint32_t seed = 1;
  DecoderKind variant = DecoderKind::kSawtooth;
  bool log1p_input = false;
  int checkpoint_every = 10;
  int workers = 1;
};

inline std::vector<std::string> validate_train_config(const TrainConfig& c) {
  std::vector<std::string> errors;
  if (c.layer_widths.empty()) errors.push_back("layer_widths must be nonempty");
  for (int k : c.layer_widths) {
    if (k < 1) errors.push_back("layer widths must be positive");
  }
  if (c.embed_dim < 1) errors.push_back("embed_dim must be positive");
  if (c.hidden < 1) errors.push_back("hidden must be positive");
  if (!(c.learning_rate > 0.0)) errors.push_back("learning_rate must be positive");
  if (c.batch_size < 1) errors.push_back("batch_size must be positive");
  if (c.epochs < 0) errors.push_back("epochs must be >= 0");
  if (c.warmup_epochs < 0) errors.push_back("warmup_epochs must be >= 0");
  if (c.epochs > 0 && c.warmup_epochs > c.epochs) {
    errors.push_back("warmup_epochs must not exceed epochs");
  }
  if (!(c.clip_norm > 0.0)) errors.push_back("clip_norm must be positive");
  if (c.workers < 1) errors.push_back("workers must be >= 1");
  if (c.checkpoint_every < 1) errors.push_back("checkpoint_every must be >= 1");
  return errors;
}

struct EpochLogRow {
  int epoch = 0;
  double loss = 0.0;   // per-document mean of the minibatch losses
  double recon = 0.0;  // per-document mean reconstruction log-likelihood
  std::vector<double> kl_layers;
  double beta_warm = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm, averaged over the epoch's steps
  double wallclock_s = 0.0;
};

struct TrainStats {
  double min_sampled_shape = std::numeric_limits<double>::infinity();
  double max_postclip_norm = 0.0;
  long long steps = 0;
  bool aborted = false;
  std::string abort_reason;
};

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> model;
  std::vector<EpochLogRow> log;
  TrainStats stats;
};

// Dense column block of the given documents.
template <typename Scalar>
Mat<Scalar> dense_batch(const SparseCorpus& corpus, const std::vector<int>& doc_ids,
                        bool log1p_input) {
  Mat<Scalar> x = Mat<Scalar>::Zero(corpus.vocab_size, doc_ids.size());
  for (std::size_t j = 0; j < doc_ids.size(); ++j) {
    for (const auto& [word, count] : corpus.docs[doc_ids[j]]) {
      x(word, j) = static_cast<Scalar>(count);
    }
  }
  if (log1p_input) x = x.array().log1p();
  return x;
}

namespace detail {

template <typename Scalar>
struct ShardOutput {
  std::vector<Mat<Scalar>> grads;
  double loss_sum = 0.0;
  double recon_sum = 0.0;
  std::vector<double> kl_sums;
  double min_shape = std::numeric_limits<double>::infinity();
  bool failed = false;
  std::string error;
};

// Forward + backward over one contiguous slice of the minibatch. Noise comes
// from the (seed, step, shard) stream, so runs are reproducible at a fixed
// shard count.
template <typename Scalar>
void run_shard(const ModelParams<Scalar>& model, const Mat<Scalar>& x_shard,
               double beta_warm, std::uint32_t seed, long long step, int shard,
               ShardOutput<Scalar>& out) {
  try {
    Tape<Scalar> tape;
    const TapeModel<Scalar> staged = stage_model(tape, model);
    const std::vector<ValueId> phis = compute_phi_stack(tape, staged);
    Rng noise_rng({seed, static_cast<std::uint32_t>(step),
                   static_cast<std::uint32_t>(shard), 0x5709u});
    const std::vector<Mat<Scalar>> eps =
        draw_noise<Scalar>(noise_rng, model.layer_widths, x_shard.cols());
    const ValueId x = tape.constant(x_shard);
    const PosteriorIds<Scalar> post = infer(tape, staged, phis, x, eps);
    const ElboIds<Scalar> objective = elbo(tape, staged, phis, x_shard, post, beta_warm);

    tape.backward(objective.loss);
    out.grads.clear();
    out.grads.reserve(staged.leaves.size());
    for (ValueId leaf : staged.leaves) out.grads.push_back(tape.grad(leaf));

    out.loss_sum = static_cast<double>(tape.value(objective.loss)(0, 0));
    out.recon_sum = static_cast<double>(tape.value(objective.recon)(0, 0));
    out.kl_sums.clear();
    for (ValueId kl : objective.kl_layers) {
      out.kl_sums.push_back(static_cast<double>(tape.value(kl)(0, 0)));
    }
    for (ValueId k : post.shape) {
      out.min_shape =
          std::min(out.min_shape, static_cast<double>(tape.value(k).minCoeff()));
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
}

}  // namespace detail

// Algorithm loop: shuffle documents each epoch, draw fresh uniform noise per
// minibatch, build the tape (topic matrices -> posterior -> objective), run
// backward, clip, and update encoder and decoder parameters jointly with
// Adam. Deterministic for a fixed seed and worker count.
template <typename Scalar>
TrainResult<Scalar> train(
    const SparseCorpus& corpus, const TrainConfig& config,
    const std::function<void(const ModelParams<Scalar>&, int, bool)>& checkpoint_sink = {},
    const std::function<void(const EpochLogRow&)>& on_epoch = {}) {
  {
    const auto errors = validate_train_config(config);
    if (!errors.empty()) {
      std::string joined;
      for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
      throw std::runtime_error("train: invalid config: " + joined);
    }
  }
  if (corpus.docs.empty()) throw std::runtime_error("train: empty corpus");

  TrainResult<Scalar> result;
  result.model = init_model<Scalar>(config.variant, corpus.vocab_size,
                                    config.layer_widths, config.embed_dim, config.hidden,
                                    config.seed, config.log1p_input);
  AdamState<Scalar> adam = make_adam_state(result.model);
  const int L = result.model.num_layers();
  const int num_docs = static_cast<int>(corpus.docs.size());
  const auto t_start = std::chrono::steady_clock::now();

  ModelParams<Scalar> last_good = result.model;
  long long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double beta = warmup_beta(epoch, config.warmup_epochs);

    std::vector<int> order(num_docs);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng({config.seed, static_cast<std::uint32_t>(epoch), 0x0d0cu});
    shuffle_rng.shuffle(order);

    EpochLogRow row;
    row.epoch = epoch;
    row.beta_warm = beta;
    row.kl_layers.assign(L, 0.0);
    double grad_norm_sum = 0.0;
    int docs_seen = 0;
    int steps_in_epoch = 0;

    for (int begin = 0; begin < num_docs; begin += config.batch_size) {
      const int batch = std::min(config.batch_size, num_docs - begin);
      const std::vector<int> doc_ids(order.begin() + begin, order.begin() + begin + batch);
      const Mat<Scalar> x =
          dense_batch<Scalar>(corpus, doc_ids, config.log1p_input);

      const int shards = std::min(config.workers, batch);
      std::vector<detail::ShardOutput<Scalar>> outputs(shards);
      {
        std::vector<std::thread> threads;
        const int chunk = (batch + shards - 1) / shards;
        for (int s = 0; s < shards; ++s) {
          const int col0 = s * chunk;
          const int cols = std::min(chunk, batch - col0);
          if (cols <= 0) {
            outputs[s].grads.clear();
            continue;
          }
          const Mat<Scalar> x_shard = x.middleCols(col0, cols);
          if (shards == 1) {
            detail::run_shard(result.model, x_shard, beta, config.seed, step, s,
                              outputs[s]);
          } else {
            threads.emplace_back([&, s, x_shard] {
              detail::run_shard(result.model, x_shard, beta, config.seed, step, s,
                                outputs[s]);
            });
          }
        }
        for (auto& t : threads) t.join();
      }

      for (const auto& out : outputs) {
        if (out.failed) {
          result.stats.aborted = true;
          result.stats.abort_reason = out.error;
          result.model = last_good;
          if (checkpoint_sink) checkpoint_sink(result.model, epoch, true);
          return result;
        }
      }

      // Deterministic reduction in shard order.
      std::vector<Mat<Scalar>> grads;
      double loss_sum = 0.0, recon_sum = 0.0;
      std::vector<double> kl_sums(L, 0.0);
      for (int s = 0; s < shards; ++s) {
        auto& out = outputs[s];
        if (out.grads.empty()) continue;
        if (grads.empty()) {
          grads = std::move(out.grads);
        } else {
          for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += out.grads[i];
        }
        loss_sum += out.loss_sum;
        recon_sum += out.recon_sum;
        for (int l = 0; l < L; ++l) kl_sums[l] += out.kl_sums[l];
        result.stats.min_sampled_shape =
            std::min(result.stats.min_sampled_shape, out.min_shape);
      }

      const double preclip_norm = clip_gradients(grads, config.clip_norm);
      result.stats.max_postclip_norm =
          std::max(result.stats.max_postclip_norm, global_grad_norm(grads));
      adam_step(result.model, grads, adam, config.learning_rate);

      row.loss += loss_sum;
      row.recon += recon_sum;
      for (int l = 0; l < L; ++l) row.kl_layers[l] += kl_sums[l];
      grad_norm_sum += preclip_norm;
      docs_seen += batch;
      ++steps_in_epoch;
      ++step;
      ++result.stats.steps;
    }

    row.loss /= docs_seen;
    row.recon /= docs_seen;
    for (double& kl : row.kl_layers) kl /= docs_seen;
    row.grad_norm = steps_in_epoch > 0 ? grad_norm_sum / steps_in_epoch : 0.0;
    row.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    last_good = result.model;
    if (checkpoint_sink && (epoch + 1) % config.checkpoint_every == 0 &&
        epoch + 1 != config.epochs) {
      checkpoint_sink(result.model, epoch, false);
    }
  }

  if (checkpoint_sink) checkpoint_sink(result.model, config.epochs - 1, true);
  return result;
}

}  // namespace sawtopics
