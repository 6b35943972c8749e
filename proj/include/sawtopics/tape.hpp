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
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sawtopics/special.hpp"
#include "sawtopics/types.hpp"

namespace sawtopics {

// Handle to a value recorded on a Tape.
struct ValueId {
  Index index = -1;
};

enum class OpKind {
  kConstant,
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kConcatRows,
  kRelu,
  kSoftplus,
  kLog,
  kExp,
  kPow,
  kLgamma,
  kDigamma,
  kSoftmaxCols,
  kSum,
  kBroadcastRow,
  kScale,
  kAddScalar,
  kClampMin,
};

// Append-only record of a fixed computation graph over dense matrices, with
// reverse-mode gradient accumulation. Insertion order is topological order;
// backward() walks nodes in strict reverse insertion order. A tape is
// single-writer; run one tape per worker and merge gradients explicitly.
template <typename Scalar>
class Tape {
 public:
  using Matrix = Mat<Scalar>;

  ValueId constant(Matrix value) {
    return push(OpKind::kConstant, {-1}, {-1}, std::move(value));
  }

  Index size() const { return static_cast<Index>(nodes_.size()); }

  const Matrix& value(ValueId id) const { return nodes_[check(id)].value; }

  // Valid after backward(); zero for nodes the loss does not depend on.
  const Matrix& grad(ValueId id) const { return grads_[check(id)]; }

  // Accumulates d(loss)/d(node) for every node at or below the loss node.
  // The loss must be a 1x1 scalar.
  void backward(ValueId loss) {
    const Index last = check(loss);
    const Matrix& loss_value = nodes_[last].value;
    if (loss_value.rows() != 1 || loss_value.cols() != 1) {
      throw ShapeError("backward: loss must be scalar, got " +
                       shape_str(loss_value.rows(), loss_value.cols()));
    }
    grads_.assign(nodes_.size(), Matrix());
    for (Index i = 0; i <= last; ++i) {
      grads_[i].setZero(nodes_[i].value.rows(), nodes_[i].value.cols());
    }
    grads_[last](0, 0) = Scalar(1);
    for (Index i = last; i >= 0; --i) {
      pull_back(i);
    }
  }

 private:
  struct Node {
    OpKind op;
    Index a;
    Index b;
    Matrix value;
    Scalar aux = Scalar(0);
    Index cols = 0;  // broadcast_row target width
  };

  friend struct TapeOps;

  Index check(ValueId id) const {
    if (id.index < 0 || id.index >= size()) {
      throw std::out_of_range("tape: invalid value id " + std::to_string(id.index));
    }
    return id.index;
  }

  ValueId push(OpKind op, ValueId a, ValueId b, Matrix value, Scalar aux = Scalar(0),
               Index cols = 0) {
    nodes_.push_back(Node{op, a.index, b.index, std::move(value), aux, cols});
    return ValueId{size() - 1};
  }

  void pull_back(Index i) {
    const Node& node = nodes_[i];
    const Matrix& g = grads_[i];
    switch (node.op) {
      case OpKind::kConstant:
        break;
      case OpKind::kMatmul:
        grads_[node.a].noalias() += g * nodes_[node.b].value.transpose();
        grads_[node.b].noalias() += nodes_[node.a].value.transpose() * g;
        break;
      case OpKind::kTranspose:
        grads_[node.a] += g.transpose();
        break;
      case OpKind::kAdd:
        grads_[node.a] += g;
        grads_[node.b] += g;
        break;
      case OpKind::kSub:
        grads_[node.a] += g;
        grads_[node.b] -= g;
        break;
      case OpKind::kMul:
        grads_[node.a].array() += g.array() * nodes_[node.b].value.array();
        grads_[node.b].array() += g.array() * nodes_[node.a].value.array();
        break;
      case OpKind::kConcatRows: {
        const Index ra = nodes_[node.a].value.rows();
        const Index rb = nodes_[node.b].value.rows();
        grads_[node.a] += g.topRows(ra);
        grads_[node.b] += g.bottomRows(rb);
        break;
      }
      case OpKind::kRelu:
        grads_[node.a].array() +=
            g.array() * (nodes_[node.a].value.array() > Scalar(0)).template cast<Scalar>();
        break;
      case OpKind::kSoftplus:
        grads_[node.a].array() +=
            g.array() * nodes_[node.a].value.array().unaryExpr([](Scalar x) {
              return static_cast<Scalar>(special::sigmoid(static_cast<double>(x)));
            });
        break;
      case OpKind::kLog:
        grads_[node.a].array() += g.array() / nodes_[node.a].value.array();
        break;
      case OpKind::kExp:
        grads_[node.a].array() += g.array() * node.value.array();
        break;
      case OpKind::kPow:
        // d/dx x^c = c * x^c / x for positive x
        grads_[node.a].array() +=
            g.array() * node.aux * node.value.array() / nodes_[node.a].value.array();
        break;
      case OpKind::kLgamma:
        grads_[node.a].array() +=
            g.array() * nodes_[node.a].value.array().unaryExpr([](Scalar x) {
              return static_cast<Scalar>(special::digamma(static_cast<double>(x)));
            });
        break;
      case OpKind::kDigamma:
        grads_[node.a].array() +=
            g.array() * nodes_[node.a].value.array().unaryExpr([](Scalar x) {
              return static_cast<Scalar>(special::trigamma(static_cast<double>(x)));
            });
        break;
      case OpKind::kSoftmaxCols: {
        // da_col = y * (g - <g, y>) per column
        const Matrix& y = node.value;
        for (Index c = 0; c < y.cols(); ++c) {
          const Scalar dot = (g.col(c).array() * y.col(c).array()).sum();
          grads_[node.a].col(c).array() +=
              y.col(c).array() * (g.col(c).array() - dot);
        }
        break;
      }
      case OpKind::kSum:
        grads_[node.a].array() += g(0, 0);
        break;
      case OpKind::kBroadcastRow:
        grads_[node.a] += g.rowwise().sum();
        break;
      case OpKind::kScale:
        grads_[node.a] += node.aux * g;
        break;
      case OpKind::kAddScalar:
        grads_[node.a] += g;
        break;
      case OpKind::kClampMin:
        grads_[node.a].array() +=
            g.array() *
            (nodes_[node.a].value.array() > node.aux).template cast<Scalar>();
        break;
    }
  }

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
};

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const Mat<Scalar>& a, const Mat<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" +
                     shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()) + ")");
  }
}

template <typename Scalar>
void require_positive(const char* op, const Mat<Scalar>& a) {
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (!(a(i, j) > Scalar(0))) {
        throw DomainError(std::string(op) + ": non-positive input at (" +
                          std::to_string(i) + "," + std::to_string(j) +
                          "): " + std::to_string(static_cast<double>(a(i, j))));
      }
    }
  }
}

}  // namespace detail

struct TapeOps {
  template <typename Scalar>
  static ValueId unary(Tape<Scalar>& tape, OpKind op, ValueId a, Mat<Scalar> value,
                       Scalar aux = Scalar(0)) {
    return tape.push(op, a, ValueId{-1}, std::move(value), aux);
  }
  template <typename Scalar>
  static ValueId binary(Tape<Scalar>& tape, OpKind op, ValueId a, ValueId b,
                        Mat<Scalar> value) {
    return tape.push(op, a, b, std::move(value));
  }
  template <typename Scalar>
  static ValueId broadcast(Tape<Scalar>& tape, ValueId a, Mat<Scalar> value, Index cols) {
    return tape.push(OpKind::kBroadcastRow, a, ValueId{-1}, std::move(value), Scalar(0),
                     cols);
  }
};

template <typename Scalar>
ValueId matmul(Tape<Scalar>& tape, ValueId a, ValueId b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  if (va.cols() != vb.rows()) {
    throw ShapeError("matmul: shape mismatch (" + shape_str(va.rows(), va.cols()) +
                     " vs " + shape_str(vb.rows(), vb.cols()) + ")");
  }
  Mat<Scalar> out(va.rows(), vb.cols());
  out.noalias() = va * vb;
  return TapeOps::binary(tape, OpKind::kMatmul, a, b, std::move(out));
}

template <typename Scalar>
ValueId transpose(Tape<Scalar>& tape, ValueId a) {
  return TapeOps::unary(tape, OpKind::kTranspose, a,
                        Mat<Scalar>(tape.value(a).transpose()));
}

template <typename Scalar>
ValueId add(Tape<Scalar>& tape, ValueId a, ValueId b) {
  detail::require_same_shape("add", tape.value(a), tape.value(b));
  return TapeOps::binary(tape, OpKind::kAdd, a, b,
                         Mat<Scalar>(tape.value(a) + tape.value(b)));
}

template <typename Scalar>
ValueId sub(Tape<Scalar>& tape, ValueId a, ValueId b) {
  detail::require_same_shape("sub", tape.value(a), tape.value(b));
  return TapeOps::binary(tape, OpKind::kSub, a, b,
                         Mat<Scalar>(tape.value(a) - tape.value(b)));
}

template <typename Scalar>
ValueId mul(Tape<Scalar>& tape, ValueId a, ValueId b) {
  detail::require_same_shape("mul", tape.value(a), tape.value(b));
  return TapeOps::binary(tape, OpKind::kMul, a, b,
                         Mat<Scalar>(tape.value(a).array() * tape.value(b).array()));
}

template <typename Scalar>
ValueId concat_rows(Tape<Scalar>& tape, ValueId a, ValueId b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  if (va.cols() != vb.cols()) {
    throw ShapeError("concat_rows: shape mismatch (" + shape_str(va.rows(), va.cols()) +
                     " vs " + shape_str(vb.rows(), vb.cols()) + ")");
  }
  Mat<Scalar> out(va.rows() + vb.rows(), va.cols());
  out.topRows(va.rows()) = va;
  out.bottomRows(vb.rows()) = vb;
  return TapeOps::binary(tape, OpKind::kConcatRows, a, b, std::move(out));
}

template <typename Scalar>
ValueId relu(Tape<Scalar>& tape, ValueId a) {
  return TapeOps::unary(tape, OpKind::kRelu, a,
                        Mat<Scalar>(tape.value(a).cwiseMax(Scalar(0))));
}

template <typename Scalar>
ValueId softplus(Tape<Scalar>& tape, ValueId a) {
  Mat<Scalar> out = tape.value(a).unaryExpr([](Scalar x) {
    return static_cast<Scalar>(special::softplus(static_cast<double>(x)));
  });
  return TapeOps::unary(tape, OpKind::kSoftplus, a, std::move(out));
}

template <typename Scalar>
ValueId log(Tape<Scalar>& tape, ValueId a) {
  detail::require_positive("log", tape.value(a));
  return TapeOps::unary(tape, OpKind::kLog, a,
                        Mat<Scalar>(tape.value(a).array().log()));
}

template <typename Scalar>
ValueId exp(Tape<Scalar>& tape, ValueId a) {
  return TapeOps::unary(tape, OpKind::kExp, a,
                        Mat<Scalar>(tape.value(a).array().exp()));
}

// Elementwise x^c with constant exponent; the base must be positive.
template <typename Scalar>
ValueId pow(Tape<Scalar>& tape, ValueId a, Scalar exponent) {
  detail::require_positive("pow", tape.value(a));
  Mat<Scalar> out = tape.value(a).array().pow(exponent);
  return TapeOps::unary(tape, OpKind::kPow, a, std::move(out), exponent);
}

template <typename Scalar>
ValueId lgamma(Tape<Scalar>& tape, ValueId a) {
  detail::require_positive("lgamma", tape.value(a));
  Mat<Scalar> out = tape.value(a).unaryExpr([](Scalar x) {
    return static_cast<Scalar>(special::lgamma_pos(static_cast<double>(x)));
  });
  return TapeOps::unary(tape, OpKind::kLgamma, a, std::move(out));
}

template <typename Scalar>
ValueId digamma(Tape<Scalar>& tape, ValueId a) {
  detail::require_positive("digamma", tape.value(a));
  Mat<Scalar> out = tape.value(a).unaryExpr([](Scalar x) {
    return static_cast<Scalar>(special::digamma(static_cast<double>(x)));
  });
  return TapeOps::unary(tape, OpKind::kDigamma, a, std::move(out));
}

// Column-wise softmax with per-column max subtraction.
template <typename Scalar>
ValueId softmax_cols(Tape<Scalar>& tape, ValueId a) {
  const auto& va = tape.value(a);
  Mat<Scalar> out(va.rows(), va.cols());
  for (Index c = 0; c < va.cols(); ++c) {
    const Scalar m = va.col(c).maxCoeff();
    out.col(c) = (va.col(c).array() - m).exp();
    out.col(c) /= out.col(c).sum();
  }
  return TapeOps::unary(tape, OpKind::kSoftmaxCols, a, std::move(out));
}

// Sum of all entries, as a 1x1 matrix.
template <typename Scalar>
ValueId sum(Tape<Scalar>& tape, ValueId a) {
  Mat<Scalar> out(1, 1);
  out(0, 0) = tape.value(a).sum();
  return TapeOps::unary(tape, OpKind::kSum, a, std::move(out));
}

// Replicates a column vector v (m x 1) across `cols` columns, so every row i
// of the result is filled with v(i).
template <typename Scalar>
ValueId broadcast_row(Tape<Scalar>& tape, ValueId a, Index cols) {
  const auto& va = tape.value(a);
  if (va.cols() != 1) {
    throw ShapeError("broadcast_row: expected column vector, got " +
                     shape_str(va.rows(), va.cols()));
  }
  Mat<Scalar> out = va.replicate(1, cols);
  return TapeOps::broadcast(tape, a, std::move(out), cols);
}

template <typename Scalar>
ValueId scale(Tape<Scalar>& tape, ValueId a, Scalar factor) {
  return TapeOps::unary(tape, OpKind::kScale, a, Mat<Scalar>(factor * tape.value(a)),
                        factor);
}

template <typename Scalar>
ValueId add_scalar(Tape<Scalar>& tape, ValueId a, Scalar offset) {
  return TapeOps::unary(tape, OpKind::kAddScalar, a,
                        Mat<Scalar>(tape.value(a).array() + offset), offset);
}

template <typename Scalar>
ValueId clamp_min(Tape<Scalar>& tape, ValueId a, Scalar floor) {
  return TapeOps::unary(tape, OpKind::kClampMin, a,
                        Mat<Scalar>(tape.value(a).cwiseMax(floor)), floor);
}

// Max over all parameter entries of |analytic - central difference| /
// max(1, |central difference|), where analytic gradients come from one
// backward pass and differences from re-running the forward build at p +- h.
template <typename Scalar, typename BuildFn>
double gradient_check(BuildFn&& build, std::vector<Mat<Scalar>>& params, Scalar h) {
  if (!(h > Scalar(0))) throw DomainError("gradient_check: h must be positive");

  auto eval = [&](bool with_grads, std::vector<Mat<Scalar>>* grads) -> double {
    Tape<Scalar> tape;
    std::vector<ValueId> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(tape.constant(p));
    const ValueId loss = build(tape, ids);
    const auto& lv = tape.value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ShapeError("gradient_check: loss must be scalar");
    }
    if (!std::isfinite(static_cast<double>(lv(0, 0)))) {
      throw DomainError("gradient_check: non-finite loss");
    }
    if (with_grads) {
      tape.backward(loss);
      grads->clear();
      for (ValueId id : ids) grads->push_back(tape.grad(id));
    }
    return static_cast<double>(lv(0, 0));
  };

  std::vector<Mat<Scalar>> analytic;
  eval(true, &analytic);

  double max_rel = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Index i = 0; i < params[p].rows(); ++i) {
      for (Index j = 0; j < params[p].cols(); ++j) {
        const Scalar saved = params[p](i, j);
        params[p](i, j) = saved + h;
        const double plus = eval(false, nullptr);
        params[p](i, j) = saved - h;
        const double minus = eval(false, nullptr);
        params[p](i, j) = saved;
        const double fd = (plus - minus) / (2.0 * static_cast<double>(h));
        const double rel = std::abs(static_cast<double>(analytic[p](i, j)) - fd) /
                           std::max(1.0, std::abs(fd));
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace sawtopics
