#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/numcore/functions.hpp"
#include "segdiscover/numcore/matrix.hpp"

namespace segdiscover {

/// Reverse-mode gradient tape over dense matrices.
///
/// Every operation appends one node holding its forward value. backward()
/// walks the nodes in reverse recording order once, so a tape is built,
/// differentiated, and thrown away. Templated on the scalar so the same
/// computation can be replayed in extended precision for gradient checks.
template <typename Scalar>
class Tape {
 public:
  using Mat = MatrixX<Scalar>;

  class Var {
   public:
    Var() = default;
    std::size_t id() const { return id_; }

   private:
    friend class Tape;
    explicit Var(std::size_t id) : id_(id) {}
    std::size_t id_ = static_cast<std::size_t>(-1);
  };

  Var constant(Mat value) { return push(std::move(value), false, nullptr); }
  Var variable(Mat value) { return push(std::move(value), true, nullptr); }

  const Mat& value(Var v) const { return nodes_.at(v.id_).value; }
  Scalar scalar(Var v) const {
    const Mat& m = value(v);
    if (m.size() != 1) throw InvalidArgument("Tape::scalar: node is not 1x1");
    return m(0, 0);
  }

  /// Gradient of the last backward() output with respect to v. Zero when v
  /// did not contribute.
  Mat grad(Var v) const {
    const Node& n = nodes_.at(v.id_);
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  void backward(Var out) {
    if (value(out).size() != 1) throw InvalidArgument("Tape::backward: output must be 1x1");
    for (Node& n : nodes_) n.grad.resize(0, 0);
    nodes_[out.id_].grad = Mat::Constant(1, 1, Scalar(1));
    for (std::size_t i = out.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad);
    }
  }

  // ---- structural ------------------------------------------------------

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    return push(value(a) + value(b), {a, b}, [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    return push(value(a) - value(b), {a, b}, [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, -g);
    });
  }

  Var scale(Var a, Scalar s) {
    return push(value(a) * s, {a}, [a, s](Tape& t, const Mat& g) { t.accumulate(a, g * s); });
  }

  /// a + c for a constant matrix c of the same shape.
  Var add_constant(Var a, const Mat& c) {
    if (c.rows() != value(a).rows() || c.cols() != value(a).cols()) {
      throw InvalidArgument("Tape::add_constant: shape mismatch");
    }
    return push(value(a) + c, {a}, [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
  }

  Var sum(Var a) {
    return push(Mat::Constant(1, 1, value(a).sum()), {a}, [a](Tape& t, const Mat& g) {
      t.accumulate(a, Mat::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
    });
  }

  Var mean(Var a) {
    const Scalar n = Scalar(value(a).size());
    if (value(a).size() == 0) throw InvalidArgument("Tape::mean: empty input");
    return scale(sum(a), Scalar(1) / n);
  }

  Var hconcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgument("Tape::hconcat: no inputs");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (Var p : parts) {
      if (value(p).rows() != rows) throw InvalidArgument("Tape::hconcat: row count mismatch");
      cols += value(p).cols();
    }
    Mat out(rows, cols);
    std::vector<Eigen::Index> offsets;
    Eigen::Index c = 0;
    for (Var p : parts) {
      offsets.push_back(c);
      out.middleCols(c, value(p).cols()) = value(p);
      c += value(p).cols();
    }
    return push(std::move(out), parts, [parts, offsets](Tape& t, const Mat& g) {
      for (std::size_t i = 0; i < parts.size(); ++i) {
        t.accumulate(parts[i], g.middleCols(offsets[i], t.value(parts[i]).cols()));
      }
    });
  }

  /// out.row(i) = table.row(index[i]).
  Var gather_rows(Var table, std::vector<Eigen::Index> index) {
    const Mat& tv = value(table);
    Mat out(static_cast<Eigen::Index>(index.size()), tv.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] < 0 || index[i] >= tv.rows()) throw InvalidArgument("Tape::gather_rows: index");
      out.row(static_cast<Eigen::Index>(i)) = tv.row(index[i]);
    }
    return push(std::move(out), {table}, [table, index = std::move(index)](Tape& t, const Mat& g) {
      Mat dt = Mat::Zero(t.value(table).rows(), t.value(table).cols());
      for (std::size_t i = 0; i < index.size(); ++i) dt.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
      t.accumulate(table, dt);
    });
  }

  /// out.row(i) = sum_r weights(i, r) * table.row(base[i] + r).
  Var mix_rows(Var weights, Var table, std::vector<Eigen::Index> base) {
    const Mat& w = value(weights);
    const Mat& tv = value(table);
    if (static_cast<Eigen::Index>(base.size()) != w.rows()) {
      throw InvalidArgument("Tape::mix_rows: base/weight row mismatch");
    }
    Mat out = Mat::Zero(w.rows(), tv.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      if (base[i] < 0 || base[i] + w.cols() > tv.rows()) throw InvalidArgument("Tape::mix_rows: index");
      for (Eigen::Index r = 0; r < w.cols(); ++r) out.row(i) += w(i, r) * tv.row(base[i] + r);
    }
    return push(std::move(out), {weights, table},
                [weights, table, base = std::move(base)](Tape& t, const Mat& g) {
                  const Mat& w = t.value(weights);
                  const Mat& tv = t.value(table);
                  Mat dw(w.rows(), w.cols());
                  Mat dt = Mat::Zero(tv.rows(), tv.cols());
                  for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    for (Eigen::Index r = 0; r < w.cols(); ++r) {
                      dw(i, r) = g.row(i).dot(tv.row(base[i] + r));
                      dt.row(base[i] + r) += w(i, r) * g.row(i);
                    }
                  }
                  t.accumulate(weights, dw);
                  t.accumulate(table, dt);
                });
  }

  /// Mean of X over each half-open row range [first, second).
  Var segment_mean(Var x, std::vector<std::pair<Eigen::Index, Eigen::Index>> segments) {
    const Mat& xv = value(x);
    Mat out(static_cast<Eigen::Index>(segments.size()), xv.cols());
    for (std::size_t i = 0; i < segments.size(); ++i) {
      auto [s, e] = segments[i];
      if (s < 0 || e > xv.rows() || s >= e) throw InvalidArgument("Tape::segment_mean: bad range");
      out.row(static_cast<Eigen::Index>(i)) = xv.middleRows(s, e - s).colwise().sum() / Scalar(e - s);
    }
    return push(std::move(out), {x}, [x, segments = std::move(segments)](Tape& t, const Mat& g) {
      Mat dx = Mat::Zero(t.value(x).rows(), t.value(x).cols());
      for (std::size_t i = 0; i < segments.size(); ++i) {
        auto [s, e] = segments[i];
        const auto gi = g.row(static_cast<Eigen::Index>(i)) / Scalar(e - s);
        for (Eigen::Index r = s; r < e; ++r) dx.row(r) += gi;
      }
      t.accumulate(x, dx);
    });
  }

  // ---- dense layers ----------------------------------------------------

  /// Row-wise affine map: out.row(i) = W * x.row(i)^T + b, with W (out x in)
  /// and b a 1 x out row.
  Var affine(Var x, Var W, Var b) {
    const Mat& xv = value(x);
    const Mat& wv = value(W);
    const Mat& bv = value(b);
    if (xv.cols() != wv.cols() || bv.rows() != 1 || bv.cols() != wv.rows()) {
      throw InvalidArgument("Tape::affine: x is " + shape(x) + ", W is " + shape(W) + ", b is " +
                            shape(b));
    }
    Mat out = xv * wv.transpose();
    out.rowwise() += bv.row(0);
    return push(std::move(out), {x, W, b}, [x, W, b](Tape& t, const Mat& g) {
      if (t.needs(x)) t.accumulate(x, g * t.value(W));
      if (t.needs(W)) t.accumulate(W, g.transpose() * t.value(x));
      if (t.needs(b)) t.accumulate(b, g.colwise().sum());
    });
  }

  Var tanh(Var a) {
    Mat y = fast_tanh(value(a).array()).matrix();
    return push(y, {a}, [a, y](Tape& t, const Mat& g) {
      t.accumulate(a, (g.array() * (Scalar(1) - y.array().square())).matrix());
    });
  }

  Var relu(Var a) {
    Mat y = value(a).cwiseMax(Scalar(0));
    return push(y, {a}, [a](Tape& t, const Mat& g) {
      t.accumulate(a, (t.value(a).array() > Scalar(0)).select(g, Scalar(0)).matrix());
    });
  }

  Var softmax_rows(Var a) {
    Mat y = segdiscover::softmax_rows(value(a));
    return push(y, {a}, [a, y](Tape& t, const Mat& g) {
      Mat d(y.rows(), y.cols());
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const Scalar gy = g.row(i).dot(y.row(i));
        d.row(i) = (y.row(i).array() * (g.row(i).array() - gy)).matrix();
      }
      t.accumulate(a, d);
    });
  }

  /// Straight-through estimator. The forward value is `hard`; the backward
  /// pass hands the incoming gradient to `soft` unchanged.
  ///
  /// When `frozen_soft` is given the forward value becomes
  /// hard + soft - frozen_soft, which equals `hard` at the point where
  /// frozen_soft was recorded and whose true derivative is the
  /// straight-through gradient. Finite-difference checks use this form.
  Var straight_through(const Mat& hard, Var soft, const Mat* frozen_soft = nullptr) {
    if (hard.rows() != value(soft).rows() || hard.cols() != value(soft).cols()) {
      throw InvalidArgument("Tape::straight_through: shape mismatch");
    }
    Mat out = frozen_soft ? Mat(hard + value(soft) - *frozen_soft) : hard;
    return push(std::move(out), {soft}, [soft](Tape& t, const Mat& g) { t.accumulate(soft, g); });
  }

  // ---- losses ----------------------------------------------------------

  /// Sum over rows of -log(max(P(i, target[i]), 1e-12)). Rows with a
  /// negative target are masked out.
  Var cross_entropy_rows(Var probs, std::vector<Eigen::Index> targets) {
    const Mat& p = value(probs);
    if (static_cast<Eigen::Index>(targets.size()) != p.rows()) {
      throw InvalidArgument("Tape::cross_entropy_rows: target count mismatch");
    }
    Scalar total(0);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (targets[static_cast<std::size_t>(i)] < 0) continue;
      total += segdiscover::cross_entropy(p.row(i), targets[static_cast<std::size_t>(i)]);
    }
    return push(Mat::Constant(1, 1, total), {probs},
                [probs, targets = std::move(targets)](Tape& t, const Mat& g) {
                  const Mat& p = t.value(probs);
                  Mat d = Mat::Zero(p.rows(), p.cols());
                  for (Eigen::Index i = 0; i < p.rows(); ++i) {
                    if (targets[static_cast<std::size_t>(i)] < 0) continue;
                    const Scalar pi = p(i, targets[static_cast<std::size_t>(i)]);
                    if (pi > Scalar(kProbabilityFloor)) d(i, targets[static_cast<std::size_t>(i)]) = -g(0, 0) / pi;
                  }
                  t.accumulate(probs, d);
                });
  }

  /// Column of Euclidean distances ||a.row(i) - b.row(i)||.
  Var row_distance(Var a, Var b) {
    check_same_shape(a, b, "row_distance");
    Mat diff = value(a) - value(b);
    Mat d = diff.rowwise().norm();
    return push(d, {a, b}, [a, b, diff, d](Tape& t, const Mat& g) {
      Mat da = Mat::Zero(diff.rows(), diff.cols());
      for (Eigen::Index i = 0; i < diff.rows(); ++i) {
        if (d(i, 0) > Scalar(0)) da.row(i) = diff.row(i) * (g(i, 0) / d(i, 0));
      }
      t.accumulate(a, da);
      t.accumulate(b, -da);
    });
  }

 private:
  using Backward = std::function<void(Tape&, const Mat&)>;

  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Backward backward;
  };

  bool needs(Var v) const { return nodes_[v.id_].needs_grad; }

  void accumulate(Var v, const Mat& g) {
    Node& n = nodes_[v.id_];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  Var push(Mat value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Mat(), needs_grad, std::move(backward)});
    return Var(nodes_.size() - 1);
  }

  Var push(Mat value, const std::vector<Var>& inputs, Backward backward) {
    bool needs_grad = false;
    for (Var v : inputs) needs_grad = needs_grad || nodes_.at(v.id_).needs_grad;
    return push(std::move(value), needs_grad, needs_grad ? std::move(backward) : Backward());
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw InvalidArgument(std::string("Tape::") + op + ": " + shape(a) + " vs " + shape(b));
    }
  }

  std::string shape(Var v) const {
    return std::to_string(value(v).rows()) + "x" + std::to_string(value(v).cols());
  }

  std::vector<Node> nodes_;
};

}  // namespace segdiscover
