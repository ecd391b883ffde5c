#ifndef POLIFUSE_AUTODIFF_HPP_
#define POLIFUSE_AUTODIFF_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "polifuse/common.hpp"

namespace polifuse {

// Reverse-mode tape over dense matrices. Nodes are appended in topological
// order, so backward() is a single reverse sweep. Node handles are plain ints
// scoped to one tape; a tape lives for one forward/backward pass.
template <typename S>
class Tape {
 public:
  using Mat = MatrixX<S>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int size() const { return static_cast<int>(nodes_.size()); }

  const Mat& val(int id) const { return nodes_[check(id)].value; }
  const Mat& grad(int id) const { return nodes_[check(id)].grad; }
  bool requires_grad(int id) const { return nodes_[check(id)].requires_grad; }

  // ---- leaves ----

  int constant(Mat v) { return alloc(std::move(v), false); }

  // Differentiable input (used for loss-vs-embedding gradient checks).
  int leaf(Mat v) { return alloc(std::move(v), true); }

  // Differentiable leaf whose gradient is flushed into *external_grad during
  // the backward sweep. ParameterSet::bind wraps this. One node per name per
  // tape: rebinding a name returns the original node so shared weights
  // accumulate into a single leaf.
  int bound_leaf(const std::string& name, const Mat& v, Mat* external_grad) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    int id = alloc(v, true);
    nodes_[id].backward = [this, id, external_grad] { *external_grad += nodes_[id].grad; };
    bound_.emplace(name, id);
    return id;
  }

  // ---- arithmetic ----

  int add(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "add: shape mismatch");
    int y = alloc(A + B, requires_grad(a) || requires_grad(b));
    set_backward(y, [this, a, b, y] {
      if (requires_grad(a)) gref(a) += grad(y);
      if (requires_grad(b)) gref(b) += grad(y);
    });
    return y;
  }

  int sub(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "sub: shape mismatch");
    int y = alloc(A - B, requires_grad(a) || requires_grad(b));
    set_backward(y, [this, a, b, y] {
      if (requires_grad(a)) gref(a) += grad(y);
      if (requires_grad(b)) gref(b) -= grad(y);
    });
    return y;
  }

  // y = x + C for a fixed matrix C (attention masks and the like).
  int add_const(int x, const Mat& c) {
    const Mat& X = val(x);
    require(X.rows() == c.rows() && X.cols() == c.cols(), "add_const: shape mismatch");
    int y = alloc(X + c, requires_grad(x));
    set_backward(y, [this, x, y] {
      if (requires_grad(x)) gref(x) += grad(y);
    });
    return y;
  }

  // Row-broadcast bias: y.row(i) = x.row(i) + b, with b a 1 x d node.
  int add_rowwise(int x, int b) {
    const Mat& X = val(x);
    const Mat& B = val(b);
    require(B.rows() == 1 && B.cols() == X.cols(), "add_rowwise: bias must be 1 x cols");
    Mat y = X;
    y.rowwise() += B.row(0);
    int id = alloc(std::move(y), requires_grad(x) || requires_grad(b));
    set_backward(id, [this, x, b, id] {
      const Mat& dY = grad(id);
      if (requires_grad(x)) gref(x) += dY;
      if (requires_grad(b)) gref(b).row(0) += dY.colwise().sum();
    });
    return id;
  }

  int hadamard(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "hadamard: shape mismatch");
    int y = alloc(A.cwiseProduct(B), requires_grad(a) || requires_grad(b));
    set_backward(y, [this, a, b, y] {
      const Mat& dY = grad(y);
      if (requires_grad(a)) gref(a) += dY.cwiseProduct(val(b));
      if (requires_grad(b)) gref(b) += dY.cwiseProduct(val(a));
    });
    return y;
  }

  // Scale by a compile-time constant.
  int cmul(int x, double c) {
    int y = alloc(val(x) * static_cast<S>(c), requires_grad(x));
    set_backward(y, [this, x, y, c] {
      if (requires_grad(x)) gref(x) += grad(y) * static_cast<S>(c);
    });
    return y;
  }

  int neg(int x) { return cmul(x, -1.0); }

  // Scale every entry by a learnable 1x1 node.
  int mul_scalar(int x, int s) {
    require(val(s).rows() == 1 && val(s).cols() == 1, "mul_scalar: s must be 1x1");
    const S sv = val(s)(0, 0);
    int y = alloc(val(x) * sv, requires_grad(x) || requires_grad(s));
    set_backward(y, [this, x, s, y, sv] {
      const Mat& dY = grad(y);
      if (requires_grad(x)) gref(x) += dY * sv;
      if (requires_grad(s)) gref(s)(0, 0) += dY.cwiseProduct(val(x)).sum();
    });
    return y;
  }

  int matmul(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    require(A.cols() == B.rows(), "matmul: inner dims differ");
    int y = alloc(A * B, requires_grad(a) || requires_grad(b));
    set_backward(y, [this, a, b, y] {
      const Mat& dY = grad(y);
      if (requires_grad(a)) gref(a).noalias() += dY * val(b).transpose();
      if (requires_grad(b)) gref(b).noalias() += val(a).transpose() * dY;
    });
    return y;
  }

  // y = A * B^T, the attention-score shape.
  int matmul_nt(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    require(A.cols() == B.cols(), "matmul_nt: inner dims differ");
    int y = alloc(A * B.transpose(), requires_grad(a) || requires_grad(b));
    set_backward(y, [this, a, b, y] {
      const Mat& dY = grad(y);
      if (requires_grad(a)) gref(a).noalias() += dY * val(b);
      if (requires_grad(b)) gref(b).noalias() += dY.transpose() * val(a);
    });
    return y;
  }

  int transpose(int x) {
    int y = alloc(val(x).transpose(), requires_grad(x));
    set_backward(y, [this, x, y] {
      if (requires_grad(x)) gref(x) += grad(y).transpose();
    });
    return y;
  }

  // ---- nonlinearities ----

  int relu(int x) {
    int y = alloc(val(x).cwiseMax(S(0)), requires_grad(x));
    set_backward(y, [this, x, y] {
      if (!requires_grad(x)) return;
      gref(x) += grad(y).cwiseProduct(
          (val(x).array() > S(0)).template cast<S>().matrix());
    });
    return y;
  }

  int gelu(int x) {
    const Mat& X = val(x);
    Mat cdf = X.unaryExpr([](S v) {
      return static_cast<S>(0.5 * std::erfc(-static_cast<double>(v) / std::sqrt(2.0)));
    });
    int y = alloc(X.cwiseProduct(cdf), requires_grad(x));
    set_backward(y, [this, x, y, cdf = std::move(cdf)] {
      if (!requires_grad(x)) return;
      const Mat& X = val(x);
      Mat pdf = X.unaryExpr([](S v) {
        const double d = static_cast<double>(v);
        return static_cast<S>(std::exp(-0.5 * d * d) / std::sqrt(2.0 * M_PI));
      });
      gref(x) += grad(y).cwiseProduct(cdf + X.cwiseProduct(pdf));
    });
    return y;
  }

  int sigmoid(int x) {
    Mat y = (S(1) / (S(1) + (-val(x).array()).exp())).matrix();
    int id = alloc(std::move(y), requires_grad(x));
    set_backward(id, [this, x, id] {
      if (!requires_grad(x)) return;
      const Mat& Y = val(id);
      gref(x) += grad(id).cwiseProduct(Y.cwiseProduct((S(1) - Y.array()).matrix()));
    });
    return id;
  }

  int tanh_(int x) {
    int id = alloc(val(x).array().tanh().matrix(), requires_grad(x));
    set_backward(id, [this, x, id] {
      if (!requires_grad(x)) return;
      const Mat& Y = val(id);
      gref(x) += grad(id).cwiseProduct((S(1) - Y.array().square()).matrix());
    });
    return id;
  }

  int exp_(int x) {
    int id = alloc(val(x).array().exp().matrix(), requires_grad(x));
    set_backward(id, [this, x, id] {
      if (requires_grad(x)) gref(x) += grad(id).cwiseProduct(val(id));
    });
    return id;
  }

  // ---- normalization / softmax ----

  int softmax_rows(int x) {
    const Mat& X = val(x);
    Mat y(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const S m = X.row(r).maxCoeff();
      y.row(r) = (X.row(r).array() - m).exp();
      y.row(r) /= y.row(r).sum();
    }
    int id = alloc(std::move(y), requires_grad(x));
    set_backward(id, [this, x, id] {
      if (!requires_grad(x)) return;
      const Mat& Y = val(id);
      const Mat& dY = grad(id);
      Mat prod = dY.cwiseProduct(Y);
      Eigen::Matrix<S, Eigen::Dynamic, 1> rowsum = prod.rowwise().sum();
      gref(x) += Y.cwiseProduct(dY.colwise() - rowsum);
    });
    return id;
  }

  // Row-wise layer norm with learnable gain/bias (both 1 x d nodes).
  int layer_norm(int x, int gain, int bias, double eps = 1e-5) {
    const Mat& X = val(x);
    const Mat& G = val(gain);
    const Mat& B = val(bias);
    require(G.rows() == 1 && G.cols() == X.cols(), "layer_norm: gain must be 1 x d");
    require(B.rows() == 1 && B.cols() == X.cols(), "layer_norm: bias must be 1 x d");
    const Eigen::Index n = X.rows(), d = X.cols();
    Mat xhat(n, d);
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const S mu = X.row(r).mean();
      const S var = (X.row(r).array() - mu).square().mean();
      inv_std(r) = S(1) / std::sqrt(var + static_cast<S>(eps));
      xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
    }
    Mat y = xhat;
    y.array().rowwise() *= G.row(0).array();
    y.rowwise() += B.row(0);
    int id = alloc(std::move(y),
                   requires_grad(x) || requires_grad(gain) || requires_grad(bias));
    set_backward(id, [this, x, gain, bias, id, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)] {
      const Mat& dY = grad(id);
      if (requires_grad(gain)) gref(gain).row(0) += dY.cwiseProduct(xhat).colwise().sum();
      if (requires_grad(bias)) gref(bias).row(0) += dY.colwise().sum();
      if (!requires_grad(x)) return;
      const Mat& G = val(gain);
      Mat dxhat = dY;
      dxhat.array().rowwise() *= G.row(0).array();
      Eigen::Matrix<S, Eigen::Dynamic, 1> m1 = dxhat.rowwise().mean();
      Eigen::Matrix<S, Eigen::Dynamic, 1> m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
      Mat dx = dxhat;
      dx.colwise() -= m1;
      dx -= (xhat.array().colwise() * m2.array()).matrix();
      dx.array().colwise() *= inv_std.array();
      gref(x) += dx;
    });
    return id;
  }

  // Row-wise L2 normalization: y = x / sqrt(|x|^2 + eps).
  int l2_normalize_rows(int x, double eps = 1e-12) {
    const Mat& X = val(x);
    Mat y(X.rows(), X.cols());
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_n(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      inv_n(r) = S(1) / std::sqrt(X.row(r).squaredNorm() + static_cast<S>(eps));
      y.row(r) = X.row(r) * inv_n(r);
    }
    int id = alloc(std::move(y), requires_grad(x));
    set_backward(id, [this, x, id, inv_n = std::move(inv_n)] {
      if (!requires_grad(x)) return;
      const Mat& Y = val(id);
      const Mat& dY = grad(id);
      Mat dx(Y.rows(), Y.cols());
      for (Eigen::Index r = 0; r < Y.rows(); ++r) {
        const S dot = Y.row(r).dot(dY.row(r));
        dx.row(r) = (dY.row(r) - Y.row(r) * dot) * inv_n(r);
      }
      gref(x) += dx;
    });
    return id;
  }

  // ---- reductions / losses ----

  int sum_all(int x) {
    Mat y(1, 1);
    y(0, 0) = val(x).sum();
    int id = alloc(std::move(y), requires_grad(x));
    set_backward(id, [this, x, id] {
      if (requires_grad(x)) gref(x).array() += grad(id)(0, 0);
    });
    return id;
  }

  // Mean over the valid rows; `valid` empty means all rows.
  int mean_rows(int x, const std::vector<char>& valid = {}) {
    const Mat& X = val(x);
    std::vector<char> v = valid.empty() ? std::vector<char>(X.rows(), 1) : valid;
    require(static_cast<Eigen::Index>(v.size()) == X.rows(), "mean_rows: mask length");
    int count = 0;
    Mat y = Mat::Zero(1, X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      if (v[r]) {
        y.row(0) += X.row(r);
        ++count;
      }
    }
    require(count > 0, "mean_rows: no valid rows");
    y /= static_cast<S>(count);
    int id = alloc(std::move(y), requires_grad(x));
    set_backward(id, [this, x, id, v = std::move(v), count] {
      if (!requires_grad(x)) return;
      const Mat& dY = grad(id);
      Mat& dX = gref(x);
      for (Eigen::Index r = 0; r < dX.rows(); ++r)
        if (v[r]) dX.row(r) += dY.row(0) / static_cast<S>(count);
    });
    return id;
  }

  // Frobenius distance |A - B|_2 as a 1x1 node. Gradient is zero at the
  // non-differentiable point A == B.
  int euclid(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "euclid: shape mismatch");
    const S d = std::sqrt((A - B).squaredNorm());
    Mat y(1, 1);
    y(0, 0) = d;
    int id = alloc(std::move(y), requires_grad(a) || requires_grad(b));
    set_backward(id, [this, a, b, id, d] {
      if (d <= S(1e-12)) return;
      const S g = grad(id)(0, 0) / d;
      Mat diff = (val(a) - val(b)) * g;
      if (requires_grad(a)) gref(a) += diff;
      if (requires_grad(b)) gref(b) -= diff;
    });
    return id;
  }

  // Mean softmax cross-entropy over the valid rows of a logits matrix.
  int cross_entropy_mean(int logits, const std::vector<int>& targets,
                         const std::vector<char>& valid = {}) {
    const Mat& L = val(logits);
    require(static_cast<Eigen::Index>(targets.size()) == L.rows(),
            "cross_entropy_mean: one target per row");
    std::vector<char> v = valid.empty() ? std::vector<char>(L.rows(), 1) : valid;
    require(static_cast<Eigen::Index>(v.size()) == L.rows(), "cross_entropy_mean: mask length");
    Mat P(L.rows(), L.cols());
    int count = 0;
    S total = 0;
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
      const S m = L.row(r).maxCoeff();
      P.row(r) = (L.row(r).array() - m).exp();
      const S z = P.row(r).sum();
      P.row(r) /= z;
      if (!v[r]) continue;
      const int t = targets[r];
      require(t >= 0 && t < L.cols(), "cross_entropy_mean: target out of range");
      total += -(L(r, t) - m - std::log(z));
      ++count;
    }
    require(count > 0, "cross_entropy_mean: no valid rows");
    Mat y(1, 1);
    y(0, 0) = total / static_cast<S>(count);
    int id = alloc(std::move(y), requires_grad(logits));
    set_backward(id, [this, logits, id, P = std::move(P), targets, v = std::move(v), count] {
      if (!requires_grad(logits)) return;
      const S g = grad(id)(0, 0) / static_cast<S>(count);
      Mat& dL = gref(logits);
      for (Eigen::Index r = 0; r < dL.rows(); ++r) {
        if (!v[r]) continue;
        dL.row(r) += P.row(r) * g;
        dL(r, targets[r]) -= g;
      }
    });
    return id;
  }

  // ---- structural ops ----

  int embedding(int table, const std::vector<int>& ids) {
    const Mat& T = val(table);
    Mat y(static_cast<Eigen::Index>(ids.size()), T.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      require(ids[i] >= 0 && ids[i] < T.rows(), "embedding: id out of range");
      y.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
    }
    int id = alloc(std::move(y), requires_grad(table));
    set_backward(id, [this, table, id, ids] {
      if (!requires_grad(table)) return;
      const Mat& dY = grad(id);
      Mat& dT = gref(table);
      for (std::size_t i = 0; i < ids.size(); ++i)
        dT.row(ids[i]) += dY.row(static_cast<Eigen::Index>(i));
    });
    return id;
  }

  int gather_rows(int x, const std::vector<int>& idx) {
    const Mat& X = val(x);
    Mat y(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      require(idx[i] >= 0 && idx[i] < X.rows(), "gather_rows: index out of range");
      y.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
    }
    int id = alloc(std::move(y), requires_grad(x));
    set_backward(id, [this, x, id, idx] {
      if (!requires_grad(x)) return;
      const Mat& dY = grad(id);
      Mat& dX = gref(x);
      for (std::size_t i = 0; i < idx.size(); ++i)
        dX.row(idx[i]) += dY.row(static_cast<Eigen::Index>(i));
    });
    return id;
  }

  int slice_rows(int x, int r0, int n) {
    const Mat& X = val(x);
    require(r0 >= 0 && n >= 1 && r0 + n <= X.rows(), "slice_rows: bad range");
    int id = alloc(X.middleRows(r0, n), requires_grad(x));
    set_backward(id, [this, x, id, r0, n] {
      if (requires_grad(x)) gref(x).middleRows(r0, n) += grad(id);
    });
    return id;
  }

  int slice_cols(int x, int c0, int n) {
    const Mat& X = val(x);
    require(c0 >= 0 && n >= 1 && c0 + n <= X.cols(), "slice_cols: bad range");
    int id = alloc(X.middleCols(c0, n), requires_grad(x));
    set_backward(id, [this, x, id, c0, n] {
      if (requires_grad(x)) gref(x).middleCols(c0, n) += grad(id);
    });
    return id;
  }

  int concat_rows(const std::vector<int>& parts) {
    require(!parts.empty(), "concat_rows: empty");
    Eigen::Index rows = 0;
    const Eigen::Index cols = val(parts[0]).cols();
    bool rg = false;
    for (int p : parts) {
      require(val(p).cols() == cols, "concat_rows: column mismatch");
      rows += val(p).rows();
      rg = rg || requires_grad(p);
    }
    Mat y(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
      y.middleRows(at, val(p).rows()) = val(p);
      at += val(p).rows();
    }
    int id = alloc(std::move(y), rg);
    set_backward(id, [this, id, parts] {
      const Mat& dY = grad(id);
      Eigen::Index at = 0;
      for (int p : parts) {
        const Eigen::Index n = val(p).rows();
        if (requires_grad(p)) gref(p) += dY.middleRows(at, n);
        at += n;
      }
    });
    return id;
  }

  int concat_cols(const std::vector<int>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    Eigen::Index cols = 0;
    const Eigen::Index rows = val(parts[0]).rows();
    bool rg = false;
    for (int p : parts) {
      require(val(p).rows() == rows, "concat_cols: row mismatch");
      cols += val(p).cols();
      rg = rg || requires_grad(p);
    }
    Mat y(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
      y.middleCols(at, val(p).cols()) = val(p);
      at += val(p).cols();
    }
    int id = alloc(std::move(y), rg);
    set_backward(id, [this, id, parts] {
      const Mat& dY = grad(id);
      Eigen::Index at = 0;
      for (int p : parts) {
        const Eigen::Index n = val(p).cols();
        if (requires_grad(p)) gref(p) += dY.middleCols(at, n);
        at += n;
      }
    });
    return id;
  }

  // Inverted dropout. rate == 0 or !train returns x unchanged.
  int dropout(int x, double rate, bool train, Rng* rng) {
    if (!train || rate <= 0.0) return x;
    require(rate < 1.0, "dropout: rate must be < 1");
    require(rng != nullptr, "dropout: rng required in training mode");
    const Mat& X = val(x);
    const S scale = S(1) / static_cast<S>(1.0 - rate);
    std::bernoulli_distribution keep(1.0 - rate);
    Mat mask(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      for (Eigen::Index c = 0; c < X.cols(); ++c)
        mask(r, c) = keep(*rng) ? scale : S(0);
    int id = alloc(X.cwiseProduct(mask), requires_grad(x));
    set_backward(id, [this, x, id, mask = std::move(mask)] {
      if (requires_grad(x)) gref(x) += grad(id).cwiseProduct(mask);
    });
    return id;
  }

  // ---- backward ----

  void backward(int loss) {
    Node& top = nodes_[check(loss)];
    require(top.value.rows() == 1 && top.value.cols() == 1, "backward: loss must be 1x1");
    if (!top.requires_grad) return;
    top.grad(0, 0) = S(1);
    for (int i = loss; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.backward) n.backward();
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  int check(int id) const {
    require(id >= 0 && id < size(), "bad node id");
    return id;
  }

  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(std::string("tape: ") + msg);
  }

  Mat& gref(int id) { return nodes_[id].grad; }

  int alloc(Mat v, bool needs_grad) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = needs_grad;
    if (needs_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  template <typename F>
  void set_backward(int id, F&& f) {
    if (nodes_[id].requires_grad) nodes_[id].backward = std::forward<F>(f);
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> bound_;
};

}  // namespace polifuse

#endif  // POLIFUSE_AUTODIFF_HPP_
