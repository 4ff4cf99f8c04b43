#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Parameters are leaves
// that alias their storage, so gradients land directly in Parameter::grad.
// Rows are sequence positions throughout: y = x W + b.

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tableweave/common.hpp"

namespace tableweave {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay = true;  // subject to weight decay

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols, bool decay_ = true)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)), decay(decay_) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Matrix& value(int id) const { return *nodes_[static_cast<std::size_t>(id)].value; }

  /// Leaf aliasing a parameter: its gradient accumulates into p.grad.
  Var param(Parameter& p) {
    Node n;
    n.value = &p.value;
    n.param_grad = &p.grad;
    n.needs_grad = true;
    return push(std::move(n));
  }

  /// Leaf aliasing external storage that takes no gradient.
  Var view(const Matrix& m) {
    Node n;
    n.value = &m;
    return push(std::move(n));
  }

  Var constant(Matrix m) {
    Node n;
    n.owned = std::make_unique<Matrix>(std::move(m));
    n.value = n.owned.get();
    return push(std::move(n));
  }

  /// Node computed from parents. backward(g) receives d loss / d output.
  Var op(Matrix value, std::vector<int> parents, std::function<void(const Matrix&)> backward) {
    Node n;
    n.owned = std::make_unique<Matrix>(std::move(value));
    n.value = n.owned.get();
    for (int p : parents) n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(p)].needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Gradient buffer of a node, allocated on first use.
  Matrix& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.param_grad) return *n.param_grad;
    if (!n.grad) n.grad = std::make_unique<Matrix>(Matrix::Zero(n.value->rows(), n.value->cols()));
    return *n.grad;
  }

  void accumulate(int id, const Matrix& g) {
    if (!needs_grad(id)) return;
    grad(id) += g;
  }

  /// Seeds d loss / d loss = 1 and runs every recorded backward step.
  void backward(Var loss) {
    if (loss.value().size() != 1) throw Error("backward() needs a scalar loss");
    if (!needs_grad(loss.id)) return;
    grad(loss.id)(0, 0) += 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.backward && n.grad) n.backward(*n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    std::unique_ptr<Matrix> owned;
    const Matrix* value = nullptr;
    std::unique_ptr<Matrix> grad;
    Matrix* param_grad = nullptr;
    bool needs_grad = false;
    std::function<void(const Matrix&)> backward;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
  }

  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

/// Binds a parameter as a trainable leaf, or as a read-only view when the
/// owning weights are const.
inline Var bind(Tape& t, Parameter& p) { return t.param(p); }
inline Var bind(Tape& t, const Parameter& p) { return t.view(p.value); }

// ---------------------------------------------------------------------------
// Operations

inline Var matmul(Var a, Var b) {
  Tape* t = a.tape;
  Matrix out = a.value() * b.value();
  return t->op(std::move(out), {a.id, b.id}, [t, a, b](const Matrix& g) {
    if (t->needs_grad(a.id)) t->grad(a.id).noalias() += g * b.value().transpose();
    if (t->needs_grad(b.id)) t->grad(b.id).noalias() += a.value().transpose() * g;
  });
}

/// a * b^T
inline Var matmul_nt(Var a, Var b) {
  Tape* t = a.tape;
  Matrix out = a.value() * b.value().transpose();
  return t->op(std::move(out), {a.id, b.id}, [t, a, b](const Matrix& g) {
    if (t->needs_grad(a.id)) t->grad(a.id).noalias() += g * b.value();
    if (t->needs_grad(b.id)) t->grad(b.id).noalias() += g.transpose() * a.value();
  });
}

inline Var add(Var a, Var b) {
  Tape* t = a.tape;
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("add: shape mismatch");
  Matrix out = a.value() + b.value();
  return t->op(std::move(out), {a.id, b.id}, [t, a, b](const Matrix& g) {
    t->accumulate(a.id, g);
    t->accumulate(b.id, g);
  });
}

inline Var add_all(const std::vector<Var>& xs) {
  Var acc = xs.at(0);
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

/// Adds a 1 x C bias to every row.
inline Var add_bias(Var a, Var bias) {
  Tape* t = a.tape;
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw Error("add_bias: shape mismatch");
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return t->op(std::move(out), {a.id, bias.id}, [t, a, bias](const Matrix& g) {
    t->accumulate(a.id, g);
    if (t->needs_grad(bias.id)) t->grad(bias.id).row(0) += g.colwise().sum();
  });
}

inline Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

inline Var scale(Var a, double s) {
  Tape* t = a.tape;
  Matrix out = a.value() * s;
  return t->op(std::move(out), {a.id}, [t, a, s](const Matrix& g) { t->accumulate(a.id, g * s); });
}

inline double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

/// Exact (erf) GELU.
inline Var gelu(Var a) {
  Tape* t = a.tape;
  Matrix out = a.value().unaryExpr([](double x) { return gelu_value(x); });
  return t->op(std::move(out), {a.id}, [t, a](const Matrix& g) {
    t->accumulate(a.id, g.cwiseProduct(a.value().unaryExpr([](double x) { return gelu_derivative(x); })));
  });
}

/// Row-wise layer normalization with learned gain and shift (both 1 x C).
inline Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-12) {
  Tape* t = x.tape;
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows();
  const Eigen::Index c = xv.cols();
  auto xhat = std::make_shared<Matrix>(n, c);
  auto inv_std = std::make_shared<Eigen::VectorXd>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = xv.row(i).mean();
    const double var = (xv.row(i).array() - mean).square().mean();
    (*inv_std)(i) = 1.0 / std::sqrt(var + eps);
    xhat->row(i) = (xv.row(i).array() - mean) * (*inv_std)(i);
  }
  Matrix out = (xhat->array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return t->op(std::move(out), {x.id, gamma.id, beta.id}, [t, x, gamma, beta, xhat, inv_std, c](const Matrix& g) {
    if (t->needs_grad(gamma.id)) t->grad(gamma.id).row(0) += g.cwiseProduct(*xhat).colwise().sum();
    if (t->needs_grad(beta.id)) t->grad(beta.id).row(0) += g.colwise().sum();
    if (t->needs_grad(x.id)) {
      const Matrix gx = g.array().rowwise() * gamma.value().row(0).array();
      Matrix dx(gx.rows(), gx.cols());
      for (Eigen::Index i = 0; i < gx.rows(); ++i) {
        const double mean_g = gx.row(i).mean();
        const double mean_gx = gx.row(i).cwiseProduct(xhat->row(i)).mean();
        dx.row(i) = (*inv_std)(i) * (gx.row(i).array() - mean_g - xhat->row(i).array() * mean_gx);
      }
      (void)c;
      t->grad(x.id) += dx;
    }
  });
}

/// Rows of a parameter table; index -1 yields a zero row (sentinel).
inline Var gather_rows(Var table, const std::vector<int>& idx) {
  Tape* t = table.tape;
  const Matrix& tv = table.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), tv.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    if (idx[i] >= tv.rows()) {
      throw Error("embedding index " + std::to_string(idx[i]) + " out of range for a table with " +
                  std::to_string(tv.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(i)) = tv.row(idx[i]);
  }
  return t->op(std::move(out), {table.id}, [t, table, idx](const Matrix& g) {
    Matrix& tg = t->grad(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) tg.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

/// Selected rows of a node (indices must be valid).
inline Var select_rows(Var a, const std::vector<int>& idx) {
  Tape* t = a.tape;
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  return t->op(std::move(out), {a.id}, [t, a, idx](const Matrix& g) {
    if (!t->needs_grad(a.id)) return;
    Matrix& ag = t->grad(a.id);
    for (std::size_t i = 0; i < idx.size(); ++i) ag.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  Tape* t = parts.at(0).tape;
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw Error("concat_cols: row mismatch");
    cols += p.cols();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t->op(std::move(out), ids, [t, parts](const Matrix& g) {
    Eigen::Index o = 0;
    for (const Var& p : parts) {
      if (t->needs_grad(p.id)) t->grad(p.id) += g.middleCols(o, p.cols());
      o += p.cols();
    }
  });
}

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape* t = a.tape;
  Matrix out = a.value().middleCols(start, count);
  return t->op(std::move(out), {a.id}, [t, a, start, count](const Matrix& g) {
    if (t->needs_grad(a.id)) t->grad(a.id).middleCols(start, count) += g;
  });
}

/// Boolean visibility mask, row-major n x n.
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row-wise softmax restricted to entries where mask is true; masked entries
/// get probability exactly 0 (logit -infinity before normalization).
inline Matrix masked_softmax_value(const Matrix& scores, const Mask& mask) {
  Matrix p = Matrix::Zero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (mask(i, j)) mx = std::max(mx, scores(i, j));
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw Error("attention row " + std::to_string(i) + " has no visible position");
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (mask(i, j)) {
        p(i, j) = std::exp(scores(i, j) - mx);
        sum += p(i, j);
      }
    }
    p.row(i) /= sum;
  }
  return p;
}

inline Var masked_softmax(Var scores, std::shared_ptr<const Mask> mask) {
  Tape* t = scores.tape;
  auto p = std::make_shared<Matrix>(masked_softmax_value(scores.value(), *mask));
  Matrix out = *p;
  return t->op(std::move(out), {scores.id}, [t, scores, p](const Matrix& g) {
    if (!t->needs_grad(scores.id)) return;
    const Eigen::VectorXd dot = g.cwiseProduct(*p).rowwise().sum();
    Matrix ds = p->array() * (g.colwise() - dot).array();
    t->grad(scores.id) += ds;
  });
}

/// Mean softmax cross-entropy of logits rows against integer targets. Returns
/// a 1x1 node; zero rows give a zero loss.
inline Var softmax_cross_entropy(Var logits, const std::vector<int>& targets) {
  Tape* t = logits.tape;
  const Matrix& z = logits.value();
  if (static_cast<std::size_t>(z.rows()) != targets.size()) throw Error("cross-entropy: target count mismatch");
  const Eigen::Index n = z.rows();
  auto probs = std::make_shared<Matrix>(n, z.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    probs->row(i) = (z.row(i).array() - lse).exp();
    loss += lse - z(i, targets[static_cast<std::size_t>(i)]);
  }
  Matrix out(1, 1);
  out(0, 0) = n > 0 ? loss / static_cast<double>(n) : 0.0;
  return t->op(std::move(out), {logits.id}, [t, logits, probs, targets, n](const Matrix& g) {
    if (n == 0 || !t->needs_grad(logits.id)) return;
    Matrix d = *probs;
    for (Eigen::Index i = 0; i < n; ++i) d(i, targets[static_cast<std::size_t>(i)]) -= 1.0;
    t->grad(logits.id) += d * (g(0, 0) / static_cast<double>(n));
  });
}

inline double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

/// Mean binary cross-entropy of an n x 1 logit column against 0/1 labels.
inline Var bce_with_logits(Var logits, const std::vector<int>& labels) {
  Tape* t = logits.tape;
  const Matrix& z = logits.value();
  const Eigen::Index n = z.rows();
  if (z.cols() != 1 || static_cast<std::size_t>(n) != labels.size()) throw Error("bce: shape mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = labels[static_cast<std::size_t>(i)];
    loss += log1p_exp(z(i, 0)) - y * z(i, 0);
  }
  Matrix out(1, 1);
  out(0, 0) = n > 0 ? loss / static_cast<double>(n) : 0.0;
  return t->op(std::move(out), {logits.id}, [t, logits, labels, n](const Matrix& g) {
    if (n == 0 || !t->needs_grad(logits.id)) return;
    Matrix d(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      d(i, 0) = sigmoid(logits.value()(i, 0)) - labels[static_cast<std::size_t>(i)];
    }
    t->grad(logits.id) += d * (g(0, 0) / static_cast<double>(n));
  });
}

}  // namespace tableweave
