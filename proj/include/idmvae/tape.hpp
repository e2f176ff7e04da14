#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace idmvae {

class Tape;

/// Named trainable tensor. Gradients accumulate into `grad` when a Tape
/// holding a leaf bound to this parameter runs backward().
struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;

  int rows() const;
  int cols() const;
  const Eigen::MatrixXd& value() const;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

/// Reverse-mode autodiff over dense double matrices. Values are computed
/// eagerly as the graph is built; backward() runs one reverse sweep and
/// flushes leaf gradients into their bound Parameters.
class Tape {
 public:
  Var constant(Eigen::MatrixXd v);
  Var leaf(Parameter& p);
  /// Differentiable leaf not bound to a Parameter; gradient readable after
  /// backward() via grad().
  Var input(Eigen::MatrixXd v);

  void backward(Var scalar_out);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.idx].value; }
  const Eigen::MatrixXd& grad(Var v) const;
  double scalar(Var v) const { return nodes_[v.idx].value(0, 0); }

  std::size_t size() const { return nodes_.size(); }

  // -- internals used by op builders --
  using BackFn = std::function<void(Tape&, const Eigen::MatrixXd&)>;
  Var make(Eigen::MatrixXd value, BackFn back, bool track);
  void accumulate(int idx, const Eigen::MatrixXd& g);
  bool tracked(int idx) const { return nodes_[idx].track; }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    BackFn back;
    Parameter* param = nullptr;
    bool track = false;     // participates in differentiation
    bool has_grad = false;  // grad allocated this sweep
  };
  std::deque<Node> nodes_;
};

namespace ag {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var matmul(Var a, Var b);

Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var square(Var a);
Var sqrt(Var a, double eps = 0.0);
Var clamp(Var a, double lo, double hi);

Var sum_all(Var a);   // 1x1
Var mean_all(Var a);  // 1x1
Var row_sum(Var a);   // n x 1
Var row_logsumexp(Var a);

Var add_rowvec(Var a, Var b);  // a: n x d, b: 1 x d
Var mul_colvec(Var a, Var c);  // a: n x d, c: n x 1
Var div_colvec(Var a, Var c);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, int start, int len);
/// Row i of the result is row (i + offset) mod n of a.
Var roll_rows(Var a, int offset);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace ag

}  // namespace idmvae
