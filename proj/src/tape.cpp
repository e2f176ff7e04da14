#include "idmvae/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace idmvae {

int Var::rows() const { return static_cast<int>(tape->value(*this).rows()); }
int Var::cols() const { return static_cast<int>(tape->value(*this).cols()); }
const Eigen::MatrixXd& Var::value() const { return tape->value(*this); }

Var Tape::make(Eigen::MatrixXd value, BackFn back, bool track) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  n.track = track;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Eigen::MatrixXd v) { return make(std::move(v), nullptr, false); }

Var Tape::leaf(Parameter& p) {
  Var v = make(p.value, nullptr, true);
  nodes_[v.idx].param = &p;
  return v;
}

Var Tape::input(Eigen::MatrixXd v) { return make(std::move(v), nullptr, true); }

void Tape::accumulate(int idx, const Eigen::MatrixXd& g) {
  Node& n = nodes_[idx];
  if (!n.track) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

const Eigen::MatrixXd& Tape::grad(Var v) const {
  const Node& n = nodes_[v.idx];
  if (!n.has_grad) {
    static const Eigen::MatrixXd empty;
    throw std::logic_error("Tape::grad: node has no gradient (not on backward path?)");
  }
  return n.grad;
}

void Tape::backward(Var scalar_out) {
  if (scalar_out.tape != this) throw std::logic_error("backward: var from another tape");
  const Node& out = nodes_[scalar_out.idx];
  if (out.value.rows() != 1 || out.value.cols() != 1)
    throw std::logic_error("backward: output must be a 1x1 scalar");
  for (auto& n : nodes_) n.has_grad = false;
  accumulate(scalar_out.idx, Eigen::MatrixXd::Ones(1, 1));
  for (int i = scalar_out.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.has_grad && n.back) n.back(*this, n.grad);
  }
  for (auto& n : nodes_) {
    if (n.param && n.has_grad) n.param->grad += n.grad;
  }
}

namespace ag {
namespace {

Tape& tp(Var a) { return *a.tape; }

void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

bool any_tracked(std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v.tape->tracked(v.idx)) return true;
  return false;
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  const bool track = any_tracked({a, b});
  const int ia = a.idx, ib = b.idx;
  return tp(a).make(
      a.value() + b.value(),
      [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
      },
      track);
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  const bool track = any_tracked({a, b});
  const int ia = a.idx, ib = b.idx;
  return tp(a).make(
      a.value() - b.value(),
      [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
      },
      track);
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  const bool track = any_tracked({a, b});
  const int ia = a.idx, ib = b.idx;
  return tp(a).make(
      a.value().cwiseProduct(b.value()),
      [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g.cwiseProduct(t.value(Var{&t, ib})));
        t.accumulate(ib, g.cwiseProduct(t.value(Var{&t, ia})));
      },
      track);
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  const int ia = a.idx;
  return tp(a).make(
      s * a.value(),
      [ia, s](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(ia, s * g); },
      tp(a).tracked(ia));
}

Var add_scalar(Var a, double s) {
  const int ia = a.idx;
  return tp(a).make(
      a.value().array() + s,
      [ia](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(ia, g); },
      tp(a).tracked(ia));
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims mismatch");
  const bool track = any_tracked({a, b});
  const int ia = a.idx, ib = b.idx;
  return tp(a).make(
      a.value() * b.value(),
      [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g * t.value(Var{&t, ib}).transpose());
        t.accumulate(ib, t.value(Var{&t, ia}).transpose() * g);
      },
      track);
}

Var tanh(Var a) {
  const int ia = a.idx;
  Eigen::MatrixXd y = a.value().array().tanh();
  return tp(a).make(
      y,
      [ia, y](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g.cwiseProduct((1.0 - y.array().square()).matrix()));
      },
      tp(a).tracked(ia));
}

Var exp(Var a) {
  const int ia = a.idx;
  Eigen::MatrixXd y = a.value().array().exp();
  return tp(a).make(
      y,
      [ia, y](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(ia, g.cwiseProduct(y)); },
      tp(a).tracked(ia));
}

Var log(Var a) {
  const int ia = a.idx;
  Eigen::MatrixXd av = a.value();
  return tp(a).make(
      av.array().log(),
      [ia, av](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g.cwiseQuotient(av));
      },
      tp(a).tracked(ia));
}

Var sigmoid(Var a) {
  const int ia = a.idx;
  Eigen::MatrixXd y = (1.0 / (1.0 + (-a.value().array()).exp()));
  return tp(a).make(
      y,
      [ia, y](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
      },
      tp(a).tracked(ia));
}

Var softplus(Var a) {
  const int ia = a.idx;
  const Eigen::ArrayXXd x = a.value().array();
  Eigen::MatrixXd y = x.max(0.0) + (-x.abs()).exp().log1p();
  Eigen::MatrixXd sig = 1.0 / (1.0 + (-x).exp());
  return tp(a).make(
      y,
      [ia, sig](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(ia, g.cwiseProduct(sig)); },
      tp(a).tracked(ia));
}

Var square(Var a) {
  const int ia = a.idx;
  Eigen::MatrixXd av = a.value();
  return tp(a).make(
      av.array().square(),
      [ia, av](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, (2.0 * g.array() * av.array()).matrix());
      },
      tp(a).tracked(ia));
}

Var sqrt(Var a, double eps) {
  const int ia = a.idx;
  Eigen::MatrixXd y = (a.value().array() + eps).sqrt();
  return tp(a).make(
      y,
      [ia, y](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, (g.array() * 0.5 / y.array()).matrix());
      },
      tp(a).tracked(ia));
}

Var clamp(Var a, double lo, double hi) {
  const int ia = a.idx;
  const Eigen::MatrixXd av = a.value();
  Eigen::MatrixXd y = av.array().max(lo).min(hi);
  return tp(a).make(
      y,
      [ia, av, lo, hi](Tape& t, const Eigen::MatrixXd& g) {
        Eigen::ArrayXXd mask = ((av.array() > lo) && (av.array() < hi)).cast<double>();
        t.accumulate(ia, (g.array() * mask).matrix());
      },
      tp(a).tracked(ia));
}

Var sum_all(Var a) {
  const int ia = a.idx;
  const int r = a.rows(), c = a.cols();
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = a.value().sum();
  return tp(a).make(
      y,
      [ia, r, c](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, Eigen::MatrixXd::Constant(r, c, g(0, 0)));
      },
      tp(a).tracked(ia));
}

Var mean_all(Var a) { return scale(sum_all(a), 1.0 / (a.rows() * a.cols())); }

Var row_sum(Var a) {
  const int ia = a.idx;
  const int c = a.cols();
  return tp(a).make(
      a.value().rowwise().sum(),
      [ia, c](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g.replicate(1, c));
      },
      tp(a).tracked(ia));
}

Var row_logsumexp(Var a) {
  const int ia = a.idx;
  const Eigen::MatrixXd av = a.value();
  Eigen::VectorXd mx = av.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = av.colwise() - mx;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix() + mx;
  Eigen::MatrixXd soft = (av.colwise() - lse).array().exp();
  return tp(a).make(
      lse,
      [ia, soft](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, soft.array().colwise() * g.col(0).array());
      },
      tp(a).tracked(ia));
}

Var add_rowvec(Var a, Var b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: b must be 1 x cols(a)");
  const bool track = any_tracked({a, b});
  const int ia = a.idx, ib = b.idx;
  return tp(a).make(
      a.value().rowwise() + b.value().row(0),
      [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g.colwise().sum());
      },
      track);
}

Var mul_colvec(Var a, Var c) {
  if (c.cols() != 1 || c.rows() != a.rows())
    throw std::invalid_argument("mul_colvec: c must be rows(a) x 1");
  const bool track = any_tracked({a, c});
  const int ia = a.idx, ic = c.idx;
  const Eigen::MatrixXd av = a.value();
  const Eigen::VectorXd cv = c.value().col(0);
  return tp(a).make(
      av.array().colwise() * cv.array(),
      [ia, ic, av, cv](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g.array().colwise() * cv.array());
        t.accumulate(ic, g.cwiseProduct(av).rowwise().sum());
      },
      track);
}

Var div_colvec(Var a, Var c) {
  if (c.cols() != 1 || c.rows() != a.rows())
    throw std::invalid_argument("div_colvec: c must be rows(a) x 1");
  const bool track = any_tracked({a, c});
  const int ia = a.idx, ic = c.idx;
  const Eigen::MatrixXd av = a.value();
  const Eigen::VectorXd cv = c.value().col(0);
  return tp(a).make(
      av.array().colwise() / cv.array(),
      [ia, ic, av, cv](Tape& t, const Eigen::MatrixXd& g) {
        t.accumulate(ia, g.array().colwise() / cv.array());
        Eigen::VectorXd gc =
            -(g.cwiseProduct(av).rowwise().sum().array() / cv.array().square());
        t.accumulate(ic, gc);
      },
      track);
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int r = parts[0].rows();
  int total = 0;
  bool track = false;
  for (Var p : parts) {
    if (p.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.cols();
    track = track || p.tape->tracked(p.idx);
  }
  Eigen::MatrixXd y(r, total);
  std::vector<std::pair<int, int>> spans;  // (idx, cols)
  int at = 0;
  for (Var p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.idx, p.cols());
    at += p.cols();
  }
  return tp(parts[0]).make(
      std::move(y),
      [spans](Tape& t, const Eigen::MatrixXd& g) {
        int at = 0;
        for (auto [idx, c] : spans) {
          t.accumulate(idx, g.middleCols(at, c));
          at += c;
        }
      },
      track);
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const int c = parts[0].cols();
  int total = 0;
  bool track = false;
  for (Var p : parts) {
    if (p.cols() != c) throw std::invalid_argument("concat_rows: col mismatch");
    total += p.rows();
    track = track || p.tape->tracked(p.idx);
  }
  Eigen::MatrixXd y(total, c);
  std::vector<std::pair<int, int>> spans;
  int at = 0;
  for (Var p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.idx, p.rows());
    at += p.rows();
  }
  return tp(parts[0]).make(
      std::move(y),
      [spans](Tape& t, const Eigen::MatrixXd& g) {
        int at = 0;
        for (auto [idx, r] : spans) {
          t.accumulate(idx, g.middleRows(at, r));
          at += r;
        }
      },
      track);
}

Var slice_cols(Var a, int start, int len) {
  if (start < 0 || len <= 0 || start + len > a.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  const int ia = a.idx;
  const int r = a.rows(), c = a.cols();
  return tp(a).make(
      a.value().middleCols(start, len),
      [ia, start, len, r, c](Tape& t, const Eigen::MatrixXd& g) {
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(r, c);
        full.middleCols(start, len) = g;
        t.accumulate(ia, full);
      },
      tp(a).tracked(ia));
}

Var roll_rows(Var a, int offset) {
  const int ia = a.idx;
  const int n = a.rows();
  const int off = ((offset % n) + n) % n;
  Eigen::MatrixXd y(n, a.cols());
  for (int i = 0; i < n; ++i) y.row(i) = a.value().row((i + off) % n);
  return tp(a).make(
      std::move(y),
      [ia, off, n](Tape& t, const Eigen::MatrixXd& g) {
        Eigen::MatrixXd ga(n, g.cols());
        for (int i = 0; i < n; ++i) ga.row((i + off) % n) = g.row(i);
        t.accumulate(ia, ga);
      },
      tp(a).tracked(ia));
}

}  // namespace ag
}  // namespace idmvae
