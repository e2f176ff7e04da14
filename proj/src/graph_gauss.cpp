#include "idmvae/graph_gauss.hpp"

#include <stdexcept>
#include <vector>

namespace idmvae {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

using namespace ag;

Var reparam(const GaussNodes& g, Var noise) {
  return g.mean + mul(ag::exp(scale(g.log_var, 0.5)), noise);
}

Var reparam(const GaussNodes& g, const Eigen::MatrixXd& noise) {
  return reparam(g, g.mean.tape->constant(noise));
}

Var gauss_log_prob_rows(const GaussNodes& g, Var z) {
  if (z.cols() != g.dim() || z.rows() != g.rows())
    throw std::invalid_argument("gauss_log_prob_rows: shape mismatch");
  Var diff = z - g.mean;
  Var quad = mul(square(diff), ag::exp(neg(g.log_var)));
  Var per_dim = add_scalar(scale(g.log_var + quad, -0.5), -0.5 * kLog2Pi);
  return row_sum(per_dim);
}

Var std_normal_log_prob_rows(Var z) {
  Var per_dim = add_scalar(scale(square(z), -0.5), -0.5 * kLog2Pi);
  return row_sum(per_dim);
}

Var gauss_entropy_rows(const GaussNodes& g) {
  Var s = row_sum(g.log_var);
  return add_scalar(scale(s, 0.5), 0.5 * g.dim() * (1.0 + kLog2Pi));
}

Var cross_entropy_std_normal_rows(const GaussNodes& g) {
  Var per_dim = add_scalar(square(g.mean) + ag::exp(g.log_var), kLog2Pi);
  return scale(row_sum(per_dim), 0.5);
}

Var moe_log_prob_rows(std::span<const GaussNodes> components, Var z) {
  if (components.empty()) throw std::invalid_argument("moe_log_prob_rows: no components");
  std::vector<Var> cols;
  cols.reserve(components.size());
  for (const auto& c : components) cols.push_back(gauss_log_prob_rows(c, z));
  Var stacked = concat_cols(cols);
  Var lse = row_logsumexp(stacked);
  return add_scalar(lse, -std::log(static_cast<double>(components.size())));
}

Var cosine_rows(Var a, Var b, double eps) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("cosine_rows: shape mismatch");
  Var na2 = row_sum(square(a));
  Var nb2 = row_sum(square(b));
  if (na2.value().minCoeff() == 0.0 || nb2.value().minCoeff() == 0.0)
    throw std::domain_error("cosine_rows: zero-norm vector");
  Var dots = row_sum(mul(a, b));
  Var denom = mul(ag::sqrt(na2, eps), ag::sqrt(nb2, eps));
  return div_colvec(dots, denom);
}

}  // namespace idmvae
