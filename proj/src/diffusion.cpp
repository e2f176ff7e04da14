#include "idmvae/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "idmvae/errors.hpp"

namespace idmvae {

using namespace ag;

DiffusionSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("make_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("make_schedule: need 0 < beta_start <= beta_end < 1");
  DiffusionSchedule s;
  s.T = T;
  s.betas.resize(T);
  s.alphas_bar.resize(T);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    s.betas[t] = (T == 1) ? beta_start
                          : beta_start + (beta_end - beta_start) * t / (T - 1.0);
    prod *= 1.0 - s.betas[t];
    s.alphas_bar[t] = prod;
  }
  return s;
}

Eigen::VectorXd forward_marginal(const DiffusionSchedule& s, const Eigen::VectorXd& z0, int t,
                                 const Eigen::VectorXd& noise) {
  if (t < 0 || t >= s.T) throw std::invalid_argument("forward_marginal: step out of range");
  if (z0.size() != noise.size())
    throw std::invalid_argument("forward_marginal: dim mismatch");
  const double ab = s.alphas_bar[t];
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * noise;
}

DiffusionPrior::DiffusionPrior(DiffusionConfig cfg, int d_z, std::uint64_t seed)
    : cfg_(std::move(cfg)), d_z_(d_z) {
  if (d_z_ < 1) throw ConfigError("DiffusionPrior: d_z must be positive");
  if (cfg_.t_embed_dim < 2 || cfg_.t_embed_dim % 2 != 0)
    throw ConfigError("DiffusionPrior: t_embed_dim must be a positive even number");
  sched_ = make_schedule(cfg_.T, cfg_.beta_start, cfg_.beta_end);
  std::vector<int> dims = cfg_.hidden;
  dims.push_back(d_z_);
  net_ = Mlp::create(store_, "diffusion/net", d_z_ + cfg_.t_embed_dim, dims, false);
  RngStream rng(seed);
  net_.init(rng);
}

Eigen::MatrixXd DiffusionPrior::time_embedding(const std::vector<int>& t) const {
  const int half = cfg_.t_embed_dim / 2;
  Eigen::MatrixXd emb(static_cast<int>(t.size()), cfg_.t_embed_dim);
  for (int i = 0; i < static_cast<int>(t.size()); ++i) {
    for (int j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(10000.0) * j / std::max(1, half - 1));
      emb(i, 2 * j) = std::sin(t[i] * freq);
      emb(i, 2 * j + 1) = std::cos(t[i] * freq);
    }
  }
  return emb;
}

Var DiffusionPrior::denoise_loss_graph(Tape& t, Var z0, NoiseSource& noise) const {
  const int n = z0.rows();
  if (n < 1) throw std::invalid_argument("denoise_loss: empty batch");
  if (z0.cols() != d_z_) throw std::invalid_argument("denoise_loss: z0 dim mismatch");
  std::vector<int> steps(n);
  for (int i = 0; i < n; ++i) steps[i] = noise.uniform_int(sched_.T);
  Eigen::MatrixXd eps = noise.normal(n, d_z_);

  Eigen::VectorXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    const double ab = sched_.alphas_bar[steps[i]];
    a[i] = std::sqrt(ab);
    b[i] = std::sqrt(1.0 - ab);
  }
  Var z_t = add(mul_colvec(z0, t.constant(a)),
                t.constant(eps.array().colwise() * b.array()));
  Var inp = concat_cols({z_t, t.constant(time_embedding(steps))});
  Var pred = net_.forward(t, inp);
  Var err = sub(t.constant(eps), pred);
  return mean_all(row_sum(square(err)));
}

Eigen::MatrixXd DiffusionPrior::predict(const Eigen::MatrixXd& z_t,
                                        const std::vector<int>& t) const {
  Eigen::MatrixXd inp(z_t.rows(), d_z_ + cfg_.t_embed_dim);
  inp << z_t, time_embedding(t);
  return net_.forward_plain(inp);
}

Eigen::MatrixXd DiffusionPrior::sample_prior(int n, RngStream& rng) const {
  if (n < 1) throw std::invalid_argument("sample_prior: n must be positive");
  Eigen::MatrixXd z = rng.normal_matrix(n, d_z_);
  for (int step = sched_.T - 1; step >= 0; --step) {
    const double beta = sched_.betas[step];
    const double alpha = 1.0 - beta;
    const double ab = sched_.alphas_bar[step];
    Eigen::MatrixXd eps_hat = predict(z, std::vector<int>(n, step));
    z = (z - (beta / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(alpha);
    if (step > 0) {
      const double ab_prev = sched_.alphas_bar[step - 1];
      const double beta_tilde = (1.0 - ab_prev) / (1.0 - ab) * beta;
      z += std::sqrt(beta_tilde) * rng.normal_matrix(n, d_z_);
    }
  }
  return z;
}

}  // namespace idmvae
