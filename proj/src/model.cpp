#include "idmvae/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "idmvae/errors.hpp"

namespace idmvae {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

using namespace ag;

Parameter& ParamStore::create(const std::string& name, int rows, int cols) {
  if (find(name)) throw std::logic_error("ParamStore: duplicate parameter " + name);
  params_.emplace_back(name, rows, cols);
  return params_.back();
}

Parameter* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

Mlp Mlp::create(ParamStore& store, const std::string& prefix, int in_dim,
                const std::vector<int>& layer_dims, bool activate_last) {
  Mlp mlp;
  mlp.activate_last = activate_last;
  int d = in_dim;
  for (std::size_t l = 0; l < layer_dims.size(); ++l) {
    mlp.weights.push_back(&store.create(prefix + "/W" + std::to_string(l), d, layer_dims[l]));
    mlp.biases.push_back(&store.create(prefix + "/b" + std::to_string(l), 1, layer_dims[l]));
    d = layer_dims[l];
  }
  return mlp;
}

void Mlp::init(RngStream& rng, double last_scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Parameter& w = *weights[l];
    const double sd = 1.0 / std::sqrt(static_cast<double>(w.value.rows()));
    const double s = (l + 1 == weights.size()) ? last_scale : 1.0;
    for (int i = 0; i < w.value.rows(); ++i)
      for (int j = 0; j < w.value.cols(); ++j) w.value(i, j) = s * sd * rng.normal();
    biases[l]->value.setZero();
  }
}

Var Mlp::forward(Tape& t, Var x) const {
  Var h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = add_rowvec(matmul(h, t.leaf(*weights[l])), t.leaf(*biases[l]));
    if (l + 1 < weights.size() || activate_last) h = ag::tanh(h);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_plain(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = (h * weights[l]->value).rowwise() + biases[l]->value.row(0);
    if (l + 1 < weights.size() || activate_last) h = h.array().tanh();
  }
  return h;
}

MultimodalModel::MultimodalModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  const auto& ls = cfg_.latent;
  if (ls.M < 2) throw ConfigError("MultimodalModel: M must be >= 2");
  if (ls.d_z < 1 || ls.d_w < 1) throw ConfigError("MultimodalModel: latent dims must be positive");
  if (static_cast<int>(cfg_.modalities.size()) != ls.M)
    throw ConfigError("MultimodalModel: modality list length != M");
  for (const auto& ms : cfg_.modalities) {
    if (ms.input_dim < 1) throw ConfigError("MultimodalModel: input_dim must be positive");
    if (ms.decoder_sigma <= 0.0) throw ConfigError("MultimodalModel: decoder_sigma must be > 0");
  }

  const int trunk_out = cfg_.hidden.empty() ? 0 : cfg_.hidden.back();
  for (int m = 0; m < ls.M; ++m) {
    const std::string p = "m" + std::to_string(m);
    const int in = cfg_.modalities[m].input_dim;
    const int head_in = cfg_.hidden.empty() ? in : trunk_out;
    ModalityNets nets;
    nets.z_trunk = Mlp::create(store_, p + "/z_trunk", in, cfg_.hidden, true);
    if (cfg_.separate_encoders)
      nets.w_trunk = Mlp::create(store_, p + "/w_trunk", in, cfg_.hidden, true);
    nets.z_mean = Mlp::create(store_, p + "/z_mean", head_in, {ls.d_z}, false);
    nets.z_log_var = Mlp::create(store_, p + "/z_logvar", head_in, {ls.d_z}, false);
    nets.w_mean = Mlp::create(store_, p + "/w_mean", head_in, {ls.d_w}, false);
    nets.w_log_var = Mlp::create(store_, p + "/w_logvar", head_in, {ls.d_w}, false);
    std::vector<int> dec_dims = cfg_.hidden;
    dec_dims.push_back(in);
    nets.decoder = Mlp::create(store_, p + "/dec", ls.d_z + ls.d_w, dec_dims, false);
    nets_.push_back(std::move(nets));
    aux_log_var_.push_back(&store_.create(p + "/aux_logvar", 1, ls.d_w));
  }

  RngStream rng(seed);
  for (int m = 0; m < ls.M; ++m) {
    auto& n = nets_[m];
    n.z_trunk.init(rng);
    if (cfg_.separate_encoders) n.w_trunk.init(rng);
    n.z_mean.init(rng);
    n.z_log_var.init(rng, 0.1);
    n.w_mean.init(rng);
    n.w_log_var.init(rng, 0.1);
    n.decoder.init(rng);
    aux_log_var_[m]->value.setZero();
  }
}

void MultimodalModel::check_modality(int m) const {
  if (m < 0 || m >= cfg_.latent.M)
    throw std::invalid_argument("modality index out of range");
}

std::pair<Var, Var> MultimodalModel::encoder_trunks(Tape& t, int m, Var x) const {
  const auto& n = nets_[m];
  Var tz = n.z_trunk.forward(t, x);
  Var tw = cfg_.separate_encoders ? n.w_trunk.forward(t, x) : tz;
  return {tz, tw};
}

MultimodalModel::PosteriorNodes MultimodalModel::encode_rows(Tape& t, int m, Var x) const {
  check_modality(m);
  if (x.cols() != cfg_.modalities[m].input_dim)
    throw std::invalid_argument("encode: input dim mismatch");
  const auto& n = nets_[m];
  auto [tz, tw] = encoder_trunks(t, m, x);
  GaussNodes z{n.z_mean.forward(t, tz), clamp(n.z_log_var.forward(t, tz), kLogVarMin, kLogVarMax)};
  GaussNodes w{n.w_mean.forward(t, tw), clamp(n.w_log_var.forward(t, tw), kLogVarMin, kLogVarMax)};
  return {z, w};
}

MultimodalModel::PosteriorNodes MultimodalModel::encode_rows(Tape& t, int m,
                                                             const Eigen::MatrixXd& x) const {
  if (!x.allFinite()) throw std::invalid_argument("encode: non-finite input");
  return encode_rows(t, m, t.constant(x));
}

Var MultimodalModel::decode_rows(Tape& t, int m, Var z, Var w) const {
  check_modality(m);
  if (z.cols() != cfg_.latent.d_z || w.cols() != cfg_.latent.d_w || z.rows() != w.rows())
    throw std::invalid_argument("decode: latent dim mismatch");
  return nets_[m].decoder.forward(t, concat_cols({z, w}));
}

Var MultimodalModel::log_likelihood_rows(Tape& t, int m, Var params, Var x) const {
  check_modality(m);
  const auto& spec = cfg_.modalities[m];
  if (params.cols() != spec.input_dim || x.cols() != spec.input_dim ||
      params.rows() != x.rows())
    throw std::invalid_argument("log_likelihood: shape mismatch");
  if (!params.value().allFinite()) throw NumericError("log_likelihood: non-finite params");
  if (spec.likelihood == Likelihood::GaussianFixedSigma) {
    const double s2 = spec.decoder_sigma * spec.decoder_sigma;
    Var sq = square(x - params);
    Var per_dim = add_scalar(scale(sq, -0.5 / s2), -0.5 * (kLog2Pi + std::log(s2)));
    return row_sum(per_dim);
  }
  // bernoulli with logits l: log p = -x softplus(-l) - (1-x) softplus(l)
  Var one_minus_x = add_scalar(neg(x), 1.0);
  Var ll = neg(add(mul(x, softplus(neg(params))), mul(one_minus_x, softplus(params))));
  return row_sum(ll);
}

Var MultimodalModel::relaxed_sample_rows(Tape& t, int m, Var params) const {
  check_modality(m);
  if (cfg_.modalities[m].likelihood == Likelihood::Bernoulli) return sigmoid(params);
  return params;
}

Var MultimodalModel::aux_prior_sample_rows(Tape& t, int m, const Eigen::MatrixXd& noise) const {
  check_modality(m);
  if (noise.cols() != cfg_.latent.d_w)
    throw std::invalid_argument("aux_prior_sample: noise dim mismatch");
  Var lv = clamp(t.leaf(*aux_log_var_[m]), kLogVarMin, kLogVarMax);
  Var lv_rows = add_rowvec(t.constant(Eigen::MatrixXd::Zero(noise.rows(), noise.cols())), lv);
  return mul(ag::exp(scale(lv_rows, 0.5)), t.constant(noise));
}

std::pair<DiagGaussian, DiagGaussian> MultimodalModel::encode(int m,
                                                              const Eigen::VectorXd& x) const {
  Tape t;
  auto post = encode_rows(t, m, Eigen::MatrixXd(x.transpose()));
  return {DiagGaussian(post.z.mean.value().row(0), post.z.log_var.value().row(0)),
          DiagGaussian(post.w.mean.value().row(0), post.w.log_var.value().row(0))};
}

Eigen::VectorXd MultimodalModel::decode(int m, const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& w) const {
  Tape t;
  Var out = decode_rows(t, m, t.constant(Eigen::MatrixXd(z.transpose())),
                        t.constant(Eigen::MatrixXd(w.transpose())));
  return out.value().row(0);
}

double MultimodalModel::log_likelihood(int m, const Eigen::VectorXd& params,
                                       const Eigen::VectorXd& x) const {
  Tape t;
  Var ll = log_likelihood_rows(t, m, t.constant(Eigen::MatrixXd(params.transpose())),
                               t.constant(Eigen::MatrixXd(x.transpose())));
  return ll.value()(0, 0);
}

Eigen::VectorXd MultimodalModel::generate(int m, const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& w, bool deterministic,
                                          RngStream* rng) const {
  Eigen::MatrixXd out = generate_batch(m, Eigen::MatrixXd(z.transpose()),
                                       Eigen::MatrixXd(w.transpose()), deterministic, rng);
  return out.row(0);
}

Eigen::VectorXd MultimodalModel::sample_aux_prior(int m, const Eigen::VectorXd& noise) const {
  check_modality(m);
  if (noise.size() != cfg_.latent.d_w)
    throw std::invalid_argument("sample_aux_prior: noise dim mismatch");
  const Eigen::ArrayXd lv =
      aux_log_var_[m]->value.row(0).transpose().array().max(kLogVarMin).min(kLogVarMax);
  return (0.5 * lv).exp() * noise.array();
}

MultimodalModel::BatchPosterior MultimodalModel::encode_batch(int m,
                                                              const Eigen::MatrixXd& x) const {
  Tape t;
  auto post = encode_rows(t, m, x);
  return {post.z.mean.value(), post.z.log_var.value(), post.w.mean.value(),
          post.w.log_var.value()};
}

Eigen::MatrixXd MultimodalModel::decode_batch(int m, const Eigen::MatrixXd& z,
                                              const Eigen::MatrixXd& w) const {
  Tape t;
  return decode_rows(t, m, t.constant(z), t.constant(w)).value();
}

Eigen::MatrixXd MultimodalModel::generate_batch(int m, const Eigen::MatrixXd& z,
                                                const Eigen::MatrixXd& w, bool deterministic,
                                                RngStream* rng) const {
  check_modality(m);
  Eigen::MatrixXd params = decode_batch(m, z, w);
  const auto& spec = cfg_.modalities[m];
  if (!params.allFinite()) throw NumericError("generate: non-finite decoder output");
  if (spec.likelihood == Likelihood::GaussianFixedSigma) {
    if (deterministic) return params;
    if (!rng) throw std::invalid_argument("generate: stochastic draw needs an RngStream");
    return params + spec.decoder_sigma * rng->normal_matrix(params.rows(), params.cols());
  }
  Eigen::MatrixXd probs = (1.0 / (1.0 + (-params.array()).exp()));
  if (deterministic) return (probs.array() > 0.5).cast<double>();
  if (!rng) throw std::invalid_argument("generate: stochastic draw needs an RngStream");
  Eigen::MatrixXd u = rng->uniform_matrix(params.rows(), params.cols());
  return (u.array() < probs.array()).cast<double>();
}

}  // namespace idmvae
