#include "idmvae/eval.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "idmvae/errors.hpp"
#include "idmvae/optim.hpp"
#include "idmvae/rng.hpp"

namespace idmvae {

using nlohmann::json;

Eigen::VectorXi LinearProbe::predict(const Eigen::MatrixXd& features) const {
  Eigen::MatrixXd scores = (features * weight.transpose()).rowwise() + bias.transpose();
  Eigen::VectorXi out(features.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best;
    scores.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double LinearProbe::accuracy(const Eigen::MatrixXd& features,
                             const Eigen::VectorXi& labels) const {
  const Eigen::VectorXi pred = predict(features);
  return (pred.array() == labels.array()).cast<double>().mean();
}

LinearProbe fit_linear_probe(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                             int n_classes, double reg) {
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  if (labels.size() != n) throw std::invalid_argument("fit_linear_probe: label count mismatch");
  if (!features.allFinite()) throw std::invalid_argument("fit_linear_probe: non-finite features");
  int present = 0;
  std::vector<bool> seen(n_classes, false);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes)
      throw std::invalid_argument("fit_linear_probe: label out of range");
    if (!seen[labels[i]]) {
      seen[labels[i]] = true;
      ++present;
    }
  }
  if (present < 2) throw std::invalid_argument("fit_linear_probe: needs >= 2 classes present");

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n_classes, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_classes);
  Eigen::MatrixXd mW = W, vW = W;
  Eigen::VectorXd mb = b, vb = b;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, n_classes);
  for (int i = 0; i < n; ++i) onehot(i, labels[i]) = 1.0;

  for (int it = 1; it <= 500; ++it) {
    Eigen::MatrixXd scores = (features * W.transpose()).rowwise() + b.transpose();
    Eigen::VectorXd mx = scores.rowwise().maxCoeff();
    Eigen::MatrixXd ex = (scores.colwise() - mx).array().exp();
    Eigen::VectorXd sums = ex.rowwise().sum();
    Eigen::MatrixXd probs = ex.array().colwise() / sums.array();
    Eigen::MatrixXd delta = (probs - onehot) / n;  // n x C
    Eigen::MatrixXd gW = delta.transpose() * features + reg * W;
    Eigen::VectorXd gb = delta.colwise().sum();

    const double gnorm = std::sqrt(gW.squaredNorm() + gb.squaredNorm());
    if (gnorm < 1e-5) break;

    mW = b1 * mW + (1 - b1) * gW;
    vW = b2 * vW.array().matrix() + (1 - b2) * gW.cwiseProduct(gW);
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb.cwiseProduct(gb);
    const double c1 = 1.0 - std::pow(b1, it), c2 = 1.0 - std::pow(b2, it);
    W -= (lr * (mW / c1).array() / ((vW / c2).array().sqrt() + eps)).matrix();
    b -= (lr * (mb / c1).array() / ((vb / c2).array().sqrt() + eps)).matrix();
  }
  return LinearProbe{W, b};
}

namespace {

Eigen::MatrixXd posterior_features(const MultimodalModel& model, int m,
                                   const Eigen::MatrixXd& x, bool z_side, bool use_samples,
                                   RngStream& rng) {
  auto post = model.encode_batch(m, x);
  Eigen::MatrixXd mean = z_side ? post.z_mean : post.w_mean;
  if (!use_samples) return mean;
  Eigen::MatrixXd lv = z_side ? post.z_log_var : post.w_log_var;
  Eigen::MatrixXd eps = rng.normal_matrix(mean.rows(), mean.cols());
  return mean.array() + (0.5 * lv.array()).exp() * eps.array();
}

}  // namespace

LatentClassification latent_classification(const MultimodalModel& model, const Dataset& ds,
                                           bool use_samples, std::uint64_t seed) {
  const int M = model.num_modalities();
  LatentClassification out;
  out.chance_shared = 1.0 / ds.n_shared_classes;
  out.chance_private = 1.0 / ds.n_private_classes;
  for (int m = 0; m < M; ++m) {
    RngStream rng(derive_seed(seed, 100 + m));
    Eigen::MatrixXd z_tr = posterior_features(model, m, ds.train.x[m], true, use_samples, rng);
    Eigen::MatrixXd w_tr = posterior_features(model, m, ds.train.x[m], false, use_samples, rng);
    Eigen::MatrixXd z_te = posterior_features(model, m, ds.test.x[m], true, use_samples, rng);
    Eigen::MatrixXd w_te = posterior_features(model, m, ds.test.x[m], false, use_samples, rng);

    auto acc = [&](const Eigen::MatrixXd& ftr, const Eigen::MatrixXd& fte,
                   const Eigen::VectorXi& ytr, const Eigen::VectorXi& yte, int classes) {
      return fit_linear_probe(ftr, ytr, classes).accuracy(fte, yte);
    };
    out.z_to_shared += acc(z_tr, z_te, ds.train.shared_label, ds.test.shared_label,
                           ds.n_shared_classes);
    out.z_to_private += acc(z_tr, z_te, ds.train.private_labels[m],
                            ds.test.private_labels[m], ds.n_private_classes);
    out.w_to_private += acc(w_tr, w_te, ds.train.private_labels[m],
                            ds.test.private_labels[m], ds.n_private_classes);
    out.w_to_shared += acc(w_tr, w_te, ds.train.shared_label, ds.test.shared_label,
                           ds.n_shared_classes);
  }
  out.z_to_shared /= M;
  out.z_to_private /= M;
  out.w_to_private /= M;
  out.w_to_shared /= M;
  return out;
}

RefClassifier::RefClassifier(int input_dim, int n_classes, std::vector<int> hidden,
                             std::uint64_t seed)
    : store_(std::make_unique<ParamStore>()), n_classes_(n_classes) {
  hidden.push_back(n_classes);
  net_ = Mlp::create(*store_, "ref", input_dim, hidden, false);
  RngStream rng(seed);
  net_.init(rng);
}

void RefClassifier::fit(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, int epochs,
                        int batch_size, double lr, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  AdamOptimizer opt(store_->all(), lr);
  RngStream shuffle_rng(derive_seed(seed, 5));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<int> order = shuffle_rng.permutation(n);
    for (int start = 0; start + batch_size <= n; start += batch_size) {
      const int bs = batch_size;
      Eigen::MatrixXd xb(bs, x.cols());
      Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(bs, n_classes_);
      for (int i = 0; i < bs; ++i) {
        xb.row(i) = x.row(order[start + i]);
        onehot(i, y[order[start + i]]) = 1.0;
      }
      Tape t;
      Var logits = net_.forward(t, t.constant(xb));
      Var ce = ag::mean_all(ag::sub(ag::row_logsumexp(logits),
                                    ag::row_sum(ag::mul(logits, t.constant(onehot)))));
      opt.zero_grads();
      t.backward(ce);
      opt.step();
    }
  }
}

Eigen::VectorXi RefClassifier::predict(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd scores = net_.forward_plain(x);
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best;
    scores.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double RefClassifier::accuracy(const Eigen::MatrixXd& x, const Eigen::VectorXi& y) const {
  return (predict(x).array() == y.array()).cast<double>().mean();
}

ReferenceClassifiers train_reference_classifiers(const Dataset& ds, std::uint64_t seed,
                                                 double gate) {
  ReferenceClassifiers refs;
  const std::vector<int> hidden = {128, 128};
  for (int m = 0; m < ds.M; ++m) {
    auto sc = std::make_unique<RefClassifier>(ds.input_dims[m], ds.n_shared_classes, hidden,
                                              derive_seed(seed, 2 * m));
    sc->fit(ds.train.x[m], ds.train.shared_label, /*epochs=*/30, /*batch=*/128, /*lr=*/1e-3,
            derive_seed(seed, 2 * m));
    auto pc = std::make_unique<RefClassifier>(ds.input_dims[m], ds.n_private_classes, hidden,
                                              derive_seed(seed, 2 * m + 1));
    pc->fit(ds.train.x[m], ds.train.private_labels[m], 30, 128, 1e-3,
            derive_seed(seed, 2 * m + 1));

    const double sa = sc->accuracy(ds.val.x[m], ds.val.shared_label);
    const double pa = pc->accuracy(ds.val.x[m], ds.val.private_labels[m]);
    if (sa < gate || pa < gate)
      throw ConfigError("reference classifier gate failed for modality " + std::to_string(m) +
                        ": shared acc " + std::to_string(sa) + ", private acc " +
                        std::to_string(pa) + " (need >= " + std::to_string(gate) + ")");
    refs.shared.push_back(std::move(sc));
    refs.private_.push_back(std::move(pc));
    refs.shared_gate_acc.push_back(sa);
    refs.private_gate_acc.push_back(pa);
  }
  return refs;
}

namespace {

Eigen::MatrixXd prior_z(const MultimodalModel& model, const DiffusionPrior* diffusion, int n,
                        RngStream& rng) {
  if (diffusion) return diffusion->sample_prior(n, rng);
  return rng.normal_matrix(n, model.config().latent.d_z);
}

Eigen::MatrixXd sample_posterior(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& lv,
                                 RngStream& rng) {
  Eigen::MatrixXd eps = rng.normal_matrix(mean.rows(), mean.cols());
  return mean.array() + (0.5 * lv.array()).exp() * eps.array();
}

}  // namespace

std::pair<double, double> conditional_coherence(
    const MultimodalModel& model, const DiffusionPrior* diffusion,
    const ReferenceClassifiers& refs, const Dataset& ds, int s, int t, LatentSource z_source,
    LatentSource w_source, int n, std::uint64_t seed) {
  if (refs.shared.empty()) throw ConfigError("conditional_coherence: reference nets missing");
  const int avail = ds.test.size();
  n = std::min(n, avail);
  RngStream rng(seed);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;

  Eigen::MatrixXd z;
  if (z_source == LatentSource::Posterior) {
    auto post = model.encode_batch(s, ds.test.x[s].topRows(n));
    z = sample_posterior(post.z_mean, post.z_log_var, rng);
  } else {
    z = prior_z(model, diffusion, n, rng);
  }
  Eigen::MatrixXd w;
  if (w_source == LatentSource::Posterior) {
    auto post = model.encode_batch(t, ds.test.x[t].topRows(n));
    w = sample_posterior(post.w_mean, post.w_log_var, rng);
  } else {
    w = rng.normal_matrix(n, model.config().latent.d_w);
  }

  Eigen::MatrixXd gen = model.generate_batch(t, z, w, /*deterministic=*/true);
  const Eigen::VectorXi shared_pred = refs.shared[t]->predict(gen);
  const Eigen::VectorXi priv_pred = refs.private_[t]->predict(gen);
  const auto shared_true = ds.test.shared_label.head(n);
  const auto priv_true = ds.test.private_labels[t].head(n);
  return {(shared_pred.array() == shared_true.array()).cast<double>().mean(),
          (priv_pred.array() == priv_true.array()).cast<double>().mean()};
}

double unconditional_coherence(const MultimodalModel& model, const DiffusionPrior* diffusion,
                               const ReferenceClassifiers& refs, int n, std::uint64_t seed) {
  const int M = model.num_modalities();
  if (M < 2) throw ConfigError("unconditional_coherence: needs M >= 2");
  RngStream rng(seed);
  Eigen::MatrixXd z = prior_z(model, diffusion, n, rng);
  Eigen::MatrixXi preds(n, M);
  for (int m = 0; m < M; ++m) {
    Eigen::MatrixXd w = rng.normal_matrix(n, model.config().latent.d_w);
    Eigen::MatrixXd gen = model.generate_batch(m, z, w, true);
    preds.col(m) = refs.shared[m]->predict(gen);
  }
  int coherent = 0;
  for (int i = 0; i < n; ++i) {
    bool all_same = true;
    for (int m = 1; m < M; ++m) all_same = all_same && (preds(i, m) == preds(i, 0));
    coherent += all_same ? 1 : 0;
  }
  return static_cast<double>(coherent) / n;
}

MetricsReport compute_metrics(const MultimodalModel& model, const DiffusionPrior* diffusion,
                              const ReferenceClassifiers& refs, const Dataset& ds,
                              bool use_samples, int n_eval, std::uint64_t seed) {
  MetricsReport r;
  r.latent = latent_classification(model, ds, use_samples, derive_seed(seed, 1));
  r.use_samples = use_samples;
  r.n_eval = n_eval;
  const int M = model.num_modalities();

  int self_cells = 0, cross_cells = 0;
  for (int s = 0; s < M; ++s) {
    for (int t = 0; t < M; ++t) {
      const std::uint64_t cell_seed = derive_seed(seed, 100 + s * M + t);
      if (s == t) {
        auto [sa, pa] = conditional_coherence(model, diffusion, refs, ds, s, t,
                                              LatentSource::Posterior, LatentSource::Prior,
                                              n_eval, cell_seed);
        r.self_zq_wp_shared += sa;
        r.self_zq_wp_private += pa;
        auto [sb, pb] = conditional_coherence(model, diffusion, refs, ds, s, t,
                                              LatentSource::Prior, LatentSource::Posterior,
                                              n_eval, derive_seed(cell_seed, 2));
        r.self_zp_wq_shared += sb;
        r.self_zp_wq_private += pb;
        ++self_cells;
      } else {
        auto [sa, pa] = conditional_coherence(model, diffusion, refs, ds, s, t,
                                              LatentSource::Posterior, LatentSource::Prior,
                                              n_eval, cell_seed);
        r.cross_zq_wp_shared += sa;
        r.cross_zq_wp_private += pa;
        ++cross_cells;
      }
    }
  }
  r.self_zq_wp_shared /= self_cells;
  r.self_zq_wp_private /= self_cells;
  r.self_zp_wq_shared /= self_cells;
  r.self_zp_wq_private /= self_cells;
  if (cross_cells > 0) {
    r.cross_zq_wp_shared /= cross_cells;
    r.cross_zq_wp_private /= cross_cells;
  }
  r.uncond = unconditional_coherence(model, diffusion, refs, n_eval, derive_seed(seed, 7));
  return r;
}

std::string MetricsReport::to_json() const {
  json j{{"latent_classification",
          {{"z_to_shared", latent.z_to_shared},
           {"z_to_private", latent.z_to_private},
           {"w_to_private", latent.w_to_private},
           {"w_to_shared", latent.w_to_shared},
           {"chance_shared", latent.chance_shared},
           {"chance_private", latent.chance_private},
           {"use_samples", use_samples}}},
         {"conditional_coherence",
          {{"self",
            {{"z_post_w_prior", {{"shared", self_zq_wp_shared}, {"private", self_zq_wp_private}}},
             {"z_prior_w_post",
              {{"shared", self_zp_wq_shared}, {"private", self_zp_wq_private}}}}},
           {"cross",
            {{"z_post_w_prior",
              {{"shared", cross_zq_wp_shared}, {"private", cross_zq_wp_private}}}}}}},
         {"unconditional_coherence", uncond},
         {"n_eval", n_eval}};
  return j.dump(2);
}

std::string MetricsReport::to_table_csv() const {
  std::ostringstream os;
  os << "row,z_source,w_source,shared_acc,private_acc\n";
  os << "self-gen," << "posterior,prior," << self_zq_wp_shared << "," << self_zq_wp_private
     << "\n";
  os << "self-gen," << "prior,posterior," << self_zp_wq_shared << "," << self_zp_wq_private
     << "\n";
  os << "cross-gen," << "posterior,prior," << cross_zq_wp_shared << ","
     << cross_zq_wp_private << "\n";
  os << "uncond," << "prior,prior," << uncond << ",\n";
  return os.str();
}

ProjectionTable latent_projection(const MultimodalModel& model, const DiffusionPrior* diffusion,
                                  const Dataset& ds, int n_posterior, int n_prior,
                                  std::uint64_t seed) {
  n_posterior = std::min(n_posterior, ds.test.size());
  auto post = model.encode_batch(0, ds.test.x[0].topRows(n_posterior));
  RngStream rng(seed);
  Eigen::MatrixXd prior = prior_z(model, diffusion, n_prior, rng);

  const Eigen::RowVectorXd center = post.z_mean.colwise().mean();
  Eigen::MatrixXd centered = post.z_mean.rowwise() - center;
  Eigen::MatrixXd cov = centered.transpose() * centered / std::max(1, n_posterior - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const int d = static_cast<int>(cov.rows());
  Eigen::MatrixXd components(d, 2);  // top-2 eigenvectors, descending eigenvalue
  components.col(0) = es.eigenvectors().col(d - 1);
  components.col(1) = es.eigenvectors().col(d - 2);
  const double total_var = es.eigenvalues().sum();

  ProjectionTable table;
  table.coords.resize(n_posterior + n_prior, 2);
  table.coords.topRows(n_posterior) = centered * components;
  table.coords.bottomRows(n_prior) = (prior.rowwise() - center) * components;
  table.labels.resize(n_posterior + n_prior);
  table.labels.head(n_posterior) = ds.test.shared_label.head(n_posterior);
  table.labels.tail(n_prior).setConstant(-1);
  table.is_prior.assign(n_posterior + n_prior, 0);
  for (int i = 0; i < n_prior; ++i) table.is_prior[n_posterior + i] = 1;
  table.variance_explained =
      total_var > 0 ? (es.eigenvalues()(d - 1) + es.eigenvalues()(d - 2)) / total_var : 0.0;
  return table;
}

std::string ProjectionTable::to_csv() const {
  std::ostringstream os;
  os << "x,y,label,kind\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    os << coords(i, 0) << "," << coords(i, 1) << "," << labels[i] << ","
       << (is_prior[i] ? "prior" : "posterior") << "\n";
  return os.str();
}

}  // namespace idmvae
