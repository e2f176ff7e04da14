#include "idmvae/data.hpp"

#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <stdexcept>

#include "idmvae/binio.hpp"
#include "idmvae/errors.hpp"

namespace idmvae {

namespace fs = std::filesystem;
using nlohmann::json;

AlignedBatch AlignedBatch::rows(const std::vector<int>& idx) const {
  AlignedBatch out;
  const int n = static_cast<int>(idx.size());
  out.x.reserve(x.size());
  for (const auto& xm : x) {
    Eigen::MatrixXd sel(n, xm.cols());
    for (int i = 0; i < n; ++i) sel.row(i) = xm.row(idx[i]);
    out.x.push_back(std::move(sel));
  }
  out.shared_label.resize(n);
  for (int i = 0; i < n; ++i) out.shared_label[i] = shared_label[idx[i]];
  for (const auto& pl : private_labels) {
    Eigen::VectorXi sel(n);
    for (int i = 0; i < n; ++i) sel[i] = pl[idx[i]];
    out.private_labels.push_back(std::move(sel));
  }
  return out;
}

const AlignedBatch& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split: " + name);
}

namespace {

Eigen::VectorXd one_hot(int cls, int n) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[cls] = 1.0;
  return v;
}

// Frozen random mixing network for the factors dataset: `depth` tanh layers
// of width 64 followed by a linear projection; depth 0 is identity-padding.
struct MixingNet {
  int depth = 0;
  int in_dim = 0, out_dim = 0;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MixingNet create(int in_dim, int out_dim, int depth, std::uint64_t seed) {
    MixingNet net;
    net.depth = depth;
    net.in_dim = in_dim;
    net.out_dim = out_dim;
    if (depth == 0) return net;
    RngStream rng(seed);
    constexpr int kWidth = 64;
    int d = in_dim;
    for (int l = 0; l < depth; ++l) {
      net.weights.push_back(rng.normal_matrix(d, kWidth) * (1.5 / std::sqrt(d)));
      net.biases.push_back(rng.normal_vector(kWidth) * 0.1);
      d = kWidth;
    }
    net.weights.push_back(rng.normal_matrix(d, out_dim) * (1.0 / std::sqrt(d)));
    net.biases.push_back(Eigen::VectorXd::Zero(out_dim));
    return net;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    if (depth == 0) {
      Eigen::VectorXd out = Eigen::VectorXd::Zero(out_dim);
      out.head(v.size()) = v;
      return out;
    }
    Eigen::VectorXd h = v;
    for (int l = 0; l < depth; ++l)
      h = ((h.transpose() * weights[l]).transpose() + biases[l]).array().tanh();
    return (h.transpose() * weights[depth]).transpose() + biases[depth];
  }
};

AlignedBatch gen_factors_split(const FactorsDatasetConfig& cfg,
                               const std::vector<MixingNet>& nets, int n,
                               std::uint64_t split_seed) {
  AlignedBatch out;
  RngStream rng(split_seed);
  for (int m = 0; m < cfg.M; ++m) out.x.emplace_back(n, cfg.input_dim);
  out.shared_label.resize(n);
  for (int m = 0; m < cfg.M; ++m) out.private_labels.emplace_back(n);

  const int code_dim = cfg.n_shared_classes + cfg.n_private_classes;
  Eigen::VectorXd code(code_dim);
  for (int i = 0; i < n; ++i) {
    const int shared = rng.uniform_int(cfg.n_shared_classes);
    out.shared_label[i] = shared;
    Eigen::VectorXd s = one_hot(shared, cfg.n_shared_classes) +
                        0.3 * rng.uniform_matrix(cfg.n_shared_classes, 1).col(0);
    for (int m = 0; m < cfg.M; ++m) {
      const int priv = rng.uniform_int(cfg.n_private_classes);
      out.private_labels[m][i] = priv;
      Eigen::VectorXd p = one_hot(priv, cfg.n_private_classes) +
                          0.3 * rng.uniform_matrix(cfg.n_private_classes, 1).col(0);
      code << s, p;
      Eigen::VectorXd xm = nets[m].apply(code);
      if (cfg.noise_sigma > 0) xm += cfg.noise_sigma * rng.normal_vector(cfg.input_dim);
      out.x[m].row(i) = xm;
    }
  }
  return out;
}

json factors_config_json(const FactorsDatasetConfig& c) {
  return json{{"M", c.M},
              {"n_shared_classes", c.n_shared_classes},
              {"n_private_classes", c.n_private_classes},
              {"input_dim", c.input_dim},
              {"noise_sigma", c.noise_sigma},
              {"mixing_depth", c.mixing_depth},
              {"n_train", c.n_train},
              {"n_val", c.n_val},
              {"n_test", c.n_test},
              {"seed", c.seed}};
}

json glyphs_config_json(const QuadrantGlyphConfig& c) {
  return json{{"M", c.M},         {"canvas", c.canvas}, {"bg_scale", c.bg_scale},
              {"n_train", c.n_train}, {"n_val", c.n_val},   {"n_test", c.n_test},
              {"seed", c.seed}};
}

}  // namespace

Dataset make_factors_dataset(const FactorsDatasetConfig& cfg) {
  if (cfg.M < 2) throw ConfigError("factors: M must be >= 2");
  if (cfg.n_shared_classes < 2 || cfg.n_private_classes < 2)
    throw ConfigError("factors: class counts must be >= 2");
  const int code_dim = cfg.n_shared_classes + cfg.n_private_classes;
  if (cfg.input_dim < code_dim)
    throw ConfigError("factors: input_dim must be >= n_shared_classes + n_private_classes");
  if (cfg.mixing_depth < 0) throw ConfigError("factors: mixing_depth must be >= 0");
  if (cfg.noise_sigma < 0) throw ConfigError("factors: noise_sigma must be >= 0");
  if (cfg.n_train < 1 || cfg.n_val < 1 || cfg.n_test < 1)
    throw ConfigError("factors: split sizes must be positive");

  std::vector<MixingNet> nets;
  for (int m = 0; m < cfg.M; ++m)
    nets.push_back(MixingNet::create(code_dim, cfg.input_dim, cfg.mixing_depth,
                                     derive_seed(cfg.seed, 1000 + m)));

  Dataset ds;
  ds.kind = "factors";
  ds.M = cfg.M;
  ds.input_dims.assign(cfg.M, cfg.input_dim);
  ds.n_shared_classes = cfg.n_shared_classes;
  ds.n_private_classes = cfg.n_private_classes;
  ds.likelihood = Likelihood::GaussianFixedSigma;
  ds.config_json = factors_config_json(cfg).dump();
  ds.train = gen_factors_split(cfg, nets, cfg.n_train, derive_seed(cfg.seed, 1));
  ds.val = gen_factors_split(cfg, nets, cfg.n_val, derive_seed(cfg.seed, 2));
  ds.test = gen_factors_split(cfg, nets, cfg.n_test, derive_seed(cfg.seed, 3));
  return ds;
}

Eigen::VectorXd glyph_bitmap(int cls) {
  // 8x8 digit bitmaps, one byte per row, MSB = leftmost pixel.
  static const unsigned char kGlyphs[10][8] = {
      {0x3C, 0x66, 0x6E, 0x76, 0x66, 0x66, 0x3C, 0x00},  // 0
      {0x18, 0x38, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00},  // 1
      {0x3C, 0x66, 0x06, 0x1C, 0x30, 0x66, 0x7E, 0x00},  // 2
      {0x3C, 0x66, 0x06, 0x1C, 0x06, 0x66, 0x3C, 0x00},  // 3
      {0x0C, 0x1C, 0x3C, 0x6C, 0x7E, 0x0C, 0x1E, 0x00},  // 4
      {0x7E, 0x60, 0x7C, 0x06, 0x06, 0x66, 0x3C, 0x00},  // 5
      {0x1C, 0x30, 0x60, 0x7C, 0x66, 0x66, 0x3C, 0x00},  // 6
      {0x7E, 0x66, 0x06, 0x0C, 0x18, 0x18, 0x18, 0x00},  // 7
      {0x3C, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x3C, 0x00},  // 8
      {0x3C, 0x66, 0x66, 0x3E, 0x06, 0x0C, 0x38, 0x00},  // 9
  };
  if (cls < 0 || cls > 9) throw std::invalid_argument("glyph_bitmap: class out of range");
  Eigen::VectorXd v(64);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) v[r * 8 + c] = (kGlyphs[cls][r] >> (7 - c)) & 1;
  return v;
}

Eigen::VectorXd glyph_background(const QuadrantGlyphConfig& cfg, int modality) {
  const int W = cfg.canvas;
  Eigen::VectorXd bg(W * W);
  const int pattern = modality % 5;
  const double s = cfg.bg_scale;
  for (int r = 0; r < W; ++r) {
    for (int c = 0; c < W; ++c) {
      double v = 0.0;
      switch (pattern) {
        case 0: v = s * c / (W - 1.0); break;
        case 1: v = (c % 4 < 2) ? s : s / 3.0; break;
        case 2: v = ((r / 4 + c / 4) % 2) ? s * 0.9 : s * 0.2; break;
        case 3: v = s * (r + c) / (2.0 * W - 2.0); break;
        default: {
          const double dr = r - (W - 1) / 2.0, dc = c - (W - 1) / 2.0;
          v = s * 0.5 * (1.0 + std::cos(std::sqrt(dr * dr + dc * dc)));
          break;
        }
      }
      bg[r * W + c] = v;
    }
  }
  return bg;
}

namespace {

AlignedBatch gen_glyph_split(const QuadrantGlyphConfig& cfg,
                             const std::vector<Eigen::VectorXd>& backgrounds, int n,
                             std::uint64_t split_seed) {
  AlignedBatch out;
  RngStream rng(split_seed);
  const int W = cfg.canvas;
  const int D = W * W;
  const int half = W / 2;
  for (int m = 0; m < cfg.M; ++m) out.x.emplace_back(n, D);
  out.shared_label.resize(n);
  for (int m = 0; m < cfg.M; ++m) out.private_labels.emplace_back(n);

  for (int i = 0; i < n; ++i) {
    const int cls = rng.uniform_int(10);
    out.shared_label[i] = cls;
    const Eigen::VectorXd glyph = glyph_bitmap(cls);
    for (int m = 0; m < cfg.M; ++m) {
      const int quad = rng.uniform_int(4);
      out.private_labels[m][i] = quad;
      // per-sample intensity factor keeps sample vectors unique across splits
      const double intensity = 0.7 + 0.3 * rng.uniform();
      Eigen::VectorXd img = backgrounds[m] * intensity;
      const int r0 = (quad / 2) * half, c0 = (quad % 2) * half;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
          if (glyph[r * 8 + c] > 0.5) img[(r0 + r) * W + (c0 + c)] = 1.0;
      out.x[m].row(i) = img;
    }
  }
  return out;
}

}  // namespace

Dataset make_quadrant_glyphs(const QuadrantGlyphConfig& cfg) {
  if (cfg.M < 2 || cfg.M > 5) throw ConfigError("glyphs: M must be in [2, 5]");
  if (cfg.canvas != 16) throw ConfigError("glyphs: canvas must be 16 (8x8 glyph per quadrant)");
  if (cfg.bg_scale < 0.0 || cfg.bg_scale > 0.3)
    throw ConfigError("glyphs: bg_scale must be in [0, 0.3]");
  if (cfg.n_train < 1 || cfg.n_val < 1 || cfg.n_test < 1)
    throw ConfigError("glyphs: split sizes must be positive");

  std::vector<Eigen::VectorXd> backgrounds;
  for (int m = 0; m < cfg.M; ++m) backgrounds.push_back(glyph_background(cfg, m));

  Dataset ds;
  ds.kind = "glyphs";
  ds.M = cfg.M;
  ds.input_dims.assign(cfg.M, cfg.input_dim());
  ds.n_shared_classes = 10;
  ds.n_private_classes = 4;
  ds.likelihood = Likelihood::Bernoulli;
  ds.config_json = glyphs_config_json(cfg).dump();
  ds.train = gen_glyph_split(cfg, backgrounds, cfg.n_train, derive_seed(cfg.seed, 1));
  ds.val = gen_glyph_split(cfg, backgrounds, cfg.n_val, derive_seed(cfg.seed, 2));
  ds.test = gen_glyph_split(cfg, backgrounds, cfg.n_test, derive_seed(cfg.seed, 3));
  return ds;
}

int quadrant_of(const Eigen::VectorXd& image, const QuadrantGlyphConfig& cfg, int modality) {
  const int W = cfg.canvas;
  if (image.size() != W * W) throw std::invalid_argument("quadrant_of: size mismatch");
  const Eigen::VectorXd bg = glyph_background(cfg, modality);
  const int half = W / 2;
  double mass[4];
  for (int q = 0; q < 4; ++q) {
    const int r0 = (q / 2) * half, c0 = (q % 2) * half;
    double sum = 0.0;
    for (int r = 0; r < half; ++r)
      for (int c = 0; c < half; ++c) {
        const int p = (r0 + r) * W + (c0 + c);
        sum += image[p] - bg[p];
      }
    mass[q] = sum;
  }
  int best = 0;
  for (int q = 1; q < 4; ++q)
    if (mass[q] > mass[best]) best = q;
  for (int q = 0; q < 4; ++q)
    if (q != best && mass[q] == mass[best])
      throw NumericError("quadrant_of: ambiguous image (tied quadrant mass)");
  return best;
}

namespace {

std::string x_file(const std::string& split, int m) {
  return split + "_x" + std::to_string(m) + ".f32";
}
std::string shared_file(const std::string& split) { return split + "_shared.i32"; }
std::string priv_file(const std::string& split, int m) {
  return split + "_priv" + std::to_string(m) + ".i32";
}

json manifest_json(const Dataset& ds) {
  json files = json::object();
  const char* splits[] = {"train", "val", "test"};
  for (const char* s : splits) {
    json entry;
    entry["rows"] = ds.split(s).size();
    json xs = json::array();
    for (int m = 0; m < ds.M; ++m) xs.push_back(x_file(s, m));
    entry["x"] = xs;
    entry["shared"] = shared_file(s);
    json ps = json::array();
    for (int m = 0; m < ds.M; ++m) ps.push_back(priv_file(s, m));
    entry["private"] = ps;
    files[s] = entry;
  }
  return json{{"kind", ds.kind},
              {"modalities", ds.M},
              {"input_dims", ds.input_dims},
              {"n_shared_classes", ds.n_shared_classes},
              {"n_private_classes", ds.n_private_classes},
              {"likelihood", ds.likelihood == Likelihood::Bernoulli ? "bernoulli"
                                                                    : "gaussian-fixed-sigma"},
              {"dtype", "float32"},
              {"label_dtype", "int32"},
              {"layout", "row-major"},
              {"byte_order", "little-endian"},
              {"config", json::parse(ds.config_json)},
              {"files", files}};
}

void save_split_dir(const AlignedBatch& b, const std::string& dir, const std::string& split) {
  for (int m = 0; m < b.modalities(); ++m) {
    auto f = binio::open_out(dir + "/" + x_file(split, m));
    binio::write_f32_rowmajor(f, b.x[m]);
  }
  auto fs_ = binio::open_out(dir + "/" + shared_file(split));
  binio::write_i32(fs_, b.shared_label);
  for (int m = 0; m < b.modalities(); ++m) {
    auto f = binio::open_out(dir + "/" + priv_file(split, m));
    binio::write_i32(f, b.private_labels[m]);
  }
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir, bool force,
                  const std::string& format) {
  binio::check_little_endian();
  if (format != "dir" && format != "archive")
    throw ConfigError("save_dataset: format must be 'dir' or 'archive'");
  if (fs::exists(dir + "/manifest.json") && !force)
    throw IoError("dataset directory already populated (use --force): " + dir);
  fs::create_directories(dir);

  const json manifest = manifest_json(ds);
  {
    std::ofstream f(dir + "/manifest.json");
    if (!f) throw IoError("cannot write manifest: " + dir);
    f << manifest.dump(2) << "\n";
  }
  if (format == "dir") {
    save_split_dir(ds.train, dir, "train");
    save_split_dir(ds.val, dir, "val");
    save_split_dir(ds.test, dir, "test");
    return;
  }
  // single concatenated archive: manifest + payloads in manifest file order
  auto f = binio::open_out(dir + "/dataset.idmd");
  const std::string mstr = manifest.dump();
  const char magic[4] = {'I', 'D', 'M', 'D'};
  f.write(magic, 4);
  const std::uint32_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t mlen = mstr.size();
  f.write(reinterpret_cast<const char*>(&mlen), 8);
  f.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  const char* splits[] = {"train", "val", "test"};
  for (const char* s : splits) {
    const AlignedBatch& b = ds.split(s);
    for (int m = 0; m < ds.M; ++m) binio::write_f32_rowmajor(f, b.x[m]);
    binio::write_i32(f, b.shared_label);
    for (int m = 0; m < ds.M; ++m) binio::write_i32(f, b.private_labels[m]);
  }
}

namespace {

AlignedBatch load_split_dir(const json& manifest, const std::string& dir,
                            const std::string& split) {
  const auto& entry = manifest.at("files").at(split);
  const int rows = entry.at("rows").get<int>();
  const auto dims = manifest.at("input_dims").get<std::vector<int>>();
  AlignedBatch b;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    auto f = binio::open_in(dir + "/" + entry.at("x")[m].get<std::string>());
    b.x.push_back(binio::read_f32_rowmajor(f, rows, dims[m]));
  }
  auto fs_ = binio::open_in(dir + "/" + entry.at("shared").get<std::string>());
  b.shared_label = binio::read_i32(fs_, rows);
  for (std::size_t m = 0; m < dims.size(); ++m) {
    auto f = binio::open_in(dir + "/" + entry.at("private")[m].get<std::string>());
    b.private_labels.push_back(binio::read_i32(f, rows));
  }
  return b;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  binio::check_little_endian();
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw IoError("no manifest.json in " + dir);
  json manifest = json::parse(mf);

  Dataset ds;
  ds.kind = manifest.at("kind").get<std::string>();
  ds.M = manifest.at("modalities").get<int>();
  ds.input_dims = manifest.at("input_dims").get<std::vector<int>>();
  ds.n_shared_classes = manifest.at("n_shared_classes").get<int>();
  ds.n_private_classes = manifest.at("n_private_classes").get<int>();
  ds.likelihood = manifest.at("likelihood").get<std::string>() == "bernoulli"
                      ? Likelihood::Bernoulli
                      : Likelihood::GaussianFixedSigma;
  ds.config_json = manifest.at("config").dump();
  ds.train = load_split_dir(manifest, dir, "train");
  ds.val = load_split_dir(manifest, dir, "val");
  ds.test = load_split_dir(manifest, dir, "test");
  return ds;
}

}  // namespace idmvae
