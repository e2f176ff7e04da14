#include "idmvae/checkpoint.hpp"

#include <json.hpp>

#include "idmvae/binio.hpp"
#include "idmvae/errors.hpp"

namespace idmvae {

using nlohmann::json;

namespace {

json loss_to_json(const LossConfig& c) {
  return json{{"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"beta", c.beta},
              {"genaug_variant",
               c.genaug_variant == GenAugVariant::Contrastive ? "contrastive" : "lsq"},
              {"k_negatives", c.k_negatives},
              {"diffusion_weight", c.diffusion_weight}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig c;
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.beta = j.at("beta").get<double>();
  c.genaug_variant = j.at("genaug_variant").get<std::string>() == "lsq"
                         ? GenAugVariant::Lsq
                         : GenAugVariant::Contrastive;
  c.k_negatives = j.at("k_negatives").get<int>();
  c.diffusion_weight = j.at("diffusion_weight").get<double>();
  return c;
}

json model_spec_to_json(const ModelConfig& c) {
  json mods = json::array();
  for (const auto& m : c.modalities)
    mods.push_back(json{
        {"input_dim", m.input_dim},
        {"likelihood",
         m.likelihood == Likelihood::Bernoulli ? "bernoulli" : "gaussian-fixed-sigma"},
        {"decoder_sigma", m.decoder_sigma}});
  return json{{"d_z", c.latent.d_z},
              {"d_w", c.latent.d_w},
              {"M", c.latent.M},
              {"modalities", mods},
              {"hidden", c.hidden},
              {"separate_encoders", c.separate_encoders}};
}

ModelConfig model_spec_from_json(const json& j) {
  ModelConfig c;
  c.latent.d_z = j.at("d_z").get<int>();
  c.latent.d_w = j.at("d_w").get<int>();
  c.latent.M = j.at("M").get<int>();
  for (const auto& m : j.at("modalities")) {
    ModalitySpec ms;
    ms.input_dim = m.at("input_dim").get<int>();
    ms.likelihood = m.at("likelihood").get<std::string>() == "bernoulli"
                        ? Likelihood::Bernoulli
                        : Likelihood::GaussianFixedSigma;
    ms.decoder_sigma = m.at("decoder_sigma").get<double>();
    c.modalities.push_back(ms);
  }
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.separate_encoders = j.at("separate_encoders").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const MultimodalModel& model,
                     const DiffusionPrior* diffusion, const LossConfig& loss,
                     std::uint64_t seed, std::int64_t step) {
  binio::check_little_endian();

  json tensors = json::array();
  std::uint64_t offset = 0;
  std::vector<const Parameter*> all = model.params().all();
  if (diffusion) {
    for (const Parameter* p : diffusion->params().all()) all.push_back(p);
  }
  for (const Parameter* p : all) {
    const std::uint64_t count =
        static_cast<std::uint64_t>(p->value.rows()) * p->value.cols();
    tensors.push_back(json{{"name", p->name},
                           {"rows", p->value.rows()},
                           {"cols", p->value.cols()},
                           {"offset", offset},
                           {"count", count}});
    offset += count * sizeof(float);
  }

  json manifest{{"format_version", 1},
                {"model", model_spec_to_json(model.config())},
                {"loss", loss_to_json(loss)},
                {"seed", seed},
                {"step", step},
                {"tensors", tensors}};
  if (diffusion) {
    manifest["diffusion"] = json{{"T", diffusion->config().T},
                                 {"beta_start", diffusion->config().beta_start},
                                 {"beta_end", diffusion->config().beta_end},
                                 {"hidden", diffusion->config().hidden},
                                 {"t_embed_dim", diffusion->config().t_embed_dim}};
  }

  auto f = binio::open_out(path);
  const std::string mstr = manifest.dump();
  const char magic[4] = {'I', 'D', 'M', 'V'};
  f.write(magic, 4);
  const std::uint32_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t mlen = mstr.size();
  f.write(reinterpret_cast<const char*>(&mlen), 8);
  f.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  for (const Parameter* p : all) binio::write_f32_rowmajor(f, p->value);
  if (!f) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  binio::check_little_endian();
  auto f = binio::open_in(path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "IDMV")
    throw IoError("not an IDMVAE checkpoint: " + path);
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw IoError("unsupported checkpoint version");
  std::uint64_t mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), 8);
  std::string mstr(mlen, '\0');
  f.read(mstr.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw IoError("truncated checkpoint manifest");
  json manifest = json::parse(mstr);

  Checkpoint ck;
  ck.loss = loss_from_json(manifest.at("loss"));
  ck.seed = manifest.at("seed").get<std::uint64_t>();
  ck.step = manifest.at("step").get<std::int64_t>();
  ModelConfig mc = model_spec_from_json(manifest.at("model"));
  ck.model = std::make_unique<MultimodalModel>(mc, /*seed=*/0);
  if (manifest.contains("diffusion")) {
    DiffusionConfig dc;
    const auto& dj = manifest.at("diffusion");
    dc.T = dj.at("T").get<int>();
    dc.beta_start = dj.at("beta_start").get<double>();
    dc.beta_end = dj.at("beta_end").get<double>();
    dc.hidden = dj.at("hidden").get<std::vector<int>>();
    dc.t_embed_dim = dj.at("t_embed_dim").get<int>();
    ck.diffusion = std::make_unique<DiffusionPrior>(dc, mc.latent.d_z, /*seed=*/0);
  }

  for (const auto& tj : manifest.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    const int rows = tj.at("rows").get<int>();
    const int cols = tj.at("cols").get<int>();
    Parameter* p = ck.model->params().find(name);
    if (!p && ck.diffusion) p = ck.diffusion->params().find(name);
    if (!p) throw IoError("checkpoint names unknown tensor: " + name);
    if (p->value.rows() != rows || p->value.cols() != cols)
      throw IoError("checkpoint tensor shape mismatch: " + name);
    p->value = binio::read_f32_rowmajor(f, rows, cols);
  }
  return ck;
}

}  // namespace idmvae
