#include "repcount/model.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "repcount/autodiff/ops.hpp"
#include "repcount/embed.hpp"
#include "repcount/error.hpp"
#include "repcount/similarity.hpp"

namespace repcount {

namespace {

constexpr std::size_t kSimChannels = 6;
constexpr const char* kCheckpointFormat = "repcount-checkpoint";
constexpr int kCheckpointVersion = 1;

void add_conv(ad::ParamStore& params, const std::string& name, std::size_t out, std::size_t in, std::size_t k,
              bool bias, std::mt19937_64& rng) {
  params.add(name + ".w", ad::xavier_uniform({out, in, k}, in * k, out * k, rng));
  if (bias) params.add(name + ".b", ad::Tensor({out}));
}

ad::Var conv(const ad::BoundParams& p, const std::string& name, ad::Var x, std::size_t stride, std::size_t pad,
             bool bias = true) {
  std::optional<ad::Var> b;
  if (bias) b = p[name + ".b"];
  return ad::conv1d(x, p[name + ".w"], b, stride, pad);
}

std::string block(std::size_t i) { return "fuse.b" + std::to_string(i); }

// Strides 1, 2, 4 bottom-up, then a top-down pass with 1x1 laterals.
std::vector<ad::Var> pyramid(const ad::BoundParams& p, const std::string& name, ad::Var x) {
  std::vector<ad::Var> bottom_up;
  ad::Var h = x;
  for (std::size_t l = 0; l < kPyramidLevels; ++l) {
    h = ad::gelu(conv(p, name + ".up" + std::to_string(l), h, l == 0 ? 1 : 2, 1));
    bottom_up.push_back(h);
  }
  std::vector<ad::Var> out(kPyramidLevels);
  for (std::size_t l = kPyramidLevels; l-- > 0;) {
    ad::Var lat = conv(p, name + ".lat" + std::to_string(l), bottom_up[l], 1, 0);
    if (l + 1 < kPyramidLevels) lat = ad::add(lat, ad::upsample_nearest(out[l + 1], 2, lat.dim(0)));
    out[l] = lat;
  }
  return out;
}

}  // namespace

void init_head_params(ad::ParamStore& params, const PipelineConfig& cfg, std::mt19937_64& rng) {
  const std::size_t D = cfg.d_prime;
  for (std::size_t i = 1; i <= cfg.K; ++i) {
    const std::string b = block(i);
    add_conv(params, b + ".sim", kSimChannels, i == 1 ? kSimChannels : 1, 3, false, rng);
    if (i == 1 && cfg.gate_mode == GateMode::kProject) add_conv(params, b + ".proj", D, kSimChannels, 1, false, rng);
    add_conv(params, b + ".gate", D, D, 3, false, rng);
    params.add(b + ".norm.gain", ad::Tensor({D}, 1.0));
    add_conv(params, b + ".out", D, D, 3, true, rng);
  }
  add_conv(params, "head.xin", D, D, 3, true, rng);
  for (const char* path : {"fpn.f", "fpn.x"}) {
    for (std::size_t l = 0; l < kPyramidLevels; ++l) {
      add_conv(params, std::string(path) + ".up" + std::to_string(l), D, D, 3, true, rng);
      add_conv(params, std::string(path) + ".lat" + std::to_string(l), D, D, 1, true, rng);
    }
  }
  add_conv(params, "head.psi1", D, 2 * kPyramidLevels * D, 3, true, rng);
  add_conv(params, "head.psi2", 1, D, 3, true, rng);
  // softplus(-2) ~ 0.13 per output step keeps the initial count modest.
  params.at("head.psi2.b")[0] = -2.0;
}

ad::ParamStore init_model_params(const PipelineConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  ad::ParamStore params;
  init_encoder_params(params, cfg, rng);
  init_head_params(params, cfg, rng);
  return params;
}

ad::Var fuse(const ad::BoundParams& params, ad::Var x_emb, ad::Var s_map, const PipelineConfig& cfg) {
  if (x_emb.dim(0) != s_map.dim(0)) {
    throw ShapeError("fuse: embedding length " + std::to_string(x_emb.dim(0)) + " differs from similarity length " +
                     std::to_string(s_map.dim(0)));
  }
  if (s_map.dim(1) != kSimChannels) throw ShapeError("fuse: similarity map must have 6 columns");
  ad::Var F = x_emb;
  ad::Var S = s_map;
  for (std::size_t i = 1; i <= cfg.K; ++i) {
    const std::string b = block(i);
    ad::Var gate_in;
    if (i == 1 && cfg.gate_mode == GateMode::kProject) {
      gate_in = ad::mul(F, conv(params, b + ".proj", S, 1, 0, false));
    } else {
      gate_in = ad::mul(F, i == 1 ? ad::mean_over_channels(S) : S);
    }
    ad::Var g = conv(params, b + ".gate", gate_in, 1, 1, false);
    g = ad::gelu(ad::layer_norm(g, 1, cfg.norm_eps, params[b + ".norm.gain"]));
    ad::Var next_s = ad::mean_over_channels(conv(params, b + ".sim", S, 1, 1, false));
    F = conv(params, b + ".out", ad::add(F, g), 1, 1);
    S = next_s;
  }
  return F;
}

std::size_t density_length(std::size_t emb_len) { return (emb_len + kPyramidStride - 1) / kPyramidStride; }

ad::Var density_head(const ad::BoundParams& params, ad::Var fused, ad::Var x_emb, const PipelineConfig& cfg) {
  (void)cfg;
  const std::size_t L = fused.dim(0);
  if (x_emb.dim(0) != L) throw ShapeError("density_head: F and x_emb lengths differ");
  if (L < kPyramidStride) {
    throw InputError("density_head: sequence of " + std::to_string(L) + " windows is shorter than the pyramid stride " +
                     std::to_string(kPyramidStride));
  }
  const auto pf = pyramid(params, "fpn.f", fused);
  const auto px = pyramid(params, "fpn.x", conv(params, "head.xin", x_emb, 1, 1));
  std::vector<ad::Var> parts;
  for (const auto* levels : {&pf, &px}) {
    for (std::size_t l = 0; l < kPyramidLevels; ++l) {
      const std::size_t factor = std::size_t{1} << (kPyramidLevels - 1 - l);
      parts.push_back(factor == 1 ? (*levels)[l] : ad::max_pool1d((*levels)[l], factor, factor));
    }
  }
  ad::Var h = ad::concat(parts, 1);
  h = ad::gelu(conv(params, "head.psi1", h, 1, 1));
  return ad::softplus(conv(params, "head.psi2", h, 1, 1));
}

ad::Var predicted_count(ad::Var density) { return ad::sum_all(density); }

double predicted_count(const std::vector<double>& density) {
  double s = 0.0;
  for (double v : density) s += v;
  return s;
}

ad::Var counting_loss(ad::Var density, double c_gt) {
  if (c_gt < 0.0) throw InputError("counting_loss: negative ground-truth count");
  return ad::square(ad::add_scalar(ad::sum_all(density), -c_gt));
}

ad::Var total_loss(ad::Var density, double c_gt, ad::Var x_emb, const KnnGraph& graph, double lambda) {
  ad::Var lc = counting_loss(density, c_gt);
  if (lambda == 0.0) return lc;
  return ad::add(lc, ad::scale(laplacian_loss(x_emb, graph), lambda));
}

ForwardPass forward(const ad::BoundParams& params, ad::Var x, std::size_t s1, std::size_t s2,
                    const PipelineConfig& cfg) {
  ForwardPass out;
  out.x_emb = encode(params, x, cfg);
  const auto spans = exemplar_spans(out.x_emb.dim(0), s1, s2, cfg);
  out.s_map = build_similarity_map(out.x_emb, spans, cfg);
  out.fused = fuse(params, out.x_emb, out.s_map, cfg);
  out.density = density_head(params, out.fused, out.x_emb, cfg);
  return out;
}

Model Model::initialize(const PipelineConfig& cfg) { return Model{cfg, init_model_params(cfg)}; }

void Model::save(const std::string& path) const {
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["config"] = nlohmann::ordered_json::parse(config_to_json_text(config));
  auto& arrays = doc["params"];
  arrays = nlohmann::ordered_json::object();
  for (const auto& [name, t] : params.entries()) {
    arrays[name] = {{"shape", t.shape()}, {"data", t.storage()}};
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint '" + path + "'");
  out << doc.dump() << '\n';
  if (!out) throw InputError("failed writing checkpoint '" + path + "'");
}

Model Model::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
    throw ValidationError(path + ": not a repcount checkpoint");
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw ValidationError(path + ": unsupported checkpoint version");
  }
  Model m;
  m.config = config_from_json_text(doc.at("config").dump(), path);
  const ad::ParamStore reference = init_model_params(m.config);
  try {
    for (const auto& [name, entry] : doc.at("params").items()) {
      m.params.add(name, ad::Tensor(entry.at("shape").get<ad::Shape>(), entry.at("data").get<std::vector<double>>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed parameter array: " + e.what());
  }
  for (const auto& [name, t] : reference.entries()) {
    if (!m.params.contains(name)) throw ValidationError(path + ": missing parameter '" + name + "'");
    if (m.params.at(name).shape() != t.shape()) {
      throw ValidationError(path + ": parameter '" + name + "' has shape " + ad::shape_string(m.params.at(name).shape()) +
                            ", expected " + ad::shape_string(t.shape()));
    }
  }
  if (m.params.entries().size() != reference.entries().size()) {
    throw ValidationError(path + ": checkpoint holds parameters the configuration does not define");
  }
  return m;
}

Model Model::load(const std::string& path, const PipelineConfig& expected) {
  Model m = load(path);
  if (!m.config.same_architecture(expected)) {
    throw ValidationError(path + ": checkpoint was trained with a different architecture than the given config");
  }
  return m;
}

}  // namespace repcount
