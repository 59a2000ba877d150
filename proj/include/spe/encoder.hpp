#pragma once

// Sector-patch vision transformers: a uniform-scale (ViT-style) pipeline and
// a multi-stage (PVT-style) pipeline, forward pass only.
//
//   ViT: sample disc -> patchify -> embed -> position code -> depth x layer
//        -> final norm -> mean-pool -> linear head
//   PVT: per stage, take a polar raster (stage 1 samples the image), reduce
//        it radially by the stage stride, patchify -> embed -> position code
//        -> layers with the stage's SRA ratio -> unpatchify back to a polar
//        raster; the last stage is pooled and classified instead.

#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "spe/attention.hpp"
#include "spe/image.hpp"
#include "spe/pos_encoding.hpp"
#include "spe/sampler.hpp"
#include "spe/sector_patch.hpp"

namespace spe {

struct StageConfig {
  int rings = 160;
  int rings_per_band = 16;
  int angular_mult = 4;
  int stride = 1;  // radial reduction applied to the incoming raster
  int d_model = 1024;
  int depth = 6;
  int heads = 16;
  int mlp_dim = 2048;
  int reduction_ratio = 1;

  int points_per_patch() const { return 4 * rings_per_band * rings_per_band / angular_mult; }
  int token_count() const { return angular_mult * (rings / rings_per_band) * (rings / rings_per_band); }
};

enum class PositionEncoding { polar, sinusoidal, none };

struct EncoderConfig {
  std::vector<StageConfig> stages{StageConfig{}};
  int in_channels = 3;
  int class_count = 1000;
  // Recorded only; the forward pass is deterministic and never drops.
  double dropout = 0.1;
  double emb_dropout = 0.1;
  double pe_power = 1.0;
  PositionEncoding position = PositionEncoding::polar;

  // Patch size 16 equivalent, depth 6, 16 heads, width 1024, MLP 2048.
  static EncoderConfig vit_base16() { return {}; }

  static EncoderConfig vit_tiny() {
    EncoderConfig c;
    c.stages = {StageConfig{16, 4, 4, 1, 64, 2, 4, 128, 1}};
    c.class_count = 10;
    return c;
  }

  static EncoderConfig pvt_tiny() {
    EncoderConfig c;
    c.stages = {StageConfig{32, 4, 4, 1, 64, 1, 2, 128, 2}, StageConfig{16, 4, 4, 2, 128, 1, 4, 256, 2}};
    c.class_count = 10;
    return c;
  }

  // Channels per point entering stage i.
  int stage_in_channels(std::size_t i) const {
    return i == 0 ? in_channels : stages[i - 1].d_model / stages[i - 1].points_per_patch();
  }

  int final_dim() const { return stages.back().d_model; }

  void validate() const {
    if (stages.empty()) detail::fail<ConfigError>("EncoderConfig", "need at least one stage");
    if (in_channels < 1 || class_count < 1) detail::fail<ConfigError>("EncoderConfig", "bad channel/class count");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& s = stages[i];
      const std::string where = "EncoderConfig stage " + std::to_string(i + 1);
      if (auto problem = layout_problem(s.rings, s.rings_per_band, s.angular_mult); !problem.empty()) {
        detail::fail<ConfigError>(where, problem);
      }
      if (s.stride < 1) detail::fail<ConfigError>(where, "stride must be >= 1");
      if (s.d_model < 2 || s.d_model % 2 != 0) detail::fail<ConfigError>(where, "d_model must be even");
      if (position == PositionEncoding::polar && s.d_model > 1024) {
        detail::fail<ConfigError>(where, "polar encoding supports d_model <= 1024");
      }
      if (s.depth < 0 || s.heads < 1 || s.d_model % s.heads != 0) {
        detail::fail<ConfigError>(where, "heads must divide d_model");
      }
      if (s.mlp_dim < 1) detail::fail<ConfigError>(where, "mlp_dim must be positive");
      if (s.reduction_ratio < 1 || s.token_count() % (s.reduction_ratio * s.reduction_ratio) != 0) {
        detail::fail<ConfigError>(where, "reduction_ratio^2 must divide the token count");
      }
      if (i + 1 < stages.size() && s.d_model % s.points_per_patch() != 0) {
        detail::fail<ConfigError>(where, "d_model must be divisible by points per patch to unpatchify");
      }
      if (i > 0 && stages[i - 1].rings != s.rings * s.stride) {
        detail::fail<ConfigError>(where, "rings must equal previous rings / stride");
      }
    }
  }
};

inline nlohmann::json config_to_json(const EncoderConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"rings", s.rings}, {"rings_per_band", s.rings_per_band}, {"angular_mult", s.angular_mult},
                      {"stride", s.stride}, {"d_model", s.d_model}, {"depth", s.depth}, {"heads", s.heads},
                      {"mlp_dim", s.mlp_dim}, {"reduction_ratio", s.reduction_ratio}});
  }
  const char* pe = c.position == PositionEncoding::polar ? "polar"
                   : c.position == PositionEncoding::sinusoidal ? "sinusoidal" : "none";
  return {{"stages", stages},  {"in_channels", c.in_channels}, {"class_count", c.class_count},
          {"dropout", c.dropout}, {"emb_dropout", c.emb_dropout}, {"pe_power", c.pe_power},
          {"position", pe}};
}

inline EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.stages.clear();
  for (const auto& s : j.at("stages")) {
    StageConfig st;
    st.rings = s.at("rings");
    st.rings_per_band = s.at("rings_per_band");
    st.angular_mult = s.at("angular_mult");
    st.stride = s.value("stride", 1);
    st.d_model = s.at("d_model");
    st.depth = s.at("depth");
    st.heads = s.at("heads");
    st.mlp_dim = s.at("mlp_dim");
    st.reduction_ratio = s.value("reduction_ratio", 1);
    c.stages.push_back(st);
  }
  c.in_channels = j.value("in_channels", 3);
  c.class_count = j.value("class_count", 1000);
  c.dropout = j.value("dropout", 0.1);
  c.emb_dropout = j.value("emb_dropout", 0.1);
  c.pe_power = j.value("pe_power", 1.0);
  const std::string pe = j.value("position", std::string("polar"));
  if (pe == "polar") {
    c.position = PositionEncoding::polar;
  } else if (pe == "sinusoidal") {
    c.position = PositionEncoding::sinusoidal;
  } else if (pe == "none") {
    c.position = PositionEncoding::none;
  } else {
    detail::fail<ConfigError>("EncoderConfig", "unknown position encoding '" + pe + "'");
  }
  c.validate();
  return c;
}

// ---- weights --------------------------------------------------------------

enum class TensorRole { weight, bias, norm_gain, norm_shift };

template <class T>
struct StageWeights {
  Linear<T> embed;
  std::vector<EncoderLayerParams<T>> layers;
};

template <class T>
struct WeightSet {
  std::vector<StageWeights<T>> stages;
  LayerNormParams<T> final_norm;
  Linear<T> head;

  // Shapes from cfg, values all zero (norm gains one).
  static WeightSet zeros(const EncoderConfig& cfg) {
    cfg.validate();
    WeightSet w;
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
      const auto& s = cfg.stages[i];
      StageWeights<T> sw;
      sw.embed = Linear<T>(static_cast<std::size_t>(s.points_per_patch()) * cfg.stage_in_channels(i), s.d_model);
      for (int l = 0; l < s.depth; ++l) sw.layers.emplace_back(s.d_model, s.mlp_dim, s.heads, s.reduction_ratio);
      w.stages.push_back(std::move(sw));
    }
    w.final_norm = LayerNormParams<T>(cfg.final_dim());
    w.head = Linear<T>(cfg.final_dim(), cfg.class_count);
    return w;
  }

  // Weights ~ N(0, 0.02^2), biases 0, norm gains 1 and shifts 0, drawn in
  // visit order from a single mt19937_64 stream.
  static WeightSet init(const EncoderConfig& cfg, std::uint64_t seed) {
    WeightSet w = zeros(cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    w.visit([&](const std::string&, std::vector<T>& data, const std::vector<std::size_t>&, TensorRole role) {
      if (role == TensorRole::weight) {
        for (T& v : data) v = T(normal(rng));
      }
    });
    return w;
  }

  // fn(name, data, shape, role) for every tensor in a fixed order.
  template <class Fn>
  void visit(Fn&& fn) {
    const auto linear = [&](const std::string& name, Linear<T>& l) {
      fn(name + ".weight", l.weight.data(), std::vector<std::size_t>{l.in(), l.out()}, TensorRole::weight);
      fn(name + ".bias", l.bias, std::vector<std::size_t>{l.out()}, TensorRole::bias);
    };
    const auto norm = [&](const std::string& name, LayerNormParams<T>& n) {
      fn(name + ".gamma", n.gamma, std::vector<std::size_t>{n.gamma.size()}, TensorRole::norm_gain);
      fn(name + ".beta", n.beta, std::vector<std::size_t>{n.beta.size()}, TensorRole::norm_shift);
    };
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const std::string sp = "stage" + std::to_string(i);
      linear(sp + ".embed", stages[i].embed);
      for (std::size_t l = 0; l < stages[i].layers.size(); ++l) {
        auto& layer = stages[i].layers[l];
        const std::string lp = sp + ".layer" + std::to_string(l);
        norm(lp + ".norm1", layer.norm1);
        linear(lp + ".attn.q", layer.attn.q);
        linear(lp + ".attn.k", layer.attn.k);
        linear(lp + ".attn.v", layer.attn.v);
        linear(lp + ".attn.o", layer.attn.o);
        if (layer.reduction_ratio > 1) {
          linear(lp + ".sr.reduce", layer.sr.reduce);
          norm(lp + ".sr.norm", layer.sr.norm);
        }
        norm(lp + ".norm2", layer.norm2);
        linear(lp + ".mlp.fc1", layer.fc1);
        linear(lp + ".mlp.fc2", layer.fc2);
      }
    }
    norm("final_norm", final_norm);
    linear("head", head);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit([&](const std::string&, std::vector<T>& data, const std::vector<std::size_t>&, TensorRole) {
      n += data.size();
    });
    return n;
  }
};

// Flat little-endian float64 container plus a JSON manifest of
// {name, shape, offset} in elements.
inline void save_weights(WeightSet<double> weights, const std::string& bin_path, const std::string& manifest_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path);
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  weights.visit([&](const std::string& name, std::vector<double>& data, const std::vector<std::size_t>& shape,
                    TensorRole) {
    bin.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    tensors.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    offset += data.size();
  });
  if (!bin) throw std::runtime_error("failed writing " + bin_path);
  std::ofstream manifest(manifest_path);
  manifest << nlohmann::json{{"format", "spe-weights-v1"},
                             {"dtype", "float64"},
                             {"endianness", "little"},
                             {"total", offset},
                             {"tensors", tensors}}
                  .dump(2)
           << '\n';
}

inline WeightSet<double> load_weights(const EncoderConfig& cfg, const std::string& bin_path,
                                      const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot read " + manifest_path);
  const nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.value("dtype", "") != "float64") detail::fail<ConfigError>("load_weights", "unsupported dtype");
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + bin_path);

  WeightSet<double> w = WeightSet<double>::zeros(cfg);
  std::size_t index = 0;
  const auto& tensors = manifest.at("tensors");
  w.visit([&](const std::string& name, std::vector<double>& data, const std::vector<std::size_t>& shape, TensorRole) {
    if (index >= tensors.size()) detail::fail<ConfigError>("load_weights", "manifest is missing " + name);
    const auto& t = tensors[index++];
    if (t.at("name") != name || t.at("shape").get<std::vector<std::size_t>>() != shape) {
      detail::fail<ConfigError>("load_weights", "tensor " + name + " does not match the config");
    }
    bin.seekg(static_cast<std::streamoff>(t.at("offset").get<std::size_t>() * sizeof(double)));
    bin.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!bin) detail::fail<ConfigError>("load_weights", "weight file truncated at " + name);
  });
  if (index != tensors.size()) detail::fail<ConfigError>("load_weights", "manifest has extra tensors");
  return w;
}

// ---- pipelines ------------------------------------------------------------

inline SectorPatchLayout stage_layout(const StageConfig& s, double radius) {
  return SectorPatchLayout::build(s.rings, s.rings_per_band, s.angular_mult, radius);
}

namespace detail {

inline double image_radius(const Image8& img) { return 0.5 * std::min(img.width(), img.height()); }

// Pixel values scaled to [0, 1].
inline PolarField sample_disc(const Image8& img, int rings, double theta0) {
  PolarField f = sample_bilinear(img, build_grid_for_image(rings, img.width(), img.height(), theta0));
  for (double& v : f.values) v /= 255.0;
  return f;
}

template <class T>
Matrix<T> to_matrix(const TokenSequence& tokens) {
  Matrix<T> m(tokens.count, tokens.dim);
  for (std::size_t i = 0; i < tokens.data.size(); ++i) m.data()[i] = T(tokens.data[i]);
  return m;
}

template <class T>
void add_position(Matrix<T>& x, const std::vector<TokenAnchor>& anchors, const EncoderConfig& cfg,
                  double disc_radius) {
  if (cfg.position == PositionEncoding::none) return;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto pe = cfg.position == PositionEncoding::polar
                        ? polar_pe(anchors[t].r, anchors[t].alpha,
                                   PosEncConfig{static_cast<int>(x.cols()), cfg.pe_power, disc_radius})
                        : sinusoidal_pe_1d(static_cast<double>(t), static_cast<int>(x.cols()));
    auto row = x.row(t);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += T(pe[c]);
  }
}

template <class T>
Matrix<T> run_stage(const PolarField& field, const SectorPatchLayout& layout, const StageWeights<T>& w,
                    const EncoderConfig& cfg, std::size_t stage, AttentionRecorder* recorder) {
  const TokenSequence tokens = patchify(field, layout);
  Matrix<T> x = w.embed(to_matrix<T>(tokens));
  add_position(x, tokens.anchors, cfg, layout.radius());
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    if (recorder) {
      recorder->stage = static_cast<int>(stage);
      recorder->layer = static_cast<int>(l);
    }
    x = encoder_layer(x, w.layers[l], recorder);
  }
  return x;
}

template <class T>
std::vector<T> classify(const Matrix<T>& x, const WeightSet<T>& w) {
  const Matrix<T> normed = layer_norm(x, w.final_norm);
  Matrix<T> pooled(1, normed.cols());
  for (std::size_t r = 0; r < normed.rows(); ++r) {
    for (std::size_t c = 0; c < normed.cols(); ++c) pooled(0, c) += normed(r, c);
  }
  for (T& v : pooled.data()) v /= T(static_cast<double>(normed.rows()));
  return w.head(pooled).data();
}

}  // namespace detail

// Layout must be built for this image's disc radius.
template <class T>
std::vector<T> forward_spe_vit(const Image8& img, const SectorPatchLayout& layout, const EncoderConfig& cfg,
                               const WeightSet<T>& weights, AttentionRecorder* recorder = nullptr) {
  cfg.validate();
  if (img.empty()) detail::fail<DomainError>("forward_spe_vit", "empty image");
  const auto& s = cfg.stages.front();
  if (layout.rings() != s.rings || layout.rings_per_band() != s.rings_per_band ||
      layout.angular_mult() != s.angular_mult) {
    detail::fail<ConfigError>("forward_spe_vit", "layout does not match the stage config");
  }
  if (std::abs(layout.radius() - detail::image_radius(img)) > 1e-9) {
    detail::fail<DomainError>("forward_spe_vit", "layout radius does not match the image disc");
  }
  if (img.channels() != cfg.in_channels) detail::fail<DomainError>("forward_spe_vit", "channel count mismatch");
  if (weights.stages.empty()) detail::fail<ConfigError>("forward_spe_vit", "empty weight set");
  const PolarField field = detail::sample_disc(img, layout.rings(), layout.theta0());
  return detail::classify(detail::run_stage(field, layout, weights.stages.front(), cfg, 0, recorder), weights);
}

// Polar rasters at each stage boundary (before patch embedding), exposed for
// inspection and tests.
struct PvtTrace {
  std::vector<PolarField> stage_inputs;
};

template <class T>
std::vector<T> forward_spe_pvt(const Image8& img, const EncoderConfig& cfg, const WeightSet<T>& weights,
                               AttentionRecorder* recorder = nullptr, PvtTrace* trace = nullptr) {
  cfg.validate();
  if (img.empty()) detail::fail<DomainError>("forward_spe_pvt", "empty image");
  if (img.channels() != cfg.in_channels) detail::fail<DomainError>("forward_spe_pvt", "channel count mismatch");
  if (weights.stages.size() != cfg.stages.size()) {
    detail::fail<ConfigError>("forward_spe_pvt", "weight set does not match the stage schedule");
  }
  const double radius = detail::image_radius(img);
  const auto& first = cfg.stages.front();
  PolarField raster = detail::sample_disc(img, first.rings * first.stride, kDefaultTheta0);
  Matrix<T> x;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& s = cfg.stages[i];
    raster = downsample_polar(raster, s.stride);
    if (trace) trace->stage_inputs.push_back(raster);
    const SectorPatchLayout layout = stage_layout(s, radius);
    x = detail::run_stage(raster, layout, weights.stages[i], cfg, i, recorder);
    if (i + 1 < cfg.stages.size()) {
      TokenSequence out;
      out.count = x.rows();
      out.dim = x.cols();
      out.data.reserve(x.data().size());
      for (const T& v : x.data()) out.data.push_back(value_of(v));
      raster = unpatchify(out, layout);
    }
  }
  return detail::classify(x, weights);
}

}  // namespace spe
