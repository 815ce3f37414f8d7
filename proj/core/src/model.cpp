#include "scan/model.hpp"

#include <cmath>
#include <random>

#include "scan/error.hpp"
#include "scan/rng.hpp"

namespace scan {

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("model: vocab_size must be >= 2 (id 0 is padding)");
  if (word_dim < 1 || ing_hidden < 1 || ins_hidden < 1 || sentence_dim < 1 ||
      image_dim < 1 || joint_dim < 1)
    throw ConfigError("model: all dimensions must be >= 1");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (layer_norm_eps <= 0.0) throw ConfigError("model: layer_norm_eps must be > 0");
}

namespace {

std::size_t gate_multiple(CellKind kind) { return kind == CellKind::gated ? 4 : 1; }

Tensor xavier(std::size_t fan_in, std::size_t fan_out, std::size_t rows, std::size_t cols,
              std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t({rows, cols});
  for (double& v : t.data) v = dist(rng);
  return t;
}

RnnCellTensors init_cell(std::size_t input_dim, std::size_t hidden, CellKind kind,
                         std::mt19937_64& rng) {
  const std::size_t gates = gate_multiple(kind) * hidden;
  RnnCellTensors cell;
  cell.w = xavier(input_dim, hidden, input_dim, gates, rng);
  cell.u = xavier(hidden, hidden, hidden, gates, rng);
  cell.b = Tensor({gates}, 0.0);
  if (kind == CellKind::gated) {
    // forget-gate bias starts at 1 (gate order i, f, g, o)
    for (std::size_t i = hidden; i < 2 * hidden; ++i) cell.b[i] = 1.0;
  }
  return cell;
}

}  // namespace

ModelParams::ModelParams(const ModelConfig& config, std::uint64_t seed) : cfg(config) {
  cfg.validate();
  auto rng = make_engine(derive_seed(seed, 11));

  std::normal_distribution<double> embed_dist(0.0, 0.1);
  embed_table = Tensor({cfg.vocab_size, cfg.word_dim});
  for (double& v : embed_table.data) v = embed_dist(rng);
  for (std::size_t c = 0; c < cfg.word_dim; ++c) embed_table.data[c] = 0.0;  // padding row

  ing_rnn.fwd = init_cell(cfg.word_dim, cfg.ing_hidden, cfg.cell, rng);
  ing_rnn.bwd = init_cell(cfg.word_dim, cfg.ing_hidden, cfg.cell, rng);
  ins_rnn.fwd = init_cell(cfg.sentence_dim, cfg.ins_hidden, cfg.cell, rng);
  ins_rnn.bwd = init_cell(cfg.sentence_dim, cfg.ins_hidden, cfg.cell, rng);

  const std::size_t fused = cfg.ing_width() + cfg.ins_width();
  fusion_w = xavier(fused, cfg.joint_dim, fused, cfg.joint_dim, rng);
  fusion_b = Tensor({cfg.joint_dim}, 0.0);
  image_w = xavier(cfg.image_dim, cfg.joint_dim, cfg.image_dim, cfg.joint_dim, rng);
  image_b = Tensor({cfg.joint_dim}, 0.0);

  cls_img_w = xavier(cfg.joint_dim, cfg.num_classes, cfg.joint_dim, cfg.num_classes, rng);
  cls_img_b = Tensor({cfg.num_classes}, 0.0);
  if (!cfg.shared_classifier) {
    cls_rec_w = xavier(cfg.joint_dim, cfg.num_classes, cfg.joint_dim, cfg.num_classes, rng);
    cls_rec_b = Tensor({cfg.num_classes}, 0.0);
  }

  if (cfg.layer_norm_affine) {
    ing_ln_gain = Tensor({cfg.ing_width()}, 1.0);
    ing_ln_bias = Tensor({cfg.ing_width()}, 0.0);
    ins_ln_gain = Tensor({cfg.ins_width()}, 1.0);
    ins_ln_bias = Tensor({cfg.ins_width()}, 0.0);
  }
}

namespace {

template <typename Param, typename Self>
std::vector<Param> enumerate_impl(Self& self) {
  std::vector<Param> out;
  auto put = [&](const char* name, auto& tensor, Side side) {
    if (tensor.numel() > 0) out.push_back(Param{name, &tensor, side});
  };
  put("embed.table", self.embed_table, Side::recipe);
  put("ing_rnn.fwd.w", self.ing_rnn.fwd.w, Side::recipe);
  put("ing_rnn.fwd.u", self.ing_rnn.fwd.u, Side::recipe);
  put("ing_rnn.fwd.b", self.ing_rnn.fwd.b, Side::recipe);
  put("ing_rnn.bwd.w", self.ing_rnn.bwd.w, Side::recipe);
  put("ing_rnn.bwd.u", self.ing_rnn.bwd.u, Side::recipe);
  put("ing_rnn.bwd.b", self.ing_rnn.bwd.b, Side::recipe);
  put("ins_rnn.fwd.w", self.ins_rnn.fwd.w, Side::recipe);
  put("ins_rnn.fwd.u", self.ins_rnn.fwd.u, Side::recipe);
  put("ins_rnn.fwd.b", self.ins_rnn.fwd.b, Side::recipe);
  put("ins_rnn.bwd.w", self.ins_rnn.bwd.w, Side::recipe);
  put("ins_rnn.bwd.u", self.ins_rnn.bwd.u, Side::recipe);
  put("ins_rnn.bwd.b", self.ins_rnn.bwd.b, Side::recipe);
  put("fusion.w", self.fusion_w, Side::recipe);
  put("fusion.b", self.fusion_b, Side::recipe);
  put("image.w", self.image_w, Side::image);
  put("image.b", self.image_b, Side::image);
  put("cls_img.w", self.cls_img_w, Side::image);
  put("cls_img.b", self.cls_img_b, Side::image);
  put("cls_rec.w", self.cls_rec_w, Side::recipe);
  put("cls_rec.b", self.cls_rec_b, Side::recipe);
  put("ing_ln.gain", self.ing_ln_gain, Side::recipe);
  put("ing_ln.bias", self.ing_ln_bias, Side::recipe);
  put("ins_ln.gain", self.ins_ln_gain, Side::recipe);
  put("ins_ln.bias", self.ins_ln_bias, Side::recipe);
  return out;
}

}  // namespace

std::vector<NamedParam> ModelParams::enumerate() { return enumerate_impl<NamedParam>(*this); }

std::vector<NamedParamView> ModelParams::enumerate() const {
  return enumerate_impl<NamedParamView>(*this);
}

BoundParams bind_params(Graph& g, const ModelParams& p) {
  BoundParams b{};
  auto bind_one = [&](const char* name, const Tensor& t) -> VarId {
    VarId id = g.leaf(t, true);
    b.ordered.emplace_back(name, id);
    return id;
  };
  b.embed_table = bind_one("embed.table", p.embed_table);
  b.ing_rnn.fwd = {bind_one("ing_rnn.fwd.w", p.ing_rnn.fwd.w),
                   bind_one("ing_rnn.fwd.u", p.ing_rnn.fwd.u),
                   bind_one("ing_rnn.fwd.b", p.ing_rnn.fwd.b)};
  b.ing_rnn.bwd = {bind_one("ing_rnn.bwd.w", p.ing_rnn.bwd.w),
                   bind_one("ing_rnn.bwd.u", p.ing_rnn.bwd.u),
                   bind_one("ing_rnn.bwd.b", p.ing_rnn.bwd.b)};
  b.ins_rnn.fwd = {bind_one("ins_rnn.fwd.w", p.ins_rnn.fwd.w),
                   bind_one("ins_rnn.fwd.u", p.ins_rnn.fwd.u),
                   bind_one("ins_rnn.fwd.b", p.ins_rnn.fwd.b)};
  b.ins_rnn.bwd = {bind_one("ins_rnn.bwd.w", p.ins_rnn.bwd.w),
                   bind_one("ins_rnn.bwd.u", p.ins_rnn.bwd.u),
                   bind_one("ins_rnn.bwd.b", p.ins_rnn.bwd.b)};
  b.fusion_w = bind_one("fusion.w", p.fusion_w);
  b.fusion_b = bind_one("fusion.b", p.fusion_b);
  b.image_w = bind_one("image.w", p.image_w);
  b.image_b = bind_one("image.b", p.image_b);
  b.cls_img_w = bind_one("cls_img.w", p.cls_img_w);
  b.cls_img_b = bind_one("cls_img.b", p.cls_img_b);
  if (p.cfg.shared_classifier) {
    b.cls_rec_w = b.cls_img_w;
    b.cls_rec_b = b.cls_img_b;
  } else {
    b.cls_rec_w = bind_one("cls_rec.w", p.cls_rec_w);
    b.cls_rec_b = bind_one("cls_rec.b", p.cls_rec_b);
  }
  if (p.cfg.layer_norm_affine) {
    b.ing_ln_gain = bind_one("ing_ln.gain", p.ing_ln_gain);
    b.ing_ln_bias = bind_one("ing_ln.bias", p.ing_ln_bias);
    b.ins_ln_gain = bind_one("ins_ln.gain", p.ins_ln_gain);
    b.ins_ln_bias = bind_one("ins_ln.bias", p.ins_ln_bias);
  }
  return b;
}

}  // namespace scan
