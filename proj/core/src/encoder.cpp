#include "scan/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "scan/error.hpp"

namespace scan {

std::vector<bool> token_validity(const std::vector<std::uint32_t>& tokens) {
  std::vector<bool> mask(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) mask[i] = tokens[i] != kPaddingTokenId;
  return mask;
}

VarId embed_ingredients(Graph& g, VarId table, const std::vector<std::uint32_t>& tokens) {
  return g.embed_rows(table, tokens, kPaddingTokenId);
}

namespace {

struct RecurrentState {
  VarId h;
  VarId c;  // gated cells only
  bool first = true;
};

VarId cell_step(Graph& g, VarId x, RecurrentState& state, const BoundRnnCell& cell,
                std::size_t hidden, CellKind kind) {
  VarId pre = g.matmul(x, cell.w);
  if (!state.first) pre = g.add(pre, g.matmul(state.h, cell.u));
  pre = g.add(pre, cell.b);
  if (kind == CellKind::simple_tanh) {
    state.h = g.tanh(pre);
  } else {
    const VarId in_gate = g.sigmoid(g.slice_cols(pre, 0, hidden));
    const VarId forget_gate = g.sigmoid(g.slice_cols(pre, hidden, 2 * hidden));
    const VarId candidate = g.tanh(g.slice_cols(pre, 2 * hidden, 3 * hidden));
    const VarId out_gate = g.sigmoid(g.slice_cols(pre, 3 * hidden, 4 * hidden));
    VarId c = g.mul(in_gate, candidate);
    if (!state.first) c = g.add(c, g.mul(forget_gate, state.c));
    state.c = c;
    state.h = g.mul(out_gate, g.tanh(c));
  }
  state.first = false;
  return state.h;
}

}  // namespace

VarId run_birnn(Graph& g, VarId sequence, const BoundBiRnn& cells, std::size_t hidden,
                CellKind kind) {
  const Tensor& seq = g.value(sequence);
  if (seq.rank() != 2)
    throw ShapeError("run_birnn expects a rank-2 sequence, got " + seq.shape_str());
  const std::size_t n = seq.shape[0];

  std::vector<VarId> fwd(n), bwd(n);
  RecurrentState fs{}, bs{};
  for (std::size_t t = 0; t < n; ++t)
    fwd[t] = cell_step(g, g.row(sequence, t), fs, cells.fwd, hidden, kind);
  for (std::size_t t = n; t-- > 0;)
    bwd[t] = cell_step(g, g.row(sequence, t), bs, cells.bwd, hidden, kind);

  std::vector<VarId> rows(n);
  for (std::size_t t = 0; t < n; ++t) rows[t] = g.concat(fwd[t], bwd[t]);
  return g.stack_rows(rows);
}

AttentionResult self_attention(Graph& g, VarId h, const std::vector<bool>* mask) {
  const Tensor& vh = g.value(h);
  if (vh.rank() != 2)
    throw ShapeError("self_attention expects a rank-2 sequence, got " + vh.shape_str());
  const double inv_temp = 1.0 / std::sqrt(static_cast<double>(vh.shape[1]));
  VarId scores = g.scale(g.matmul(h, g.transpose(h)), inv_temp);
  VarId weights = mask ? g.softmax_rows(scores, *mask) : g.softmax_rows(scores);
  return AttentionResult{g.matmul(weights, h), weights};
}

VarId attend_and_normalize(Graph& g, VarId h, double epsilon, const std::vector<bool>* mask,
                           const std::optional<LayerNormAffine>& affine,
                           VarId* attention_weights) {
  AttentionResult attn = self_attention(g, h, mask);
  if (attention_weights) *attention_weights = attn.weights;
  VarId normed = g.layer_norm(g.add(attn.output, h), epsilon);
  if (affine) normed = g.add_rowvec(g.mul_rowvec(normed, affine->gain), affine->bias);
  return normed;
}

VarId pool_sequence(Graph& g, VarId f, PoolKind kind, const std::vector<bool>* mask) {
  const Tensor& vf = g.value(f);
  if (vf.rank() != 2)
    throw ShapeError("pool_sequence expects a rank-2 sequence, got " + vf.shape_str());
  const std::size_t n = vf.shape[0];
  if (mask && mask->size() != n)
    throw ShapeError("pool_sequence mask length " + std::to_string(mask->size()) +
                     " does not match " + vf.shape_str());
  if (mask && std::none_of(mask->begin(), mask->end(), [](bool b) { return b; }))
    throw DataError("pool_sequence: sequence contains only padding");
  if (kind == PoolKind::mean) return mask ? g.mean_rows(f, *mask) : g.mean_rows(f);
  std::size_t last = n - 1;
  if (mask)
    for (std::size_t i = n; i-- > 0;)
      if ((*mask)[i]) {
        last = i;
        break;
      }
  return g.row(f, last);
}

VarId encode_instructions(Graph& g, VarId sentences, const BoundParams& p,
                          const ModelConfig& cfg, VarId* attention_weights) {
  const Tensor& vs = g.value(sentences);
  if (vs.rank() != 2 || vs.shape[1] != cfg.sentence_dim)
    throw ShapeError("instruction sentences must be m x " + std::to_string(cfg.sentence_dim) +
                     ", got " + vs.shape_str());
  VarId h = run_birnn(g, sentences, p.ins_rnn, cfg.ins_hidden, cfg.cell);
  if (cfg.use_attention) {
    std::optional<LayerNormAffine> affine;
    if (cfg.layer_norm_affine) affine = LayerNormAffine{p.ins_ln_gain, p.ins_ln_bias};
    h = attend_and_normalize(g, h, cfg.layer_norm_eps, nullptr, affine, attention_weights);
  }
  return pool_sequence(g, h, cfg.pool);
}

VarId encode_recipe(Graph& g, const BoundParams& p, const ModelConfig& cfg,
                    const FoodPairRecord& record, AttentionTrace* trace) {
  if (record.tokens.empty())
    throw DataError("pair " + std::to_string(record.pair_id) + ": no ingredient tokens");
  const std::vector<bool> mask = token_validity(record.tokens);

  VarId z = embed_ingredients(g, p.embed_table, record.tokens);
  VarId h = run_birnn(g, z, p.ing_rnn, cfg.ing_hidden, cfg.cell);
  VarId ing_weights{};
  if (cfg.use_attention) {
    std::optional<LayerNormAffine> affine;
    if (cfg.layer_norm_affine) affine = LayerNormAffine{p.ing_ln_gain, p.ing_ln_bias};
    h = attend_and_normalize(g, h, cfg.layer_norm_eps, &mask, affine, &ing_weights);
  }
  VarId f_ingredient = pool_sequence(g, h, cfg.pool, &mask);

  std::vector<double> widened(record.sentences.begin(), record.sentences.end());
  VarId sentences = g.constant(Tensor({record.n_sentences, cfg.sentence_dim}, std::move(widened)));
  VarId ins_weights{};
  VarId f_instruction = encode_instructions(g, sentences, p, cfg,
                                            cfg.use_attention ? &ins_weights : nullptr);

  if (trace && cfg.use_attention) {
    trace->ingredient_weights = g.value(ing_weights);
    trace->instruction_weights = g.value(ins_weights);
  }

  VarId fused = g.concat(f_ingredient, f_instruction);
  return g.tanh(g.add(g.matmul(fused, p.fusion_w), p.fusion_b));
}

VarId encode_image(Graph& g, const BoundParams& p, const ModelConfig& cfg,
                   const FoodPairRecord& record) {
  if (record.image.size() != cfg.image_dim)
    throw ShapeError("pair " + std::to_string(record.pair_id) + ": image feature size " +
                     std::to_string(record.image.size()) + " does not match configured " +
                     std::to_string(cfg.image_dim));
  std::vector<double> widened(record.image.begin(), record.image.end());
  VarId x = g.constant(Tensor::vec(std::move(widened)));
  return g.tanh(g.add(g.matmul(x, p.image_w), p.image_b));
}

std::pair<Tensor, Tensor> encode_batch_values(const ModelParams& params,
                                              std::span<const FoodPairRecord> records) {
  const std::size_t d = params.cfg.joint_dim;
  Tensor images({std::max<std::size_t>(records.size(), 1), d});
  Tensor recipes({std::max<std::size_t>(records.size(), 1), d});
  if (records.empty()) throw DataError("encode_batch_values: no records");

  Graph g;
  const BoundParams bound = bind_params(g, params);
  for (std::size_t i = 0; i < records.size(); ++i) {
    // ids first: value references go stale as later ops grow the graph
    const VarId img_id = encode_image(g, bound, params.cfg, records[i]);
    const VarId rec_id = encode_recipe(g, bound, params.cfg, records[i]);
    const Tensor& img = g.value(img_id);
    const Tensor& rec = g.value(rec_id);
    std::copy(img.data.begin(), img.data.end(), images.data.begin() + i * d);
    std::copy(rec.data.begin(), rec.data.end(), recipes.data.begin() + i * d);
  }
  return {std::move(images), std::move(recipes)};
}

}  // namespace scan
