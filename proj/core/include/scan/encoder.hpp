#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "scan/data.hpp"
#include "scan/graph.hpp"
#include "scan/model.hpp"

namespace scan {

// True for every non-padding position.
std::vector<bool> token_validity(const std::vector<std::uint32_t>& tokens);

// Rows of the embedding table for each token; padding ids map to the frozen
// zero row.
VarId embed_ingredients(Graph& g, VarId table, const std::vector<std::uint32_t>& tokens);

// Bidirectional recurrence over an n x d_in sequence; zero initial states.
// Row t of the n x 2h result is [forward state after steps 1..t ; backward
// state after steps n..t].
VarId run_birnn(Graph& g, VarId sequence, const BoundBiRnn& cells, std::size_t hidden,
                CellKind kind);

struct AttentionResult {
  VarId output;   // same shape as the input sequence
  VarId weights;  // row-stochastic n x n attention matrix
};

// Single-head scaled dot-product attention with queries, keys and values all
// bound to the input sequence; no learned parameters. Masked columns get
// zero weight.
AttentionResult self_attention(Graph& g, VarId h, const std::vector<bool>* mask = nullptr);

struct LayerNormAffine {
  VarId gain, bias;
};

// Residual self-attention block: layer_norm(self_attention(H) + H).
VarId attend_and_normalize(Graph& g, VarId h, double epsilon,
                           const std::vector<bool>* mask = nullptr,
                           const std::optional<LayerNormAffine>& affine = std::nullopt,
                           VarId* attention_weights = nullptr);

// Fixed-length vector from a sequence; padding rows are ignored. Mean over
// valid rows by default, last valid row when kind == PoolKind::last.
VarId pool_sequence(Graph& g, VarId f, PoolKind kind = PoolKind::mean,
                    const std::vector<bool>* mask = nullptr);

// Instruction branch over precomputed sentence vectors (m x sentence_dim).
VarId encode_instructions(Graph& g, VarId sentences, const BoundParams& p,
                          const ModelConfig& cfg, VarId* attention_weights = nullptr);

// Attention matrices captured during encoding, for inspection dumps.
struct AttentionTrace {
  Tensor ingredient_weights;   // n x n
  Tensor instruction_weights;  // m x m
};

VarId encode_recipe(Graph& g, const BoundParams& p, const ModelConfig& cfg,
                    const FoodPairRecord& record, AttentionTrace* trace = nullptr);

VarId encode_image(Graph& g, const BoundParams& p, const ModelConfig& cfg,
                   const FoodPairRecord& record);

// Forward-only joint embeddings for a record set: (images, recipes), each
// count x joint_dim.
std::pair<Tensor, Tensor> encode_batch_values(const ModelParams& params,
                                              std::span<const FoodPairRecord> records);

}  // namespace scan
