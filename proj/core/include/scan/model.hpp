#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scan/graph.hpp"
#include "scan/tensor.hpp"

namespace scan {

enum class CellKind { simple_tanh, gated };
enum class PoolKind { mean, last };

// Which alternating update phase a parameter belongs to.
enum class Side { recipe, image };

struct ModelConfig {
  std::size_t vocab_size = 4096;
  std::size_t word_dim = 300;      // ingredient embedding width
  std::size_t ing_hidden = 300;    // recurrent width per direction, ingredient branch
  std::size_t ins_hidden = 300;    // recurrent width per direction, instruction branch
  std::size_t sentence_dim = 1024; // precomputed instruction sentence vector width
  std::size_t image_dim = 2048;    // raw image feature width
  std::size_t joint_dim = 1024;    // shared embedding space width
  std::size_t num_classes = 2;

  CellKind cell = CellKind::gated;
  PoolKind pool = PoolKind::mean;
  bool use_attention = true;
  bool layer_norm_affine = false;
  double layer_norm_eps = 1e-5;
  bool shared_classifier = false;

  // Width of the bidirectional sequence representation per branch.
  std::size_t ing_width() const { return 2 * ing_hidden; }
  std::size_t ins_width() const { return 2 * ins_hidden; }

  void validate() const;  // throws ConfigError
};

struct RnnCellTensors {
  Tensor w;  // input -> hidden (gated cells stack the four gates: i, f, g, o)
  Tensor u;  // hidden -> hidden
  Tensor b;
};

struct BiRnnTensors {
  RnnCellTensors fwd, bwd;
};

struct NamedParam {
  std::string name;
  Tensor* tensor;
  Side side;
};

struct NamedParamView {
  std::string name;
  const Tensor* tensor;
  Side side;
};

// Every trainable tensor of the model. Enumeration order is fixed and is
// the layout order of checkpoints.
struct ModelParams {
  ModelConfig cfg;

  Tensor embed_table;  // vocab x word_dim; row 0 is the frozen padding row
  BiRnnTensors ing_rnn;
  BiRnnTensors ins_rnn;
  Tensor fusion_w, fusion_b;  // (ing_width + ins_width) x joint_dim
  Tensor image_w, image_b;    // image_dim x joint_dim
  Tensor cls_img_w, cls_img_b;  // joint_dim x num_classes; shared head when
                                // cfg.shared_classifier
  Tensor cls_rec_w, cls_rec_b;  // empty in shared-classifier mode
  // Present only when cfg.layer_norm_affine.
  Tensor ing_ln_gain, ing_ln_bias;
  Tensor ins_ln_gain, ins_ln_bias;

  ModelParams() = default;
  ModelParams(const ModelConfig& config, std::uint64_t seed);

  std::vector<NamedParam> enumerate();
  std::vector<NamedParamView> enumerate() const;
};

struct BoundRnnCell {
  VarId w, u, b;
};

struct BoundBiRnn {
  BoundRnnCell fwd, bwd;
};

// Leaf ids of every parameter inside one graph, in enumeration order plus
// by-role access.
struct BoundParams {
  VarId embed_table;
  BoundBiRnn ing_rnn, ins_rnn;
  VarId fusion_w, fusion_b;
  VarId image_w, image_b;
  VarId cls_img_w, cls_img_b;
  VarId cls_rec_w, cls_rec_b;  // alias the image head in shared mode
  VarId ing_ln_gain, ing_ln_bias, ins_ln_gain, ins_ln_bias;
  std::vector<std::pair<std::string, VarId>> ordered;  // matches enumerate()
};

BoundParams bind_params(Graph& g, const ModelParams& params);

}  // namespace scan
