#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scan/data.hpp"
#include "scan/graph.hpp"
#include "scan/model.hpp"

namespace scan {

enum class PositiveMode { paired_only, same_class };
enum class Reduction { mean, sum };
enum class LossVariant { triplet, cosine };
enum class SemanticMode { none, cls_only, full };

struct TripletConfig {
  double margin = 0.3;
  PositiveMode positive_mode = PositiveMode::paired_only;
  Reduction reduction = Reduction::mean;

  void validate() const;  // margin >= 0
};

struct LossConfig {
  TripletConfig triplet;
  LossVariant variant = LossVariant::triplet;
  SemanticMode semantic = SemanticMode::full;
  double lambda = 0.05;
  double cosine_margin = 0.3;  // similarity hinge for the cosine variant

  void validate() const;
};

// Thin named wrapper: entry (i, j) = Euclidean distance between image i and
// recipe j.
VarId pairwise_distance_matrix(Graph& g, VarId images, VarId recipes);

struct MiningPick {
  std::size_t positive;
  std::size_t negative;
};

// Hardest picks per anchor, both directions. image_anchors[i] indexes
// recipes (row view of D); recipe_anchors[j] indexes images (column view).
struct MiningResult {
  std::vector<MiningPick> image_anchors;
  std::vector<MiningPick> recipe_anchors;
  // Smallest value gap a perturbation would have to close to change any
  // pick; used to keep gradient checks away from mining discontinuities.
  double min_decision_gap = 0.0;
};

MiningResult batch_hard_mine(const Tensor& distances, std::span<const std::uint64_t> pair_ids,
                             std::span<const std::uint32_t> labels, const TripletConfig& cfg);

struct RetrievalLossResult {
  VarId loss;
  MiningResult mining;
  std::vector<double> hinge_preactivations;  // one per anchor, both directions
};

// Bidirectional hinge loss over BatchHard triplets, reduced per config.
RetrievalLossResult triplet_loss(Graph& g, VarId images, VarId recipes,
                                 std::span<const std::uint64_t> pair_ids,
                                 std::span<const std::uint32_t> labels,
                                 const TripletConfig& cfg);

// Cosine-similarity retrieval loss (ablation variant): pulls pairs toward
// similarity 1 and pushes the hardest negative below `margin`.
RetrievalLossResult cosine_retrieval_loss(Graph& g, VarId images, VarId recipes,
                                          std::span<const std::uint64_t> pair_ids,
                                          std::span<const std::uint32_t> labels,
                                          const TripletConfig& mining_cfg, double margin);

// Softmax class distribution with companion log-probabilities.
struct ClassProbabilities {
  std::vector<double> probs;
  std::vector<double> log_probs;
};

struct ClassProbVars {
  VarId probs;
  VarId log_probs;
};

ClassProbVars class_probabilities(Graph& g, VarId embedding, VarId weight, VarId bias);
ClassProbabilities class_probabilities(const Tensor& embedding, const Tensor& weight,
                                       const Tensor& bias);

VarId cross_entropy(Graph& g, const ClassProbVars& p, std::uint32_t true_class);
double cross_entropy(const ClassProbabilities& p, std::uint32_t true_class);

VarId kl_divergence(Graph& g, const ClassProbVars& p, const ClassProbVars& q);
double kl_divergence(const ClassProbabilities& p, const ClassProbabilities& q);

// Per-sample semantic consistency:
//   ((CE_img + KL(p_rec || p_img)) + (CE_rec + KL(p_img || p_rec))) / 2
VarId semantic_consistency_sample(Graph& g, const ClassProbVars& p_img,
                                  const ClassProbVars& p_rec, std::uint32_t c_img,
                                  std::uint32_t c_rec);

// Batch mean of the per-sample term.
VarId semantic_consistency_loss(Graph& g, std::span<const ClassProbVars> p_img,
                                std::span<const ClassProbVars> p_rec,
                                std::span<const std::uint32_t> c_img,
                                std::span<const std::uint32_t> c_rec);

struct LossBreakdown {
  double retrieval = 0.0;
  double cls_img = 0.0;
  double cls_rec = 0.0;
  double kl_rec_img = 0.0;  // KL(p_rec || p_img), batch mean
  double kl_img_rec = 0.0;
  double semantic = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

struct TotalLossResult {
  VarId total;
  LossBreakdown breakdown;
  MiningResult mining;
  std::vector<double> hinge_preactivations;
};

// The full objective over one batch: retrieval loss plus lambda times the
// semantic consistency term, all in one graph.
TotalLossResult total_loss(Graph& g, const BoundParams& p, const ModelConfig& mcfg,
                           const LossConfig& lcfg, std::span<const FoodPairRecord> batch);

}  // namespace scan
