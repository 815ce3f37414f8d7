#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "scan/tensor.hpp"

namespace scan {

using VarId = std::uint32_t;

// Reverse-mode autodiff tape over dense double tensors.
//
// Forward values are computed eagerly as operations are recorded;
// backward() replays the tape exactly once in reverse order, accumulating
// gradients into every node. A graph is built per evaluation (there is no
// retained computation structure across batches), which keeps parameter
// binding explicit and evaluation deterministic.
class Graph {
 public:
  VarId leaf(Tensor value, bool trainable = true);
  VarId constant(Tensor value);

  // arithmetic
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);  // Hadamard
  VarId scale(VarId a, double c);
  VarId add_scalar(VarId a, double c);
  VarId add_rowvec(VarId m, VarId v);  // broadcast v over the rows of m
  VarId mul_rowvec(VarId m, VarId v);

  // linear algebra
  VarId matmul(VarId a, VarId b);  // vector lhs is treated as a single row
  VarId transpose(VarId a);

  // pointwise
  VarId tanh(VarId a);
  VarId sigmoid(VarId a);
  VarId exp(VarId a);
  VarId log(VarId a);  // strictly positive input
  VarId relu(VarId a);  // hinge [x]+ with subgradient 0 at the kink
  VarId sqrt(VarId a);

  // row-wise normalizers
  VarId softmax_rows(VarId a);
  // Masked variant: probability 0 on masked-out columns; every row must
  // keep at least one valid column.
  VarId softmax_rows(VarId a, const std::vector<bool>& col_mask);
  VarId log_softmax_rows(VarId a);
  // Per-row mean/population-variance normalization, no learned affine.
  VarId layer_norm(VarId a, double epsilon);
  VarId l2_normalize_rows(VarId a);

  // structure
  VarId concat(VarId a, VarId b);  // vectors end-to-end, matrices column-wise
  VarId stack_rows(std::span<const VarId> rows);
  VarId row(VarId a, std::size_t r);
  VarId slice_cols(VarId a, std::size_t begin, std::size_t end);
  VarId mean_rows(VarId a);
  VarId mean_rows(VarId a, const std::vector<bool>& row_mask);
  VarId row_sums(VarId a);
  VarId sum(VarId a);
  VarId gather(VarId v, std::size_t index);
  VarId select_entries(VarId m, std::vector<std::pair<std::size_t, std::size_t>> idx);

  // metric / embedding ops
  VarId l2_distance(VarId a, VarId b);
  VarId pairwise_distances(VarId a, VarId b);  // (m x d, n x d) -> m x n
  // Row lookup into an embedding table; rows for `padding_id` receive no
  // gradient (the padding embedding is frozen).
  VarId embed_rows(VarId table, const std::vector<std::uint32_t>& ids,
                   std::uint32_t padding_id = 0);

  const Tensor& value(VarId id) const;
  const Tensor& grad(VarId id) const;
  double scalar_value(VarId id) const;
  bool trainable(VarId id) const;

  // Backpropagate from a scalar root. May be called once per graph.
  void backward(VarId root);

  std::size_t size() const { return nodes_.size(); }
  std::size_t backward_visits() const { return backward_visits_; }

 private:
  // Backprop hook: receives the graph and this node's accumulated gradient,
  // and adds contributions into parent gradients.
  using BackFn = std::function<void(Graph&, const Tensor&)>;

  struct Node {
    Tensor value;
    Tensor grad;
    bool trainable = false;
    BackFn backprop;
  };

  VarId push(Tensor value, BackFn fn);
  const Node& node(VarId id) const;
  Tensor& grad_mut(VarId id) { return nodes_[id].grad; }
  VarId unary_map(VarId a, double (*fwd)(double), double (*dydx_from)(double x, double y));

  std::vector<Node> nodes_;
  std::size_t backward_visits_ = 0;
  bool backward_done_ = false;
};

}  // namespace scan
