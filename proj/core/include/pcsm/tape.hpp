#pragma once

#include <cstddef>
#include <vector>

#include "pcsm/tensor.hpp"

namespace pcsm {

enum class LeafKind { parameter, input };

// Reverse-mode differentiation tape over dense tensors. Supports exactly the
// primitives the point-cloud classifier needs:
//
//   affine                 y = x * W + b        (bias broadcast per row)
//   relu                   y = max(x, 0)        (subgradient at 0 is 0)
//   max_rows               y_j = max_i x_ij     (argmax recorded per column,
//                                                ties to the lowest row)
//   softmax_cross_entropy  scalar loss against an integer label
//   gather_rows            row subset selection (drop = gather of survivors)
//
// Nodes are appended in topological order; leaves are bound to externally
// owned tensors, so any number of tapes may share one set of read-only
// parameter tensors concurrently. A tape is a single-use, single-threaded
// object: build, bind, evaluate, backward.
class Tape {
 public:
  using NodeId = std::size_t;

  NodeId leaf(std::vector<std::size_t> shape, LeafKind kind);
  NodeId affine(NodeId x, NodeId w, NodeId b);
  NodeId relu(NodeId x);
  NodeId max_rows(NodeId x);
  NodeId softmax_cross_entropy(NodeId logits, std::size_t label);
  NodeId gather_rows(NodeId x, std::vector<std::size_t> rows);

  void bind(NodeId id, const Tensor* value);

  // Forward pass over every node. Pure in (program, bindings): repeated calls
  // produce bitwise-identical values.
  void evaluate();

  // Reverse pass from a scalar output; fills gradients for every node,
  // leaves included. Requires evaluate() first.
  void backward(NodeId output);

  const Tensor& value(NodeId id) const;
  const Tensor& gradient(NodeId id) const;

  // Winning row per pooled column of a max_rows node.
  const std::vector<std::size_t>& argmax(NodeId id) const;

  // Softmax probabilities recorded by a softmax_cross_entropy node.
  const std::vector<double>& probabilities(NodeId id) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op { leaf, affine, relu, max_rows, softmax_ce, gather_rows };

  struct Node {
    Op op;
    LeafKind leaf_kind = LeafKind::input;
    NodeId a = 0, b = 0, c = 0;
    std::size_t label = 0;
    std::vector<std::size_t> rows;    // gather_rows selection
    std::vector<std::size_t> argmax;  // max_rows winners
    std::vector<double> probs;        // softmax_ce probabilities
    std::vector<std::size_t> shape;
    Tensor value;
    Tensor grad;
    const Tensor* binding = nullptr;
  };

  NodeId push(Node node);
  const Tensor& forward_value(const Node& n) const;
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
  bool evaluated_ = false;
  bool differentiated_ = false;
};

}  // namespace pcsm
