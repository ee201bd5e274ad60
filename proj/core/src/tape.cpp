#include "pcsm/tape.hpp"

#include <algorithm>
#include <cmath>

namespace pcsm {

Tape::NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  evaluated_ = false;
  differentiated_ = false;
  return nodes_.size() - 1;
}

void Tape::check_id(NodeId id) const {
  if (id >= nodes_.size()) {
    throw StructuralError("tape: node id out of range");
  }
}

Tape::NodeId Tape::leaf(std::vector<std::size_t> shape, LeafKind kind) {
  if (shape.empty()) throw StructuralError("tape: leaf with empty shape");
  Node n;
  n.op = Op::leaf;
  n.leaf_kind = kind;
  n.shape = std::move(shape);
  return push(std::move(n));
}

Tape::NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  check_id(x);
  check_id(w);
  check_id(b);
  const auto& xs = nodes_[x].shape;
  const auto& ws = nodes_[w].shape;
  const auto& bs = nodes_[b].shape;
  if (xs.size() != 2 || ws.size() != 2 || bs.size() != 1) {
    throw StructuralError("affine: expects x(N,in), W(in,out), b(out), got " +
                          shape_string(xs) + " " + shape_string(ws) + " " +
                          shape_string(bs));
  }
  if (xs[1] != ws[0] || ws[1] != bs[0]) {
    throw StructuralError("affine: inconsistent shapes " + shape_string(xs) +
                          " " + shape_string(ws) + " " + shape_string(bs));
  }
  Node n;
  n.op = Op::affine;
  n.a = x;
  n.b = w;
  n.c = b;
  n.shape = {xs[0], ws[1]};
  return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId x) {
  check_id(x);
  Node n;
  n.op = Op::relu;
  n.a = x;
  n.shape = nodes_[x].shape;
  return push(std::move(n));
}

Tape::NodeId Tape::max_rows(NodeId x) {
  check_id(x);
  const auto& xs = nodes_[x].shape;
  if (xs.size() != 2) {
    throw StructuralError("max_rows: expects a 2-D input, got " +
                          shape_string(xs));
  }
  Node n;
  n.op = Op::max_rows;
  n.a = x;
  n.shape = {1, xs[1]};
  return push(std::move(n));
}

Tape::NodeId Tape::softmax_cross_entropy(NodeId logits, std::size_t label) {
  check_id(logits);
  const auto& ls = nodes_[logits].shape;
  if (ls.size() != 2 || ls[0] != 1) {
    throw StructuralError("softmax_cross_entropy: expects logits (1,k), got " +
                          shape_string(ls));
  }
  if (label >= ls[1]) {
    throw StructuralError("softmax_cross_entropy: label out of range");
  }
  Node n;
  n.op = Op::softmax_ce;
  n.a = logits;
  n.label = label;
  n.shape = {1};
  return push(std::move(n));
}

Tape::NodeId Tape::gather_rows(NodeId x, std::vector<std::size_t> rows) {
  check_id(x);
  const auto& xs = nodes_[x].shape;
  if (xs.size() != 2) {
    throw StructuralError("gather_rows: expects a 2-D input, got " +
                          shape_string(xs));
  }
  if (rows.empty()) throw StructuralError("gather_rows: empty row set");
  for (std::size_t r : rows) {
    if (r >= xs[0]) throw StructuralError("gather_rows: row index out of range");
  }
  Node n;
  n.op = Op::gather_rows;
  n.a = x;
  n.shape = {rows.size(), xs[1]};
  n.rows = std::move(rows);
  return push(std::move(n));
}

void Tape::bind(NodeId id, const Tensor* value) {
  check_id(id);
  Node& n = nodes_[id];
  if (n.op != Op::leaf) throw StructuralError("bind: node is not a leaf");
  if (value == nullptr) throw StructuralError("bind: null tensor");
  if (value->shape() != n.shape) {
    throw StructuralError("bind: tensor shape " + shape_string(value->shape()) +
                          " does not match leaf shape " + shape_string(n.shape));
  }
  n.binding = value;
  evaluated_ = false;
  differentiated_ = false;
}

const Tensor& Tape::forward_value(const Node& n) const {
  return n.op == Op::leaf ? *n.binding : n.value;
}

void Tape::evaluate() {
  for (Node& n : nodes_) {
    switch (n.op) {
      case Op::leaf: {
        if (n.binding == nullptr) {
          throw StateError("evaluate: unbound leaf");
        }
        if (!n.binding->all_finite()) {
          throw NumericError("evaluate: non-finite value in leaf binding");
        }
        break;
      }
      case Op::affine: {
        const Tensor& x = forward_value(nodes_[n.a]);
        const Tensor& w = forward_value(nodes_[n.b]);
        const Tensor& b = forward_value(nodes_[n.c]);
        const std::size_t rows = x.rows(), in = x.cols(), out = w.cols();
        n.value = Tensor({rows, out});
        for (std::size_t r = 0; r < rows; ++r) {
          const double* xr = x.data() + r * in;
          double* yr = n.value.data() + r * out;
          for (std::size_t j = 0; j < out; ++j) yr[j] = b[j];
          for (std::size_t i = 0; i < in; ++i) {
            const double xv = xr[i];
            const double* wr = w.data() + i * out;
            for (std::size_t j = 0; j < out; ++j) yr[j] += xv * wr[j];
          }
        }
        break;
      }
      case Op::relu: {
        const Tensor& x = forward_value(nodes_[n.a]);
        n.value = Tensor(n.shape);
        for (std::size_t i = 0; i < x.size(); ++i) {
          n.value[i] = x[i] > 0.0 ? x[i] : 0.0;
        }
        break;
      }
      case Op::max_rows: {
        const Tensor& x = forward_value(nodes_[n.a]);
        const std::size_t rows = x.rows(), cols = x.cols();
        n.value = Tensor({1, cols});
        n.argmax.assign(cols, 0);
        for (std::size_t j = 0; j < cols; ++j) {
          double best = x.at(0, j);
          std::size_t best_i = 0;
          for (std::size_t i = 1; i < rows; ++i) {
            if (x.at(i, j) > best) {  // strict: ties keep the lowest index
              best = x.at(i, j);
              best_i = i;
            }
          }
          n.value[j] = best;
          n.argmax[j] = best_i;
        }
        break;
      }
      case Op::softmax_ce: {
        const Tensor& l = forward_value(nodes_[n.a]);
        const std::size_t k = l.cols();
        double m = l[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, l[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(l[j] - m);
        const double lse = m + std::log(z);
        n.probs.assign(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) n.probs[j] = std::exp(l[j] - lse);
        n.value = Tensor::scalar(lse - l[n.label]);
        break;
      }
      case Op::gather_rows: {
        const Tensor& x = forward_value(nodes_[n.a]);
        const std::size_t cols = x.cols();
        n.value = Tensor(n.shape);
        for (std::size_t i = 0; i < n.rows.size(); ++i) {
          const double* src = x.data() + n.rows[i] * cols;
          std::copy(src, src + cols, n.value.data() + i * cols);
        }
        break;
      }
    }
  }
  evaluated_ = true;
  differentiated_ = false;
}

void Tape::backward(NodeId output) {
  check_id(output);
  if (!evaluated_) {
    throw StateError("backward: evaluate must run first");
  }
  if (nodes_[output].shape != std::vector<std::size_t>{1}) {
    throw StructuralError("backward: output is not a scalar");
  }
  for (Node& n : nodes_) {
    n.grad = Tensor(n.shape);
  }
  nodes_[output].grad[0] = 1.0;

  for (std::size_t idx = output + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::affine: {
        const Tensor& x = forward_value(nodes_[n.a]);
        const Tensor& w = forward_value(nodes_[n.b]);
        Tensor& dx = nodes_[n.a].grad;
        Tensor& dw = nodes_[n.b].grad;
        Tensor& db = nodes_[n.c].grad;
        const std::size_t rows = x.rows(), in = x.cols(), out = w.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = n.grad.data() + r * out;
          const double* xr = x.data() + r * in;
          double* dxr = dx.data() + r * in;
          for (std::size_t j = 0; j < out; ++j) db[j] += gr[j];
          for (std::size_t i = 0; i < in; ++i) {
            const double* wr = w.data() + i * out;
            double* dwr = dw.data() + i * out;
            double acc = 0.0;
            for (std::size_t j = 0; j < out; ++j) {
              acc += gr[j] * wr[j];
              dwr[j] += xr[i] * gr[j];
            }
            dxr[i] += acc;
          }
        }
        break;
      }
      case Op::relu: {
        const Tensor& x = forward_value(nodes_[n.a]);
        Tensor& dx = nodes_[n.a].grad;
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] > 0.0) dx[i] += n.grad[i];
        }
        break;
      }
      case Op::max_rows: {
        Tensor& dx = nodes_[n.a].grad;
        const std::size_t cols = n.value.cols();
        for (std::size_t j = 0; j < cols; ++j) {
          dx.at(n.argmax[j], j) += n.grad[j];
        }
        break;
      }
      case Op::softmax_ce: {
        Tensor& dl = nodes_[n.a].grad;
        const double go = n.grad[0];
        for (std::size_t j = 0; j < n.probs.size(); ++j) {
          dl[j] += go * (n.probs[j] - (j == n.label ? 1.0 : 0.0));
        }
        break;
      }
      case Op::gather_rows: {
        Tensor& dx = nodes_[n.a].grad;
        const std::size_t cols = dx.cols();
        for (std::size_t i = 0; i < n.rows.size(); ++i) {
          const double* gr = n.grad.data() + i * cols;
          double* dst = dx.data() + n.rows[i] * cols;
          for (std::size_t j = 0; j < cols; ++j) dst[j] += gr[j];
        }
        break;
      }
    }
  }
  differentiated_ = true;
}

const Tensor& Tape::value(NodeId id) const {
  check_id(id);
  if (!evaluated_) throw StateError("value: evaluate must run first");
  return forward_value(nodes_[id]);
}

const Tensor& Tape::gradient(NodeId id) const {
  check_id(id);
  if (!differentiated_) throw StateError("gradient: backward must run first");
  return nodes_[id].grad;
}

const std::vector<std::size_t>& Tape::argmax(NodeId id) const {
  check_id(id);
  if (!evaluated_) throw StateError("argmax: evaluate must run first");
  if (nodes_[id].op != Op::max_rows) {
    throw StructuralError("argmax: node is not a max_rows node");
  }
  return nodes_[id].argmax;
}

const std::vector<double>& Tape::probabilities(NodeId id) const {
  check_id(id);
  if (!evaluated_) throw StateError("probabilities: evaluate must run first");
  if (nodes_[id].op != Op::softmax_ce) {
    throw StructuralError("probabilities: node is not a softmax node");
  }
  return nodes_[id].probs;
}

}  // namespace pcsm
