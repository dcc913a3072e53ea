// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_AUTOGRAD_HPP_
#define DKWS_AUTOGRAD_HPP_

#include <functional>
#include <string>
#include <vector>

#include "dkws/tensor.hpp"

namespace dkws {

// Named trainable tensor plus its gradient and Adam moment buffers.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  Param() = default;
  Param(std::string n, Tensor init) : name(std::move(n)), value(std::move(init)) {
    grad = Tensor(value.shape);
    adam_m = Tensor(value.shape);
    adam_v = Tensor(value.shape);
  }
  void zero_grad() { grad.zero(); }
};

// Reverse-mode tape. Node creation order is a valid topological order, so
// backward() is a single reverse sweep. One tape per training step.
class Tape {
 public:
  using V = int;  // node id

  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void(Tape&, V self)> back;  // may be empty for leaves
  };

  V leaf(Tensor t) {
    nodes_.push_back(Node{std::move(t), Tensor(), nullptr});
    nodes_.back().grad = Tensor(nodes_.back().val.shape);
    return static_cast<V>(nodes_.size() - 1);
  }

  // Leaf bound to a Param; after backward() the node grad is added to p.grad.
  V param(Param& p) {
    V id = leaf(p.value);
    hooks_.push_back({id, &p});
    return id;
  }

  V make(Tensor val, std::function<void(Tape&, V)> back) {
    nodes_.push_back(Node{std::move(val), Tensor(), std::move(back)});
    nodes_.back().grad = Tensor(nodes_.back().val.shape);
    return static_cast<V>(nodes_.size() - 1);
  }

  Tensor& val(V id) { return nodes_[static_cast<size_t>(id)].val; }
  const Tensor& val(V id) const { return nodes_[static_cast<size_t>(id)].val; }
  Tensor& grad(V id) { return nodes_[static_cast<size_t>(id)].grad; }

  double scalar(V id) const {
    const Tensor& t = val(id);
    if (t.numel() != 1) throw std::logic_error("Tape::scalar: node is not scalar");
    return t.v[0];
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(V loss) {
    if (val(loss).numel() != 1)
      throw std::logic_error("Tape::backward: loss must be scalar");
    grad(loss).v[0] = 1.0;
    for (int i = loss; i >= 0; --i) {
      auto& n = nodes_[static_cast<size_t>(i)];
      if (n.back) n.back(*this, i);
    }
    for (auto& [id, p] : hooks_) {
      const Tensor& g = grad(id);
      for (int64_t k = 0; k < g.numel(); ++k) p->grad.v[static_cast<size_t>(k)] += g.v[static_cast<size_t>(k)];
    }
  }

  size_t size() const { return nodes_.size(); }
  void clear() {
    nodes_.clear();
    hooks_.clear();
  }

 private:
  std::vector<Node> nodes_;
  std::vector<std::pair<V, Param*>> hooks_;
};

using V = Tape::V;

namespace ag {

// elementwise
V add(Tape& t, V a, V b);
V sub(Tape& t, V a, V b);
V mul(Tape& t, V a, V b);
V neg(Tape& t, V a);
V affine(Tape& t, V a, double k, double c);  // k*a + c
V mul_const(Tape& t, V a, const Tensor& m);  // no grad into m
V sigmoid(Tape& t, V a);
V tanh_(Tape& t, V a);
V leaky_relu(Tape& t, V a, double slope);
V log_(Tape& t, V a);
V exp_(Tape& t, V a);
V sqrt_(Tape& t, V a);
V square(Tape& t, V a);
V abs_(Tape& t, V a);
V clamp(Tape& t, V a, double lo, double hi);

// reductions / scalar plumbing
V sum_all(Tape& t, V a);           // -> [1]
V mean_all(Tape& t, V a);          // -> [1]
V index_scalar(Tape& t, V a, int64_t i);  // -> [1]
V scale_by(Tape& t, V x, V s);     // x * s, s scalar node
V div_by(Tape& t, V x, V s);       // x / s, s scalar node

// shape
V reshape(Tape& t, V a, std::vector<int64_t> shape);
V transpose(Tape& t, V a);                      // 2-D
V slice_cols(Tape& t, V a, int64_t c0, int64_t c1);
V concat_cols(Tape& t, const std::vector<V>& xs);
V slice_rows(Tape& t, V a, int64_t r0, int64_t r1);
V concat_rows(Tape& t, const std::vector<V>& xs);
V shift_rows(Tape& t, V a, int64_t k);          // down by k, zero-fill top
V tile_rowvec(Tape& t, V b, int64_t n);         // [D] -> [n,D]
V add_rowvec(Tape& t, V x, V b);                // [R,D] + [D]
V pair_avg_cols(Tape& t, V a);                  // [R,D] -> [R,D/2]
V flatten_cf(Tape& t, V a);                     // [C,F,T] -> [T,C*F], channel-major
V unflatten_cf(Tape& t, V a, int64_t C, int64_t F);  // inverse of flatten_cf
V concat_chan(Tape& t, V a, V b);               // along axis 0
V prepend_zero_row(Tape& t, V a);               // [R,C] -> [R+1,C]
V mean_time(Tape& t, V a);                      // [C,T] -> [C,1]
V mul_chan(Tape& t, V x, V s);                  // x[C,...] * s[C]
V add_chan_bias(Tape& t, V x, V b);             // x[C,...] + b[C]
V softmax_vec(Tape& t, V a);                    // softmax over all elements

// linear algebra / convolution
V matmul(Tape& t, V a, V b);                    // [m,k]x[k,n]
V linear(Tape& t, V x, V w, V b);               // x[T,in] w[in,out] b[out]
V conv2d(Tape& t, V x, V w, int stride_f, int pad_f);        // causal in time
V deconv2d(Tape& t, V x, V w, int stride_f, int pad_f, int out_pad_f);
V conv1d(Tape& t, V x, V w, int dilation);      // symmetric 'same' padding
V dwconv1d(Tape& t, V x, V w, int dilation);    // causal

// batch normalization over all but the channel (first) axis
struct BnState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double momentum = 0.1;
  double eps = 1e-5;
  bool initialized = false;
};
V batchnorm(Tape& t, V x, V gamma, V beta, BnState& st, bool training);

}  // namespace ag
}  // namespace dkws

#endif  // DKWS_AUTOGRAD_HPP_
