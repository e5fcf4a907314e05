#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vrl/tensor.hpp"

namespace vrl {

using Var = int;

// Reverse-mode tape. One tape owns one forward pass; backward() replays the
// recorded primitives in reverse and accumulates gradients additively across
// fan-out. A tape is single-threaded; run concurrent episodes on separate
// tapes.
class Tape {
  public:
    Var leaf(Tensor value);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_bias(Var m, Var b);  // {r,c} + {r}, bias added to each column
    Var tanh_(Var x);
    Var sigmoid_(Var x);
    Var log_(Var x);
    Var relu(Var x);
    Var scale(Var x, double c);
    Var scalar_mul(Var s, Var x);  // {1} scalar times any tensor
    Var softmax(Var x);  // vector, max-subtracted for stability
    Var sum(Var x);      // reduce to {1}
    Var concat(std::span<const Var> parts);  // vectors -> one vector
    Var slice(Var v, int r0, int r1);        // rows [r0, r1) of a vector or matrix
    Var l2_normalize(Var v);

    const Tensor& val(Var v) const { return nodes_[static_cast<std::size_t>(v)].value; }
    double scalar(Var v) const;

    // Valid after backward(); zero tensor for nodes the loss does not reach.
    const Tensor& grad(Var v) const { return grads_[static_cast<std::size_t>(v)]; }

    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        // Pushes this node's output gradient into its parents' gradients.
        std::function<void(Tape&, const Tensor& g)> back;
    };

    Var push(Tensor value, std::function<void(Tape&, const Tensor&)> back);
    Tensor& grad_ref(Var v) { return grads_[static_cast<std::size_t>(v)]; }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace vrl
