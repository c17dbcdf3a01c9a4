#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fxda/core/tensor.hpp"

namespace fxda {

/// A learnable tensor plus its gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::string n = {}, Shape shape = {1}) : name(std::move(n)) {
        value = Tensor(shape);
        grad = Tensor(std::move(shape));
    }

    void zero_grad() { grad.fill(0.0); }
    int64_t size() const { return value.size(); }
};

using NodeId = int32_t;

/// Reverse-mode autodiff tape. Nodes are appended in execution order, so
/// reverse index order is a valid topological order for the backward sweep.
/// Gradients are allocated lazily; a node whose grad buffer was never touched
/// is dead for the chosen root and its backward pass is skipped.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;  // empty until touched (params alias their external buffer)
        std::function<void(Tape&, NodeId)> backward;
        bool needs_grad = false;
    };

    NodeId leaf(Tensor value, bool needs_grad = false) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        if (needs_grad) n.grad = Tensor(n.value.shape());
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    /// Leaf aliasing an external parameter: grads accumulate straight into
    /// p.grad, and repeated wrapping of the same Param sums contributions.
    NodeId param(Param& p) {
        Node n;
        n.value = p.value;
        n.grad = p.grad;
        n.needs_grad = true;
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId make(Tensor value, bool needs_grad, std::function<void(Tape&, NodeId)> bw) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        if (needs_grad) n.backward = std::move(bw);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    const Tensor& val(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    Node& node(NodeId id) { return nodes_[static_cast<size_t>(id)]; }
    bool needs_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

    /// Gradient buffer, allocated (zeroed) on first use.
    Tensor& grad_buf(NodeId id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.empty()) n.grad = Tensor(n.value.shape());
        return n.grad;
    }

    bool grad_live(NodeId id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }

    double scalar(NodeId id) const {
        const Tensor& v = val(id);
        if (v.size() != 1) throw ContractError("scalar() on tensor of size " + std::to_string(v.size()));
        return v[0];
    }

    /// Backward sweep from a scalar root. Seeds d(root)/d(root) = 1 and walks
    /// the tape in reverse; only nodes whose grad buffer was touched run.
    void backward(NodeId root) {
        if (val(root).size() != 1) {
            throw ContractError("backward() root must be scalar, got " + shape_str(val(root).shape()));
        }
        grad_buf(root)[0] += 1.0;
        for (NodeId id = root; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (!n.backward || n.grad.empty()) continue;
            n.backward(*this, id);
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

}  // namespace fxda
