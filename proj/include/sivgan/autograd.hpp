// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sivgan/tensor.hpp"

namespace sivgan {

/// Raised when a computation produces or receives non-finite values.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline thread_local int no_grad_depth = 0;
}

/// RAII guard disabling tape construction; ops evaluate eagerly to constants.
struct NoGradScope {
    NoGradScope() { ++detail::no_grad_depth; }
    ~NoGradScope() { --detail::no_grad_depth; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;
};

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

template <typename S>
struct VarNode {
    Tensor<S> value;
    Tensor<S> grad;  // empty until backward touches this node
    bool requires_grad = false;
    bool leaf = false;
    std::vector<std::shared_ptr<VarNode>> parents;
    // Receives the upstream gradient for this node and accumulates into parents.
    std::function<void(const Tensor<S>&)> backward_fn;

    void accumulate(const Tensor<S>& g) {
        if (grad.numel() == 0) {
            grad = g;
        } else {
            grad.data += g.data;
        }
    }
    void zero_grad() { grad = Tensor<S>{}; }
};

/// Handle to a node in the computation tape. Copies share the node.
template <typename S>
class Var {
public:
    Var() = default;

    static Var constant(Tensor<S> t) {
        auto n = std::make_shared<VarNode<S>>();
        n->value = std::move(t);
        return Var(std::move(n));
    }

    /// Leaf that accumulates gradients (parameters, probe inputs).
    static Var leaf(Tensor<S> t) {
        auto n = std::make_shared<VarNode<S>>();
        n->value = std::move(t);
        n->requires_grad = true;
        n->leaf = true;
        return Var(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    const Tensor<S>& value() const { return node_->value; }
    Tensor<S>& value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    const Tensor<S>& grad() const { return node_->grad; }
    void zero_grad() { node_->zero_grad(); }
    std::shared_ptr<VarNode<S>> node() const { return node_; }

    /// Constant view of the same values, cut off from the tape.
    Var detach() const { return constant(node_->value); }

private:
    explicit Var(std::shared_ptr<VarNode<S>> n) : node_(std::move(n)) {}
    std::shared_ptr<VarNode<S>> node_;

    template <typename T, typename F>
    friend Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, F&& backward);
};

/// Builds an op result node. `backward(g)` must accumulate into the parents'
/// grad fields, checking each parent's requires_grad flag first.
template <typename S, typename F>
Var<S> make_op(Tensor<S> value, std::vector<Var<S>> parents, F&& backward) {
    auto n = std::make_shared<VarNode<S>>();
    n->value = std::move(value);
    if (grad_enabled()) {
        bool rg = false;
        for (const auto& p : parents) rg = rg || p.requires_grad();
        if (rg) {
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (auto& p : parents) n->parents.push_back(p.node());
            n->backward_fn = std::forward<F>(backward);
        }
    }
    return Var<S>(std::move(n));
}

/// Reverse-mode sweep from a scalar root.
template <typename S>
void backward(const Var<S>& root) {
    check_arg(root.shape().numel() == 1, "backward: root must be scalar");
    check_arg(root.requires_grad(),
              "backward: root carries no tape (constant inputs or no-grad scope)");

    std::vector<VarNode<S>*> topo;
    std::unordered_set<VarNode<S>*> seen;
    std::vector<std::pair<VarNode<S>*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, i] = stack.back();
        if (i < node->parents.size()) {
            VarNode<S>* p = node->parents[i++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->accumulate(Tensor<S>::full(root.shape(), S(1)));
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        VarNode<S>* n = *it;
        if (n->backward_fn && n->grad.numel() > 0) n->backward_fn(n->grad);
    }
}

}  // namespace sivgan
