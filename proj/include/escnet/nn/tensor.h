#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "escnet/core/errors.h"

namespace escnet::nn {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int e : s) {
        if (e <= 0) throw ShapeError("tensor extents must be positive");
        n *= static_cast<size_t>(e);
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + ")";
}

// One vertex of the computation graph. Holds the forward value, the
// gradient accumulator, and a closure that pushes this node's gradient
// into its parents. Parents are owned via shared_ptr; the graph is a DAG
// that dies when the last tensor referencing it goes out of scope.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    bool leaf = true;
    std::string name;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;
    // Per-op scratch saved by forward for backward (argmax indices,
    // batch-norm statistics).
    std::vector<int64_t> aux_idx;
    std::vector<T> aux;

    size_t size() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }

    void release_buffers() {
        std::vector<T>().swap(value);
        std::vector<T>().swap(grad);
        std::vector<T>().swap(aux);
        std::vector<int64_t>().swap(aux_idx);
        backward_fn = nullptr;
    }
};

// Graph recording switch. Evaluation wraps forward passes in
// GradGuard(false) so no graph is built and no gradient buffers exist.
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

class GradGuard {
public:
    explicit GradGuard(bool enable) : prev_(grad_mode_flag()) { grad_mode_flag() = enable; }
    ~GradGuard() { grad_mode_flag() = prev_; }
    GradGuard(const GradGuard&) = delete;
    GradGuard& operator=(const GradGuard&) = delete;

private:
    bool prev_;
};

// Value-semantics handle to a graph node. Copies share the node.
template <typename T>
class TensorT {
public:
    using value_type = T;

    TensorT() = default;
    explicit TensorT(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static TensorT zeros(Shape shape, bool requires_grad = false) {
        auto n = std::make_shared<Node<T>>();
        n->value.assign(shape_numel(shape), T(0));
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT full(Shape shape, T v) {
        TensorT t = zeros(std::move(shape));
        for (auto& x : t.data()) x = v;
        return t;
    }

    static TensorT from(Shape shape, std::vector<T> values, bool requires_grad = false) {
        if (shape_numel(shape) != values.size()) {
            throw ShapeError("data length does not match shape " + shape_str(shape));
        }
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT scalar(T v) { return from({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    size_t size() const { return node_->value.size(); }

    std::vector<T>& data() { return node_->value; }
    const std::vector<T>& data() const { return node_->value; }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const { return node_->grad; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) {
        node_->requires_grad = v;
        if (v) node_->ensure_grad();
    }

    void zero_grad() {
        if (node_->requires_grad) {
            node_->ensure_grad();
            std::fill(node_->grad.begin(), node_->grad.end(), T(0));
        }
    }

    const std::string& name() const { return node_->name; }
    void set_name(std::string n) { node_->name = std::move(n); }

    T item() const {
        if (size() != 1) throw ArgumentError("item() requires a single-element tensor");
        return node_->value[0];
    }

    // Constant copy, cut off from the graph.
    TensorT detach() const {
        auto n = std::make_shared<Node<T>>();
        n->shape = node_->shape;
        n->value = node_->value;
        return TensorT(std::move(n));
    }

    std::shared_ptr<Node<T>>& node() { return node_; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Intermediate (non-leaf) buffers
// are released as soon as their own gradient has been propagated, which
// bounds peak memory during training. Callers must copy any forward value
// they still need before invoking backward().
template <typename T>
void backward(const TensorT<T>& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ArgumentError("backward requires a defined scalar loss");
    }

    // Iterative post-order DFS; recursion would overflow on deep graphs.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node<T>* child = node->parents[next_child++].get();
            if (visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
        if (!n->leaf) n->release_buffers();
    }
}

// Shared helper for op implementations: creates the result node and wires
// it into the graph when recording is on and a parent is differentiable.
template <typename T>
TensorT<T> make_op_node(Shape shape,
                        std::vector<std::shared_ptr<Node<T>>> parents,
                        std::function<void(Node<T>&)> backward_fn) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(shape_numel(shape), T(0));
    n->shape = std::move(shape);
    n->leaf = false;
    bool track = grad_enabled();
    if (track) {
        track = false;
        for (const auto& p : parents) track = track || p->requires_grad;
    }
    if (track) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return TensorT<T>(std::move(n));
}

using Tensor = TensorT<float>;

} // namespace escnet::nn
