// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "glcanet/tensor.hpp"

namespace glcanet {

template <class T>
class GradTape;

namespace detail {
template <class T>
GradTape<T>*& active_tape() {
    thread_local GradTape<T>* tape = nullptr;
    return tape;
}
} // namespace detail

/// Records differentiable operations while alive. Constructing a tape makes it
/// the active one on this thread; the previous tape (if any) is restored on
/// destruction. Operations whose inputs do not require gradients, or that run
/// with no active tape, are not recorded.
///
/// A tape can be consumed by backward() once; a second call throws UsageError.
template <class T>
class GradTape {
public:
    using NodePtr = std::shared_ptr<detail::TensorNode<T>>;
    using BackwardFn = std::function<void()>;

    GradTape() : previous_(detail::active_tape<T>()) { detail::active_tape<T>() = this; }
    ~GradTape() { detail::active_tape<T>() = previous_; }
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* active() { return detail::active_tape<T>(); }

    void record(std::vector<NodePtr> inputs, NodePtr output, BackwardFn fn) {
        if (consumed_) throw UsageError("cannot record on a tape that already ran backward");
        output->recorded = true;
        entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(fn)});
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool consumed() const noexcept { return consumed_; }

    void backward(const Tensor<T>& loss) {
        if (consumed_) throw UsageError("backward called twice on the same tape");
        if (loss.numel() != 1) throw UsageError("backward needs a scalar loss, got " + shape_str(loss.shape()));
        const auto& root = loss.node();
        bool on_tape = false;
        for (const auto& e : entries_) on_tape = on_tape || e.output == root;
        if (!on_tape) throw UsageError("loss was not produced on this tape");
        consumed_ = true;

        root->grad_span()[0] += T(1);
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
            if (it->output->grad.empty()) continue;
            it->fn();
        }
        // Free intermediate activations; leaves keep their gradients.
        entries_.clear();
    }

private:
    struct Entry {
        std::vector<NodePtr> inputs;
        NodePtr output;
        BackwardFn fn;
    };
    std::vector<Entry> entries_;
    GradTape* previous_;
    bool consumed_ = false;
};

namespace detail {

/// True when `out` must be recorded: a tape is active and some input tracks
/// gradients.
template <class T>
bool needs_record(std::initializer_list<const Tensor<T>*> inputs) {
    if (GradTape<T>::active() == nullptr) return false;
    for (const auto* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

template <class T>
void record(const std::vector<const Tensor<T>*>& inputs, Tensor<T>& out, std::function<void()> fn) {
    out.set_requires_grad(true);
    std::vector<typename GradTape<T>::NodePtr> nodes;
    nodes.reserve(inputs.size());
    for (const auto* t : inputs) nodes.push_back(t->node());
    GradTape<T>::active()->record(std::move(nodes), out.node(), std::move(fn));
}

/// Gradient span of an input, or empty if the input does not track gradients.
template <class T>
std::span<T> grad_of(TensorNode<T>* node) {
    if (!node->requires_grad) return {};
    return node->grad_span();
}

} // namespace detail

} // namespace glcanet

namespace glcanet {

/// Suspends recording on this thread for its lifetime.
template <class T>
class NoGradGuard {
public:
    NoGradGuard() : saved_(detail::active_tape<T>()) { detail::active_tape<T>() = nullptr; }
    ~NoGradGuard() { detail::active_tape<T>() = saved_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    GradTape<T>* saved_;
};

} // namespace glcanet
