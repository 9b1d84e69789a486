// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "glcanet/errors.hpp"
#include "glcanet/ledger.hpp"

namespace glcanet {

using Shape = std::vector<std::size_t>;

template <class T>
using Buffer = std::vector<T, LedgerAllocator<T>>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

namespace detail {

template <class T>
struct TensorNode {
    Shape shape;
    Buffer<T> data;
    Buffer<T> grad; // empty until a gradient reaches this node
    bool requires_grad = false;
    bool recorded = false; // output of a tape entry

    std::span<T> grad_span() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

} // namespace detail

/// Dense row-major array. Copies share storage (handle semantics); values are
/// only mutated by the optimizer and by initialisation through mutable_data().
template <class T>
class Tensor {
public:
    using Node = detail::TensorNode<T>;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0)) : node_(std::make_shared<Node>()) {
        for (std::size_t extent : shape) {
            if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
        }
        node_->data.assign(shape_numel(shape), fill);
        node_->shape = std::move(shape);
    }

    Tensor(Shape shape, std::span<const T> values) : Tensor(std::move(shape)) {
        if (values.size() != node_->data.size()) {
            throw DimensionError("tensor " + shape_str(node_->shape) + " needs " + std::to_string(node_->data.size())
                                 + " values, got " + std::to_string(values.size()));
        }
        std::copy(values.begin(), values.end(), node_->data.begin());
    }

    Tensor(Shape shape, std::initializer_list<T> values)
        : Tensor(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

    static Tensor scalar(T value) { return Tensor(Shape{}, value); }

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const T> data() const& { return node_->data; }
    // A span into a temporary would dangle (e.g. in a range-for).
    std::span<const T> data() const&& = delete;
    std::span<T> mutable_data() { return node_->data; }
    T item() const {
        if (numel() != 1) throw UsageError("item() on tensor " + shape_str(shape()));
        return node_->data[0];
    }
    T operator[](std::size_t i) const { return node_->data[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        node_->requires_grad = on;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient after backward; all zeros if nothing flowed here.
    std::vector<T> grad() const {
        if (node_->grad.empty()) return std::vector<T>(numel(), T(0));
        return {node_->grad.begin(), node_->grad.end()};
    }
    std::span<T> mutable_grad() { return node_->grad_span(); }
    void zero_grad() { node_->grad.clear(); node_->grad.shrink_to_fit(); }

    /// Deep copy detached from any tape.
    Tensor clone() const { return Tensor(shape(), data()); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Asserts identical shapes, naming both in the error.
template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs "
                             + shape_str(b.shape()));
    }
}

template <class T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
    if (a.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got "
                             + shape_str(a.shape()));
    }
}

} // namespace glcanet
