#pragma once

#include <cstddef>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amc/errors.hpp"

namespace amc::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
}

// Fixed 64-byte alignment keeps Eigen's vectorized loops peeling the same
// way on every allocation, so results do not vary with heap addresses.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array. Rank-3 activations are laid out [height][width][channels].
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
        check_shape();
        data_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        check_shape();
        if (data_.size() != shape_size(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             nn::shape_string(shape_));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t h, std::size_t w, std::size_t c) { return data_[(h * shape_[1] + w) * shape_[2] + c]; }
    const T& at(std::size_t h, std::size_t w, std::size_t c) const {
        return data_[(h * shape_[1] + w) * shape_[2] + c];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape shape) const& {
        Tensor t = *this;
        return std::move(t).reshaped(std::move(shape));
    }
    Tensor reshaped(Shape shape) && {
        if (shape_size(shape) != data_.size())
            throw ShapeError("cannot reshape " + nn::shape_string(shape_) + " to " + nn::shape_string(shape));
        shape_ = std::move(shape);
        return std::move(*this);
    }

    std::string shape_string() const { return nn::shape_string(shape_); }

    bool operator==(const Tensor&) const = default;

private:
    void check_shape() const {
        if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
        for (auto d : shape_)
            if (d == 0) throw ShapeError("tensor dimensions must be at least 1, got " + nn::shape_string(shape_));
    }

    Shape shape_;
    AlignedVector<T> data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
    std::vector<To> d(t.values().begin(), t.values().end());
    return Tensor<To>(t.shape(), std::move(d));
}

}  // namespace amc::nn
