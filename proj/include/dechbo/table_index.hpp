#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dechbo/error.hpp"

namespace dechbo {

/// Row-major (last variable fastest) flattening of a multi-index over a box of
/// per-variable domain sizes. Shared by acquisition tables, the max-sum
/// solver and the centralized grid search so all three agree on ordering.
class TableShape {
public:
    TableShape() = default;
    explicit TableShape(std::vector<int> extents) : extents_(std::move(extents)) {
        strides_.assign(extents_.size(), 1);
        size_ = 1;
        for (std::size_t j = extents_.size(); j-- > 0;) {
            DECHBO_REQUIRE(extents_[j] >= 1, "table shape: extents must be >= 1");
            strides_[j] = size_;
            size_ *= static_cast<std::size_t>(extents_[j]);
        }
    }

    std::size_t size() const { return size_; }
    std::size_t rank() const { return extents_.size(); }
    int extent(std::size_t j) const { return extents_[j]; }
    std::size_t stride(std::size_t j) const { return strides_[j]; }
    const std::vector<int>& extents() const { return extents_; }

    std::size_t flatten(std::span<const int> idx) const {
        std::size_t flat = 0;
        for (std::size_t j = 0; j < extents_.size(); ++j) flat += static_cast<std::size_t>(idx[j]) * strides_[j];
        return flat;
    }

    void unflatten(std::size_t flat, std::span<int> idx) const {
        for (std::size_t j = 0; j < extents_.size(); ++j) {
            idx[j] = static_cast<int>(flat / strides_[j]);
            flat %= strides_[j];
        }
    }

    /// Advance a multi-index in row-major order; returns false after the last element.
    bool next(std::span<int> idx) const {
        for (std::size_t j = extents_.size(); j-- > 0;) {
            if (++idx[j] < extents_[j]) return true;
            idx[j] = 0;
        }
        return false;
    }

private:
    std::vector<int> extents_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 1;
};

}  // namespace dechbo
