// ============================================================================
// Minimal dense tensor: shape + contiguous storage. float is the production
// scalar type; double instantiations back the finite-difference checks.
// ============================================================================

#pragma once
#include <cstddef>
#include <numeric>
#include <vector>

#include "ppgaf/errors.hpp"

namespace ppgaf {

template <typename T>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)), data(numel_of(shape)) {}

    static size_t numel_of(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    size_t numel() const { return data.size(); }

    void check() const {
        if (numel_of(shape) != data.size())
            throw ShapeError("tensor: product(shape) != len(data)");
    }
};

}  // namespace ppgaf
