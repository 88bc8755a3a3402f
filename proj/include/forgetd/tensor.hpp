#pragma once

#include "forgetd/common.hpp"

#include <cstddef>
#include <vector>

namespace forgetd {

// Dense n-dimensional array: a shape plus row-major f64 storage. All heavy
// math happens through Eigen maps over the flat data.
struct Tensor {
    std::vector<std::size_t> shape;
    Vector data;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape);

    std::size_t size() const { return static_cast<std::size_t>(data.size()); }
    std::size_t rank() const { return shape.size(); }

    // Leading axis becomes rows, everything else is flattened into columns.
    MatrixMap rows_by_rest();
    ConstMatrixMap rows_by_rest() const;

    MatrixMap as_matrix(std::size_t rows, std::size_t cols);
    ConstMatrixMap as_matrix(std::size_t rows, std::size_t cols) const;

    bool all_finite() const { return data.allFinite(); }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace forgetd
