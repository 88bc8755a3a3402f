#include "forgetd/tensor.hpp"

#include <sstream>

namespace forgetd {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = Vector::Zero(static_cast<Eigen::Index>(shape_product(t.shape)));
    return t;
}

MatrixMap Tensor::rows_by_rest() {
    const std::size_t rows = shape.empty() ? 1 : shape[0];
    const std::size_t cols = rows ? size() / rows : 0;
    return MatrixMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatrixMap Tensor::rows_by_rest() const {
    const std::size_t rows = shape.empty() ? 1 : shape[0];
    const std::size_t cols = rows ? size() / rows : 0;
    return ConstMatrixMap(data.data(), static_cast<Eigen::Index>(rows),
                          static_cast<Eigen::Index>(cols));
}

MatrixMap Tensor::as_matrix(std::size_t rows, std::size_t cols) {
    return MatrixMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatrixMap Tensor::as_matrix(std::size_t rows, std::size_t cols) const {
    return ConstMatrixMap(data.data(), static_cast<Eigen::Index>(rows),
                          static_cast<Eigen::Index>(cols));
}

}  // namespace forgetd
