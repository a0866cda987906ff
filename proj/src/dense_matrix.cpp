#include "tsfactor/dense_matrix.hpp"

#include <cmath>

#include "tsfactor/errors.hpp"
#include "tsfactor/kernels.hpp"

namespace tsf {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("DenseMatrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double frobenius_norm(const DenseMatrix& m) {
    return std::sqrt(kern::sum_sq(m.data(), m.size()));
}

DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    }
    return t;
}

void validate_finite(const DenseMatrix& m, const std::string& context) {
    const double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(p[i])) {
            throw DataError(context + ": non-finite value at row " +
                            std::to_string(i / m.cols()) + ", col " +
                            std::to_string(i % m.cols()));
        }
    }
}

}  // namespace tsf
