#include "edbl/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace edbl {

namespace {

void ensure_finite(const Matrix& m, const char* op) {
    if (!m.all_finite()) {
        throw std::runtime_error(std::string(op) + ": produced a non-finite value");
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double value)
    : rows_(rows), cols_(cols), data_(rows * cols, value) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols_) {
            throw std::invalid_argument("Matrix::from_rows: ragged rows");
        }
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix Matrix::row(std::size_t r) const {
    if (r >= rows_) throw std::invalid_argument("Matrix::row: index out of range");
    Matrix out(1, cols_);
    for (std::size_t c = 0; c < cols_; ++c) out(0, c) = (*this)(r, c);
    return out;
}

void Matrix::set_row(std::size_t r, const Matrix& row_values) {
    if (r >= rows_ || row_values.rows() != 1 || row_values.cols() != cols_) {
        throw std::invalid_argument("Matrix::set_row: shape mismatch");
    }
    for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = row_values(0, c);
}

void Matrix::add_scaled(const Matrix& other, double scale) {
    if (!same_shape(other)) throw std::invalid_argument("Matrix::add_scaled: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

void Matrix::scale(double factor) {
    for (double& v : data_) v *= factor;
}

void Matrix::fill(double value) {
    for (double& v : data_) v = value;
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    }
    Matrix out(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    ensure_finite(out, "matmul");
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    }
    return out;
}

Matrix softmax(const Matrix& logits, double temperature) {
    if (temperature <= 0.0) throw std::domain_error("softmax: temperature must be positive");
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double max_scaled = -1e300;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            max_scaled = std::max(max_scaled, logits(i, j) / temperature);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            const double e = std::exp(logits(i, j) / temperature - max_scaled);
            out(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) out(i, j) /= sum;
    }
    ensure_finite(out, "softmax");
    return out;
}

double l1_norm(const Matrix& m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) sum += std::abs(m.data()[i]);
    return sum;
}

double l2_norm(const Matrix& m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) sum += m.data()[i] * m.data()[i];
    return std::sqrt(sum);
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Matrix out = a;
    out.add_scaled(b, 1.0);
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
    Matrix out = a;
    out.add_scaled(b, -1.0);
    return out;
}

}  // namespace edbl
