#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace edbl {

// Dense row-major matrix of doubles. The only numeric carrier in the
// library: batches are rows, features are columns.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    Matrix row(std::size_t r) const;
    void set_row(std::size_t r, const Matrix& row_values);

    // param -= lr * other, used by the optimizer
    void add_scaled(const Matrix& other, double scale);
    void scale(double factor);
    void fill(double value);

    bool all_finite() const;
    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// Row-wise softmax of logits/temperature with max subtraction.
Matrix softmax(const Matrix& logits, double temperature);

// Sum of absolute values over all entries.
double l1_norm(const Matrix& m);
double l2_norm(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);

}  // namespace edbl
