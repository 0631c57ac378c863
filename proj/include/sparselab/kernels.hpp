#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparselab/error.hpp"

namespace sparselab {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Everything the lab manipulates
// (keys, values, queries, gates, embeddings) is stored in one of these.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<Vector>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }
    Vector row_copy(std::size_t r) const {
        return Vector(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
                      data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_));
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool all_finite() const;

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Standard matrix-vector product; throws ShapeError on dimension mismatch.
Vector matvec(const Matrix& m, const Vector& v);

// Numerically stable softmax (max subtraction). Throws DomainError on empty
// input. Output is nonnegative and sums to 1 within 1e-9.
Vector softmax_row(std::span<const double> v);
inline Vector softmax_row(const Vector& v) { return softmax_row(std::span<const double>(v)); }

// Indices of the k largest entries, ties broken toward the smaller index,
// result sorted ascending. Throws BudgetError when k exceeds the dimension.
std::vector<std::size_t> topk_indices(std::span<const double> scores, std::size_t k);
inline std::vector<std::size_t> topk_indices(const Vector& scores, std::size_t k) {
    return topk_indices(std::span<const double>(scores), k);
}

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Cosine similarity; defined as 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace sparselab
