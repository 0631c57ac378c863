#include "sparselab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sparselab {

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols())
            throw ShapeError("from_rows: ragged row lengths");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double x) { return std::isfinite(x); });
}

Vector matvec(const Matrix& m, const Vector& v) {
    if (m.cols() != v.size())
        throw ShapeError("matvec: matrix has " + std::to_string(m.cols()) +
                         " cols, vector has dim " + std::to_string(v.size()));
    Vector out(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        out[r] = dot(m.row(r), v);
    return out;
}

Vector softmax_row(std::span<const double> v) {
    if (v.empty()) throw DomainError("softmax_row: empty input");
    const double m = *std::max_element(v.begin(), v.end());
    Vector out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
    return out;
}

std::vector<std::size_t> topk_indices(std::span<const double> scores, std::size_t k) {
    if (k > scores.size())
        throw BudgetError("topk_indices: k=" + std::to_string(k) + " exceeds dim " +
                          std::to_string(scores.size()));
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // ties toward the smaller index
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

}  // namespace sparselab
