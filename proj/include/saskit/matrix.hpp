#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace saskit {

// Dense row-major matrix of doubles. Small sizes only (token graphs,
// SSM parameters), so no blocking or expression tricks.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

    double* row(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
    const double* row(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = ar[k];
            if (aik == 0.0) continue;
            const double* br = b.row(k);
            for (int j = 0; j < b.cols(); ++j) cr[j] += aik * br[j];
        }
    }
    return c;
}

// y = M x
inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
    if (m.cols() != static_cast<int>(x.size())) throw std::invalid_argument("matvec: shape mismatch");
    std::vector<double> y(m.rows(), 0.0);
    for (int i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (int j = 0; j < m.cols(); ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

// y = M^T x
inline std::vector<double> matvec_transposed(const Matrix& m, const std::vector<double>& x) {
    if (m.rows() != static_cast<int>(x.size())) throw std::invalid_argument("matvec_transposed: shape mismatch");
    std::vector<double> y(m.cols(), 0.0);
    for (int i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < m.cols(); ++j) y[j] += r[j] * xi;
    }
    return y;
}

inline double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    double d = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

inline double frobenius_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("frobenius_diff: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool all_finite(const Matrix& m) {
    for (double v : m.data())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace saskit
