#pragma once
// Dense matrix type and a column-pivoted Householder QR, sized for the
// regression designs this library produces (thousands of rows, tens of
// columns). Pivoting gives rank detection so callers can name the
// offending columns on rank-deficient designs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace recaudit::linalg {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// QR factorization with column pivoting, kept in factored form.
// After decompose(): rank(), permutation(), and solvers are available.
class PivotedQR {
public:
    explicit PivotedQR(Matrix a) : a_(std::move(a)) { decompose(); }

    std::size_t rank() const { return rank_; }
    // Column order chosen by pivoting: perm()[k] is the original index of
    // the k-th factored column. Columns at positions >= rank() are the
    // (numerically) dependent ones.
    const std::vector<std::size_t>& perm() const { return perm_; }

    // Minimum-norm-ish least squares solution restricted to the rank()
    // pivot columns; dependent columns get coefficient 0.
    std::vector<double> solve(const std::vector<double>& y) const {
        const std::size_t m = a_.rows(), n = a_.cols();
        if (y.size() != m) throw std::invalid_argument("PivotedQR::solve: size mismatch");
        std::vector<double> qty = y;
        apply_qt(qty);
        // Back-substitute on the leading rank x rank triangle.
        std::vector<double> z(rank_, 0.0);
        for (std::size_t ii = rank_; ii > 0; --ii) {
            const std::size_t i = ii - 1;
            double s = qty[i];
            for (std::size_t j = i + 1; j < rank_; ++j) s -= a_(i, j) * z[j];
            z[i] = s / a_(i, i);
        }
        std::vector<double> x(n, 0.0);
        for (std::size_t i = 0; i < rank_; ++i) x[perm_[i]] = z[i];
        return x;
    }

    // (X'X)^{-1} over the pivot columns, returned in original column order
    // (entries involving dependent columns are zero). Valid when rank == n.
    Matrix xtx_inverse() const {
        const std::size_t n = a_.cols();
        // R^{-1} for the leading triangle.
        Matrix rinv(rank_, rank_, 0.0);
        for (std::size_t jj = rank_; jj > 0; --jj) {
            const std::size_t j = jj - 1;
            rinv(j, j) = 1.0 / a_(j, j);
            for (std::size_t ii = jj - 1; ii > 0; --ii) {
                const std::size_t i = ii - 1;
                double s = 0.0;
                for (std::size_t k = i + 1; k <= j; ++k) s += a_(i, k) * rinv(k, j);
                rinv(i, j) = -s / a_(i, i);
            }
        }
        // (X'X)^{-1} = P R^{-1} R^{-T} P'
        Matrix out(n, n, 0.0);
        for (std::size_t i = 0; i < rank_; ++i) {
            for (std::size_t j = 0; j < rank_; ++j) {
                double s = 0.0;
                const std::size_t kmin = std::max(i, j);
                for (std::size_t k = kmin; k < rank_; ++k) s += rinv(i, k) * rinv(j, k);
                out(perm_[i], perm_[j]) = s;
            }
        }
        return out;
    }

private:
    void decompose() {
        const std::size_t m = a_.rows(), n = a_.cols();
        perm_.resize(n);
        for (std::size_t j = 0; j < n; ++j) perm_[j] = j;
        tau_.assign(std::min(m, n), 0.0);

        std::vector<double> colnorm2(n, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < m; ++i) colnorm2[j] += a_(i, j) * a_(i, j);

        const std::size_t kmax = std::min(m, n);
        double r00 = 0.0;
        rank_ = 0;
        for (std::size_t k = 0; k < kmax; ++k) {
            // Pivot: bring the column with the largest remaining norm to k.
            std::size_t pk = k;
            for (std::size_t j = k + 1; j < n; ++j)
                if (colnorm2[j] > colnorm2[pk]) pk = j;
            if (pk != k) {
                for (std::size_t i = 0; i < m; ++i) std::swap(a_(i, k), a_(i, pk));
                std::swap(colnorm2[k], colnorm2[pk]);
                std::swap(perm_[k], perm_[pk]);
            }
            // Householder vector for column k below the diagonal.
            double norm = 0.0;
            for (std::size_t i = k; i < m; ++i) norm += a_(i, k) * a_(i, k);
            norm = std::sqrt(norm);
            if (k == 0) r00 = norm;
            const double tol = std::max(m, n) * 2.220446049250313e-16 * r00;
            if (norm <= tol) break;  // remaining columns are dependent
            if (a_(k, k) > 0) norm = -norm;
            for (std::size_t i = k; i < m; ++i) a_(i, k) /= -norm;
            a_(k, k) += 1.0;
            // Apply the reflector to the trailing columns.
            for (std::size_t j = k + 1; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = k; i < m; ++i) s += a_(i, k) * a_(i, j);
                s = -s / a_(k, k);
                for (std::size_t i = k; i < m; ++i) a_(i, j) += s * a_(i, k);
                const double akj = a_(k, j);
                colnorm2[j] = std::max(0.0, colnorm2[j] - akj * akj);
            }
            tau_[k] = a_(k, k);
            a_(k, k) = norm;  // diagonal of R; reflector vector kept below it
            rank_ = k + 1;
        }
    }

    // y <- Q' y using the stored reflectors.
    void apply_qt(std::vector<double>& y) const {
        const std::size_t m = a_.rows();
        for (std::size_t k = 0; k < rank_; ++k) {
            double s = tau_[k] * y[k];
            for (std::size_t i = k + 1; i < m; ++i) s += a_(i, k) * y[i];
            s = -s / tau_[k];
            y[k] += s * tau_[k];
            for (std::size_t i = k + 1; i < m; ++i) y[i] += s * a_(i, k);
        }
    }

    Matrix a_;
    std::vector<double> tau_;
    std::vector<std::size_t> perm_;
    std::size_t rank_ = 0;
};

}  // namespace recaudit::linalg
