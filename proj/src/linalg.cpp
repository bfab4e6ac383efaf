#include "wfem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace wfem {

std::size_t SparsityPattern::find(std::size_t row, std::size_t col) const {
    const auto first = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[row]);
    const auto last = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[row + 1]);
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col) {
        return nnz();
    }
    return static_cast<std::size_t>(it - columns.begin());
}

SparseMatrix::SparseMatrix(std::shared_ptr<const SparsityPattern> pattern)
    : pattern_(std::move(pattern)), values_(pattern_->nnz(), 0.0) {}

SparseMatrix::SparseMatrix(std::shared_ptr<const SparsityPattern> pattern, Vector values)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
    if (values_.size() != pattern_->nnz()) {
        throw InvalidArgument("value array does not match sparsity pattern");
    }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                         std::span<const Triplet> triplets) {
    std::vector<Triplet> sorted(triplets.begin(), triplets.end());
    for (const Triplet& t : sorted) {
        if (t.row >= n_rows || t.col >= n_cols) {
            throw InvalidArgument("triplet index out of range");
        }
    }
    std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    auto pattern = std::make_shared<SparsityPattern>();
    pattern->n_rows = n_rows;
    pattern->n_cols = n_cols;
    pattern->row_offsets.assign(n_rows + 1, 0);
    Vector values;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const Triplet& t = sorted[k];
        if (k > 0 && sorted[k - 1].row == t.row && sorted[k - 1].col == t.col) {
            values.back() += t.value;
            continue;
        }
        pattern->columns.push_back(t.col);
        values.push_back(t.value);
        ++pattern->row_offsets[t.row + 1];
    }
    std::partial_sum(pattern->row_offsets.begin(), pattern->row_offsets.end(),
                     pattern->row_offsets.begin());
    return SparseMatrix(std::move(pattern), std::move(values));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    const Vector ones(n, 1.0);
    return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> diag) {
    std::vector<Triplet> t;
    t.reserve(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        t.push_back({i, i, diag[i]});
    }
    return from_triplets(diag.size(), diag.size(), t);
}

double SparseMatrix::operator()(std::size_t row, std::size_t col) const {
    if (row >= rows() || col >= cols()) {
        throw InvalidArgument("matrix index out of range");
    }
    const std::size_t k = pattern_->find(row, col);
    return k == nnz() ? 0.0 : values_[k];
}

void SparseMatrix::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

void SparseMatrix::add_scaled(double alpha, const SparseMatrix& other) {
    if (pattern_ != other.pattern_) {
        throw InvalidArgument("add_scaled requires matrices sharing one sparsity pattern");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        values_[k] += alpha * other.values_[k];
    }
}

void SparseMatrix::scale(double alpha) {
    for (double& v : values_) {
        v *= alpha;
    }
}

Vector SparseMatrix::diagonal_entries() const {
    const std::size_t n = std::min(rows(), cols());
    Vector d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pattern_->find(i, i);
        if (k != nnz()) {
            d[i] = values_[k];
        }
    }
    return d;
}

bool SparseMatrix::is_symmetric(double tol) const {
    if (rows() != cols()) {
        return false;
    }
    const SparsityPattern& p = *pattern_;
    for (std::size_t i = 0; i < p.n_rows; ++i) {
        for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
            const std::size_t j = p.columns[k];
            const double aij = values_[k];
            const std::size_t kt = p.find(j, i);
            const double aji = kt == p.nnz() ? 0.0 : values_[kt];
            if (std::abs(aij - aji) > tol * std::max(1.0, std::abs(aij))) {
                return false;
            }
        }
    }
    return true;
}

void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y) {
    if (x.size() != a.cols() || y.size() != a.rows()) {
        throw InvalidArgument("spmv dimension mismatch: matrix " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + ", x " + std::to_string(x.size()));
    }
    const SparsityPattern& p = a.pattern();
    const auto vals = a.values();
    for (std::size_t i = 0; i < p.n_rows; ++i) {
        double sum = 0.0;
        for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
            sum += vals[k] * x[p.columns[k]];
        }
        y[i] = sum;
    }
}

Vector spmv(const SparseMatrix& a, std::span<const double> x) {
    Vector y(a.rows());
    spmv(a, x, y);
    return y;
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw InvalidArgument("dot: length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * y[i];
    }
    return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw InvalidArgument("axpy: length mismatch");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

SolveResult pcg(const SparseMatrix& a, std::span<const double> b, const PcgOptions& options,
                std::span<const double> x0) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) {
        throw InvalidArgument("pcg: dimension mismatch");
    }
    if (!x0.empty() && x0.size() != n) {
        throw InvalidArgument("pcg: initial guess has wrong length");
    }
    if (!(options.tol > 0.0)) {
        throw InvalidArgument("pcg: tolerance must be positive");
    }
    const std::size_t max_iter = options.max_iter ? options.max_iter : 10 * std::max<std::size_t>(n, 1);

    Vector inv_diag = a.diagonal_entries();
    for (std::size_t i = 0; i < n; ++i) {
        if (inv_diag[i] == 0.0 || !std::isfinite(inv_diag[i])) {
            throw SingularPreconditioner("pcg: zero diagonal entry in row " + std::to_string(i));
        }
        inv_diag[i] = 1.0 / inv_diag[i];
    }

    SolveResult result;
    result.x = x0.empty() ? Vector(n, 0.0) : Vector(x0.begin(), x0.end());
    Vector& x = result.x;
    const double b_norm = norm2(b);
    if (b_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return result;
    }
    const double target = options.tol * b_norm;

    Vector r(n), z(n), p(n), q(n);
    auto true_residual = [&] {
        spmv(a, x, q);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = b[i] - q[i];
        }
        return norm2(r);
    };

    double r_norm = true_residual();
    std::size_t it = 0;
    while (r_norm > target) {
        // (Re)start from the current true residual.
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = inv_diag[i] * r[i];
        }
        p = z;
        double rz = dot(r, z);
        while (it < max_iter) {
            spmv(a, p, q);
            const double pq = dot(p, q);
            if (!(pq > 0.0)) {
                result.report = {it, r_norm / b_norm};
                throw IterativeFailure("pcg: operator is not positive definite (p'Ap = " +
                                           std::to_string(pq) + ")",
                                       result.report);
            }
            const double alpha = rz / pq;
            axpy(alpha, p, x);
            axpy(-alpha, q, r);
            ++it;
            r_norm = norm2(r);
            if (r_norm <= target) {
                break;
            }
            for (std::size_t i = 0; i < n; ++i) {
                z[i] = inv_diag[i] * r[i];
            }
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = z[i] + beta * p[i];
            }
        }
        r_norm = true_residual();
        if (it >= max_iter && r_norm > target) {
            result.report = {it, r_norm / b_norm};
            throw IterativeFailure("pcg: no convergence after " + std::to_string(it) +
                                       " iterations (relative residual " +
                                       std::to_string(result.report.relative_residual) + ")",
                                   result.report);
        }
    }
    result.report = {it, r_norm / b_norm};
    return result;
}

}  // namespace wfem
