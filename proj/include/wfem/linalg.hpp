#pragma once

#include "wfem/exceptions.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace wfem {

using Vector = std::vector<double>;

/// Compressed-row sparsity structure, shared between matrices assembled on the
/// same space so that linear combinations reduce to operations on value arrays.
struct SparsityPattern {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets;  // n_rows + 1 entries
    std::vector<std::size_t> columns;      // strictly increasing within each row

    std::size_t nnz() const noexcept { return columns.size(); }
    /// Position of (row, col) in the value array, or nnz() when absent.
    std::size_t find(std::size_t row, std::size_t col) const;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

class SparseMatrix {
public:
    SparseMatrix() = default;
    explicit SparseMatrix(std::shared_ptr<const SparsityPattern> pattern);
    SparseMatrix(std::shared_ptr<const SparsityPattern> pattern, Vector values);

    /// Builds a matrix from unsorted triplets; duplicates are summed.
    static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                      std::span<const Triplet> triplets);
    static SparseMatrix identity(std::size_t n);
    static SparseMatrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return pattern_ ? pattern_->n_rows : 0; }
    std::size_t cols() const noexcept { return pattern_ ? pattern_->n_cols : 0; }
    std::size_t nnz() const noexcept { return values_.size(); }

    const SparsityPattern& pattern() const { return *pattern_; }
    const std::shared_ptr<const SparsityPattern>& shared_pattern() const noexcept { return pattern_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    /// Entry (row, col); zero when structurally absent.
    double operator()(std::size_t row, std::size_t col) const;

    void set_zero();
    /// this += alpha * other; both must share the same pattern.
    void add_scaled(double alpha, const SparseMatrix& other);
    void scale(double alpha);

    Vector diagonal_entries() const;
    bool is_symmetric(double tol = 1e-12) const;

private:
    std::shared_ptr<const SparsityPattern> pattern_;
    Vector values_;
};

/// y = A x.
Vector spmv(const SparseMatrix& a, std::span<const double> x);
void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
double max_abs(std::span<const double> x);
/// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

struct SolveReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

class IterativeFailure : public Error {
public:
    IterativeFailure(const std::string& what, SolveReport report) : Error(what), report_(report) {}
    const SolveReport& report() const noexcept { return report_; }

private:
    SolveReport report_;
};

struct PcgOptions {
    double tol = 1e-10;
    std::size_t max_iter = 0;  // 0 selects 10 * n
};

struct SolveResult {
    Vector x;
    SolveReport report;
};

/// Jacobi-preconditioned conjugate gradients for SPD `a`. On success
/// ||b - A x||_2 <= tol ||b||_2, measured on the true residual. The optional
/// `x0` seeds the iteration; if it already satisfies the tolerance it is
/// returned unchanged with zero iterations.
SolveResult pcg(const SparseMatrix& a, std::span<const double> b, const PcgOptions& options = {},
                std::span<const double> x0 = {});

}  // namespace wfem
