#pragma once

#include "wfem/fespace.hpp"
#include "wfem/linalg.hpp"

#include <array>
#include <span>
#include <utility>
#include <variant>

namespace wfem {

/// A coefficient for weighted mass matrices and load vectors: a constant, a
/// nodal vector over the space (non-owning view), or a callable evaluated
/// directly at quadrature points.
class CoefficientField {
public:
    static CoefficientField constant(double value) { return CoefficientField(value); }
    static CoefficientField nodal(std::span<const double> dofs) { return CoefficientField(dofs); }
    static CoefficientField function(ScalarFunction f) { return CoefficientField(std::move(f)); }

    /// Value at quadrature point q of element e.
    double at(const FeSpace& space, std::size_t e, std::size_t q) const;
    bool is_constant() const noexcept { return std::holds_alternative<double>(field_); }

private:
    explicit CoefficientField(double v) : field_(v) {}
    explicit CoefficientField(std::span<const double> v) : field_(v) {}
    explicit CoefficientField(ScalarFunction f) : field_(std::move(f)) {}

    std::variant<double, std::span<const double>, ScalarFunction> field_;
};

/// Dense element matrix, row-major, sized for the largest element.
using LocalMatrix = std::array<double, FeSpace::max_nodes_per_element * FeSpace::max_nodes_per_element>;

LocalMatrix local_stiffness(const FeSpace& space, std::size_t e);
LocalMatrix local_weighted_mass(const FeSpace& space, std::size_t e, const CoefficientField& w);

/// K_ij = (grad phi_i, grad phi_j); no material factor.
SparseMatrix stiffness(const FeSpace& space);
/// M_ij = (phi_i, phi_j).
SparseMatrix mass(const FeSpace& space);
/// M(w)_ij = (w phi_i, phi_j).
SparseMatrix weighted_mass(const FeSpace& space, const CoefficientField& w);
/// Reassembles M(w) into `out`, which must live on the space's pattern.
void weighted_mass_into(const FeSpace& space, const CoefficientField& w, SparseMatrix& out);

/// B_ij = integral over facets tagged `tag` of phi_i phi_j. All zeros when no facet carries the tag.
SparseMatrix boundary_mass(const FeSpace& space, BoundaryTag tag);

/// b_i = (f, phi_i).
Vector load(const FeSpace& space, const CoefficientField& f);
/// b_i = g * integral over facets tagged `tag` of phi_i.
Vector neumann_load(const FeSpace& space, BoundaryTag tag, double g);

/// Symmetric elimination of homogeneous Dirichlet dofs: constrained rows and
/// columns zeroed, unit diagonal, zero right-hand side.
std::pair<SparseMatrix, Vector> apply_dirichlet(SparseMatrix a, Vector b, std::span<const std::size_t> dofs);
void apply_dirichlet_in_place(SparseMatrix& a, std::span<double> b, const std::vector<char>& mask);

}  // namespace wfem
