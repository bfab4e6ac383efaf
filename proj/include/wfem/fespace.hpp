#pragma once

#include "wfem/linalg.hpp"
#include "wfem/mesh.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace wfem {

using ScalarFunction = std::function<double(const Point&)>;
using GradientFunction = std::function<Point(const Point&)>;

/// Tensor Gauss-Legendre rule on the reference cell [0,1]^dim.
struct QuadratureRule {
    std::vector<Point> points;
    std::vector<double> weights;

    std::size_t size() const noexcept { return weights.size(); }
};

/// Gauss-Legendre rule with `n` points per direction, mapped to [0,1]^dim.
QuadratureRule gauss_rule(int dim, int n);

/// Values of the P1 (dim 1) or Q1 (dim 2) reference shape functions at `ref`.
void shape_values(int dim, const Point& ref, std::span<double> out);

/// Where a physical point falls: element index and reference coordinates.
struct Location {
    std::size_t element;
    Point ref;
};

/// Continuous P1/Q1 space over a mesh, one dof per node.
///
/// The constructor precomputes the element quadrature data of the default
/// rule (3-point Gauss in 1D, 2x2 Gauss in 2D), the shared sparsity pattern
/// and the element-to-value scatter map used by the assembly routines.
class FeSpace {
public:
    static constexpr std::size_t max_nodes_per_element = 4;

    explicit FeSpace(std::shared_ptr<const Mesh> mesh);

    const Mesh& mesh() const noexcept { return *mesh_; }
    const std::shared_ptr<const Mesh>& shared_mesh() const noexcept { return mesh_; }
    int dim() const noexcept { return mesh_->dim(); }
    std::size_t n_dofs() const noexcept { return mesh_->num_nodes(); }
    std::size_t nodes_per_element() const noexcept { return npe_; }
    std::size_t num_elements() const noexcept { return mesh_->num_elements(); }

    /// Sorted node indices lying on Dirichlet-tagged facets.
    const std::vector<std::size_t>& dirichlet_dofs() const noexcept { return dirichlet_dofs_; }
    const std::vector<char>& dirichlet_mask() const noexcept { return dirichlet_mask_; }

    const QuadratureRule& rule() const noexcept { return rule_; }
    std::size_t num_qp() const noexcept { return rule_.size(); }
    /// Reference shape value phi_a at quadrature point q.
    double shape(std::size_t q, std::size_t a) const { return shape_[q * npe_ + a]; }
    /// Quadrature weight times Jacobian determinant.
    double jxw(std::size_t e, std::size_t q) const { return jxw_[e * num_qp() + q]; }
    const Point& qp_point(std::size_t e, std::size_t q) const { return qp_points_[e * num_qp() + q]; }
    /// Physical gradient of phi_a at quadrature point q of element e.
    const Point& grad(std::size_t e, std::size_t q, std::size_t a) const {
        return grads_[(e * num_qp() + q) * npe_ + a];
    }

    const std::shared_ptr<const SparsityPattern>& pattern() const noexcept { return pattern_; }
    /// Value-array slot of local entry (a, b) of element e.
    std::size_t slot(std::size_t e, std::size_t a, std::size_t b) const {
        return slots_[(e * npe_ + a) * npe_ + b];
    }

    Point map_to_physical(std::size_t e, const Point& ref) const;
    /// Physical gradients of the shape functions at reference point `ref` of element e.
    void physical_gradients(std::size_t e, const Point& ref, std::span<Point> out, double* det_j = nullptr) const;

    /// Element containing `p` (reference-coordinate tolerance 1e-12), if any.
    std::optional<Location> locate(const Point& p) const;

private:
    void build_geometry();
    void build_pattern();
    void build_locator();
    std::optional<Point> inverse_map(std::size_t e, const Point& p) const;

    std::shared_ptr<const Mesh> mesh_;
    std::size_t npe_;
    QuadratureRule rule_;
    std::vector<double> shape_;
    std::vector<double> jxw_;
    std::vector<Point> qp_points_;
    std::vector<Point> grads_;
    std::vector<std::size_t> dirichlet_dofs_;
    std::vector<char> dirichlet_mask_;
    std::shared_ptr<const SparsityPattern> pattern_;
    std::vector<std::size_t> slots_;

    // Point location: sorted left endpoints (1D) or a bucket grid of
    // element bounding boxes (2D).
    std::vector<std::pair<double, std::size_t>> sorted_left_;
    Point box_min_{}, box_max_{};
    std::size_t bx_ = 0, by_ = 0;
    std::vector<std::vector<std::size_t>> buckets_;
};

/// Finite element function: a coefficient vector over a space.
struct FeFunction {
    std::shared_ptr<const FeSpace> space;
    Vector dofs;

    FeFunction() = default;
    explicit FeFunction(std::shared_ptr<const FeSpace> s);
    FeFunction(std::shared_ptr<const FeSpace> s, Vector values);
};

/// Value of the piecewise (bi)linear interpolant at `p`.
double eval(const FeFunction& f, const Point& p);

/// dofs_i = g(node_i); Dirichlet dofs forced to zero when `zero_dirichlet`.
FeFunction nodal_interpolate(const std::shared_ptr<const FeSpace>& space, const ScalarFunction& g,
                             bool zero_dirichlet = true);

/// Elliptic projection onto the space with homogeneous Dirichlet conditions:
/// (grad R u, grad phi) = (grad u, grad phi) for every test function.
FeFunction ritz_project(const std::shared_ptr<const FeSpace>& space, const GradientFunction& grad_u,
                        const PcgOptions& options = {});

/// Rows: fine nodes, columns: coarse dofs; row i holds the coarse basis values at fine node i.
SparseMatrix transfer_operator(const FeSpace& coarse, const FeSpace& fine);

/// Evaluates `coarse` at the nodes of `fine`.
FeFunction transfer(const FeFunction& coarse, const std::shared_ptr<const FeSpace>& fine);

}  // namespace wfem
