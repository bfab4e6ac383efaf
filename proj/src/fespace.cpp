#include "wfem/fespace.hpp"

#include "wfem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace wfem {

namespace {

constexpr double kLocateTol = 1e-12;

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) {
                break;
            }
        }
        x[static_cast<std::size_t>(i)] = -z;
        w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

// Reference gradients of the shape functions.
void shape_gradients(int dim, const Point& ref, std::span<Point> out) {
    if (dim == 1) {
        out[0] = {-1.0, 0.0};
        out[1] = {1.0, 0.0};
        return;
    }
    const double xi = ref[0], eta = ref[1];
    out[0] = {-(1 - eta), -(1 - xi)};
    out[1] = {(1 - eta), -xi};
    out[2] = {eta, xi};
    out[3] = {-eta, (1 - xi)};
}

}  // namespace

QuadratureRule gauss_rule(int dim, int n) {
    if ((dim != 1 && dim != 2) || n < 1) {
        throw InvalidArgument("gauss_rule: unsupported dimension or order");
    }
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    QuadratureRule rule;
    if (dim == 1) {
        for (int i = 0; i < n; ++i) {
            rule.points.push_back({0.5 * (x[i] + 1.0), 0.0});
            rule.weights.push_back(0.5 * w[i]);
        }
        return rule;
    }
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            rule.points.push_back({0.5 * (x[i] + 1.0), 0.5 * (x[j] + 1.0)});
            rule.weights.push_back(0.25 * w[i] * w[j]);
        }
    }
    return rule;
}

void shape_values(int dim, const Point& ref, std::span<double> out) {
    const double xi = ref[0];
    if (dim == 1) {
        out[0] = 1.0 - xi;
        out[1] = xi;
        return;
    }
    const double eta = ref[1];
    out[0] = (1 - xi) * (1 - eta);
    out[1] = xi * (1 - eta);
    out[2] = xi * eta;
    out[3] = (1 - xi) * eta;
}

FeSpace::FeSpace(std::shared_ptr<const Mesh> mesh)
    : mesh_(std::move(mesh)), npe_(mesh_->nodes_per_element()),
      rule_(gauss_rule(mesh_->dim(), mesh_->dim() == 1 ? 3 : 2)) {
    dirichlet_mask_.assign(n_dofs(), 0);
    for (const Facet& f : mesh_->facets()) {
        if (f.tag != BoundaryTag::Dirichlet) {
            continue;
        }
        for (std::size_t k = 0; k < mesh_->facet_size(); ++k) {
            dirichlet_mask_[f.nodes[k]] = 1;
        }
    }
    for (std::size_t i = 0; i < n_dofs(); ++i) {
        if (dirichlet_mask_[i]) {
            dirichlet_dofs_.push_back(i);
        }
    }
    build_geometry();
    build_pattern();
    build_locator();
}

void FeSpace::build_geometry() {
    const std::size_t nq = num_qp();
    shape_.resize(nq * npe_);
    for (std::size_t q = 0; q < nq; ++q) {
        shape_values(dim(), rule_.points[q], std::span<double>(shape_.data() + q * npe_, npe_));
    }
    const std::size_t ne = num_elements();
    jxw_.resize(ne * nq);
    qp_points_.resize(ne * nq);
    grads_.resize(ne * nq * npe_);
    for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t q = 0; q < nq; ++q) {
            double det = 0.0;
            physical_gradients(e, rule_.points[q],
                               std::span<Point>(grads_.data() + (e * nq + q) * npe_, npe_), &det);
            jxw_[e * nq + q] = rule_.weights[q] * det;
            qp_points_[e * nq + q] = map_to_physical(e, rule_.points[q]);
        }
    }
}

void FeSpace::build_pattern() {
    const std::size_t n = n_dofs();
    std::vector<std::vector<std::size_t>> neighbours(n);
    for (std::size_t e = 0; e < num_elements(); ++e) {
        const std::size_t* v = mesh_->element(e);
        for (std::size_t a = 0; a < npe_; ++a) {
            for (std::size_t b = 0; b < npe_; ++b) {
                neighbours[v[a]].push_back(v[b]);
            }
        }
    }
    auto pattern = std::make_shared<SparsityPattern>();
    pattern->n_rows = n;
    pattern->n_cols = n;
    pattern->row_offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto& row = neighbours[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        pattern->columns.insert(pattern->columns.end(), row.begin(), row.end());
        pattern->row_offsets[i + 1] = pattern->columns.size();
    }
    slots_.resize(num_elements() * npe_ * npe_);
    for (std::size_t e = 0; e < num_elements(); ++e) {
        const std::size_t* v = mesh_->element(e);
        for (std::size_t a = 0; a < npe_; ++a) {
            for (std::size_t b = 0; b < npe_; ++b) {
                slots_[(e * npe_ + a) * npe_ + b] = pattern->find(v[a], v[b]);
            }
        }
    }
    pattern_ = std::move(pattern);
}

void FeSpace::build_locator() {
    const Mesh& m = *mesh_;
    if (dim() == 1) {
        sorted_left_.reserve(num_elements());
        for (std::size_t e = 0; e < num_elements(); ++e) {
            sorted_left_.emplace_back(m.node(m.element(e)[0])[0], e);
        }
        std::sort(sorted_left_.begin(), sorted_left_.end());
        return;
    }
    box_min_ = m.node(0);
    box_max_ = m.node(0);
    for (const Point& p : m.nodes()) {
        for (int d = 0; d < 2; ++d) {
            box_min_[d] = std::min(box_min_[d], p[d]);
            box_max_[d] = std::max(box_max_[d], p[d]);
        }
    }
    const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(num_elements()))));
    bx_ = std::max<std::size_t>(side, 1);
    by_ = bx_;
    buckets_.assign(bx_ * by_, {});
    const double wx = (box_max_[0] - box_min_[0]) / static_cast<double>(bx_);
    const double wy = (box_max_[1] - box_min_[1]) / static_cast<double>(by_);
    auto cell = [](double v, double lo, double width, std::size_t count) {
        const double c = std::floor((v - lo) / width);
        return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(count - 1)));
    };
    for (std::size_t e = 0; e < num_elements(); ++e) {
        const std::size_t* v = m.element(e);
        Point lo = m.node(v[0]), hi = m.node(v[0]);
        for (std::size_t a = 1; a < npe_; ++a) {
            for (int d = 0; d < 2; ++d) {
                lo[d] = std::min(lo[d], m.node(v[a])[d]);
                hi[d] = std::max(hi[d], m.node(v[a])[d]);
            }
        }
        const std::size_t i0 = cell(lo[0], box_min_[0], wx, bx_), i1 = cell(hi[0], box_min_[0], wx, bx_);
        const std::size_t j0 = cell(lo[1], box_min_[1], wy, by_), j1 = cell(hi[1], box_min_[1], wy, by_);
        for (std::size_t j = j0; j <= j1; ++j) {
            for (std::size_t i = i0; i <= i1; ++i) {
                buckets_[j * bx_ + i].push_back(e);
            }
        }
    }
}

Point FeSpace::map_to_physical(std::size_t e, const Point& ref) const {
    const std::size_t* v = mesh_->element(e);
    std::array<double, max_nodes_per_element> phi{};
    shape_values(dim(), ref, std::span<double>(phi.data(), npe_));
    Point p{0.0, 0.0};
    for (std::size_t a = 0; a < npe_; ++a) {
        p[0] += phi[a] * mesh_->node(v[a])[0];
        p[1] += phi[a] * mesh_->node(v[a])[1];
    }
    return p;
}

void FeSpace::physical_gradients(std::size_t e, const Point& ref, std::span<Point> out, double* det_j) const {
    const std::size_t* v = mesh_->element(e);
    std::array<Point, max_nodes_per_element> dref{};
    shape_gradients(dim(), ref, std::span<Point>(dref.data(), npe_));
    if (dim() == 1) {
        const double len = mesh_->node(v[1])[0] - mesh_->node(v[0])[0];
        for (std::size_t a = 0; a < npe_; ++a) {
            out[a] = {dref[a][0] / len, 0.0};
        }
        if (det_j) {
            *det_j = len;
        }
        return;
    }
    // J = [dx/dxi dx/deta; dy/dxi dy/deta]
    double j00 = 0, j01 = 0, j10 = 0, j11 = 0;
    for (std::size_t a = 0; a < npe_; ++a) {
        const Point& x = mesh_->node(v[a]);
        j00 += x[0] * dref[a][0];
        j01 += x[0] * dref[a][1];
        j10 += x[1] * dref[a][0];
        j11 += x[1] * dref[a][1];
    }
    const double det = j00 * j11 - j01 * j10;
    for (std::size_t a = 0; a < npe_; ++a) {
        // grad = J^{-T} dref
        out[a] = {(j11 * dref[a][0] - j10 * dref[a][1]) / det, (-j01 * dref[a][0] + j00 * dref[a][1]) / det};
    }
    if (det_j) {
        *det_j = det;
    }
}

std::optional<Point> FeSpace::inverse_map(std::size_t e, const Point& p) const {
    if (dim() == 1) {
        const std::size_t* v = mesh_->element(e);
        const double x0 = mesh_->node(v[0])[0], x1 = mesh_->node(v[1])[0];
        const double xi = (p[0] - x0) / (x1 - x0);
        if (xi < -kLocateTol || xi > 1.0 + kLocateTol) {
            return std::nullopt;
        }
        return Point{std::clamp(xi, 0.0, 1.0), 0.0};
    }
    Point ref{0.5, 0.5};
    std::array<Point, max_nodes_per_element> dref{};
    const std::size_t* v = mesh_->element(e);
    for (int iter = 0; iter < 30; ++iter) {
        const Point x = map_to_physical(e, ref);
        const double rx = p[0] - x[0], ry = p[1] - x[1];
        shape_gradients(2, ref, dref);
        double j00 = 0, j01 = 0, j10 = 0, j11 = 0;
        for (std::size_t a = 0; a < 4; ++a) {
            const Point& xa = mesh_->node(v[a]);
            j00 += xa[0] * dref[a][0];
            j01 += xa[0] * dref[a][1];
            j10 += xa[1] * dref[a][0];
            j11 += xa[1] * dref[a][1];
        }
        const double det = j00 * j11 - j01 * j10;
        const double dxi = (j11 * rx - j01 * ry) / det;
        const double deta = (-j10 * rx + j00 * ry) / det;
        ref[0] += dxi;
        ref[1] += deta;
        if (std::abs(dxi) + std::abs(deta) < 1e-15) {
            break;
        }
    }
    for (int d = 0; d < 2; ++d) {
        if (!(ref[d] >= -kLocateTol && ref[d] <= 1.0 + kLocateTol)) {
            return std::nullopt;
        }
        ref[d] = std::clamp(ref[d], 0.0, 1.0);
    }
    return ref;
}

std::optional<Location> FeSpace::locate(const Point& p) const {
    if (dim() == 1) {
        auto it = std::upper_bound(sorted_left_.begin(), sorted_left_.end(), p[0],
                                   [](double x, const auto& entry) { return x < entry.first; });
        // Candidates: the element starting at or before p, and its left neighbour
        // (covers points within tolerance of an interface).
        for (int k = 0; k < 2 && it != sorted_left_.begin(); ++k) {
            --it;
            if (auto ref = inverse_map(it->second, p)) {
                return Location{it->second, *ref};
            }
        }
        if (!sorted_left_.empty()) {
            if (auto ref = inverse_map(sorted_left_.front().second, p)) {
                return Location{sorted_left_.front().second, *ref};
            }
        }
        return std::nullopt;
    }
    const double span_x = box_max_[0] - box_min_[0];
    const double span_y = box_max_[1] - box_min_[1];
    const double slack = 1e-9 * std::max(span_x, span_y);
    if (p[0] < box_min_[0] - slack || p[0] > box_max_[0] + slack || p[1] < box_min_[1] - slack ||
        p[1] > box_max_[1] + slack) {
        return std::nullopt;
    }
    const auto bucket_of = [](double v, double lo, double width, std::size_t count) {
        const double c = std::floor((v - lo) / width);
        return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(count - 1)));
    };
    const std::size_t i = bucket_of(p[0], box_min_[0], span_x / static_cast<double>(bx_), bx_);
    const std::size_t j = bucket_of(p[1], box_min_[1], span_y / static_cast<double>(by_), by_);
    for (std::size_t e : buckets_[j * bx_ + i]) {
        if (auto ref = inverse_map(e, p)) {
            return Location{e, *ref};
        }
    }
    return std::nullopt;
}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> s) : space(std::move(s)), dofs(space->n_dofs(), 0.0) {}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> s, Vector values)
    : space(std::move(s)), dofs(std::move(values)) {
    if (dofs.size() != space->n_dofs()) {
        throw InvalidArgument("FeFunction: dof vector length does not match the space");
    }
}

double eval(const FeFunction& f, const Point& p) {
    const FeSpace& V = *f.space;
    const auto loc = V.locate(p);
    if (!loc) {
        throw OutOfDomain("point (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) +
                          ") lies outside the mesh");
    }
    std::array<double, FeSpace::max_nodes_per_element> phi{};
    shape_values(V.dim(), loc->ref, std::span<double>(phi.data(), V.nodes_per_element()));
    const std::size_t* v = V.mesh().element(loc->element);
    double value = 0.0;
    for (std::size_t a = 0; a < V.nodes_per_element(); ++a) {
        value += phi[a] * f.dofs[v[a]];
    }
    return value;
}

FeFunction nodal_interpolate(const std::shared_ptr<const FeSpace>& space, const ScalarFunction& g,
                             bool zero_dirichlet) {
    FeFunction f(space);
    const Mesh& m = space->mesh();
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        const double value = g(m.node(i));
        if (!std::isfinite(value)) {
            throw InvalidData("nodal_interpolate: non-finite value at node " + std::to_string(i));
        }
        f.dofs[i] = value;
    }
    if (zero_dirichlet) {
        for (std::size_t i : space->dirichlet_dofs()) {
            f.dofs[i] = 0.0;
        }
    }
    return f;
}

FeFunction ritz_project(const std::shared_ptr<const FeSpace>& space, const GradientFunction& grad_u,
                        const PcgOptions& options) {
    const FeSpace& V = *space;
    if (V.dirichlet_dofs().empty()) {
        throw InvalidArgument("ritz_project needs a nonempty Dirichlet boundary");
    }
    Vector rhs(V.n_dofs(), 0.0);
    const std::size_t npe = V.nodes_per_element();
    for (std::size_t e = 0; e < V.num_elements(); ++e) {
        const std::size_t* v = V.mesh().element(e);
        for (std::size_t q = 0; q < V.num_qp(); ++q) {
            const Point g = grad_u(V.qp_point(e, q));
            const double w = V.jxw(e, q);
            for (std::size_t a = 0; a < npe; ++a) {
                const Point& da = V.grad(e, q, a);
                rhs[v[a]] += w * (g[0] * da[0] + g[1] * da[1]);
            }
        }
    }
    auto [k, b] = apply_dirichlet(stiffness(V), std::move(rhs), V.dirichlet_dofs());
    SolveResult solved = pcg(k, b, options);
    return FeFunction(space, std::move(solved.x));
}

SparseMatrix transfer_operator(const FeSpace& coarse, const FeSpace& fine) {
    std::vector<Triplet> triplets;
    triplets.reserve(fine.n_dofs() * coarse.nodes_per_element());
    std::array<double, FeSpace::max_nodes_per_element> phi{};
    for (std::size_t i = 0; i < fine.n_dofs(); ++i) {
        const Point& p = fine.mesh().node(i);
        const auto loc = coarse.locate(p);
        if (!loc) {
            throw OutOfDomain("transfer: fine node " + std::to_string(i) + " lies outside the coarse mesh");
        }
        shape_values(coarse.dim(), loc->ref, std::span<double>(phi.data(), coarse.nodes_per_element()));
        const std::size_t* v = coarse.mesh().element(loc->element);
        for (std::size_t a = 0; a < coarse.nodes_per_element(); ++a) {
            if (phi[a] != 0.0) {
                triplets.push_back({i, v[a], phi[a]});
            }
        }
    }
    return SparseMatrix::from_triplets(fine.n_dofs(), coarse.n_dofs(), triplets);
}

FeFunction transfer(const FeFunction& coarse, const std::shared_ptr<const FeSpace>& fine) {
    if (coarse.space == fine) {
        return coarse;
    }
    const SparseMatrix p = transfer_operator(*coarse.space, *fine);
    return FeFunction(fine, spmv(p, coarse.dofs));
}

}  // namespace wfem
