#include "wfem/assembly.hpp"

#include <cmath>
#include <numbers>

namespace wfem {

double CoefficientField::at(const FeSpace& space, std::size_t e, std::size_t q) const {
    if (const auto* c = std::get_if<double>(&field_)) {
        return *c;
    }
    if (const auto* dofs = std::get_if<std::span<const double>>(&field_)) {
        const std::size_t* v = space.mesh().element(e);
        double value = 0.0;
        for (std::size_t a = 0; a < space.nodes_per_element(); ++a) {
            value += space.shape(q, a) * (*dofs)[v[a]];
        }
        return value;
    }
    return std::get<ScalarFunction>(field_)(space.qp_point(e, q));
}

LocalMatrix local_stiffness(const FeSpace& space, std::size_t e) {
    LocalMatrix local{};
    const std::size_t npe = space.nodes_per_element();
    for (std::size_t q = 0; q < space.num_qp(); ++q) {
        const double w = space.jxw(e, q);
        for (std::size_t a = 0; a < npe; ++a) {
            const Point& da = space.grad(e, q, a);
            for (std::size_t b = 0; b < npe; ++b) {
                const Point& db = space.grad(e, q, b);
                local[a * npe + b] += w * (da[0] * db[0] + da[1] * db[1]);
            }
        }
    }
    return local;
}

LocalMatrix local_weighted_mass(const FeSpace& space, std::size_t e, const CoefficientField& w) {
    LocalMatrix local{};
    const std::size_t npe = space.nodes_per_element();
    for (std::size_t q = 0; q < space.num_qp(); ++q) {
        const double wq = w.at(space, e, q) * space.jxw(e, q);
        for (std::size_t a = 0; a < npe; ++a) {
            const double pa = wq * space.shape(q, a);
            for (std::size_t b = 0; b < npe; ++b) {
                local[a * npe + b] += pa * space.shape(q, b);
            }
        }
    }
    return local;
}

namespace {

template <typename LocalFn>
void assemble_into(const FeSpace& space, SparseMatrix& out, LocalFn local_fn) {
    if (out.shared_pattern() != space.pattern()) {
        throw InvalidArgument("assembly target does not live on the space's sparsity pattern");
    }
    out.set_zero();
    auto values = out.values();
    const std::size_t npe = space.nodes_per_element();
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const LocalMatrix local = local_fn(e);
        for (std::size_t a = 0; a < npe; ++a) {
            for (std::size_t b = 0; b < npe; ++b) {
                values[space.slot(e, a, b)] += local[a * npe + b];
            }
        }
    }
}

// Length of a straight 2D facet.
double facet_length(const Mesh& m, const Facet& f) {
    const Point& p = m.node(f.nodes[0]);
    const Point& q = m.node(f.nodes[1]);
    return std::hypot(q[0] - p[0], q[1] - p[1]);
}

}  // namespace

SparseMatrix stiffness(const FeSpace& space) {
    SparseMatrix k(space.pattern());
    assemble_into(space, k, [&](std::size_t e) { return local_stiffness(space, e); });
    return k;
}

SparseMatrix mass(const FeSpace& space) { return weighted_mass(space, CoefficientField::constant(1.0)); }

SparseMatrix weighted_mass(const FeSpace& space, const CoefficientField& w) {
    SparseMatrix m(space.pattern());
    weighted_mass_into(space, w, m);
    return m;
}

void weighted_mass_into(const FeSpace& space, const CoefficientField& w, SparseMatrix& out) {
    assemble_into(space, out, [&](std::size_t e) { return local_weighted_mass(space, e, w); });
}

SparseMatrix boundary_mass(const FeSpace& space, BoundaryTag tag) {
    SparseMatrix b(space.pattern());
    auto values = b.values();
    const Mesh& m = space.mesh();
    const SparsityPattern& p = *space.pattern();
    for (const Facet& f : m.facets()) {
        if (f.tag != tag) {
            continue;
        }
        if (m.dim() == 1) {
            values[p.find(f.nodes[0], f.nodes[0])] += 1.0;
            continue;
        }
        // Exact edge mass of the linear trace: (L/6) [[2, 1], [1, 2]].
        const double len = facet_length(m, f);
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t c = 0; c < 2; ++c) {
                values[p.find(f.nodes[a], f.nodes[c])] += len * (a == c ? 2.0 : 1.0) / 6.0;
            }
        }
    }
    return b;
}

Vector load(const FeSpace& space, const CoefficientField& f) {
    Vector b(space.n_dofs(), 0.0);
    const std::size_t npe = space.nodes_per_element();
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const std::size_t* v = space.mesh().element(e);
        for (std::size_t q = 0; q < space.num_qp(); ++q) {
            const double fq = f.at(space, e, q) * space.jxw(e, q);
            for (std::size_t a = 0; a < npe; ++a) {
                b[v[a]] += fq * space.shape(q, a);
            }
        }
    }
    return b;
}

Vector neumann_load(const FeSpace& space, BoundaryTag tag, double g) {
    Vector b(space.n_dofs(), 0.0);
    const Mesh& m = space.mesh();
    for (const Facet& f : m.facets()) {
        if (f.tag != tag) {
            continue;
        }
        if (m.dim() == 1) {
            b[f.nodes[0]] += g;
            continue;
        }
        const double half = 0.5 * g * facet_length(m, f);
        b[f.nodes[0]] += half;
        b[f.nodes[1]] += half;
    }
    return b;
}

void apply_dirichlet_in_place(SparseMatrix& a, std::span<double> b, const std::vector<char>& mask) {
    const SparsityPattern& p = a.pattern();
    if (mask.size() != p.n_rows || b.size() != p.n_rows || p.n_rows != p.n_cols) {
        throw InvalidArgument("apply_dirichlet: dimension mismatch");
    }
    auto values = a.values();
    for (std::size_t i = 0; i < p.n_rows; ++i) {
        const bool row_fixed = mask[i] != 0;
        for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
            const std::size_t j = p.columns[k];
            if (row_fixed) {
                values[k] = (j == i) ? 1.0 : 0.0;
            } else if (mask[j]) {
                values[k] = 0.0;
            }
        }
        if (row_fixed) {
            b[i] = 0.0;
        }
    }
}

std::pair<SparseMatrix, Vector> apply_dirichlet(SparseMatrix a, Vector b, std::span<const std::size_t> dofs) {
    if (dofs.empty()) {
        return {std::move(a), std::move(b)};
    }
    std::vector<char> mask(a.rows(), 0);
    for (std::size_t i : dofs) {
        if (i >= mask.size()) {
            throw InvalidArgument("apply_dirichlet: dof index out of range");
        }
        mask[i] = 1;
    }
    // Constrained rows need a diagonal slot.
    for (std::size_t i : dofs) {
        if (a.pattern().find(i, i) == a.nnz()) {
            throw InvalidArgument("apply_dirichlet: missing diagonal entry");
        }
    }
    apply_dirichlet_in_place(a, b, mask);
    return {std::move(a), std::move(b)};
}

}  // namespace wfem
