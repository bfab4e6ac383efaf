#include "wfem/mesh.hpp"

#include "wfem/exceptions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace wfem {

namespace {

double distance(const Point& a, const Point& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

// Jacobian determinant of the bilinear map at reference point (xi, eta) in [0,1]^2.
double quad_jacobian(const Point& p0, const Point& p1, const Point& p2, const Point& p3,
                     double xi, double eta) {
    const double dx_dxi = (1 - eta) * (p1[0] - p0[0]) + eta * (p2[0] - p3[0]);
    const double dy_dxi = (1 - eta) * (p1[1] - p0[1]) + eta * (p2[1] - p3[1]);
    const double dx_deta = (1 - xi) * (p3[0] - p0[0]) + xi * (p2[0] - p1[0]);
    const double dy_deta = (1 - xi) * (p3[1] - p0[1]) + xi * (p2[1] - p1[1]);
    return dx_dxi * dy_deta - dx_deta * dy_dxi;
}

std::size_t level_factor(int level) {
    if (level < 1) {
        throw InvalidArgument("mesh level must be >= 1, got " + std::to_string(level));
    }
    if (level > 20) {
        throw InvalidArgument("mesh level too large: " + std::to_string(level));
    }
    return std::size_t{1} << (level - 1);
}

}  // namespace

std::string_view to_string(BoundaryTag tag) {
    switch (tag) {
        case BoundaryTag::Dirichlet: return "dirichlet";
        case BoundaryTag::NeumannSource: return "neumann";
        case BoundaryTag::Absorbing: return "absorbing";
    }
    return "unknown";
}

Mesh::Mesh(int dim, std::vector<Point> nodes, std::vector<std::size_t> connectivity,
           std::vector<Facet> facets)
    : dim_(dim), nodes_(std::move(nodes)), connectivity_(std::move(connectivity)),
      facets_(std::move(facets)) {
    if (dim_ != 1 && dim_ != 2) {
        throw InvalidArgument("mesh dimension must be 1 or 2");
    }
    if (connectivity_.empty() || connectivity_.size() % nodes_per_element() != 0) {
        throw InvalidArgument("connectivity length is not a multiple of the element size");
    }
    validate();
    for (std::size_t e = 0; e < num_elements(); ++e) {
        h_max_ = std::max(h_max_, element_diameter(e));
    }
}

void Mesh::validate() const {
    for (std::size_t idx : connectivity_) {
        if (idx >= nodes_.size()) {
            throw InvalidArgument("element references node " + std::to_string(idx) + " out of range");
        }
    }
    for (const Facet& f : facets_) {
        for (std::size_t k = 0; k < facet_size(); ++k) {
            if (f.nodes[k] >= nodes_.size()) {
                throw InvalidArgument("facet references node out of range");
            }
        }
    }
    // Quadrature points of the 2x2 Gauss rule plus the vertices.
    const double g = 0.5 / std::sqrt(3.0);
    const std::array<double, 4> samples{0.0, 0.5 - g, 0.5 + g, 1.0};
    for (std::size_t e = 0; e < num_elements(); ++e) {
        const std::size_t* v = element(e);
        if (dim_ == 1) {
            if (!(nodes_[v[1]][0] > nodes_[v[0]][0])) {
                throw InvalidArgument("segment " + std::to_string(e) + " has non-positive length");
            }
            continue;
        }
        for (double xi : samples) {
            for (double eta : samples) {
                if (!(quad_jacobian(nodes_[v[0]], nodes_[v[1]], nodes_[v[2]], nodes_[v[3]], xi, eta) > 0.0)) {
                    throw InvalidArgument("quad " + std::to_string(e) + " has non-positive Jacobian");
                }
            }
        }
    }
}

double Mesh::element_diameter(std::size_t e) const {
    const std::size_t* v = element(e);
    const std::size_t n = nodes_per_element();
    double d = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            d = std::max(d, distance(nodes_[v[a]], nodes_[v[b]]));
        }
    }
    return d;
}

Mesh interval_mesh(double length, std::size_t n_elems, BoundaryTag tag_ends) {
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw InvalidArgument("interval length must be positive");
    }
    if (n_elems == 0) {
        throw InvalidArgument("interval mesh needs at least one element");
    }
    const double h = length / static_cast<double>(n_elems);
    std::vector<Point> nodes(n_elems + 1);
    for (std::size_t i = 0; i <= n_elems; ++i) {
        nodes[i] = {static_cast<double>(i) * h, 0.0};
    }
    std::vector<std::size_t> conn(2 * n_elems);
    for (std::size_t e = 0; e < n_elems; ++e) {
        conn[2 * e] = e;
        conn[2 * e + 1] = e + 1;
    }
    std::vector<Facet> facets{{{0, 0}, tag_ends}, {{n_elems, 0}, tag_ends}};
    return Mesh(1, std::move(nodes), std::move(conn), std::move(facets));
}

Mesh channel_mesh(int level) {
    return interval_mesh(0.2, 100 * level_factor(level), BoundaryTag::Dirichlet);
}

namespace {

// Structured grid from a node generator; node (i, j) has index j * (nx + 1) + i.
template <typename NodeAt>
Mesh structured_quads(std::size_t nx, std::size_t ny, SideTags tags, NodeAt node_at) {
    const std::size_t stride = nx + 1;
    std::vector<Point> nodes;
    nodes.reserve((nx + 1) * (ny + 1));
    for (std::size_t j = 0; j <= ny; ++j) {
        for (std::size_t i = 0; i <= nx; ++i) {
            nodes.push_back(node_at(i, j));
        }
    }
    std::vector<std::size_t> conn;
    conn.reserve(4 * nx * ny);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t n0 = j * stride + i;
            conn.insert(conn.end(), {n0, n0 + 1, n0 + 1 + stride, n0 + stride});
        }
    }
    std::vector<Facet> facets;
    facets.reserve(2 * (nx + ny));
    for (std::size_t i = 0; i < nx; ++i) {
        facets.push_back({{i, i + 1}, tags.bottom});
    }
    for (std::size_t j = 0; j < ny; ++j) {
        facets.push_back({{j * stride + nx, (j + 1) * stride + nx}, tags.right});
    }
    for (std::size_t i = nx; i > 0; --i) {
        facets.push_back({{ny * stride + i, ny * stride + i - 1}, tags.top});
    }
    for (std::size_t j = ny; j > 0; --j) {
        facets.push_back({{j * stride, (j - 1) * stride}, tags.left});
    }
    return Mesh(2, std::move(nodes), std::move(conn), std::move(facets));
}

}  // namespace

Mesh rectangle_mesh(double lx, double ly, std::size_t nx, std::size_t ny, SideTags tags) {
    if (!(lx > 0.0) || !(ly > 0.0)) {
        throw InvalidArgument("rectangle sides must be positive");
    }
    if (nx == 0 || ny == 0) {
        throw InvalidArgument("rectangle mesh needs at least one cell per direction");
    }
    return structured_quads(nx, ny, tags, [&](std::size_t i, std::size_t j) {
        return Point{lx * static_cast<double>(i) / static_cast<double>(nx),
                     ly * static_cast<double>(j) / static_cast<double>(ny)};
    });
}

double FocusGeometry::arc_y(double x) const {
    const double dx = x - cx;
    return cy - std::sqrt(radius_sq - dx * dx);
}

Mesh focus_mesh(int level, const FocusGeometry& geometry) {
    const std::size_t factor = level_factor(level);
    const std::size_t nx = 20 * factor;
    const std::size_t ny = 35 * factor;
    const SideTags tags{BoundaryTag::NeumannSource, BoundaryTag::Absorbing, BoundaryTag::Absorbing,
                        BoundaryTag::Absorbing};
    // Left and right sides are straight, so linear blending in j between the
    // arc and the top edge is the full transfinite interpolant.
    return structured_quads(nx, ny, tags, [&](std::size_t i, std::size_t j) {
        const double x = geometry.width * static_cast<double>(i) / static_cast<double>(nx);
        const double bottom = geometry.arc_y(x);
        if (j == 0) {
            return Point{x, bottom};
        }
        const double s = static_cast<double>(j) / static_cast<double>(ny);
        return Point{x, (1.0 - s) * bottom + s * geometry.height};
    });
}

double mesh_size(const Mesh& mesh) { return mesh.h_max(); }

void write_mesh(std::ostream& out, const Mesh& mesh) {
    const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << mesh.dim() << ' ' << mesh.num_nodes() << ' ' << mesh.num_elements() << ' '
        << mesh.num_facets() << '\n';
    for (const Point& p : mesh.nodes()) {
        out << p[0];
        if (mesh.dim() == 2) {
            out << ' ' << p[1];
        }
        out << '\n';
    }
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const std::size_t* v = mesh.element(e);
        for (std::size_t a = 0; a < mesh.nodes_per_element(); ++a) {
            out << (a ? " " : "") << v[a];
        }
        out << '\n';
    }
    for (const Facet& f : mesh.facets()) {
        out << to_string(f.tag) << ' ' << f.nodes[0];
        if (mesh.dim() == 2) {
            out << ' ' << f.nodes[1];
        }
        out << '\n';
    }
    out.precision(precision);
}

}  // namespace wfem
