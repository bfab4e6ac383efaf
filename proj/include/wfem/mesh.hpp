#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace wfem {

/// Physical coordinates in meters; the second component is unused (zero) in 1D.
using Point = std::array<double, 2>;

enum class BoundaryTag { Dirichlet, NeumannSource, Absorbing };

std::string_view to_string(BoundaryTag tag);

/// A boundary facet: one node in 1D, an edge (two nodes) in 2D.
struct Facet {
    std::array<std::size_t, 2> nodes{};
    BoundaryTag tag = BoundaryTag::Dirichlet;
};

/// Conforming mesh of P1 segments (dim 1) or Q1 quadrilaterals (dim 2).
///
/// Element node tuples are stored flat: 2 entries per segment, 4 per quad in
/// counterclockwise order. The mesh is immutable once constructed.
class Mesh {
public:
    Mesh(int dim, std::vector<Point> nodes, std::vector<std::size_t> connectivity,
         std::vector<Facet> facets);

    int dim() const noexcept { return dim_; }
    std::size_t nodes_per_element() const noexcept { return dim_ == 1 ? 2 : 4; }
    std::size_t facet_size() const noexcept { return dim_ == 1 ? 1 : 2; }

    std::size_t num_nodes() const noexcept { return nodes_.size(); }
    std::size_t num_elements() const noexcept { return connectivity_.size() / nodes_per_element(); }
    std::size_t num_facets() const noexcept { return facets_.size(); }

    const std::vector<Point>& nodes() const noexcept { return nodes_; }
    const Point& node(std::size_t i) const { return nodes_[i]; }
    const std::vector<Facet>& facets() const noexcept { return facets_; }

    /// Node indices of element `e`.
    const std::size_t* element(std::size_t e) const { return connectivity_.data() + e * nodes_per_element(); }

    /// Largest distance between two vertices of element `e`.
    double element_diameter(std::size_t e) const;
    double h_max() const noexcept { return h_max_; }

private:
    void validate() const;

    int dim_;
    std::vector<Point> nodes_;
    std::vector<std::size_t> connectivity_;
    std::vector<Facet> facets_;
    double h_max_ = 0.0;
};

/// Uniform mesh of [0, length] with both endpoints tagged `tag_ends`.
Mesh interval_mesh(double length, std::size_t n_elems, BoundaryTag tag_ends);

/// Channel mesh of level N: 100 * 2^(N-1) segments on [0, 0.2] m, Dirichlet ends.
Mesh channel_mesh(int level);

/// Tags of the four sides of a structured quad grid.
struct SideTags {
    BoundaryTag bottom = BoundaryTag::Dirichlet;
    BoundaryTag right = BoundaryTag::Dirichlet;
    BoundaryTag top = BoundaryTag::Dirichlet;
    BoundaryTag left = BoundaryTag::Dirichlet;
};

/// Structured nx-by-ny quad grid of [0, lx] x [0, ly].
Mesh rectangle_mesh(double lx, double ly, std::size_t nx, std::size_t ny, SideTags tags = {});

/// Geometry of the focused-ultrasound domain: the rectangle [0, width] x [0, height]
/// whose bottom side is replaced by an arc of the circle (x - cx)^2 + (y - cy)^2 = radius_sq.
struct FocusGeometry {
    double width = 0.04;
    double height = 0.05;
    double cx = 0.02;
    double cy = 0.04;
    double radius_sq = 0.002;

    double arc_y(double x) const;
};

/// Focus mesh of level N: 20 * 2^(N-1) cells across, 35 * 2^(N-1) along the
/// propagation direction. Bottom row on the arc, interior rows blended linearly
/// towards the top edge. Bottom facets NeumannSource, other sides Absorbing.
Mesh focus_mesh(int level, const FocusGeometry& geometry = {});

double mesh_size(const Mesh& mesh);

/// Plain-text dump: header `dim n_nodes n_elems n_facets`, node lines, element
/// lines, facet lines `tag i [j]`.
void write_mesh(std::ostream& out, const Mesh& mesh);

}  // namespace wfem
