#pragma once

#include "fieldfuse/common.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace fieldfuse {

using Point2 = std::array<double, 2>;

// Discrete surface. Coordinates are stored row-wise; 2D grids use (x, z),
// 3D grids use (x, y, z). Cells of a 2D grid are the polygon edges between
// consecutive nodes.
struct SurfaceGrid {
    int dim = 2;
    Mat nodes;
    Mat centers;
    Vec measures;
    Mat normals;
    double ref_length = 1.0;
    double ref_area = 1.0;
    Vec ref_point;
    bool closed = true;

    int size() const { return static_cast<int>(measures.size()); }
    // column index of the vertical coordinate (z)
    int vertical() const { return dim == 2 ? 1 : 2; }
};

// Throws GeometryError when an invariant does not hold.
void validate_grid(const SurfaceGrid& g);

struct OutputOperator {
    Mat H;  // n x m
    std::vector<std::string> qoi_names;
    Vec offset;  // delta, length m
    double alpha = 0.0;

    int n() const { return static_cast<int>(H.rows()); }
    int m() const { return static_cast<int>(H.cols()); }
};

enum class Qoi { Lift, Moment };

std::string qoi_name(Qoi q, int dim);

// Cells between consecutive nodes of an ordered 2D polyline (x, z rows).
// Normals are (t_z, -t_x), i.e. outward for a counter-clockwise loop.
SurfaceGrid make_polyline_grid(const Mat& nodes, bool closed);

// Both surfaces run from leading edge to trailing edge.
SurfaceGrid build_airfoil_grid(const std::vector<Point2>& upper,
                               const std::vector<Point2>& lower, int n);

// NACA 4-digit section with a closed trailing edge, cosine-spaced.
std::pair<std::vector<Point2>, std::vector<Point2>> naca4(double camber, double camber_pos,
                                                          double thickness, int points_per_side);

// Closed wing: the section is resampled to chord_cells nodes and swept over
// span_cells strips with an elliptic thickness taper reaching zero at the tips.
SurfaceGrid build_wing_grid(const std::vector<Point2>& upper, const std::vector<Point2>& lower,
                            int chord_cells, int span_cells, double semi_span);

OutputOperator build_output_operator(const SurfaceGrid& grid, double alpha,
                                     const std::vector<Qoi>& qois,
                                     const Vec& offset = Vec());

// Raw assembly without the rank check; used by tests that need a degenerate H.
OutputOperator make_operator(Mat H, std::vector<std::string> names, Vec offset = Vec(),
                             double alpha = 0.0, bool check_rank = true);

Vec apply_forward(const OutputOperator& op, const Vec& y);

Vec interpolate_to_common_grid(const Vec& values, const SurfaceGrid& source,
                               const SurfaceGrid& target);

Vec impute_missing(const MaskedField& values, const SurfaceGrid& grid);

double total_variation(const Vec& y, bool closed);

}  // namespace fieldfuse
