#include "fieldfuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fieldfuse {

MaskedField to_masked(const Vec& v) {
    MaskedField out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::isfinite(v(i))) out[i] = v(i);
    }
    return out;
}

void validate_grid(const SurfaceGrid& g) {
    const int n = g.size();
    if (n == 0) throw GeometryError("grid has no cells");
    if (g.centers.rows() != n || g.normals.rows() != n || g.centers.cols() != g.dim ||
        g.normals.cols() != g.dim)
        throw GeometryError("grid arrays have inconsistent shapes");
    for (int i = 0; i < n; ++i) {
        if (!(g.measures(i) > 0.0)) {
            std::ostringstream os;
            os << "cell " << i << " has non-positive measure " << g.measures(i);
            throw GeometryError(os.str());
        }
        if (std::abs(g.normals.row(i).norm() - 1.0) > 1e-12)
            throw GeometryError("normal of cell " + std::to_string(i) + " is not unit length");
    }
    if (g.closed) {
        Eigen::RowVectorXd s = g.measures.transpose() * g.normals;
        if (s.norm() > 1e-6 * g.measures.sum())
            throw GeometryError("closed grid violates the discrete divergence identity");
    }
}

std::string qoi_name(Qoi q, int dim) {
    if (q == Qoi::Lift) return dim == 2 ? "C_l" : "C_L";
    return dim == 2 ? "C_m" : "C_M";
}

SurfaceGrid make_polyline_grid(const Mat& nodes, bool closed) {
    const int nn = static_cast<int>(nodes.rows());
    const int n = closed ? nn : nn - 1;
    if (nodes.cols() != 2) throw ArgumentError("polyline nodes must have two columns (x, z)");
    if (n < 1) throw ArgumentError("polyline needs at least two nodes");
    SurfaceGrid g;
    g.dim = 2;
    g.closed = closed;
    g.nodes = nodes;
    g.centers.resize(n, 2);
    g.normals.resize(n, 2);
    g.measures.resize(n);
    for (int i = 0; i < n; ++i) {
        Eigen::RowVector2d a = nodes.row(i);
        Eigen::RowVector2d b = nodes.row((i + 1) % nn);
        Eigen::RowVector2d t = b - a;
        double len = t.norm();
        if (!(len > 0.0)) throw GeometryError("zero-length cell at node " + std::to_string(i));
        t /= len;
        g.centers.row(i) = 0.5 * (a + b);
        g.measures(i) = len;
        g.normals(i, 0) = t(1);
        g.normals(i, 1) = -t(0);
    }
    g.ref_point = Vec::Zero(2);
    return g;
}

namespace {

double cross2(const Point2& o, const Point2& a, const Point2& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

bool segments_cross(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
    double d1 = cross2(q1, q2, p1), d2 = cross2(q1, q2, p2);
    double d3 = cross2(p1, p2, q1), d4 = cross2(p1, p2, q2);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

double dist(const Point2& a, const Point2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

SurfaceGrid build_airfoil_grid(const std::vector<Point2>& upper, const std::vector<Point2>& lower,
                               int n) {
    if (n < 8) throw ArgumentError("airfoil grid needs n >= 8, got " + std::to_string(n));
    if (upper.size() < 2 || lower.size() < 2)
        throw GeometryError("each surface needs at least two points");
    const Point2 le = upper.front(), te = upper.back();
    const double chord = dist(le, te);
    if (!(chord > 0.0)) throw GeometryError("leading and trailing edge coincide");
    const double tol = 1e-9 * std::max(1.0, chord);
    if (dist(le, lower.front()) > tol || dist(te, lower.back()) > tol)
        throw GeometryError("open curve: upper and lower surfaces do not share both end points");

    // TE -> upper -> LE -> lower -> (TE)
    std::vector<Point2> loop;
    for (auto it = upper.rbegin(); it != upper.rend(); ++it) loop.push_back(*it);
    for (size_t i = 1; i + 1 < lower.size(); ++i) loop.push_back(lower[i]);
    std::vector<Point2> pts;
    for (const auto& p : loop) {
        if (pts.empty() || dist(pts.back(), p) > tol) pts.push_back(p);
    }
    const size_t N = pts.size();
    if (N < 3) throw GeometryError("degenerate curve");

    for (size_t i = 0; i < N; ++i) {
        for (size_t j = i + 2; j < N; ++j) {
            if (i == 0 && j == N - 1) continue;
            if (segments_cross(pts[i], pts[i + 1], pts[j], pts[(j + 1) % N]))
                throw GeometryError("self-intersecting curve (segments " + std::to_string(i) +
                                    " and " + std::to_string(j) + ")");
        }
    }

    double area = 0.0;
    for (size_t i = 0; i < N; ++i) {
        const auto& a = pts[i];
        const auto& b = pts[(i + 1) % N];
        area += a[0] * b[1] - b[0] * a[1];
    }
    if (area < 0.0) std::reverse(pts.begin() + 1, pts.end());

    std::vector<double> cum(N + 1, 0.0);
    for (size_t i = 0; i < N; ++i) cum[i + 1] = cum[i] + dist(pts[i], pts[(i + 1) % N]);
    const double L = cum[N];

    Mat nodes(n, 2);
    size_t seg = 0;
    for (int k = 0; k < n; ++k) {
        double s = L * k / n;
        while (seg + 1 < N && cum[seg + 1] <= s) ++seg;
        const auto& a = pts[seg];
        const auto& b = pts[(seg + 1) % N];
        double w = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
        nodes(k, 0) = a[0] + w * (b[0] - a[0]);
        nodes(k, 1) = a[1] + w * (b[1] - a[1]);
    }

    SurfaceGrid g = make_polyline_grid(nodes, true);
    g.ref_length = chord;
    g.ref_area = chord;
    g.ref_point.resize(2);
    g.ref_point << le[0] + 0.25 * (te[0] - le[0]), le[1] + 0.25 * (te[1] - le[1]);
    validate_grid(g);
    return g;
}

std::pair<std::vector<Point2>, std::vector<Point2>> naca4(double m, double p, double t,
                                                          int points_per_side) {
    if (points_per_side < 2) throw ArgumentError("naca4 needs at least two points per side");
    std::vector<Point2> up, lo;
    for (int i = 0; i < points_per_side; ++i) {
        double beta = M_PI * i / (points_per_side - 1);
        double x = 0.5 * (1.0 - std::cos(beta));
        // closed trailing edge variant of the thickness polynomial
        double yt = 5.0 * t *
                    (0.2969 * std::sqrt(x) - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x -
                     0.1036 * x * x * x * x);
        double yc = 0.0, dyc = 0.0;
        if (m > 0.0 && p > 0.0) {
            if (x < p) {
                yc = m / (p * p) * (2 * p * x - x * x);
                dyc = 2 * m / (p * p) * (p - x);
            } else {
                yc = m / ((1 - p) * (1 - p)) * ((1 - 2 * p) + 2 * p * x - x * x);
                dyc = 2 * m / ((1 - p) * (1 - p)) * (p - x);
            }
        }
        double th = std::atan(dyc);
        up.push_back({x - yt * std::sin(th), yc + yt * std::cos(th)});
        lo.push_back({x + yt * std::sin(th), yc - yt * std::cos(th)});
    }
    return {up, lo};
}

SurfaceGrid build_wing_grid(const std::vector<Point2>& upper, const std::vector<Point2>& lower,
                            int chord_cells, int span_cells, double semi_span) {
    if (span_cells < 2) throw ArgumentError("wing grid needs at least two span strips");
    if (!(semi_span > 0.0)) throw ArgumentError("semi-span must be positive");
    SurfaceGrid sec = build_airfoil_grid(upper, lower, chord_cells);
    const int nc = chord_cells, ns = span_cells;

    auto node = [&](int i, int j) {
        double eta = -1.0 + 2.0 * j / ns;
        double f = std::sqrt(std::max(0.0, 1.0 - eta * eta));
        const int ii = i % nc;
        return Eigen::Vector3d(sec.nodes(ii, 0), semi_span * eta, f * sec.nodes(ii, 1));
    };

    SurfaceGrid g;
    g.dim = 3;
    g.closed = true;
    g.nodes.resize(nc * (ns + 1), 3);
    for (int j = 0; j <= ns; ++j)
        for (int i = 0; i < nc; ++i) g.nodes.row(j * nc + i) = node(i, j).transpose();

    const int n = nc * ns;
    g.centers.resize(n, 3);
    g.normals.resize(n, 3);
    g.measures.resize(n);
    Mat vec_area(n, 3);
    double vol = 0.0;
    for (int j = 0; j < ns; ++j) {
        for (int i = 0; i < nc; ++i) {
            const int c = j * nc + i;
            Eigen::Vector3d p0 = node(i, j), p1 = node(i + 1, j), p2 = node(i + 1, j + 1),
                            p3 = node(i, j + 1);
            Eigen::Vector3d a = 0.5 * (p2 - p0).cross(p3 - p1);
            Eigen::Vector3d ctr = 0.25 * (p0 + p1 + p2 + p3);
            vec_area.row(c) = a.transpose();
            g.centers.row(c) = ctr.transpose();
            vol += ctr.dot(a);
        }
    }
    if (vol < 0.0) vec_area = -vec_area;
    for (int c = 0; c < n; ++c) {
        double a = vec_area.row(c).norm();
        if (!(a > 0.0)) throw GeometryError("degenerate wing cell " + std::to_string(c));
        g.measures(c) = a;
        g.normals.row(c) = vec_area.row(c) / a;
    }
    g.ref_length = sec.ref_length;
    g.ref_area = 2.0 * semi_span * sec.ref_length;
    g.ref_point = Vec::Zero(3);
    g.ref_point(0) = sec.ref_point(0);
    g.ref_point(2) = sec.ref_point(1);
    validate_grid(g);
    return g;
}

OutputOperator make_operator(Mat H, std::vector<std::string> names, Vec offset, double alpha,
                             bool check_rank) {
    const Eigen::Index n = H.rows(), m = H.cols();
    if (m == 0 || n == 0) throw ArgumentError("operator must have at least one row and column");
    if (static_cast<Eigen::Index>(names.size()) != m)
        throw ArgumentError("operator needs one name per QoI column");
    if (offset.size() == 0) offset = Vec::Zero(m);
    if (offset.size() != m) throw ArgumentError("offset length must equal the QoI count");
    if (check_rank) {
        if (m >= n) throw OperatorError("operator needs fewer QoIs than cells");
        Eigen::JacobiSVD<Mat, Eigen::ColPivHouseholderQRPreconditioner> svd(H);
        const Vec& s = svd.singularValues();
        if (!(s(m - 1) > 1e-10 * s(0)))
            throw OperatorError("output operator is rank deficient (smallest singular value " +
                                std::to_string(s(m - 1)) + ")");
    }
    OutputOperator op;
    op.H = std::move(H);
    op.qoi_names = std::move(names);
    op.offset = std::move(offset);
    op.alpha = alpha;
    return op;
}

OutputOperator build_output_operator(const SurfaceGrid& grid, double alpha,
                                     const std::vector<Qoi>& qois, const Vec& offset) {
    if (qois.empty()) throw ArgumentError("at least one QoI is required");
    validate_grid(grid);
    const int n = grid.size(), m = static_cast<int>(qois.size());
    const int vz = grid.vertical();
    Mat H(n, m);
    std::vector<std::string> names;
    for (int q = 0; q < m; ++q) {
        names.push_back(qoi_name(qois[q], grid.dim));
        for (int i = 0; i < n; ++i) {
            const double nx = grid.normals(i, 0), nz = grid.normals(i, vz);
            if (qois[q] == Qoi::Lift) {
                // wind-axis lift direction (-sin a, cos a) in the x-z plane
                double ne = -nx * std::sin(alpha) + nz * std::cos(alpha);
                H(i, q) = -grid.measures(i) * ne / grid.ref_area;
            } else {
                double rx = grid.centers(i, 0) - grid.ref_point(0);
                double rz = grid.centers(i, vz) - grid.ref_point(vz);
                H(i, q) = -grid.measures(i) * (rz * nx - rx * nz) /
                          (grid.ref_area * grid.ref_length);
            }
        }
    }
    return make_operator(std::move(H), std::move(names), offset, alpha, true);
}

Vec apply_forward(const OutputOperator& op, const Vec& y) {
    if (y.size() != op.n())
        throw ArgumentError("field length " + std::to_string(y.size()) +
                            " does not match operator rows " + std::to_string(op.n()));
    return op.H.transpose() * y + op.offset;
}

Vec interpolate_to_common_grid(const Vec& values, const SurfaceGrid& source,
                               const SurfaceGrid& target) {
    const int ns = source.size(), nt = target.size();
    if (ns == 0) throw ArgumentError("empty source grid");
    if (values.size() != ns) throw ArgumentError("field length does not match source grid");
    if (source.dim != target.dim) throw ArgumentError("source and target dimensions differ");

    Eigen::RowVectorXd smin = source.centers.colwise().minCoeff();
    Eigen::RowVectorXd smax = source.centers.colwise().maxCoeff();
    Eigen::RowVectorXd tmin = target.centers.colwise().minCoeff();
    Eigen::RowVectorXd tmax = target.centers.colwise().maxCoeff();
    const double extent = std::max((smax - smin).maxCoeff(), (tmax - tmin).maxCoeff());
    if ((smin - tmin).cwiseAbs().maxCoeff() > 0.05 * extent ||
        (smax - tmax).cwiseAbs().maxCoeff() > 0.05 * extent)
        throw ArgumentError("source and target grids do not describe the same geometry");

    const int K = std::min(4, ns);
    Vec out(nt);
    std::vector<int> idx(ns);
    Vec d2(ns);
    for (int t = 0; t < nt; ++t) {
        d2 = (source.centers.rowwise() - target.centers.row(t)).rowwise().squaredNorm();
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + K, idx.end(),
                          [&](int a, int b) { return d2(a) < d2(b) || (d2(a) == d2(b) && a < b); });
        if (std::sqrt(d2(idx[0])) < 1e-12) {
            out(t) = values(idx[0]);
            continue;
        }
        double num = 0.0, den = 0.0;
        for (int k = 0; k < K; ++k) {
            double w = 1.0 / d2(idx[k]);
            num += w * values(idx[k]);
            den += w;
        }
        out(t) = num / den;
    }
    return out;
}

Vec impute_missing(const MaskedField& values, const SurfaceGrid& grid) {
    const int n = grid.size();
    if (static_cast<int>(values.size()) != n)
        throw ArgumentError("field length does not match grid");
    std::vector<int> present;
    for (int i = 0; i < n; ++i)
        if (values[i].has_value()) present.push_back(i);
    if (present.empty()) throw DataError("all cells are missing");
    if (10 * static_cast<long>(present.size()) < n)
        throw DataError("fewer than 10% of cells are present");

    Vec out(n);
    for (int i = 0; i < n; ++i) {
        if (values[i].has_value()) {
            out(i) = *values[i];
            continue;
        }
        double num = 0.0, den = 0.0;
        bool exact = false;
        for (int j : present) {
            double d2 = (grid.centers.row(j) - grid.centers.row(i)).squaredNorm();
            if (d2 < 1e-24) {
                out(i) = *values[j];
                exact = true;
                break;
            }
            num += *values[j] / d2;
            den += 1.0 / d2;
        }
        if (!exact) out(i) = num / den;
    }
    return out;
}

double total_variation(const Vec& y, bool closed) {
    const Eigen::Index n = y.size();
    if (n < 2) return 0.0;
    double tv = (y.tail(n - 1) - y.head(n - 1)).cwiseAbs().sum();
    if (closed) tv += std::abs(y(0) - y(n - 1));
    return tv;
}

}  // namespace fieldfuse
