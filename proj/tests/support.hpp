#pragma once

#include "fieldfuse/geometry.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace tsupport {

using namespace fieldfuse;

// Unit circle given as two semicircles from (-1,0) to (1,0), `points` total
// distinct points on the curve.
inline std::pair<std::vector<Point2>, std::vector<Point2>> circle(int points) {
    std::vector<Point2> up, lo;
    const int half = points / 2;
    for (int i = 0; i <= half; ++i) {
        double t = M_PI * i / half;
        up.push_back({-std::cos(t), std::sin(t)});
        lo.push_back({-std::cos(t), -std::sin(t)});
    }
    return {up, lo};
}

inline SurfaceGrid naca0012(int n) {
    auto [up, lo] = naca4(0.0, 0.0, 0.12, 801);
    return build_airfoil_grid(up, lo, n);
}

inline Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = nd(rng);
    return v;
}

inline Mat random_mat(std::mt19937_64& rng, int r, int c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = nd(rng);
    return m;
}

inline Mat random_spd(std::mt19937_64& rng, int n) {
    Mat A = random_mat(rng, n, n);
    return A * A.transpose() / n + 0.5 * Mat::Identity(n, n);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace tsupport
