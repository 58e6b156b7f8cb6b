#include "fieldfuse/synth.hpp"

#include "fieldfuse/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace fieldfuse {

namespace {

enum Stream : std::uint64_t {
    kBias = 1,
    kMeasurement = 2,
    kQoi = 3,
    kLhsCandidate = 10,
    kTableCase = 100,
    kLhsCase = 200,
};

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    return splitmix(splitmix(splitmix(base) ^ stream) ^ index);
}

void validate_spec(const ScenarioSpec& s) {
    if (s.grid.n < 8) throw ArgumentError("grid needs at least 8 cells");
    if (s.grid.wing && (s.grid.span_cells < 2 || s.grid.n % s.grid.span_cells != 0 ||
                        s.grid.n / s.grid.span_cells < 8))
        throw ArgumentError("wing cell count must be span_cells x chord_cells with chord_cells >= 8");
    if (!(s.grid.thickness > 0.0 && s.grid.thickness < 0.5)) throw ArgumentError("thickness must lie in (0, 0.5)");
    if (s.truth.shock_position && !(*s.truth.shock_position > 0.0 && *s.truth.shock_position < 1.0))
        throw ArgumentError("shock position must lie in (0, 1)");
    if (!(s.truth.shock_width > 0.0)) throw ArgumentError("shock width must be > 0");
    if (s.truth.shock_strength && !(*s.truth.shock_strength >= 0.0))
        throw ArgumentError("shock strength must be >= 0");
    const auto& c = s.corruption;
    if (!(c.noise_std >= 0.0) || !(c.bias_amplitude >= 0.0) || !(s.tau >= 0.0))
        throw ArgumentError("noise levels must be >= 0");
    if (!(c.gap_fraction >= 0.0 && c.gap_fraction <= 0.5)) throw ArgumentError("gap fraction must lie in [0, 0.5]");
    if (!(c.bias_length > 0.0)) throw ArgumentError("bias length-scale must be > 0");
    if (!(s.condition.mach > 0.0 && s.condition.reynolds > 0.0)) throw ArgumentError("Mach and Reynolds must be > 0");
}

SurfaceGrid build_scenario_grid(const GridConfig& g) {
    auto [up, lo] = naca4(0.0, 0.0, g.thickness, 801);
    if (!g.wing) return build_airfoil_grid(up, lo, g.n);
    return build_wing_grid(up, lo, g.n / g.span_cells, g.span_cells, g.semi_span);
}

double shock_position(const ScenarioSpec& s) {
    if (s.truth.shock_position) return *s.truth.shock_position;
    return std::clamp(0.2 + 1.6 * (s.condition.mach - 0.6) + 0.02 * s.condition.alpha_deg, 0.05, 0.85);
}

double shock_strength(const ScenarioSpec& s) {
    if (s.truth.shock_strength) return *s.truth.shock_strength;
    return std::max(0.0, (s.condition.mach - 0.62) / 0.13) * 0.6;
}

Vec generate_truth(const ScenarioSpec& spec, const SurfaceGrid& grid) {
    const int n = grid.size(), vz = grid.vertical();
    const double a = spec.condition.alpha_deg;
    const double amp = spec.truth.amplitude;
    const double xs = shock_position(spec), S = shock_strength(spec), w = spec.truth.shock_width;
    const double le = grid.ref_point(0) - 0.25 * grid.ref_length;
    const double half_span =
        grid.dim == 3 ? std::max(-grid.nodes.col(1).minCoeff(), grid.nodes.col(1).maxCoeff()) : 1.0;
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        double x = std::clamp((grid.centers(i, 0) - le) / grid.ref_length, 0.0, 1.0);
        double span = 1.0;
        if (grid.dim == 3) {
            double eta = grid.centers(i, 1) / half_span;
            span = std::sqrt(std::max(0.0, 1.0 - eta * eta));
        }
        // stagnation near the nose blends into the suction/pressure loading
        double s = 1.0 - std::exp(-x / 0.015);
        if (grid.centers(i, vz) >= 0.0) {
            double P = span * amp * (0.55 + 0.12 * a);
            double shock = span * S * 0.5 * (1.0 + std::tanh((x - xs) / w));
            y(i) = (1.0 - s) + s * (-P * (1.0 - 0.5 * x)) + shock + 0.25 * x * x;
        } else {
            double P = span * amp * (0.25 - 0.08 * a);
            y(i) = (1.0 - s) + s * (-P * std::pow(1.0 - x, 1.5)) + 0.15 * x * x;
        }
    }
    return y;
}

Measurement corrupt_measurement(const Vec& y_true, const ScenarioSpec& spec, std::uint64_t seed) {
    const int n = static_cast<int>(y_true.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Measurement m;
    m.noise.resize(n);
    for (int i = 0; i < n; ++i) m.noise(i) = spec.corruption.noise_std * nd(rng);
    m.gap_length = static_cast<int>(std::lround(spec.corruption.gap_fraction * n));
    m.gap_start = m.gap_length > 0 ? std::uniform_int_distribution<int>(0, n - m.gap_length)(rng) : 0;
    m.values.resize(n);
    for (int i = 0; i < n; ++i) {
        if (i >= m.gap_start && i < m.gap_start + m.gap_length) continue;
        m.values[i] = y_true(i) + m.noise(i);
    }
    return m;
}

Simulation bias_simulation(const Vec& y_true, const ScenarioSpec& spec, const SurfaceGrid& grid,
                           std::uint64_t seed) {
    const int n = grid.size();
    if (y_true.size() != n) throw ArgumentError("field length does not match grid");
    Simulation sim;
    sim.values = y_true;
    sim.bias = Vec::Zero(n);
    const auto& c = spec.corruption;
    if (c.shock_shift != 0.0) {
        ScenarioSpec shifted = spec;
        shifted.truth.shock_position = std::clamp(shock_position(spec) + c.shock_shift, 0.02, 0.98);
        sim.values += generate_truth(shifted, grid) - generate_truth(spec, grid);
    }
    if (c.bias_amplitude > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        Vec xi(n);
        for (int i = 0; i < n; ++i) xi(i) = nd(rng);
        PriorSpec filter;
        filter.mean = Vec::Zero(n);
        filter.sigma2 = 1.0;
        filter.length_scale = c.bias_length;
        filter.nugget = 0.0;
        filter.coords = grid.centers;
        Vec b = filter.cov_mul(xi);
        double peak = b.cwiseAbs().maxCoeff();
        if (peak > 0.0) sim.bias = c.bias_amplitude * b / peak;
        sim.values += sim.bias;
    }
    return sim;
}

QoiDraw measure_qois(const Vec& y_true, const OutputOperator& op, double tau2, std::uint64_t seed) {
    if (!(tau2 >= 0.0)) throw ArgumentError("tau2 must be >= 0");
    QoiDraw q;
    q.z_noiseless = apply_forward(op, y_true);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    q.noise.resize(op.m());
    for (int i = 0; i < op.m(); ++i) q.noise(i) = std::sqrt(tau2) * nd(rng);
    q.z_measured = q.z_noiseless + q.noise;
    return q;
}

Mat latin_hypercube(int count, int dims, std::uint64_t seed) {
    if (count < 1 || dims < 1) throw ArgumentError("LHS needs count >= 1 and dims >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat X(count, dims);
    std::vector<int> perm(count);
    for (int d = 0; d < dims; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < count; ++i) X(i, d) = (perm[i] + u(rng)) / count;
    }
    return X;
}

double maximin_score(const Mat& X) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = i + 1; j < X.rows(); ++j)
            best = std::min(best, (X.row(i) - X.row(j)).norm());
    return best;
}

LhsDesign maximin_lhs(int count, int dims, std::uint64_t seed, int candidates) {
    if (candidates < 1) throw ArgumentError("need at least one candidate design");
    LhsDesign best;
    best.score = -1.0;
    for (int r = 0; r < candidates; ++r) {
        Mat X = latin_hypercube(count, dims, derive_seed(seed, kLhsCandidate, r));
        double s = maximin_score(X);
        if (s > best.score) {
            best.unit = std::move(X);
            best.score = s;
        }
    }
    return best;
}

std::vector<FlightCondition> lhs_conditions(int count, const ConditionBounds& b, std::uint64_t seed) {
    LhsDesign d = maximin_lhs(count, 3, seed);
    std::vector<FlightCondition> out;
    for (int i = 0; i < count; ++i) {
        out.push_back({b.mach_lo + d.unit(i, 0) * (b.mach_hi - b.mach_lo),
                       b.re_lo + d.unit(i, 1) * (b.re_hi - b.re_lo),
                       b.alpha_lo + d.unit(i, 2) * (b.alpha_hi - b.alpha_lo)});
    }
    return out;
}

std::vector<FlightCondition> table1_conditions() {
    return {{0.676, 5.7e6, 2.40},  {0.676, 5.7e6, -2.18}, {0.600, 6.3e6, 2.57},
            {0.725, 6.5e6, 2.92},  {0.725, 6.5e6, 2.55},  {0.728, 6.5e6, 3.22},
            {0.730, 6.5e6, 3.19},  {0.750, 6.2e6, 3.19},  {0.730, 2.7e6, 3.19},
            {0.745, 2.7e6, 3.19},  {0.740, 2.7e6, 3.19}};
}

SnapshotSet generate_snapshot_bank(const ScenarioSpec& base, const std::vector<BankEntry>& entries,
                                   const SurfaceGrid& grid) {
    const int n = grid.size();
    std::vector<Vec> cols;
    SnapshotSet s;
    for (const auto& e : entries) {
        ScenarioSpec spec = base;
        spec.condition = e.condition;
        spec.seed = e.seed;
        validate_spec(spec);
        Vec truth = generate_truth(spec, grid);
        if (e.measurement) {
            Measurement m = corrupt_measurement(truth, spec, derive_seed(e.seed, kMeasurement));
            cols.push_back(impute_missing(m.values, grid));
            s.conditions.push_back(e.condition);
            s.fidelity.push_back(Fidelity::Measurement);
        }
        if (e.simulation) {
            cols.push_back(bias_simulation(truth, spec, grid, derive_seed(e.seed, kBias)).values);
            s.conditions.push_back(e.condition);
            s.fidelity.push_back(Fidelity::Simulation);
        }
    }
    s.U.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) s.U.col(static_cast<Eigen::Index>(j)) = cols[j];
    validate_snapshots(s);
    return s;
}

ScenarioSpec table_case(const ScenarioSpec& base, int k) {
    auto conds = table1_conditions();
    if (k < 0 || k >= static_cast<int>(conds.size())) throw ArgumentError("table case index out of range");
    ScenarioSpec s = base;
    s.condition = conds[k];
    s.seed = derive_seed(base.seed, kTableCase, static_cast<std::uint64_t>(k));
    return s;
}

SnapshotSet standard_bank(const ScenarioSpec& base, const SurfaceGrid& grid, int lhs_count) {
    if (lhs_count < 0) throw ArgumentError("LHS size must be >= 0");
    std::vector<BankEntry> entries;
    const int nt = static_cast<int>(table1_conditions().size());
    for (int k = 0; k < nt; ++k) {
        ScenarioSpec c = table_case(base, k);
        entries.push_back({c.condition, true, lhs_count == 0, c.seed});
    }
    if (lhs_count > 0) {
        auto conds = lhs_conditions(lhs_count, ConditionBounds{}, derive_seed(base.seed, kLhsCase));
        for (int j = 0; j < lhs_count; ++j)
            entries.push_back({conds[j], false, true, derive_seed(base.seed, kLhsCase, j + 1)});
    }
    return generate_snapshot_bank(base, entries, grid);
}

ScenarioBundle make_scenario(const ScenarioSpec& spec) {
    validate_spec(spec);
    ScenarioBundle b;
    b.spec = spec;
    b.grid = build_scenario_grid(spec.grid);
    b.op = build_output_operator(b.grid, spec.condition.alpha_deg * M_PI / 180.0, {Qoi::Lift, Qoi::Moment});
    b.y_true = generate_truth(spec, b.grid);
    Simulation sim = bias_simulation(b.y_true, spec, b.grid, derive_seed(spec.seed, kBias));
    b.mu_cfd = sim.values;
    b.bias = sim.bias;
    b.wt = corrupt_measurement(b.y_true, spec, derive_seed(spec.seed, kMeasurement));
    b.mu_wt = impute_missing(b.wt.values, b.grid);
    b.qoi = measure_qois(b.y_true, b.op, spec.tau * spec.tau, derive_seed(spec.seed, kQoi));
    return b;
}

}  // namespace fieldfuse
