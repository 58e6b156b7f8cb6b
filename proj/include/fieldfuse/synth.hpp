#pragma once

#include "fieldfuse/common.hpp"
#include "fieldfuse/cpod.hpp"
#include "fieldfuse/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fieldfuse {

struct TruthParams {
    double amplitude = 1.0;                 // baseline loading scale
    std::optional<double> shock_position;   // x_s in (0,1); derived from Mach/alpha when empty
    double shock_width = 0.02;
    std::optional<double> shock_strength;   // derived from Mach when empty
};

struct CorruptionParams {
    double noise_std = 0.02;
    double gap_fraction = 0.1;
    double bias_amplitude = 0.05;
    double bias_length = 0.15;
    double shock_shift = 0.03;  // simulation shock displacement along the chord
};

struct GridConfig {
    int n = 128;            // 2D cell count
    bool wing = false;      // 3D wing instead of an airfoil section
    int span_cells = 48;    // wing only; chord cells = n / span_cells
    double semi_span = 3.0;
    double thickness = 0.12;
};

struct ScenarioSpec {
    GridConfig grid;
    FlightCondition condition{0.676, 5.7e6, 2.40};
    TruthParams truth;
    CorruptionParams corruption;
    double tau = 1e-3;  // QoI noise std
    std::uint64_t seed = 0;
};

void validate_spec(const ScenarioSpec& s);

SurfaceGrid build_scenario_grid(const GridConfig& g);

double shock_position(const ScenarioSpec& s);
double shock_strength(const ScenarioSpec& s);

Vec generate_truth(const ScenarioSpec& spec, const SurfaceGrid& grid);

struct Measurement {
    MaskedField values;
    Vec noise;
    int gap_start = 0;
    int gap_length = 0;
};

Measurement corrupt_measurement(const Vec& y_true, const ScenarioSpec& spec, std::uint64_t seed);

struct Simulation {
    Vec values;
    Vec bias;
};

Simulation bias_simulation(const Vec& y_true, const ScenarioSpec& spec, const SurfaceGrid& grid,
                           std::uint64_t seed);

struct QoiDraw {
    Vec z_measured;
    Vec z_noiseless;
    Vec noise;
};

QoiDraw measure_qois(const Vec& y_true, const OutputOperator& op, double tau2, std::uint64_t seed);

// Rows are samples in [0,1]^dims, one per stratum in every dimension.
Mat latin_hypercube(int count, int dims, std::uint64_t seed);

double maximin_score(const Mat& design);

struct LhsDesign {
    Mat unit;  // samples in [0,1]^d
    double score = 0.0;
};

LhsDesign maximin_lhs(int count, int dims, std::uint64_t seed, int candidates = 100);

struct ConditionBounds {
    double mach_lo = 0.6, mach_hi = 0.75;
    double re_lo = 2.7e6, re_hi = 6.5e6;
    double alpha_lo = -2.18, alpha_hi = 3.22;
};

std::vector<FlightCondition> lhs_conditions(int count, const ConditionBounds& b, std::uint64_t seed);

// The eleven transonic airfoil cases (Mach, Re, alpha in degrees).
std::vector<FlightCondition> table1_conditions();

struct BankEntry {
    FlightCondition condition;
    bool measurement = false;
    bool simulation = false;
    std::uint64_t seed = 0;  // same draws as make_scenario with this seed
};

// Measurement columns are noisy, gap-imputed fields; simulation columns are
// biased fields. Seeds are derived from the base seed and the entry index.
SnapshotSet generate_snapshot_bank(const ScenarioSpec& base, const std::vector<BankEntry>& entries,
                                   const SurfaceGrid& grid);

// 11 measurement columns at the table conditions plus either the 11 matching
// simulations (lhs_count == 0) or lhs_count simulations on a maximin design.
SnapshotSet standard_bank(const ScenarioSpec& base, const SurfaceGrid& grid, int lhs_count);

struct ScenarioBundle {
    ScenarioSpec spec;
    SurfaceGrid grid;
    OutputOperator op;
    Vec y_true;
    Vec mu_cfd;
    Vec bias;
    Measurement wt;
    Vec mu_wt;  // gap-imputed
    QoiDraw qoi;
};

ScenarioBundle make_scenario(const ScenarioSpec& spec);

// Spec for table case k (0-based) of a campaign rooted at base.seed; the
// standard bank uses the same per-case seeds.
ScenarioSpec table_case(const ScenarioSpec& base, int k);

// Substream seeds for the independent draws of one scenario.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace fieldfuse
