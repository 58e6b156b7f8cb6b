#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fieldfuse/cpod.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <cstdlib>

using namespace tsupport;

namespace {

OutputOperator ops(const Mat& H) {
    std::vector<std::string> names;
    for (Eigen::Index i = 0; i < H.cols(); ++i) names.push_back("q" + std::to_string(i));
    return make_operator(H, names, Vec(), 0.0, false);
}

// Smooth low-rank bank on n points: columns are combinations of r modes.
SnapshotSet smooth_bank(std::mt19937_64& rng, int n, int q, int r) {
    Mat modes(n, r);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < r; ++j) modes(i, j) = std::cos((j + 1) * 3.14159 * i / (n - 1)) / (j + 1);
    SnapshotSet s;
    s.U = modes * random_mat(rng, r, q);
    return s;
}

}  // namespace

TEST_CASE("POD singular values, energy and orthonormality") {
    Mat U = Mat::Zero(3, 2);
    U(0, 0) = 3;
    U(1, 1) = 1;
    PodBasis b = compute_pod(U);
    CHECK(b.d(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(b.d(1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(truncate_rank(b.d, 0.99) == 2);
    CHECK(truncate_rank(b.d, 0.75) == 1);
    CHECK(truncate(b, 0.75).energy_fraction == doctest::Approx(0.75));

    std::mt19937_64 rng(31);
    Vec v = random_vec(rng, 20), w = random_vec(rng, 6);
    PodBasis r1 = compute_pod(Mat(v * w.transpose()));
    CHECK(r1.d(1) <= 1e-12 * r1.d(0));
    CHECK(truncate_rank(r1.d) == 1);

    for (int rep = 0; rep < 10; ++rep) {
        Mat M = random_mat(rng, 30, 8);
        PodBasis p = compute_pod(M);
        CHECK(p.d.squaredNorm() == doctest::Approx(M.squaredNorm()).epsilon(1e-12));
        CHECK((p.phi.transpose() * p.phi - Mat::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-12);
        for (int i = 1; i < 8; ++i) CHECK(p.d(i) <= p.d(i - 1));
    }
}

TEST_CASE("projection error equals the discarded energy for every k") {
    std::mt19937_64 rng(36);
    for (int rep = 0; rep < 10; ++rep) {
        Mat U = random_mat(rng, 20, 6);
        PodBasis p = compute_pod(U);
        for (int k = 0; k <= 6; ++k) {
            Mat P = p.phi.leftCols(k);
            double lhs = (U - P * (P.transpose() * U)).squaredNorm();
            double rhs = p.d.tail(6 - k).squaredNorm();
            CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(rhs, 1e-12 * U.squaredNorm()));
        }
    }
}

TEST_CASE("energy truncation edge cases") {
    CHECK(truncate_rank(Vec::Unit(3, 0)) == 1);
    Vec two(2);
    two << 0.99, 0.01;
    CHECK(truncate_rank(two, 0.99) == 1);
    Vec d(4);
    d << 1, 1, 1, 1;
    CHECK(truncate_rank(d, 0.99) == 4);
    CHECK(truncate_rank(d, 0.5) == 2);
    CHECK(truncate_rank(d, 1.0) == 4);
    d << 100, 0.5, 0.4, 0.1;
    CHECK(truncate_rank(d, 0.99) == 1);
    CHECK_THROWS_AS(truncate_rank(Vec::Zero(3)), DataError);
    CHECK_THROWS_AS(truncate_rank(d, 0.0), ArgumentError);
}

TEST_CASE("KKT by hand: one mode, one constraint") {
    Mat phi = Mat::Zero(2, 1);
    phi(0, 0) = 1;
    Vec z(1), guess(2);
    z << 0.7;
    guess << 0.3, 0.0;
    KktSolution s = solve_kkt(phi, ops(phi), z, guess);
    CHECK(std::abs(s.a(0) - 0.7) <= 1e-12);
    CHECK(std::abs(s.lambda(0) + 0.4) <= 1e-12);
}

TEST_CASE("KKT by hand") {
    // phi = [e1 e2] in R^3, one QoI summing the first two entries
    Mat phi = Mat::Zero(3, 2);
    phi(0, 0) = 1;
    phi(1, 1) = 1;
    Mat H = Mat::Zero(3, 1);
    H(0, 0) = 1;
    H(1, 0) = 1;
    Vec guess(3), z(1);
    guess << 0.8, -0.3, 5.0;
    z << 0.3;
    KktSolution s = solve_kkt(phi, ops(H), z, guess);
    CHECK(s.a(0) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(s.a(1) == doctest::Approx(-0.4).epsilon(1e-14));
    CHECK(s.lambda(0) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(s.residual <= 1e-14);
}

TEST_CASE("KKT agrees with the nullspace method") {
    std::mt19937_64 rng(32);
    for (int rep = 0; rep < 30; ++rep) {
        int n = 20 + rep, k = 3 + rep % 5, m = 1 + rep % 3;
        Eigen::HouseholderQR<Mat> qr(random_mat(rng, n, k));
        Mat phi = qr.householderQ() * Mat::Identity(n, k);
        OutputOperator op = ops(random_mat(rng, n, m));
        Vec z = random_vec(rng, m), u = random_vec(rng, n);
        KktSolution s = solve_kkt(phi, op, z, u);
        Vec ref = oracle::nullspace_cls(phi, op.H.transpose() * phi, z, u);
        CHECK((s.a - ref).norm() <= 1e-10 * std::max(1.0, ref.norm()));
        CHECK((op.H.transpose() * phi * s.a - z).norm() <= 1e-12 * std::max(1.0, z.norm()));
        CHECK(s.residual <= 1e-12);
        // KKT saddle matrix is nonsingular
        Eigen::FullPivLU<Mat> lu(kkt_matrix(phi, op));
        CHECK(lu.rank() == k + m);
    }
}

TEST_CASE("feasible guess inside the span is returned unchanged") {
    std::mt19937_64 rng(33);
    Eigen::HouseholderQR<Mat> qr(random_mat(rng, 25, 4));
    Mat phi = qr.householderQ() * Mat::Identity(25, 4);
    OutputOperator op = ops(random_mat(rng, 25, 2));
    Vec a = random_vec(rng, 4);
    Vec u = phi * a;
    KktSolution s = solve_kkt(phi, op, op.H.transpose() * u, u);
    CHECK((s.a - a).norm() <= 1e-12);
    CHECK(s.lambda.norm() <= 1e-12);
}

TEST_CASE("dependent constraints inside the subspace name the QoI") {
    Mat phi = Mat::Zero(4, 2);
    phi(0, 0) = 1;
    phi(1, 1) = 1;
    Mat H = Mat::Zero(4, 2);
    H(0, 0) = 1;
    H(2, 0) = 1;
    H(0, 1) = 2;
    H(3, 1) = 1;  // independent in R^4, parallel once projected on the basis
    OutputOperator op = ops(H);
    try {
        solve_kkt(phi, op, Vec::Ones(2), Vec::Zero(4));
        FAIL("expected InfeasibleConstraintError");
    } catch (const InfeasibleConstraintError& e) {
        CHECK(e.qoi() == "q1");
    }
    CHECK_THROWS_AS(solve_kkt(phi.leftCols(1), op, Vec::Ones(2), Vec::Zero(4)), ArgumentError);
}

TEST_CASE("cost dispersion") {
    CHECK(cost_dispersion({1.0, 2.0}, 3) < 0.0);
    CHECK(cost_dispersion({5.0, 1.0, 1.0, 1.0}, 3) == 0.0);
    CHECK(cost_dispersion({1.0, 2.0, 3.0}, 3) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("iteration: constraints hold, bank untouched, in-span convergence") {
    std::mt19937_64 rng(34);
    SnapshotSet bank = smooth_bank(rng, 60, 8, 4);
    const Mat pristine = bank.U;
    OutputOperator op = ops(random_mat(rng, 60, 2));
    Vec u_cfd = bank.U.col(0), u_wt = bank.U.col(1);
    Vec truth = 0.3 * bank.U.col(2) + 0.7 * bank.U.col(3);
    Vec z = op.H.transpose() * truth;

    CpodOptions opt;
    opt.c = 2;
    opt.eps_c = 1e-12;
    opt.energy = 0.999999;
    CpodResult r = run_cpod(bank, u_cfd, u_wt, z, op, 0.5, opt);
    CHECK(r.converged);
    CHECK(r.iterations <= 5);
    CHECK((op.H.transpose() * r.u_fused - z).norm() <= 1e-10 * z.norm());
    CHECK(r.orthonormality_error <= 1e-10);
    CHECK((bank.U - pristine).norm() == 0.0);
    CHECK(r.cost_history.size() == static_cast<size_t>(r.iterations));

    // without a stopping rule the loop runs to max_iter
    CpodOptions cap = opt;
    cap.c = 100;
    cap.max_iter = 7;
    CpodResult rc = run_cpod(bank, u_cfd, u_wt, z, op, 0.2, cap);
    CHECK(!rc.converged);
    CHECK(rc.iterations == 7);

    CHECK_THROWS_AS(run_cpod(bank, u_cfd, u_wt, z, op, 1.5, opt), ArgumentError);
}

TEST_CASE("ensemble statistics") {
    CHECK(student_t_quantile(0.05, 1) == doctest::Approx(12.7062).epsilon(1e-5));
    CHECK(student_t_quantile(0.05, 1000) == doctest::Approx(1.9623).epsilon(1e-4));

    std::mt19937_64 rng(35);
    SnapshotSet bank = smooth_bank(rng, 40, 6, 4);
    OutputOperator op = ops(random_mat(rng, 40, 2));
    Vec u = bank.U.col(0);
    Vec z = op.H.transpose() * bank.U.col(1);

    // identical sources: every replicate is the same, so bounds collapse
    CpodEnsemble same = cpod_ensemble(bank, u, u, z, op, 8, 0.05, 3);
    CHECK(same.T == 8);
    CHECK(same.nu == 7);
    CHECK(same.cov_diag.maxCoeff() <= 1e-20);
    CHECK((same.upper - same.lower).cwiseAbs().maxCoeff() <= 1e-9);

    Vec v = bank.U.col(2);
    setenv("FIELDFUSE_THREADS", "1", 1);
    CpodEnsemble a = cpod_ensemble(bank, u, v, z, op, 16, 0.05, 11);
    setenv("FIELDFUSE_THREADS", "4", 1);
    CpodEnsemble b = cpod_ensemble(bank, u, v, z, op, 16, 0.05, 11);
    unsetenv("FIELDFUSE_THREADS");
    CHECK((a.mean - b.mean).norm() == 0.0);
    CHECK(a.thetas == b.thetas);
    CHECK(a.T_requested == 16);

    // mean and unbiased variance from the replicates
    Vec m = Vec::Zero(40);
    for (const auto& r : a.runs) m += r.u_fused;
    m /= a.T;
    Vec var = Vec::Zero(40);
    for (const auto& r : a.runs) var += (r.u_fused - m).cwiseAbs2();
    var /= (a.T - 1);
    CHECK((a.mean - m).norm() <= 1e-14 * m.norm());
    CHECK((a.cov_diag - var).norm() <= 1e-12 * var.norm() + 1e-300);
    Vec half = a.t_quantile * var.cwiseSqrt() / std::sqrt(double(a.T));
    CHECK((a.upper - a.mean - half).cwiseAbs().maxCoeff() <= 1e-12);
    for (const auto& r : a.runs) CHECK((op.H.transpose() * r.u_fused - z).norm() <= 1e-9 * z.norm());

    CHECK_THROWS_AS(cpod_ensemble(bank, u, v, z, op, 1), ArgumentError);
}
