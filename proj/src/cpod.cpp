#include "fieldfuse/cpod.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace fieldfuse {

void validate_snapshots(const SnapshotSet& s) {
    if (s.q() < 2) throw DataError("snapshot set needs at least two columns");
    if (!s.U.allFinite()) throw DataError("snapshot set contains non-finite entries");
    if (!s.conditions.empty() && static_cast<int>(s.conditions.size()) != s.q())
        throw DataError("snapshot conditions do not match the column count");
    if (!s.fidelity.empty() && static_cast<int>(s.fidelity.size()) != s.q())
        throw DataError("snapshot fidelity labels do not match the column count");
}

PodBasis compute_pod(const Mat& U) {
    if (U.cols() < 1 || U.rows() < 1) throw DataError("empty snapshot matrix");
    Eigen::BDCSVD<Mat> svd(U, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
    PodBasis b;
    b.phi = svd.matrixU();
    b.d = svd.singularValues();
    b.k = static_cast<int>(b.d.size());
    b.energy_fraction = 1.0;
    return b;
}

PodBasis compute_pod(const SnapshotSet& s) {
    validate_snapshots(s);
    return compute_pod(s.U);
}

int truncate_rank(const Vec& d, double target) {
    if (d.size() == 0) throw DataError("no singular values");
    if (!(target > 0.0 && target <= 1.0)) throw ArgumentError("energy target must lie in (0, 1]");
    const double total = d.sum();
    if (!(total > 0.0)) throw DataError("all singular values are zero");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        acc += d(i);
        if (acc / total >= target) return static_cast<int>(i + 1);
    }
    return static_cast<int>(d.size());
}

PodBasis truncate(PodBasis b, double target) {
    b.k = truncate_rank(b.d, target);
    b.energy_fraction = b.d.head(b.k).sum() / b.d.sum();
    return b;
}

Mat kkt_matrix(const Mat& phi_k, const OutputOperator& op) {
    const Eigen::Index k = phi_k.cols(), m = op.m();
    Mat C = op.H.transpose() * phi_k;
    Mat K = Mat::Zero(k + m, k + m);
    K.topLeftCorner(k, k) = phi_k.transpose() * phi_k;
    K.topRightCorner(k, m) = C.transpose();
    K.bottomLeftCorner(m, k) = C;
    return K;
}

namespace {

// Index of the first QoI row of C that is (numerically) in the span of the
// rows before it, or -1 if C has full row rank.
int dependent_row(const Mat& C) {
    Eigen::JacobiSVD<Mat> full(C);
    const double smax = full.singularValues().size() ? full.singularValues()(0) : 0.0;
    if (!(smax > 0.0)) return 0;
    for (Eigen::Index r = 1; r <= C.rows(); ++r) {
        Eigen::JacobiSVD<Mat> svd(C.topRows(r));
        const Vec& s = svd.singularValues();
        if (s.size() < r || !(s(r - 1) > 1e-10 * smax)) return static_cast<int>(r - 1);
    }
    return -1;
}

}  // namespace

KktSolution solve_kkt(const Mat& phi_k, const OutputOperator& op, const Vec& z, const Vec& u_guess) {
    const Eigen::Index k = phi_k.cols(), m = op.m();
    if (phi_k.rows() != op.n() || u_guess.size() != op.n())
        throw ArgumentError("basis or guess length does not match operator");
    if (z.size() != m) throw ArgumentError("QoI vector length does not match operator");
    if (k < m)
        throw ArgumentError("basis rank " + std::to_string(k) + " is below the QoI count " +
                            std::to_string(m));
    const Vec zt = z - op.offset;
    Mat C = op.H.transpose() * phi_k;
    int bad = dependent_row(C);
    if (bad >= 0) {
        const std::string& name = op.qoi_names[bad];
        throw InfeasibleConstraintError(
            "constraint on " + name +
                " is linearly dependent on the other QoIs within the POD subspace; "
                "the KKT system is singular",
            name);
    }
    // Schur complement on the orthonormal block: (C C^T) lambda = C b - z, a = b - C^T lambda
    Vec b = phi_k.transpose() * u_guess;
    Mat S = C * C.transpose();
    Eigen::LDLT<Mat> ldlt(S);
    if (ldlt.info() != Eigen::Success) throw NumericalError("Schur complement factorization failed");
    KktSolution sol;
    sol.lambda = ldlt.solve(C * b - zt);
    sol.a = b - C.transpose() * sol.lambda;
    // one step of refinement on the constraint rows
    Vec rc = zt - C * sol.a;
    Vec dl = ldlt.solve(-rc);
    sol.lambda += dl;
    sol.a -= C.transpose() * dl;

    Mat K = kkt_matrix(phi_k, op);
    Vec rhs(k + m), x(k + m);
    rhs << b, zt;
    x << sol.a, sol.lambda;
    double rn = rhs.norm();
    sol.residual = (K * x - rhs).norm() / (rn > 0.0 ? rn : 1.0);
    return sol;
}

double cost_dispersion(const std::vector<double>& J, int c) {
    if (c < 1 || static_cast<int>(J.size()) < c) return -1.0;
    double s = 0.0, s2 = 0.0;
    for (size_t i = J.size() - c; i < J.size(); ++i) {
        s += J[i];
        s2 += J[i] * J[i];
    }
    return s2 / c - (s / c) * (s / c);
}

CpodResult run_cpod(const SnapshotSet& snapshots, const Vec& u_cfd, const Vec& u_wt, const Vec& z,
                    const OutputOperator& op, double theta_init, const CpodOptions& opt) {
    validate_snapshots(snapshots);
    if (!(theta_init >= 0.0 && theta_init <= 1.0)) throw ArgumentError("theta_init must lie in [0, 1]");
    if (opt.c < 1 || opt.max_iter < 1) throw ArgumentError("c and max_iter must be >= 1");
    const int n = snapshots.n();
    if (u_cfd.size() != n || u_wt.size() != n || op.n() != n)
        throw ArgumentError("field length does not match snapshot bank");

    CpodResult r;
    r.theta_init = theta_init;
    PodBasis basis = truncate(compute_pod(snapshots.U), opt.energy);
    Vec u = theta_init * u_cfd + (1.0 - theta_init) * u_wt;
    Mat aug(n, snapshots.q() + 1);
    aug.leftCols(snapshots.q()) = snapshots.U;

    for (int it = 1; it <= opt.max_iter; ++it) {
        Mat phi = basis.phi_k();
        r.orthonormality_error =
            std::max(r.orthonormality_error,
                     (phi.transpose() * phi - Mat::Identity(phi.cols(), phi.cols())).cwiseAbs().maxCoeff());
        KktSolution sol = solve_kkt(phi, op, z, u);
        Vec u_new = phi * sol.a;
        Mat C = op.H.transpose() * phi;
        double J = 0.5 * (u_new - u).squaredNorm() + sol.lambda.dot(C * sol.a - (z - op.offset));
        if (!std::isfinite(J)) throw NumericalError("non-finite CPOD cost at iteration " + std::to_string(it));

        r.u_fused = u_new;
        r.a = sol.a;
        r.lambda = sol.lambda;
        r.cost_history.push_back(J);
        r.rank_history.push_back(basis.k);
        r.iterations = it;
        u = u_new;

        // enrich: bank stays pristine, only the current iterate is appended
        aug.col(snapshots.q()) = u;
        basis = truncate(compute_pod(aug), opt.energy);

        double delta = cost_dispersion(r.cost_history, opt.c);
        if (delta >= 0.0 && delta <= opt.eps_c) {
            r.converged = true;
            break;
        }
    }
    return r;
}

double student_t_quantile(double beta, int nu) {
    if (nu < 1) throw ArgumentError("degrees of freedom must be >= 1");
    if (!(beta > 0.0 && beta < 1.0)) throw ArgumentError("beta must lie in (0, 1)");
    boost::math::students_t_distribution<double> dist(nu);
    return boost::math::quantile(dist, 1.0 - 0.5 * beta);
}

CpodEnsemble cpod_ensemble(const SnapshotSet& snapshots, const Vec& u_cfd, const Vec& u_wt,
                           const Vec& z, const OutputOperator& op, int T, double beta,
                           std::uint64_t seed, const CpodOptions& opt) {
    if (T < 2) throw ArgumentError("ensemble needs T >= 2");
    if (!(beta > 0.0 && beta < 1.0)) throw ArgumentError("beta must lie in (0, 1)");
    validate_snapshots(snapshots);

    CpodEnsemble e;
    e.T_requested = T;
    e.beta = beta;
    e.thetas.resize(T);
    for (int i = 0; i < T; ++i) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
        e.thetas[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }

    std::vector<std::optional<CpodResult>> out(T);
    std::vector<std::string> err(T);
    parallel_for(T, [&](int i) {
        try {
            out[i] = run_cpod(snapshots, u_cfd, u_wt, z, op, e.thetas[i], opt);
        } catch (const std::exception& ex) {
            err[i] = ex.what();
        }
    });

    for (int i = 0; i < T; ++i) {
        if (out[i])
            e.runs.push_back(std::move(*out[i]));
        else
            e.failures.emplace_back(i, err[i]);
    }
    e.T = static_cast<int>(e.runs.size());
    if (e.T == 0) throw NumericalError("every ensemble replicate failed: " + e.failures.front().second);
    if (e.T < 2) throw NumericalError("fewer than two ensemble replicates succeeded");
    e.nu = e.T - 1;

    const int n = snapshots.n();
    e.mean = Vec::Zero(n);
    for (const auto& r : e.runs) e.mean += r.u_fused;
    e.mean /= e.T;
    e.cov_diag = Vec::Zero(n);
    for (const auto& r : e.runs) e.cov_diag += (r.u_fused - e.mean).cwiseAbs2();
    e.cov_diag /= e.nu;

    e.t_quantile = student_t_quantile(beta, e.nu);
    Vec half = e.t_quantile * e.cov_diag.cwiseSqrt() / std::sqrt(static_cast<double>(e.T));
    e.lower = e.mean - half;
    e.upper = e.mean + half;
    return e;
}

}  // namespace fieldfuse
