// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include "fieldfuse/bayes.hpp"
#include "fieldfuse/cpod.hpp"
#include "fieldfuse/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace tsupport;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStockSeed = 2024;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double s() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

struct Verdict {
    bool pass = true;
    std::ostringstream note;
    void need(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            note << " [failed: " << what << "]";
        }
    }
};

OutputOperator named(const Mat& H, bool check = true) {
    std::vector<std::string> names;
    for (Eigen::Index i = 0; i < H.cols(); ++i) names.push_back("q" + std::to_string(i));
    return make_operator(H, names, Vec(), 0.0, check);
}

ScenarioSpec stock_base() {
    ScenarioSpec s;
    s.seed = kStockSeed;
    return s;
}

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / b.norm(); }

// 1. MAP equals an independent minimizer; gradient matches finite differences.
void c1(Verdict& v) {
    Timer t;
    std::mt19937_64 rng(101);
    double worst_map = 0, worst_grad = 0;
    for (int rep = 0; rep < 50; ++rep) {
        int n = 3 + rep % 18;
        OutputOperator op = named(random_mat(rng, n, 2));
        PriorSpec p;
        p.mean = random_vec(rng, n);
        p.cov = random_spd(rng, n);
        QoIMeasurement z{random_vec(rng, 2), 0.02 + 0.2 * (rep % 4)};
        Mat Sinv = p.cov.inverse();
        auto J = [&](const Vec& y) {
            Vec r = z.z - op.H.transpose() * y;
            Vec d = y - p.mean;
            return 0.5 * r.dot(r) / z.tau2 + 0.5 * d.dot(Sinv * d);
        };
        Vec y = map_estimate(z, op, p);
        Vec ref = oracle::minimize(J, p.mean);
        worst_map = std::max(worst_map, rel(y, ref));
        Vec x = random_vec(rng, n);
        Vec g = map_gradient(x, z, op, Sinv, p.mean);
        worst_grad = std::max(worst_grad, rel(g, oracle::fd_gradient(J, x, 1e-5)));
    }
    double secs = t.s();
    v.note << "max rel MAP err " << worst_map << ", max rel grad err " << worst_grad << ", " << secs << " s";
    v.need(worst_map <= 1e-6, "MAP vs minimizer 1e-6");
    v.need(worst_grad <= 1e-5, "gradient vs FD 1e-5");
    v.need(secs < 10, "runtime < 10 s");
}

// 2. Posterior covariance against dense inversion; variance reduction.
void c2(Verdict& v) {
    std::mt19937_64 rng(102);
    double worst = 0;
    bool reduced = true;
    for (int rep = 0; rep < 50; ++rep) {
        int n = 3 + rep % 18;
        OutputOperator op = named(random_mat(rng, n, 2));
        PriorSpec p;
        p.mean = Vec::Zero(n);
        p.cov = random_spd(rng, n);
        double tau2 = 0.01 * (1 + rep % 5);
        Mat G = posterior_covariance(op, tau2, p, false);
        Mat ref = (op.H * op.H.transpose() / tau2 + p.cov.inverse()).inverse();
        worst = std::max(worst, (G - ref).cwiseAbs().maxCoeff());
        reduced = reduced && (G.diagonal().array() <= p.cov.diagonal().array()).all();
    }
    v.note << "max |Gamma - inv| " << worst;
    v.need(worst <= 1e-10, "dense inverse 1e-10");
    v.need(reduced, "diag(Gamma) <= diag(Sigma)");
}

// 3. Misfit grows with tau2 and the prior takes over at tau2 = 1e-2.
void c3(Verdict& v) {
    Timer t;
    ScenarioBundle b = make_scenario(table_case(stock_base(), 0));
    double prev = -1, shift = 0;
    bool mono = true;
    v.note << "misfit";
    for (double t2 : {1e-6, 1e-4, 1e-2}) {
        BayesOptions o;
        o.gamma.tau2 = t2;
        BayesResult r = run_bayesian_fusion(b.mu_wt, b.mu_cfd, {b.qoi.z_measured, t2}, b.op, b.grid, o);
        mono = mono && r.misfit >= prev;
        prev = r.misfit;
        shift = rel(r.y_map, r.mu_tilde);
        v.note << " " << r.misfit;
    }
    double secs = t.s();
    v.note << "; prior shift at 1e-2 " << shift << ", " << secs << " s";
    v.need(mono, "monotone misfit");
    v.need(shift <= 0.05, "prior dominates (<= 0.05)");
    v.need(secs < 5, "runtime < 5 s");
}

// 4. QoI agreement on all table conditions.
void c4(Verdict& v) {
    Timer t;
    double worst = 0;
    for (int k = 0; k < 11; ++k) {
        ScenarioBundle b = make_scenario(table_case(stock_base(), k));
        BayesOptions o;  // tau2 1e-6, sigma^2 1e-2
        BayesResult r = run_bayesian_fusion(b.mu_wt, b.mu_cfd, {b.qoi.z_measured, 1e-6}, b.op, b.grid, o);
        worst = std::max(worst, (apply_forward(b.op, r.y_map) - b.qoi.z_measured).cwiseAbs().maxCoeff());
    }
    double secs = t.s();
    v.note << "max |H^T y - z| " << worst << ", " << secs << " s";
    v.need(worst <= 1e-3, "per-QoI misfit <= 1e-3");
    v.need(secs < 10, "runtime < 10 s");
}

// 5. POD projection identity and the energy rule against a scan.
void c5(Verdict& v) {
    std::mt19937_64 rng(105);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    double worst = 0;
    int mismatches = 0;
    for (int rep = 0; rep < 50; ++rep) {
        Mat U = random_mat(rng, 20, 6);
        PodBasis p = compute_pod(U);
        for (int k = 0; k <= 6; ++k) {
            Mat P = p.phi.leftCols(k);
            double lhs = (U - P * (P.transpose() * U)).squaredNorm();
            double rhs = p.d.tail(6 - k).squaredNorm();
            // at k = q both sides vanish; measure against the total energy there
            double scale = k < 6 ? rhs : U.squaredNorm();
            worst = std::max(worst, std::abs(lhs - rhs) / scale);
        }
        double target = u(rng);
        int scan = 0;
        for (int k = 1; k <= 6 && !scan; ++k)
            if (p.d.head(k).sum() >= target * p.d.sum()) scan = k;
        mismatches += truncate_rank(p.d, target) != scan;
        mismatches += truncate_rank(p.d) != [&] {
            for (int k = 1; k <= 6; ++k)
                if (p.d.head(k).sum() / p.d.sum() >= 0.99) return k;
            return 6;
        }();
    }
    v.note << "max rel identity err " << worst << ", truncation mismatches " << mismatches;
    v.need(worst <= 1e-9, "energy identity 1e-9");
    v.need(mismatches == 0, "truncation matches scan");
}

// 6. KKT: hand example, nullspace oracle, dependent QoI.
void c6(Verdict& v) {
    Mat phi = Mat::Zero(2, 1);
    phi(0, 0) = 1;
    Vec z(1), g(2);
    z << 0.7;
    g << 0.3, 0.0;
    KktSolution h = solve_kkt(phi, named(phi), z, g);
    double hand = std::max(std::abs(h.a(0) - 0.7), std::abs(h.lambda(0) + 0.4));

    std::mt19937_64 rng(106);
    double worst = 0;
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::HouseholderQR<Mat> qr(random_mat(rng, 30, 6));
        Mat P = qr.householderQ() * Mat::Identity(30, 6);
        OutputOperator op = named(random_mat(rng, 30, 2));
        Vec zz = random_vec(rng, 2), u = random_vec(rng, 30);
        Vec a = solve_kkt(P, op, zz, u).a;
        Vec ref = oracle::nullspace_cls(P, op.H.transpose() * P, zz, u);
        worst = std::max(worst, (a - ref).norm() / std::max(1.0, ref.norm()));
    }

    Mat H = random_mat(rng, 30, 2);
    H.col(1) = H.col(0);
    Eigen::HouseholderQR<Mat> qr(random_mat(rng, 30, 6));
    Mat P = qr.householderQ() * Mat::Identity(30, 6);
    std::string named_qoi;
    try {
        solve_kkt(P, named(H, false), Vec::Ones(2), Vec::Zero(30));
    } catch (const InfeasibleConstraintError& e) {
        named_qoi = e.qoi();
    }
    v.note << "hand err " << hand << ", max oracle err " << worst << ", duplicated column flags '" << named_qoi << "'";
    v.need(hand <= 1e-12, "hand example 1e-12");
    v.need(worst <= 1e-8, "nullspace oracle 1e-8");
    v.need(named_qoi == "q1", "infeasibility error");
}

struct Fed {
    ScenarioBundle b;
    SnapshotSet bank;
};

Fed fed_scenario(int lhs) {
    ScenarioSpec base = stock_base();
    Fed f{make_scenario(table_case(base, 0)), {}};
    f.bank = standard_bank(base, f.b.grid, lhs);
    return f;
}

// 7. CPOD with the 91-column bank converges in 3-5 iterations, constraints exact.
void c7(Verdict& v) {
    Timer t;
    Fed f = fed_scenario(80);
    const Vec& z = f.b.qoi.z_measured;
    CpodResult r = run_cpod(f.bank, f.b.mu_cfd, f.b.mu_wt, z, f.b.op, 0.5);
    double viol = (apply_forward(f.b.op, r.u_fused) - z).norm();
    double secs = t.s();
    v.note << "q " << f.bank.q() << ", iterations " << r.iterations << ", converged " << r.converged
           << ", J1 " << r.cost_history.front() << ", J2 " << r.cost_history.at(1) << ", constraint " << viol
           << ", " << secs << " s";
    v.need(f.bank.q() == 91, "bank of 91");
    v.need(r.converged && r.iterations >= 3 && r.iterations <= 5, "converged within 3-5 iterations");
    v.need(viol <= 1e-10 * (1 + z.norm()), "constraint exact");
    v.need(secs < 30, "runtime < 30 s");
}

// 8. Small bank gives a rougher fused curve than the large bank.
void c8(Verdict& v) {
    ScenarioSpec base = stock_base();
    // worst case: the strongest-shock table condition (highest Mach)
    const int worst_case = 7;
    ScenarioBundle b = make_scenario(table_case(base, worst_case));
    auto fused = [&](int lhs) {
        // the bank is shared by all cases; case 0 anchors the LHS part
        SnapshotSet s = standard_bank(base, b.grid, lhs);
        return cpod_ensemble(s, b.mu_cfd, b.mu_wt, b.qoi.z_measured, b.op, 100, 0.05, 8).mean;
    };
    double tv22 = total_variation(fused(0), true), tv91 = total_variation(fused(80), true);
    double ratio = tv22 / tv91;
    v.note << "TV q=22 " << tv22 << ", TV q=91 " << tv91 << ", ratio " << ratio;
    v.need(ratio >= 2.0, "ratio >= 2");
}

// 9. CPOD and MAP agree; both beat each corrupted input.
void c9(Verdict& v) {
    Fed f = fed_scenario(80);
    const ScenarioBundle& b = f.b;
    BayesResult m = run_bayesian_fusion(b.mu_wt, b.mu_cfd, {b.qoi.z_measured, 1e-6}, b.op, b.grid, {});
    CpodEnsemble e = cpod_ensemble(f.bank, b.mu_cfd, b.mu_wt, b.qoi.z_measured, b.op, 1000, 0.05, 9);
    double agree = rel(e.mean, m.y_map);
    double em = (m.y_map - b.y_true).norm(), ec = (e.mean - b.y_true).norm();
    double ew = (b.mu_wt - b.y_true).norm(), ecfd = (b.mu_cfd - b.y_true).norm();
    v.note << "rel L2 CPOD vs MAP " << agree << "; error vs truth MAP " << em << ", CPOD " << ec << ", WT " << ew
           << ", CFD " << ecfd;
    v.need(agree <= 0.15, "agreement <= 0.15");
    v.need(em <= std::min(ew, ecfd), "MAP beats inputs");
    v.need(ec <= std::min(ew, ecfd), "CPOD beats inputs");
}

// 10. t quantile, 1/sqrt(T) shrinkage, default T.
void c10(Verdict& v) {
    double t1 = student_t_quantile(0.05, 1);
    Fed f = fed_scenario(20);
    const ScenarioBundle& b = f.b;
    std::vector<double> hw;
    for (int T : {100, 400, 1600}) {
        CpodEnsemble e = cpod_ensemble(f.bank, b.mu_cfd, b.mu_wt, b.qoi.z_measured, b.op, T, 0.05, 10);
        hw.push_back((e.upper - e.mean).norm());
    }
    double r1 = hw[0] / hw[1] / 2.0, r2 = hw[1] / hw[2] / 2.0;
    CpodEnsemble d = cpod_ensemble(f.bank, b.mu_cfd, b.mu_wt, b.qoi.z_measured, b.op);
    v.note << "t(nu=1) " << t1 << ", half-width ratios / 2: " << r1 << ", " << r2 << ", default T " << d.T_requested;
    v.need(std::abs(t1 - 12.7062) <= 1e-3, "t quantile");
    v.need(std::abs(r1 - 1) <= 0.15 && std::abs(r2 - 1) <= 0.15, "1/sqrt(T) within 15%");
    v.need(d.T_requested == 1000, "default T = 1000");
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// 11. Same seed, same bytes.
void c11(Verdict& v) {
    const std::string exe = FIELDFUSE_EXE;
    fs::path root = fs::temp_directory_path() / ("fieldfuse_accept_" + std::to_string(::getpid()));
    std::vector<std::string> compared;
    bool same = true, ran = true;
    for (const char* run_dir : {"a", "b"}) {
        fs::path d = root / run_dir;
        ran = ran && run(exe + " synth --out " + d.string() + " --seed 77 --bank 20") == 0;
        ran = ran && run(exe + " fuse-bayes --bundle " + d.string()) == 0;
        ran = ran && run(exe + " fuse-cpod --bundle " + d.string() + " --T 50") == 0;
    }
    if (ran) {
        for (const auto& ent : fs::recursive_directory_iterator(root / "a")) {
            if (!ent.is_regular_file()) continue;
            fs::path r = fs::relative(ent.path(), root / "a");
            compared.push_back(r.string());
            same = same && slurp(ent.path()) == slurp(root / "b" / r);
        }
    }
    fs::remove_all(root);
    v.note << compared.size() << " files compared";
    v.need(ran, "commands succeed");
    v.need(same && compared.size() > 10, "byte-identical outputs");
}

// 12. Diagonal-only Bayesian fusion at n = 8688.
void c12(Verdict& v) {
    ScenarioSpec s = stock_base();
    s.grid.wing = true;
    s.grid.span_cells = 48;
    s.grid.n = 48 * 181;
    Timer setup;
    ScenarioBundle b = make_scenario(s);
    double t_setup = setup.s();
    Timer t;
    BayesOptions o;
    o.gamma.ell = 0.01;
    o.diag_only = true;
    BayesResult r = run_bayesian_fusion(b.mu_wt, b.mu_cfd, {b.qoi.z_measured, 1e-6}, b.op, b.grid, o);
    double secs = t.s();
    v.note << "n " << b.grid.size() << ", fusion " << secs << " s (scenario setup " << t_setup << " s), solver "
           << r.solver << ", misfit " << r.misfit;
    v.need(b.grid.size() == 8688, "n = 8688");
    v.need(secs <= 60, "<= 60 s");
    v.need(r.cov_diag.allFinite() && (r.cov_diag.array() >= 0).all(), "finite variances");
}

}  // namespace

int main() {
    struct Item {
        const char* name;
        void (*fn)(Verdict&);
    };
    const Item items[] = {
        {"1 MAP vs independent minimizer", c1},     {"2 posterior covariance", c2},
        {"3 tau2 limiting behaviour", c3},          {"4 QoI agreement on table conditions", c4},
        {"5 POD identities", c5},                   {"6 KKT solver", c6},
        {"7 CPOD convergence (q=91)", c7},          {"8 snapshot-size sensitivity", c8},
        {"9 CPOD-MAP agreement", c9},               {"10 ensemble bounds", c10},
        {"11 end-to-end determinism", c11},         {"12 performance at n=8688", c12},
    };
    int failed = 0;
    for (const auto& it : items) {
        Verdict v;
        try {
            it.fn(v);
        } catch (const std::exception& e) {
            v.pass = false;
            v.note << " [exception: " << e.what() << "]";
        }
        failed += !v.pass;
        std::cout << (v.pass ? "PASS " : "FAIL ") << it.name << ": " << v.note.str() << std::endl;
    }
    std::cout << (12 - failed) << "/12 criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
