#include "fieldfuse/cli.hpp"

#include "fieldfuse/bayes.hpp"
#include "fieldfuse/cpod.hpp"
#include "fieldfuse/io.hpp"
#include "fieldfuse/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

namespace fieldfuse {

using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    std::string out;  // synth: "out"; fusion commands: the bundle directory
    std::string bundle;
    std::string bank;
    std::optional<std::uint64_t> seed;
    std::optional<double> theta, tau2, sigma1sq, sigma2sq, ell, nugget;
    std::optional<int> T, c, max_iter;
    std::optional<double> eps_c, beta;
    double level = 0.95;
    bool diag_only = false;
    bool plot = false;
    // synth
    std::string conditions;
    int case_index = 1;
    int bank_size = -1;
};

json load_config(const Flags& f) {
    if (f.config.empty()) return json::object();
    try {
        return json::parse(read_text(f.config));
    } catch (const json::exception& e) {
        throw ArgumentError("config " + f.config + ": " + e.what());
    }
}

Hyperparameters resolve_gamma(const json& cfg, const Flags& f, int dim) {
    Hyperparameters h;
    h.ell = dim == 3 ? 0.01 : 1e-4;
    if (cfg.contains("gamma")) {
        const auto& g = cfg["gamma"];
        h.sigma1_sq = g.value("sigma1_sq", h.sigma1_sq);
        h.sigma2_sq = g.value("sigma2_sq", h.sigma2_sq);
        h.tau2 = g.value("tau2", h.tau2);
        h.ell = g.value("ell", h.ell);
        h.nugget = g.value("nugget", h.nugget);
    }
    if (f.sigma1sq) h.sigma1_sq = *f.sigma1sq;
    if (f.sigma2sq) h.sigma2_sq = *f.sigma2sq;
    if (f.tau2) h.tau2 = *f.tau2;
    if (f.ell) h.ell = *f.ell;
    if (f.nugget) h.nugget = *f.nugget;
    if (!(h.tau2 > 0.0) || !(h.ell > 0.0) || !(h.sigma1_sq >= 0.0) || !(h.sigma2_sq >= 0.0) ||
        !(h.nugget >= 0.0) || h.sigma1_sq + h.sigma2_sq <= 0.0)
        throw ArgumentError("hyperparameters must be positive (tau2, ell) and non-negative (variances, nugget)");
    return h;
}

json gamma_json(const Hyperparameters& h) {
    return {{"sigma1_sq", h.sigma1_sq}, {"sigma2_sq", h.sigma2_sq}, {"tau2", h.tau2},
            {"ell", h.ell},             {"nugget", h.nugget}};
}

struct CpodSettings {
    int T = 1000;
    double beta = 0.05;
    CpodOptions opt;
};

CpodSettings resolve_cpod(const json& cfg, const Flags& f) {
    CpodSettings s;
    if (cfg.contains("cpod")) {
        const auto& c = cfg["cpod"];
        s.T = c.value("T", s.T);
        s.beta = c.value("beta", s.beta);
        s.opt.c = c.value("c", s.opt.c);
        s.opt.eps_c = c.value("eps_c", s.opt.eps_c);
        s.opt.max_iter = c.value("max_iter", s.opt.max_iter);
    }
    if (f.T) s.T = *f.T;
    if (f.beta) s.beta = *f.beta;
    if (f.c) s.opt.c = *f.c;
    if (f.eps_c) s.opt.eps_c = *f.eps_c;
    if (f.max_iter) s.opt.max_iter = *f.max_iter;
    if (s.T < 2) throw ArgumentError("--T must be >= 2");
    if (s.opt.c < 1 || s.opt.max_iter < 1) throw ArgumentError("--c and max_iter must be >= 1");
    if (!(s.opt.eps_c >= 0.0)) throw ArgumentError("--eps-c must be >= 0");
    if (!(s.beta > 0.0 && s.beta < 1.0)) throw ArgumentError("beta must lie in (0, 1)");
    return s;
}

// Everything a fusion run needs, loaded from a bundle directory.
struct Bundle {
    fs::path dir;
    json manifest;
    SurfaceGrid grid;
    OutputOperator op;
    Vec mu_wt;  // imputed measurement
    Vec mu_cfd;
    std::optional<Vec> truth;
    Vec z;
};

Bundle load_bundle(const Flags& f) {
    if (f.bundle.empty()) throw ArgumentError("--bundle DIR is required");
    Bundle b;
    b.dir = f.bundle;
    if (!fs::is_directory(b.dir)) throw DataError("bundle directory " + f.bundle + " does not exist");
    try {
        b.manifest = json::parse(read_text(b.dir / "manifest.json"));
        b.grid = read_grid_csv(b.dir / b.manifest.at("files").at("grid").get<std::string>());
        const auto& q = b.manifest.at("qoi");
        std::vector<Qoi> kinds;
        for (const auto& name : q.at("names")) {
            std::string s = name.get<std::string>();
            if (s == "C_l" || s == "C_L")
                kinds.push_back(Qoi::Lift);
            else if (s == "C_m" || s == "C_M")
                kinds.push_back(Qoi::Moment);
            else
                throw DataError("unknown QoI name " + s);
        }
        b.op = build_output_operator(b.grid, q.at("alpha_rad").get<double>(), kinds,
                                     q.contains("offset") ? json_vec(q["offset"]) : Vec());
        b.z = json_vec(q.at("z_measured"));
        if (b.z.size() != b.op.m()) throw DataError("QoI vector length does not match the QoI names");
        const auto& files = b.manifest.at("files");
        b.mu_wt = impute_missing(read_field_csv(b.dir / files.at("wt").get<std::string>()), b.grid);
        b.mu_cfd = read_complete_field(b.dir / files.at("cfd").get<std::string>());
        if (files.contains("truth") && fs::exists(b.dir / files["truth"].get<std::string>()))
            b.truth = read_complete_field(b.dir / files["truth"].get<std::string>());
    } catch (const json::exception& e) {
        throw DataError("bundle manifest: " + std::string(e.what()));
    }
    if (b.mu_wt.size() != b.grid.size() || b.mu_cfd.size() != b.grid.size())
        throw DataError("bundle fields do not match the grid");
    return b;
}

json qoi_table(const OutputOperator& op, const Vec& z, const Vec& fused, const std::string& label,
               const Vec& wt, const Vec& cfd) {
    Vec f = apply_forward(op, fused), w = apply_forward(op, wt), c = apply_forward(op, cfd);
    json rows = json::array();
    for (int i = 0; i < op.m(); ++i)
        rows.push_back({{"qoi", op.qoi_names[i]}, {"measured", z(i)}, {label, f(i)}, {"wt", w(i)}, {"cfd", c(i)}});
    return rows;
}

std::string svg_plot(const std::string& title, const std::vector<std::pair<std::string, Vec>>& series,
                     const std::optional<std::pair<Vec, Vec>>& band) {
    const double W = 800, Hh = 500, pad = 50;
    double lo = 1e300, hi = -1e300;
    Eigen::Index n = 0;
    for (const auto& [name, v] : series) {
        lo = std::min(lo, v.minCoeff());
        hi = std::max(hi, v.maxCoeff());
        n = std::max(n, v.size());
    }
    if (band) {
        lo = std::min(lo, band->first.minCoeff());
        hi = std::max(hi, band->second.maxCoeff());
    }
    if (!(hi > lo)) hi = lo + 1.0;
    auto X = [&](Eigen::Index i) { return pad + (W - 2 * pad) * i / std::max<double>(1.0, n - 1.0); };
    auto Y = [&](double v) { return Hh - pad - (Hh - 2 * pad) * (v - lo) / (hi - lo); };
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << pad << "\" y=\"25\" font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << W - 2 * pad << "\" height=\"" << Hh - 2 * pad
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
    if (band) {
        os << "<polygon fill=\"#2ca02c\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (Eigen::Index i = 0; i < band->second.size(); ++i) os << X(i) << ',' << Y(band->second(i)) << ' ';
        for (Eigen::Index i = band->first.size() - 1; i >= 0; --i) os << X(i) << ',' << Y(band->first(i)) << ' ';
        os << "\"/>\n";
    }
    int k = 0;
    for (const auto& [name, v] : series) {
        const char* col = colors[k % 5];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (Eigen::Index i = 0; i < v.size(); ++i) os << X(i) << ',' << Y(v(i)) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - pad - 150 << "\" y=\"" << pad + 18 * (k + 1) << "\" fill=\"" << col
           << "\" font-family=\"sans-serif\" font-size=\"13\">" << name << "</text>\n";
        ++k;
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << Hh - 15 << "\" font-family=\"sans-serif\" font-size=\"13\">cell index</text>\n";
    os << "<text x=\"5\" y=\"" << pad - 5 << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(hi) << "</text>\n";
    os << "<text x=\"5\" y=\"" << Hh - pad << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(lo) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

void write_json(const fs::path& p, const json& j) { atomic_write(p, j.dump(2) + "\n"); }

// --- synth -----------------------------------------------------------------

void write_bundle(const fs::path& dir, const ScenarioBundle& b, const json& extra) {
    fs::create_directories(dir);
    atomic_write(dir / "grid.csv", grid_csv(b.grid));
    atomic_write(dir / "truth.csv", field_csv(b.y_true));
    atomic_write(dir / "cfd.csv", field_csv(b.mu_cfd));
    atomic_write(dir / "wt.csv", field_csv(b.wt.values));
    atomic_write(dir / "operator.csv", operator_csv(b.op));
    json m;
    m["spec"] = to_json(b.spec);
    m["files"] = {{"grid", "grid.csv"}, {"truth", "truth.csv"}, {"cfd", "cfd.csv"}, {"wt", "wt.csv"},
                  {"operator", "operator.csv"}};
    json names = json::array();
    for (const auto& s : b.op.qoi_names) names.push_back(s);
    m["qoi"] = {{"names", names},
                {"alpha_rad", b.op.alpha},
                {"offset", vec_json(b.op.offset)},
                {"z_measured", vec_json(b.qoi.z_measured)},
                {"z_noiseless", vec_json(b.qoi.z_noiseless)},
                {"noise", vec_json(b.qoi.noise)},
                {"tau2", b.spec.tau * b.spec.tau}};
    m["provenance"] = {{"seed", b.spec.seed},
                       {"shock_position", shock_position(b.spec)},
                       {"shock_strength", shock_strength(b.spec)},
                       {"gap_start", b.wt.gap_start},
                       {"gap_length", b.wt.gap_length}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_json(dir / "manifest.json", m);
}

int cmd_synth(const Flags& f) {
    json cfg = load_config(f);
    ScenarioSpec base = spec_from_json(cfg.contains("scenario") ? cfg["scenario"] : json::object());
    if (f.seed) base.seed = *f.seed;
    validate_spec(base);
    if (!f.conditions.empty() && f.conditions != "table-1")
        throw ArgumentError("--conditions accepts only 'table-1'");
    const int ncases = static_cast<int>(table1_conditions().size());
    if (f.case_index < 0 || f.case_index > ncases) throw ArgumentError("--case must lie in [0, 11]");

    fs::path out(f.out.empty() ? "out" : f.out);
    fs::create_directories(out);
    // case 0 keeps the condition given in the spec
    ScenarioSpec spec = f.case_index == 0 ? base : table_case(base, f.case_index - 1);
    ScenarioBundle b = make_scenario(spec);
    json extra = {{"campaign_seed", base.seed}, {"case", f.case_index}};

    if (f.bank_size >= 0) {
        if (f.case_index == 0) throw ArgumentError("--bank requires a table case (--case 1..11)");
        SnapshotSet bank = standard_bank(base, b.grid, f.bank_size);
        write_bank(out / "bank", bank);
        extra["bank"] = {{"dir", "bank"}, {"q", bank.q()}, {"lhs", f.bank_size}};
    }
    if (f.conditions == "table-1") {
        std::ostringstream os;
        os << "case,mach,reynolds,alpha_deg\n";
        auto conds = table1_conditions();
        for (int k = 0; k < ncases; ++k) {
            os << k + 1 << ',' << fmt(conds[k].mach) << ',' << fmt(conds[k].reynolds) << ','
               << fmt(conds[k].alpha_deg) << '\n';
            char name[16];
            std::snprintf(name, sizeof name, "case_%02d", k + 1);
            write_bundle(out / name, make_scenario(table_case(base, k)),
                         {{"campaign_seed", base.seed}, {"case", k + 1}});
        }
        atomic_write(out / "conditions.csv", os.str());
    }
    write_bundle(out, b, extra);
    std::cout << "wrote scenario bundle (n=" << b.grid.size() << ") to " << out.string() << "\n";
    return kExitOk;
}

// --- fusion ----------------------------------------------------------------

struct BayesRun {
    BayesResult r;
    Hyperparameters gamma;
    bool diag_only = false;
};

BayesRun do_bayes(const Bundle& b, const json& cfg, const Flags& f) {
    BayesRun run;
    run.gamma = resolve_gamma(cfg, f, b.grid.dim);
    BayesOptions opt;
    opt.gamma = run.gamma;
    opt.level = f.level;
    if (cfg.contains("bayes") && cfg["bayes"].contains("theta")) opt.theta = cfg["bayes"]["theta"].get<double>();
    if (f.theta) opt.theta = *f.theta;
    if (opt.theta && !(*opt.theta >= 0.0 && *opt.theta <= 1.0)) throw ArgumentError("--theta must lie in [0, 1]");
    run.diag_only = f.diag_only || b.grid.size() > kPrecisionMaxCells ||
                    (cfg.contains("bayes") && cfg["bayes"].value("diag_only", false));
    opt.diag_only = run.diag_only;
    run.r = run_bayesian_fusion(b.mu_wt, b.mu_cfd, {b.z, run.gamma.tau2}, b.op, b.grid, opt);
    return run;
}

json bayes_summary(const Bundle& b, const BayesRun& run, const Flags& f) {
    const auto& r = run.r;
    json s;
    s["method"] = "bayes";
    s["theta"] = r.theta;
    s["theta_source"] = f.theta ? "pinned" : "estimated";
    s["sigma2"] = r.sigma2;
    s["gamma"] = gamma_json(run.gamma);
    s["solver"] = r.solver;
    s["diag_only"] = run.diag_only;
    s["level"] = r.level;
    s["misfit"] = r.misfit;
    s["qoi"] = qoi_table(b.op, b.z, r.y_map, "map", b.mu_wt, b.mu_cfd);
    return s;
}

int cmd_fuse_bayes(const Flags& f) {
    json cfg = load_config(f);
    Bundle b = load_bundle(f);
    BayesRun run = do_bayes(b, cfg, f);
    fs::path out = f.out.empty() ? b.dir : fs::path(f.out);
    fs::create_directories(out);
    Vec sd = run.r.cov_diag.cwiseMax(0.0).cwiseSqrt();
    atomic_write(out / "bayes_field.csv",
                 table_csv({"y_map", "std", "lower", "upper"}, {run.r.y_map, sd, run.r.lower, run.r.upper}));
    write_json(out / "bayes_summary.json", bayes_summary(b, run, f));
    if (f.plot)
        atomic_write(out / "bayes.svg",
                     svg_plot("Bayesian fusion (theta=" + fmt(run.r.theta) + ")",
                              {{"WT (mu1)", b.mu_wt}, {"CFD (mu2)", b.mu_cfd}, {"MAP", run.r.y_map}},
                              std::make_pair(run.r.lower, run.r.upper)));
    std::cout << "theta=" << fmt(run.r.theta) << " misfit=" << fmt(run.r.misfit) << "\n";
    return kExitOk;
}

SnapshotSet load_bank(const Bundle& b, const Flags& f) {
    fs::path dir = f.bank.empty() ? b.dir / "bank" : fs::path(f.bank);
    if (!fs::exists(dir / "manifest.json"))
        throw DataError("snapshot bank not found at " + dir.string() + " (run synth with --bank N)");
    SnapshotSet s = read_bank(dir);
    if (s.n() != b.grid.size()) throw DataError("snapshot bank does not match the grid");
    return s;
}

struct CpodRun {
    CpodEnsemble e;
    CpodSettings s;
    int q = 0;
};

CpodRun do_cpod(const Bundle& b, const json& cfg, const Flags& f) {
    CpodRun run;
    run.s = resolve_cpod(cfg, f);
    SnapshotSet bank = load_bank(b, f);
    run.q = bank.q();
    std::uint64_t seed = f.seed ? *f.seed : b.manifest.value("campaign_seed", std::uint64_t{0});
    run.e = cpod_ensemble(bank, b.mu_cfd, b.mu_wt, b.z, b.op, run.s.T, run.s.beta, seed, run.s.opt);
    return run;
}

json cpod_summary(const Bundle& b, const CpodRun& run) {
    const auto& e = run.e;
    json s;
    s["method"] = "cpod";
    s["T"] = e.T;
    s["T_requested"] = e.T_requested;
    s["nu"] = e.nu;
    s["beta"] = e.beta;
    s["t_quantile"] = e.t_quantile;
    s["c"] = run.s.opt.c;
    s["eps_c"] = run.s.opt.eps_c;
    s["max_iter"] = run.s.opt.max_iter;
    s["q"] = run.q;
    int conv = 0;
    json iters = json::array();
    for (const auto& r : e.runs) {
        conv += r.converged ? 1 : 0;
        iters.push_back(r.iterations);
    }
    s["converged"] = conv;
    s["iterations"] = iters;
    json fails = json::array();
    for (const auto& [i, msg] : e.failures) fails.push_back({{"replicate", i}, {"reason", msg}});
    s["failures"] = fails;
    s["misfit"] = (b.z - apply_forward(b.op, e.mean)).norm();
    s["qoi"] = qoi_table(b.op, b.z, e.mean, "cpod", b.mu_wt, b.mu_cfd);
    return s;
}

std::string cost_csv(const CpodEnsemble& e) {
    std::ostringstream os;
    os << "replicate,theta_init,iteration,cost\n";
    for (size_t k = 0; k < e.runs.size(); ++k)
        for (size_t i = 0; i < e.runs[k].cost_history.size(); ++i)
            os << k << ',' << fmt(e.runs[k].theta_init) << ',' << i + 1 << ',' << fmt(e.runs[k].cost_history[i]) << '\n';
    return os.str();
}

int cmd_fuse_cpod(const Flags& f) {
    json cfg = load_config(f);
    Bundle b = load_bundle(f);
    CpodRun run = do_cpod(b, cfg, f);
    fs::path out = f.out.empty() ? b.dir : fs::path(f.out);
    fs::create_directories(out);
    Vec sd = run.e.cov_diag.cwiseSqrt();
    atomic_write(out / "cpod_field.csv",
                 table_csv({"mean", "std", "lower", "upper"}, {run.e.mean, sd, run.e.lower, run.e.upper}));
    atomic_write(out / "cpod_costs.csv", cost_csv(run.e));
    write_json(out / "cpod_summary.json", cpod_summary(b, run));
    if (f.plot)
        atomic_write(out / "cpod.svg", svg_plot("CPOD ensemble mean (T=" + std::to_string(run.e.T) + ")",
                                                {{"WT", b.mu_wt}, {"CFD", b.mu_cfd}, {"CPOD mean", run.e.mean}},
                                                std::make_pair(run.e.lower, run.e.upper)));
    std::cout << "T=" << run.e.T << " misfit=" << fmt((b.z - apply_forward(b.op, run.e.mean)).norm()) << "\n";
    return kExitOk;
}

int cmd_compare(const Flags& f) {
    using clock = std::chrono::steady_clock;
    auto secs = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };
    auto t0 = clock::now();
    json cfg = load_config(f);
    Bundle b = load_bundle(f);
    auto t1 = clock::now();
    BayesRun br = do_bayes(b, cfg, f);
    auto t2 = clock::now();
    CpodRun cr = do_cpod(b, cfg, f);
    auto t3 = clock::now();

    const Vec& y = br.r.y_map;
    const Vec& u = cr.e.mean;
    json rep;
    rep["relative_l2_cpod_vs_map"] = (u - y).norm() / y.norm();
    rep["misfit"] = {{"map", br.r.misfit}, {"cpod", (b.z - apply_forward(b.op, u)).norm()}};
    if (b.truth) {
        const Vec& t = *b.truth;
        rep["error_vs_truth"] = {{"map", (y - t).norm()},
                                 {"cpod", (u - t).norm()},
                                 {"wt", (b.mu_wt - t).norm()},
                                 {"cfd", (b.mu_cfd - t).norm()}};
    }
    rep["theta"] = br.r.theta;
    rep["T"] = cr.e.T;
    rep["q"] = cr.q;
    rep["wall_clock_s"] = {{"load", secs(t0, t1)}, {"bayes", secs(t1, t2)}, {"cpod", secs(t2, t3)}};
    fs::path out = f.out.empty() ? b.dir : fs::path(f.out);
    fs::create_directories(out);
    write_json(out / "compare.json", rep);
    if (f.plot)
        atomic_write(out / "compare.svg", svg_plot("MAP vs CPOD", {{"WT", b.mu_wt}, {"CFD", b.mu_cfd},
                                                                   {"MAP", y}, {"CPOD mean", u}},
                                                   std::nullopt));
    std::cout << "relative L2 (CPOD vs MAP) = " << fmt(rep["relative_l2_cpod_vs_map"].get<double>()) << "\n";
    return kExitOk;
}

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--out", f.out, "output directory");
    app->add_option("--seed", f.seed, "master seed");
}

void add_fusion(CLI::App* app, Flags& f, bool bayes, bool cpod) {
    app->add_option("--bundle", f.bundle, "scenario bundle directory")->required();
    app->add_flag("--plot", f.plot, "also write an SVG plot");
    if (bayes) {
        app->add_option("--theta", f.theta, "pin the fusion weight instead of estimating it");
        app->add_option("--tau2", f.tau2, "QoI noise variance");
        app->add_option("--sigma1sq", f.sigma1sq, "measurement variance");
        app->add_option("--sigma2sq", f.sigma2sq, "simulation variance");
        app->add_option("--ell", f.ell, "kernel length scale");
        app->add_option("--nugget", f.nugget, "relative diagonal jitter");
        app->add_option("--level", f.level, "confidence level of the bands");
        app->add_flag("--diag-only", f.diag_only, "only the posterior covariance diagonal");
    }
    if (cpod) {
        app->add_option("--bank", f.bank, "snapshot bank directory (default BUNDLE/bank)");
        app->add_option("--T", f.T, "ensemble size");
        app->add_option("--beta", f.beta, "two-sided significance of the bounds");
        app->add_option("--c", f.c, "stopping window");
        app->add_option("--eps-c", f.eps_c, "stopping threshold");
        app->add_option("--max-iter", f.max_iter, "iteration cap");
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"fieldfuse: fuse simulated and measured surface fields under QoI constraints"};
    app.require_subcommand(1);
    Flags f;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scenario bundle");
    add_common(synth, f);
    synth->add_option("--conditions", f.conditions, "'table-1' writes the eleven table cases");
    synth->add_option("--case", f.case_index, "table case of the main bundle (1-11, 0 = spec condition)");
    synth->add_option("--bank", f.bank_size, "write a snapshot bank: 0 = 22 columns, N = 11 + N LHS simulations");
    auto* fb = app.add_subcommand("fuse-bayes", "Bayesian MAP fusion");
    add_common(fb, f);
    add_fusion(fb, f, true, false);
    auto* fc = app.add_subcommand("fuse-cpod", "constrained POD ensemble fusion");
    add_common(fc, f);
    add_fusion(fc, f, false, true);
    auto* cmp = app.add_subcommand("compare", "run both methods on one bundle");
    add_common(cmp, f);
    add_fusion(cmp, f, true, true);

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }
    try {
        if (synth->parsed()) return cmd_synth(f);
        if (fb->parsed()) return cmd_fuse_bayes(f);
        if (fc->parsed()) return cmd_fuse_cpod(f);
        if (cmp->parsed()) return cmd_compare(f);
    } catch (const InfeasibleConstraintError& e) {
        std::cerr << "error: infeasible constraint on " << e.qoi() << ": " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}

}  // namespace fieldfuse
