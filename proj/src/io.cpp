#include "fieldfuse/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace fieldfuse {

using nlohmann::json;

std::string fmt(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void atomic_write(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open " + tmp.string() + " for writing");
        f << content;
        f.flush();
        if (!f) throw DataError("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) {
        while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
        size_t b = cur.find_first_not_of(' ');
        out.push_back(b == std::string::npos ? std::string() : cur.substr(b));
    }
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    if (s == "NaN" || s == "nan" || s == "NAN" || s.empty()) return std::nan("");
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("malformed number '" + s + "' in " + what);
    return v;
}

struct Table {
    std::map<std::string, std::string> meta;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Table parse_table(const std::string& text, const std::string& what) {
    Table t;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            for (const auto& kv : split(line.substr(1), ' ')) {
                auto eq = kv.find('=');
                if (eq != std::string::npos) t.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
            continue;
        }
        if (t.header.empty()) {
            t.header = split(line, ',');
            continue;
        }
        auto cells = split(line, ',');
        if (cells.size() != t.header.size())
            throw DataError(what + ": row has " + std::to_string(cells.size()) + " fields, expected " +
                            std::to_string(t.header.size()));
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c, what));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw DataError(what + ": missing header");
    return t;
}

int column(const Table& t, const std::string& name, const std::string& what) {
    for (size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return static_cast<int>(i);
    throw DataError(what + ": missing column '" + name + "'");
}

}  // namespace

std::string grid_csv(const SurfaceGrid& g) {
    std::ostringstream os;
    os << "# dim=" << g.dim << " ref_length=" << fmt(g.ref_length) << " ref_area=" << fmt(g.ref_area)
       << " ref_point=";
    for (Eigen::Index i = 0; i < g.ref_point.size(); ++i) os << (i ? ";" : "") << fmt(g.ref_point(i));
    os << " closed=" << (g.closed ? 1 : 0) << "\n";
    if (g.dim == 2) {
        os << "x,z,nx,nz,measure\n";
        for (int i = 0; i < g.size(); ++i)
            os << fmt(g.centers(i, 0)) << ',' << fmt(g.centers(i, 1)) << ',' << fmt(g.normals(i, 0))
               << ',' << fmt(g.normals(i, 1)) << ',' << fmt(g.measures(i)) << '\n';
    } else {
        os << "x,z,y,nx,nz,ny,measure\n";
        for (int i = 0; i < g.size(); ++i)
            os << fmt(g.centers(i, 0)) << ',' << fmt(g.centers(i, 2)) << ',' << fmt(g.centers(i, 1))
               << ',' << fmt(g.normals(i, 0)) << ',' << fmt(g.normals(i, 2)) << ','
               << fmt(g.normals(i, 1)) << ',' << fmt(g.measures(i)) << '\n';
    }
    return os.str();
}

SurfaceGrid parse_grid_csv(const std::string& text) {
    const std::string what = "grid file";
    Table t = parse_table(text, what);
    SurfaceGrid g;
    bool has_y = false;
    for (const auto& h : t.header) has_y = has_y || h == "y" || h == "y_coord";
    g.dim = has_y ? 3 : 2;
    const int n = static_cast<int>(t.rows.size());
    if (n == 0) throw DataError(what + ": no cells");
    g.centers.resize(n, g.dim);
    g.normals.resize(n, g.dim);
    g.measures.resize(n);
    const int cx = column(t, "x", what), cz = column(t, "z", what);
    const int nx = column(t, "nx", what), nz = column(t, "nz", what), cm = column(t, "measure", what);
    int cy = -1, ny = -1;
    if (has_y) {
        for (size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == "y" || t.header[i] == "y_coord") cy = static_cast<int>(i);
        ny = column(t, "ny", what);
    }
    const int vz = g.vertical();
    for (int i = 0; i < n; ++i) {
        const auto& r = t.rows[i];
        g.centers(i, 0) = r[cx];
        g.centers(i, vz) = r[cz];
        g.normals(i, 0) = r[nx];
        g.normals(i, vz) = r[nz];
        if (has_y) {
            g.centers(i, 1) = r[cy];
            g.normals(i, 1) = r[ny];
        }
        g.measures(i) = r[cm];
    }
    if (!g.centers.allFinite() || !g.normals.allFinite() || !g.measures.allFinite())
        throw DataError(what + ": non-finite entries");
    auto get = [&](const std::string& k, double def) {
        auto it = t.meta.find(k);
        return it == t.meta.end() ? def : parse_double(it->second, what);
    };
    g.ref_length = get("ref_length", 1.0);
    g.ref_area = get("ref_area", g.ref_length);
    g.closed = get("closed", 1.0) != 0.0;
    g.ref_point = Vec::Zero(g.dim);
    g.ref_point(0) = 0.25 * g.ref_length;
    if (auto it = t.meta.find("ref_point"); it != t.meta.end()) {
        auto parts = split(it->second, ';');
        if (static_cast<int>(parts.size()) != g.dim) throw DataError(what + ": bad ref_point");
        for (int d = 0; d < g.dim; ++d) g.ref_point(d) = parse_double(parts[d], what);
    }
    g.nodes = g.centers;
    try {
        validate_grid(g);
    } catch (const GeometryError& e) {
        throw DataError(std::string("grid file: ") + e.what());
    }
    return g;
}

SurfaceGrid read_grid_csv(const fs::path& path) { return parse_grid_csv(read_text(path)); }

std::string field_csv(const MaskedField& v) {
    std::ostringstream os;
    os << "cell_index,value\n";
    for (size_t i = 0; i < v.size(); ++i) os << i << ',' << (v[i] ? fmt(*v[i]) : "NaN") << '\n';
    return os.str();
}

std::string field_csv(const Vec& v) { return field_csv(to_masked(v)); }

MaskedField parse_field_csv(const std::string& text) {
    const std::string what = "field file";
    Table t = parse_table(text, what);
    const int ci = column(t, "cell_index", what), cv = column(t, "value", what);
    MaskedField out(t.rows.size());
    std::vector<bool> seen(t.rows.size(), false);
    for (const auto& r : t.rows) {
        double idx = r[ci];
        if (!(idx >= 0) || idx != std::floor(idx) || idx >= static_cast<double>(out.size()))
            throw DataError(what + ": bad cell index");
        size_t k = static_cast<size_t>(idx);
        if (seen[k]) throw DataError(what + ": duplicate cell index");
        seen[k] = true;
        if (std::isfinite(r[cv])) out[k] = r[cv];
    }
    return out;
}

MaskedField read_field_csv(const fs::path& path) {
    try {
        return parse_field_csv(read_text(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

Vec read_complete_field(const fs::path& path) {
    MaskedField m = read_field_csv(path);
    Vec v(static_cast<Eigen::Index>(m.size()));
    for (size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) throw DataError(path.string() + ": cell " + std::to_string(i) + " is missing");
        v(static_cast<Eigen::Index>(i)) = *m[i];
    }
    return v;
}

std::string operator_csv(const OutputOperator& op) {
    std::vector<std::string> header{"cell_index"};
    for (const auto& q : op.qoi_names) header.push_back(q);
    std::ostringstream os;
    os << "# alpha=" << fmt(op.alpha) << " offset=";
    for (int j = 0; j < op.m(); ++j) os << (j ? ";" : "") << fmt(op.offset(j));
    os << "\n";
    for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (int i = 0; i < op.n(); ++i) {
        os << i;
        for (int j = 0; j < op.m(); ++j) os << ',' << fmt(op.H(i, j));
        os << '\n';
    }
    return os.str();
}

std::string table_csv(const std::vector<std::string>& header, const std::vector<Vec>& cols) {
    std::ostringstream os;
    os << "cell_index";
    for (const auto& h : header) os << ',' << h;
    os << '\n';
    const Eigen::Index n = cols.empty() ? 0 : cols.front().size();
    for (Eigen::Index i = 0; i < n; ++i) {
        os << i;
        for (const auto& c : cols) os << ',' << fmt(c(i));
        os << '\n';
    }
    return os.str();
}

json to_json(const FlightCondition& c) {
    return {{"mach", c.mach}, {"reynolds", c.reynolds}, {"alpha_deg", c.alpha_deg}};
}

FlightCondition condition_from_json(const json& j) {
    FlightCondition c;
    c.mach = j.at("mach").get<double>();
    c.reynolds = j.at("reynolds").get<double>();
    c.alpha_deg = j.at("alpha_deg").get<double>();
    return c;
}

json to_json(const ScenarioSpec& s) {
    json j;
    j["grid"] = {{"n", s.grid.n},
                 {"wing", s.grid.wing},
                 {"span_cells", s.grid.span_cells},
                 {"semi_span", s.grid.semi_span},
                 {"thickness", s.grid.thickness}};
    j["condition"] = to_json(s.condition);
    json t = {{"amplitude", s.truth.amplitude}, {"shock_width", s.truth.shock_width}};
    t["shock_position"] = s.truth.shock_position ? json(*s.truth.shock_position) : json(nullptr);
    t["shock_strength"] = s.truth.shock_strength ? json(*s.truth.shock_strength) : json(nullptr);
    j["truth"] = t;
    const auto& c = s.corruption;
    j["corruption"] = {{"noise_std", c.noise_std},
                       {"gap_fraction", c.gap_fraction},
                       {"bias_amplitude", c.bias_amplitude},
                       {"bias_length", c.bias_length},
                       {"shock_shift", c.shock_shift}};
    j["tau"] = s.tau;
    j["seed"] = s.seed;
    return j;
}

ScenarioSpec spec_from_json(const json& j, ScenarioSpec s) {
    try {
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            s.grid.n = g.value("n", s.grid.n);
            s.grid.wing = g.value("wing", s.grid.wing);
            s.grid.span_cells = g.value("span_cells", s.grid.span_cells);
            s.grid.semi_span = g.value("semi_span", s.grid.semi_span);
            s.grid.thickness = g.value("thickness", s.grid.thickness);
        }
        if (j.contains("condition")) {
            const auto& c = j["condition"];
            s.condition.mach = c.value("mach", s.condition.mach);
            s.condition.reynolds = c.value("reynolds", s.condition.reynolds);
            s.condition.alpha_deg = c.value("alpha_deg", s.condition.alpha_deg);
        }
        if (j.contains("truth")) {
            const auto& t = j["truth"];
            s.truth.amplitude = t.value("amplitude", s.truth.amplitude);
            s.truth.shock_width = t.value("shock_width", s.truth.shock_width);
            if (t.contains("shock_position"))
                s.truth.shock_position = t["shock_position"].is_null()
                                             ? std::nullopt
                                             : std::optional<double>(t["shock_position"].get<double>());
            if (t.contains("shock_strength"))
                s.truth.shock_strength = t["shock_strength"].is_null()
                                             ? std::nullopt
                                             : std::optional<double>(t["shock_strength"].get<double>());
        }
        if (j.contains("corruption")) {
            const auto& c = j["corruption"];
            auto& o = s.corruption;
            o.noise_std = c.value("noise_std", o.noise_std);
            o.gap_fraction = c.value("gap_fraction", o.gap_fraction);
            o.bias_amplitude = c.value("bias_amplitude", o.bias_amplitude);
            o.bias_length = c.value("bias_length", o.bias_length);
            o.shock_shift = c.value("shock_shift", o.shock_shift);
        }
        s.tau = j.value("tau", s.tau);
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("invalid scenario spec: ") + e.what());
    }
    return s;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vec json_vec(const json& j) {
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

void write_bank(const fs::path& dir, const SnapshotSet& s) {
    fs::create_directories(dir);
    json cols = json::array();
    for (int j = 0; j < s.q(); ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%03d.csv", j);
        atomic_write(dir / name, field_csv(Vec(s.U.col(j))));
        json c = {{"file", name}};
        if (!s.conditions.empty()) c["condition"] = to_json(s.conditions[j]);
        if (!s.fidelity.empty()) c["fidelity"] = fidelity_name(s.fidelity[j]);
        cols.push_back(c);
    }
    json m = {{"n", s.n()}, {"q", s.q()}, {"columns", cols}};
    atomic_write(dir / "manifest.json", m.dump(2) + "\n");
}

SnapshotSet read_bank(const fs::path& dir) {
    json m;
    try {
        m = json::parse(read_text(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw DataError("bad snapshot manifest: " + std::string(e.what()));
    }
    SnapshotSet s;
    std::vector<Vec> cols;
    for (const auto& c : m.at("columns")) {
        cols.push_back(read_complete_field(dir / c.at("file").get<std::string>()));
        if (c.contains("condition")) s.conditions.push_back(condition_from_json(c["condition"]));
        if (c.contains("fidelity"))
            s.fidelity.push_back(c["fidelity"] == "measurement" ? Fidelity::Measurement : Fidelity::Simulation);
    }
    if (cols.empty()) throw DataError("snapshot bank is empty");
    s.U.resize(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) {
        if (cols[j].size() != s.U.rows()) throw DataError("snapshot columns differ in length");
        s.U.col(static_cast<Eigen::Index>(j)) = cols[j];
    }
    validate_snapshots(s);
    return s;
}

}  // namespace fieldfuse
