#include "mfg/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mfg {

using json = nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& what)
{
    throw ConfigError(path + ": " + what);
}

void known_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!obj.is_object()) field_error(path, "expected an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) field_error(path + "." + it.key(), "unknown key");
}

double number(const json& v, const std::string& path)
{
    if (!v.is_number()) field_error(path, "expected a number");
    return v.get<double>();
}

int integer(const json& v, const std::string& path, int lo)
{
    if (!v.is_number_integer()) field_error(path, "expected an integer");
    const long long x = v.get<long long>();
    if (x < lo || x > 1000000000LL) field_error(path, "out of range");
    return static_cast<int>(x);
}

Matrix matrix_value(const json& v, int rows, int cols, const std::string& path)
{
    if (v.is_number()) return number(v, path) * Matrix::Identity(rows, cols);
    if (!v.is_array()) field_error(path, "expected a number or nested array");
    if (static_cast<int>(v.size()) != rows)
        field_error(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = v[r];
        const std::string rp = path + "[" + std::to_string(r) + "]";
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            field_error(rp, "expected a row of " + std::to_string(cols) + " numbers");
        for (int c = 0; c < cols; ++c) m(r, c) = number(row[c], rp + "[" + std::to_string(c) + "]");
    }
    return m;
}

Vector vector_value(const json& v, int n, const std::string& path)
{
    if (v.is_number()) return Vector::Constant(n, number(v, path));
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        field_error(path, "expected " + std::to_string(n) + " numbers");
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = number(v[i], path + "[" + std::to_string(i) + "]");
    return x;
}

template <class T, class F>
Piecewise<T> piecewise(const json& v, const std::string& path, F value)
{
    if (!v.is_object()) return Piecewise<T>(value(v, path));
    known_keys(v, path, {"segments"});
    const auto& segs = v.at("segments");
    if (!segs.is_array() || segs.empty()) field_error(path + ".segments", "expected a nonempty array");
    std::vector<double> starts;
    std::vector<T> values;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const std::string sp = path + ".segments[" + std::to_string(s) + "]";
        known_keys(segs[s], sp, {"t", "value"});
        if (!segs[s].contains("t") || !segs[s].contains("value")) field_error(sp, "needs t and value");
        starts.push_back(number(segs[s]["t"], sp + ".t"));
        values.push_back(value(segs[s]["value"], sp + ".value"));
    }
    try {
        return Piecewise<T>(starts, values);
    } catch (const ConfigError& e) {
        field_error(path, e.what());
    }
}

TimeMatrix time_matrix(const json& obj, const char* key, int rows, int cols, const std::string& path)
{
    if (!obj.contains(key)) return Matrix(Matrix::Zero(rows, cols));
    return piecewise<Matrix>(obj[key], path + "." + key,
                             [&](const json& v, const std::string& p) { return matrix_value(v, rows, cols, p); });
}

TimeVector time_vector(const json& obj, const char* key, int n, const std::string& path)
{
    if (!obj.contains(key)) return Vector(Vector::Zero(n));
    return piecewise<Vector>(obj[key], path + "." + key,
                             [&](const json& v, const std::string& p) { return vector_value(v, n, p); });
}

Matrix fixed_matrix(const json& obj, const char* key, int rows, int cols, const std::string& path, double diag = 0.0)
{
    if (!obj.contains(key)) return diag * Matrix::Identity(rows, cols);
    return matrix_value(obj[key], rows, cols, path + "." + key);
}

ConstraintSet constraint(const json& v, int m, const std::string& path)
{
    if (v.is_string()) {
        const std::string k = v.get<std::string>();
        if (k == "full") return ConstraintSet::full_space(m);
        if (k == "orthant") return ConstraintSet::orthant(m);
        field_error(path, "unknown set '" + k + "' (full, orthant, box, subspace, cone)");
    }
    known_keys(v, path, {"kind", "lower", "upper", "upsilon"});
    if (!v.contains("kind") || !v["kind"].is_string()) field_error(path + ".kind", "expected a string");
    const std::string k = v["kind"].get<std::string>();
    auto rows = [&](const json& u) {
        if (!u.is_array() || u.empty()) field_error(path + ".upsilon", "expected a nonempty nested array");
        return static_cast<int>(u.size());
    };
    try {
        if (k == "full") return ConstraintSet::full_space(m);
        if (k == "orthant") return ConstraintSet::orthant(m);
        if (k == "box") {
            auto bound = [&](const char* key, double inf) {
                if (!v.contains(key)) return Vector(Vector::Constant(m, inf));
                const json& b = v[key];
                Vector x(m);
                if (!b.is_array() || static_cast<int>(b.size()) != m)
                    field_error(path + "." + key, "expected " + std::to_string(m) + " entries");
                for (int i = 0; i < m; ++i) {
                    const std::string ep = path + "." + key + "[" + std::to_string(i) + "]";
                    x(i) = b[i].is_null() ? inf : number(b[i], ep);
                }
                return x;
            };
            const double big = std::numeric_limits<double>::infinity();
            return ConstraintSet::box(bound("lower", -big), bound("upper", big));
        }
        if (k == "subspace" || k == "cone") {
            if (!v.contains("upsilon")) field_error(path + ".upsilon", "required");
            const Matrix u = matrix_value(v["upsilon"], rows(v["upsilon"]), m, path + ".upsilon");
            return k == "subspace" ? ConstraintSet::subspace(u) : ConstraintSet::cone(u);
        }
    } catch (const Error& e) {
        const std::string what = e.what();
        if (what.rfind(path, 0) == 0) throw;
        field_error(path, what);
    }
    field_error(path + ".kind", "unknown set '" + k + "'");
}

ModelSpec parse_model(const json& root)
{
    if (!root.contains("model")) throw ConfigError("model: section required");
    const json& mj = root["model"];
    known_keys(mj, "model", {"n", "m", "T", "major", "minor", "types"});
    ModelSpec s;
    s.n = mj.contains("n") ? integer(mj["n"], "model.n", 1) : 1;
    s.m = mj.contains("m") ? integer(mj["m"], "model.m", 1) : 1;
    if (s.n > kMaxDim || s.m > kMaxDim) throw ConfigError("model: n and m are limited to " + std::to_string(kMaxDim));
    s.T = mj.contains("T") ? number(mj["T"], "model.T") : 1.0;
    if (!(s.T > 0)) field_error("model.T", "must be positive");
    const int n = s.n, m = s.m;

    const json major = mj.contains("major") ? mj["major"] : json::object();
    known_keys(major, "model.major",
               {"A", "B", "C", "D", "F1", "F2", "b", "sigma", "Q", "R", "G", "rho", "x0"});
    const std::string mp = "model.major";
    s.major.A = time_matrix(major, "A", n, n, mp);
    s.major.B = time_matrix(major, "B", n, m, mp);
    s.major.C = time_matrix(major, "C", n, n, mp);
    s.major.D = time_matrix(major, "D", n, m, mp);
    s.major.F1 = time_matrix(major, "F1", n, n, mp);
    s.major.F2 = time_matrix(major, "F2", n, n, mp);
    s.major.b = time_vector(major, "b", n, mp);
    s.major.sigma = time_vector(major, "sigma", n, mp);
    s.major.Q = fixed_matrix(major, "Q", n, n, mp);
    s.major.R = fixed_matrix(major, "R", m, m, mp, 1.0);
    s.major.G = fixed_matrix(major, "G", n, n, mp);
    s.major.rho = major.contains("rho") ? number(major["rho"], mp + ".rho") : 0.0;
    s.major.x0 = major.contains("x0") ? vector_value(major["x0"], n, mp + ".x0") : Vector(Vector::Zero(n));

    const json minor = mj.contains("minor") ? mj["minor"] : json::object();
    known_keys(minor, "model.minor", {"B", "C", "F1", "F2", "H", "b", "sigma", "Q", "G", "rho", "x0"});
    const std::string np = "model.minor";
    s.minor.B = time_matrix(minor, "B", n, m, np);
    s.minor.C = time_matrix(minor, "C", n, n, np);
    s.minor.F1 = time_matrix(minor, "F1", n, n, np);
    s.minor.F2 = time_matrix(minor, "F2", n, n, np);
    s.minor.H = time_matrix(minor, "H", n, n, np);
    s.minor.b = time_vector(minor, "b", n, np);
    s.minor.sigma = time_vector(minor, "sigma", n, np);
    s.minor.Q = fixed_matrix(minor, "Q", n, n, np);
    s.minor.G = fixed_matrix(minor, "G", n, n, np);
    s.minor.rho = minor.contains("rho") ? number(minor["rho"], np + ".rho") : 0.0;
    s.minor.x0 = minor.contains("x0") ? vector_value(minor["x0"], n, np + ".x0") : Vector(Vector::Zero(n));

    if (!mj.contains("types") || !mj["types"].is_array() || mj["types"].empty())
        field_error("model.types", "expected a nonempty array of minor types");
    const int K = static_cast<int>(mj["types"].size());
    for (int k = 0; k < K; ++k) {
        const json& t = mj["types"][k];
        const std::string tp = "model.types[" + std::to_string(k) + "]";
        known_keys(t, tp, {"A", "D", "R", "pi"});
        MinorType ty;
        ty.A = time_matrix(t, "A", n, n, tp);
        ty.D = time_matrix(t, "D", n, m, tp);
        ty.R = fixed_matrix(t, "R", m, m, tp, 1.0);
        ty.pi = t.contains("pi") ? number(t["pi"], tp + ".pi") : 1.0 / K;
        ty.gamma = ConstraintSet::full_space(m);
        s.types.push_back(ty);
    }

    s.major.gamma = ConstraintSet::full_space(m);
    if (root.contains("constraints")) {
        const json& c = root["constraints"];
        known_keys(c, "constraints", {"major", "types"});
        if (c.contains("major")) s.major.gamma = constraint(c["major"], m, "constraints.major");
        if (c.contains("types")) {
            if (!c["types"].is_array() || static_cast<int>(c["types"].size()) != K)
                field_error("constraints.types", "expected one entry per minor type");
            for (int k = 0; k < K; ++k)
                s.types[k].gamma = constraint(c["types"][k], m, "constraints.types[" + std::to_string(k) + "]");
        }
    }
    return s;
}

std::uint64_t seed_value(const json& v, const std::string& path)
{
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        field_error(path, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::string line_col(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json matrix_json(const Matrix& m)
{
    json a = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(row);
    }
    return a;
}

json vector_json(const Vector& v)
{
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

template <class T, class F>
json piecewise_json(const Piecewise<T>& p, F conv)
{
    if (p.is_constant()) return conv(p.values()[0]);
    json segs = json::array();
    for (std::size_t s = 0; s < p.values().size(); ++s)
        segs.push_back({{"t", p.starts()[s]}, {"value", conv(p.values()[s])}});
    return {{"segments", segs}};
}

json tm(const TimeMatrix& m) { return piecewise_json(m, matrix_json); }
json tv(const TimeVector& v) { return piecewise_json(v, vector_json); }

json set_json(const ConstraintSet& g)
{
    json j;
    j["kind"] = to_string(g.kind());
    if (g.kind() == SetKind::Box) {
        json lo = json::array(), hi = json::array();
        for (int i = 0; i < g.dim(); ++i) {
            lo.push_back(std::isfinite(g.lower()(i)) ? json(g.lower()(i)) : json(nullptr));
            hi.push_back(std::isfinite(g.upper()(i)) ? json(g.upper()(i)) : json(nullptr));
        }
        j["lower"] = lo;
        j["upper"] = hi;
    }
    if (g.kind() == SetKind::Subspace || g.kind() == SetKind::Cone) j["upsilon"] = matrix_json(g.upsilon());
    return j;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + line_col(text, e.byte) + ": malformed JSON");
    }
    try {
        known_keys(root, "config", {"model", "constraints", "solver", "study"});
        RunConfig cfg;
        cfg.spec = parse_model(root);
        if (root.contains("solver")) {
            const json& s = root["solver"];
            known_keys(s, "solver", {"steps", "paths", "particles", "tol", "max_iter", "driver", "seed", "memory_gb",
                                     "local_eps"});
            auto& c = cfg.solver;
            if (s.contains("steps")) c.J = integer(s["steps"], "solver.steps", 1);
            if (s.contains("paths")) c.P = integer(s["paths"], "solver.paths", 1);
            if (s.contains("particles")) c.M = integer(s["particles"], "solver.particles", 1);
            if (s.contains("tol")) c.options.tol = number(s["tol"], "solver.tol");
            if (s.contains("max_iter")) c.options.max_iter = integer(s["max_iter"], "solver.max_iter", 1);
            if (s.contains("seed")) c.seed = seed_value(s["seed"], "solver.seed");
            if (s.contains("local_eps")) c.local_eps = number(s["local_eps"], "solver.local_eps");
            if (s.contains("memory_gb"))
                c.options.memory_cap = static_cast<std::size_t>(number(s["memory_gb"], "solver.memory_gb") * (1 << 30));
            if (s.contains("driver")) {
                if (!s["driver"].is_string()) field_error("solver.driver", "expected a string");
                try {
                    c.options.driver = driver_from_string(s["driver"].get<std::string>());
                } catch (const ConfigError& e) {
                    field_error("solver.driver", e.what());
                }
            }
        }
        if (root.contains("study")) {
            const json& s = root["study"];
            known_keys(s, "study", {"kind", "Ns", "replications", "seed", "agent"});
            auto& c = cfg.study;
            if (s.contains("kind")) {
                if (!s["kind"].is_string()) field_error("study.kind", "expected a string");
                c.kind = s["kind"].get<std::string>();
            }
            if (s.contains("Ns")) {
                if (!s["Ns"].is_array() || s["Ns"].empty()) field_error("study.Ns", "expected a nonempty array");
                c.Ns.clear();
                for (std::size_t i = 0; i < s["Ns"].size(); ++i)
                    c.Ns.push_back(integer(s["Ns"][i], "study.Ns[" + std::to_string(i) + "]", 1));
            }
            if (s.contains("replications")) c.replications = integer(s["replications"], "study.replications", 2);
            if (s.contains("seed")) c.seed = seed_value(s["seed"], "study.seed");
            if (s.contains("agent")) c.agent = integer(s["agent"], "study.agent", 0);
        }
        return cfg;
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string dump_config(const RunConfig& cfg)
{
    const ModelSpec& s = cfg.spec;
    json model;
    model["n"] = s.n;
    model["m"] = s.m;
    model["T"] = s.T;
    const auto& M = s.major;
    model["major"] = {{"A", tm(M.A)},   {"B", tm(M.B)},       {"C", tm(M.C)},   {"D", tm(M.D)},
                      {"F1", tm(M.F1)}, {"F2", tm(M.F2)},     {"b", tv(M.b)},   {"sigma", tv(M.sigma)},
                      {"Q", matrix_json(M.Q)}, {"R", matrix_json(M.R)}, {"G", matrix_json(M.G)},
                      {"rho", M.rho},   {"x0", vector_json(M.x0)}};
    const auto& m = s.minor;
    model["minor"] = {{"B", tm(m.B)},   {"C", tm(m.C)},     {"F1", tm(m.F1)}, {"F2", tm(m.F2)},
                      {"H", tm(m.H)},   {"b", tv(m.b)},     {"sigma", tv(m.sigma)},
                      {"Q", matrix_json(m.Q)}, {"G", matrix_json(m.G)}, {"rho", m.rho},
                      {"x0", vector_json(m.x0)}};
    json types = json::array(), sets = json::array();
    for (const auto& t : s.types) {
        types.push_back({{"A", tm(t.A)}, {"D", tm(t.D)}, {"R", matrix_json(t.R)}, {"pi", t.pi}});
        sets.push_back(set_json(t.gamma));
    }
    model["types"] = types;
    const auto& o = cfg.solver;
    json root;
    root["model"] = model;
    root["constraints"] = {{"major", set_json(M.gamma)}, {"types", sets}};
    root["solver"] = {{"steps", o.J},
                      {"paths", o.P},
                      {"particles", o.M},
                      {"tol", o.options.tol},
                      {"max_iter", o.options.max_iter},
                      {"driver", to_string(o.options.driver)},
                      {"seed", o.seed},
                      {"local_eps", o.local_eps}};
    const auto& st = cfg.study;
    root["study"] = {{"kind", st.kind},
                     {"Ns", st.Ns},
                     {"replications", st.replications},
                     {"seed", st.seed},
                     {"agent", st.agent}};
    return root.dump();
}

}  // namespace mfg
