#pragma once

// Problem files, runs and fixtures behind the qcbvp command line tool.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcbvp/beltrami.hpp"
#include "qcbvp/bvp_frontends.hpp"
#include "qcbvp/capacity.hpp"
#include "qcbvp/conformal.hpp"
#include "qcbvp/curve_geometry.hpp"
#include "qcbvp/expression.hpp"

namespace qcbvp::cli {

using json = nlohmann::ordered_json;

inline constexpr int exit_pass = 0;
inline constexpr int exit_input = 2;
inline constexpr int exit_failure = 3;

/// Schema violation with the line of the offending key when it can be found.
struct SpecError : InputError {
    SpecError(const std::string& what, int line = 0)
        : InputError("parse_problem", line > 0 ? "line " + std::to_string(line) + ": " + what : what), line(line) {}
    int line = 0;
};

struct Numerics {
    int fourier_modes = 1024;
    int grid_size = 1024;
    double grid_extent = 8;
    double tol = 1e-8;  // Neumann-series stopping tolerance
    int max_iter = 200;
    std::vector<double> radii;  // as radii r < 1; empty = 1 - 2^-j, j = 4..14
    double aperture = default_aperture;
    std::optional<double> residual_tol;  // verdict tolerance; default depends on the problem
    std::uint64_t seed = 12345;
    int map_modes = 4096;
    int field_points = 41;  // lattice size per axis for the CSV field

    std::vector<double> distances() const {
        if (radii.empty()) return default_radii();
        std::vector<double> d;
        for (double r : radii) d.push_back(1 - r);
        return d;
    }
};

struct ProblemSpec {
    int schema = 1;
    std::string kind;  // hilbert, dirichlet, neumann, directional, poincare, capacity, qhb, a-condition
    json doc;          // validated document
    std::string text;  // source, for line lookup
    Numerics numerics;
};

namespace detail {

inline int line_of(const std::string& text, std::size_t offset) {
    int line = 1;
    for (std::size_t i = 0; i < std::min(offset, text.size()); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

/// Line of the first occurrence of "key" in the source, 0 if absent.
inline int key_line(const std::string& text, const std::string& key) {
    const auto p = text.find("\"" + key + "\"");
    return p == std::string::npos ? 0 : line_of(text, p);
}

inline bool power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

inline Complex to_complex(const json& v, const std::string& what, const std::string& text) {
    if (v.is_number()) return v.get<double>();
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw SpecError(what + " must be a number or [re, im]", key_line(text, what));
}

inline double number(const json& obj, const std::string& key, double dflt, const std::string& text) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number()) throw SpecError("'" + key + "' must be a number", key_line(text, key));
    return obj[key].get<double>();
}

// ---------------------------------------------------------------------------
// domains

inline JordanCurve curve_from(const json& d, const std::string& text) {
    if (!d.is_object() || !d.contains("type") || !d["type"].is_string())
        throw SpecError("domain needs a string 'type'", key_line(text, "domain"));
    const auto type = d["type"].get<std::string>();
    const int line = key_line(text, "type");
    if (type == "unit-disk") return JordanCurve::circle();
    if (type == "circle") {
        const Complex c = d.contains("center") ? to_complex(d["center"], "center", text) : 0.0;
        const double r = number(d, "radius", 1.0, text);
        if (!(r > 0)) throw SpecError("circle radius must be positive", key_line(text, "radius"));
        return JordanCurve::circle(c, r);
    }
    if (type == "ellipse") {
        const double a = number(d, "a", 1.0, text), b = number(d, "b", 1.0, text);
        if (!(a > 0 && b > 0)) throw SpecError("ellipse semi-axes must be positive", line);
        const Complex c = d.contains("center") ? to_complex(d["center"], "center", text) : 0.0;
        return JordanCurve::ellipse(a, b, c);
    }
    if (type == "three-disks") {
        if (d.contains("circles")) {
            // only the union of unit disks at 0 and 1 +- i is supported
            const std::vector<Complex> want{0.0, {1, 1}, {1, -1}};
            const auto& cs = d["circles"];
            bool ok = cs.is_array() && cs.size() == 3;
            for (std::size_t k = 0; ok && k < 3; ++k) {
                ok = cs[k].is_object() && cs[k].contains("center") &&
                     std::abs(to_complex(cs[k]["center"], "center", text) - want[k]) < 1e-12 &&
                     std::abs(number(cs[k], "radius", 1.0, text) - 1.0) < 1e-12;
            }
            if (!ok) throw SpecError("three-disks: circles must be radius 1 at 0, 1+i, 1-i", key_line(text, "circles"));
        }
        return JordanCurve::three_disks();
    }
    if (type == "square") {
        const double h = number(d, "half_side", 1.0, text);
        if (!(h > 0)) throw SpecError("square half_side must be positive", line);
        return JordanCurve::square(h);
    }
    if (type == "polar") {
        if (!d.contains("r") || !d["r"].is_string()) throw SpecError("polar domain needs an expression 'r'", line);
        auto e = std::make_shared<Expression>(d["r"].get<std::string>());
        for (const auto& v : e->variables())
            if (v != "t") throw SpecError("polar r may only use the variable t", key_line(text, "r"));
        const Complex c = d.contains("center") ? to_complex(d["center"], "center", text) : 0.0;
        auto r = [e](double t) { return (*e)({{"t", t}}).real(); };
        for (int k = 0; k < 256; ++k)
            if (!(r(two_pi * k / 256 - pi) > 0)) throw SpecError("polar r must be positive", key_line(text, "r"));
        return JordanCurve::polar(r, c);
    }
    if (type == "polygon") {
        if (!d.contains("points") || !d["points"].is_array() || d["points"].size() < 3)
            throw SpecError("polygon needs at least 3 points", key_line(text, "points"));
        std::vector<Complex> v;
        for (const auto& p : d["points"]) v.push_back(to_complex(p, "points", text));
        // subdivide edges so the parameter is close to arc length
        double L = 0;
        for (std::size_t k = 0; k < v.size(); ++k) L += std::abs(v[(k + 1) % v.size()] - v[k]);
        std::vector<Complex> pts;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const Complex a = v[k], b = v[(k + 1) % v.size()];
            const int m = std::max(1, static_cast<int>(std::round(2048 * std::abs(b - a) / L)));
            for (int j = 0; j < m; ++j) pts.push_back(a + (b - a) * (static_cast<double>(j) / m));
        }
        auto c = JordanCurve::from_samples(pts, "polygon");
        if (!c.is_simple()) throw SpecError("polygon is not simple", key_line(text, "points"));
        return c;
    }
    throw SpecError("unknown domain type '" + type + "'", line);
}

inline PlanarDomain domain_from(const json& d, const std::string& text) {
    auto curve = curve_from(d, text);
    Complex z0 = 0.0;
    if (d.contains("basepoint")) {
        z0 = to_complex(d["basepoint"], "basepoint", text);
    } else if (d["type"] == "circle" || d["type"] == "ellipse" || d["type"] == "polar") {
        z0 = d.contains("center") ? to_complex(d["center"], "center", text) : 0.0;
    } else if (d["type"] == "polygon") {
        for (const auto& p : curve.samples()) z0 += p;
        z0 /= static_cast<double>(curve.samples().size());
    }
    if (!curve.contains(z0) || curve.distance(z0) <= 0)
        throw SpecError("basepoint is not inside the domain", key_line(text, "domain"));
    const auto type = d["type"].get<std::string>();
    if (type == "unit-disk") return PlanarDomain::unit_disk();
    return PlanarDomain(std::move(curve), z0, type);
}

inline ConformalMap map_for(const PlanarDomain& D, const json& doc, const Numerics& num, const std::string& text) {
    std::string type = "auto";
    int modes = 256;
    if (doc.contains("map")) {
        const auto& m = doc["map"];
        if (!m.is_object()) throw SpecError("'map' must be an object", key_line(text, "map"));
        if (m.contains("type")) type = m["type"].get<std::string>();
        modes = static_cast<int>(number(m, "modes", modes, text));
        if (!power_of_two(modes)) throw SpecError("map modes must be a power of two", key_line(text, "map"));
    }
    (void)num;
    if (type == "identity") {
        if (!D.is_unit_disk()) throw SpecError("identity map requires the unit disk", key_line(text, "map"));
        return identity_map();
    }
    if (type == "auto" && D.is_unit_disk()) return identity_map();
    if (type == "auto" || type == "theodorsen") {
        TheodorsenOptions o;
        o.N = modes;
        return theodorsen_map(D, o);
    }
    throw SpecError("unknown map type '" + type + "'", key_line(text, "map"));
}

// ---------------------------------------------------------------------------
// boundary data and coefficients

/// number | "expr" | {"expr": "..."}; variables t = 2 pi s, s, x, y, z.
inline BoundaryFunction boundary_from(const json& v, const std::string& key, const PlanarDomain& D,
                                      const std::string& text) {
    const int line = key_line(text, key);
    if (v.is_number()) {
        const double c = v.get<double>();
        return BoundaryFunction::sample([c](double) { return Complex(c); }, 64);
    }
    if (v.is_array()) {
        const Complex c = to_complex(v, key, text);
        return BoundaryFunction::sample([c](double) { return c; }, 64);
    }
    std::string src;
    if (v.is_string()) src = v.get<std::string>();
    else if (v.is_object() && v.contains("expr") && v["expr"].is_string()) src = v["expr"].get<std::string>();
    else throw SpecError("'" + key + "' must be a number, [re, im], an expression or {\"expr\": ...}", line);
    std::shared_ptr<Expression> e;
    try {
        e = std::make_shared<Expression>(src);
    } catch (const InputError& err) {
        throw SpecError(key + ": " + err.what(), line);
    }
    for (const auto& n : e->variables())
        if (n != "t" && n != "s" && n != "x" && n != "y" && n != "z")
            throw SpecError(key + ": unknown variable '" + n + "' (use t, s, x, y, z)", line);
    auto curve = std::make_shared<JordanCurve>(D.boundary());
    auto f = [e, curve](double s) {
        const Complex z = curve->point(s);
        return (*e)({{"t", two_pi * s}, {"s", s}, {"x", z.real()}, {"y", z.imag()}, {"z", z}});
    };
    for (int k = 0; k < 64; ++k)
        if (!std::isfinite(std::abs(f(k / 64.0)))) throw SpecError(key + " is not finite on the boundary", line);
    return BoundaryFunction::sample(f, 64);
}

inline bool is_zero_coefficient(const json& doc) {
    if (!doc.contains("coefficient")) return true;
    const auto& c = doc["coefficient"];
    return c.is_null() || (c.is_object() && c.value("type", std::string()) == "zero");
}

inline Complex mu_sup_sample(const std::function<Complex(Complex)>& f, const PlanarDomain& D, double* k) {
    const auto [lo, hi] = D.boundary().bounding_box();
    double m = 0;
    for (int j = 0; j <= 64; ++j)
        for (int i = 0; i <= 64; ++i) {
            const Complex z(lo.real() + (hi.real() - lo.real()) * i / 64, lo.imag() + (hi.imag() - lo.imag()) * j / 64);
            if (D.boundary().contains(z)) m = std::max(m, std::abs(f(z)));
        }
    *k = m;
    return 0.0;
}

inline BeltramiCoefficient coefficient_from(const json& doc, const PlanarDomain& D, const std::string& text) {
    if (is_zero_coefficient(doc)) return BeltramiCoefficient::zero();
    const auto& c = doc["coefficient"];
    const int line = key_line(text, "coefficient");
    if (!c.is_object() || !c.contains("type")) throw SpecError("coefficient needs a 'type'", line);
    const auto type = c["type"].get<std::string>();
    try {
        if (type == "constant") {
            if (!c.contains("mu")) throw SpecError("constant coefficient needs 'mu'", line);
            const Complex mu = to_complex(c["mu"], "mu", text);
            return mu == 0.0 ? BeltramiCoefficient::zero() : BeltramiCoefficient::constant(mu);
        }
        if (type == "expr") {
            if (!c.contains("mu") || !c["mu"].is_string()) throw SpecError("expr coefficient needs a string 'mu'", line);
            auto e = std::make_shared<Expression>(c["mu"].get<std::string>());
            for (const auto& n : e->variables())
                if (n != "x" && n != "y" && n != "z") throw SpecError("mu may only use x, y, z", key_line(text, "mu"));
            auto f = [e](Complex z) { return (*e)({{"x", z.real()}, {"y", z.imag()}, {"z", z}}); };
            double k = 0;
            mu_sup_sample(f, D, &k);
            if (c.contains("k")) k = std::max(k, number(c, "k", 0, text));
            return BeltramiCoefficient::from_function(f, k, "expr");
        }
        if (type == "matrix") {
            for (const char* n : {"a11", "a12", "a22"})
                if (!c.contains(n)) throw SpecError(std::string("matrix coefficient needs '") + n + "'", line);
            if (c["a11"].is_number() && c["a12"].is_number() && c["a22"].is_number()) {
                const Mat2 A{c["a11"].get<double>(), c["a12"].get<double>(), c["a12"].get<double>(), c["a22"].get<double>()};
                const Complex mu = mu_from_matrix(A);
                return mu == 0.0 ? BeltramiCoefficient::zero() : BeltramiCoefficient::constant(mu);
            }
            std::array<std::shared_ptr<Expression>, 3> e;
            const char* names[3] = {"a11", "a12", "a22"};
            for (int k = 0; k < 3; ++k) {
                const auto& v = c[names[k]];
                e[k] = std::make_shared<Expression>(v.is_number() ? std::to_string(v.get<double>()) : v.get<std::string>());
            }
            auto A = [e](Complex z) {
                const Expression::Vars vars{{"x", z.real()}, {"y", z.imag()}, {"z", z}};
                const double a12 = (*e[1])(vars).real();
                return Mat2{(*e[0])(vars).real(), a12, a12, (*e[2])(vars).real()};
            };
            auto f = [A](Complex z) { return mu_from_matrix(A(z)); };
            double k = 0;
            mu_sup_sample(f, D, &k);
            return BeltramiCoefficient::from_function(f, k, "matrix");
        }
    } catch (const SpecError&) {
        throw;
    } catch (const InputError& err) {
        throw SpecError(std::string("coefficient: ") + err.what(), line);
    }
    throw SpecError("unknown coefficient type '" + type + "'", line);
}

inline ArcPartition partition_from(const json& doc, const std::string& text) {
    if (!doc.contains("breaks")) return ArcPartition::circle();
    const auto& b = doc["breaks"];
    if (!b.is_array()) throw SpecError("'breaks' must be an array of parameters in [0, 1)", key_line(text, "breaks"));
    std::vector<double> v;
    for (const auto& x : b) {
        if (!x.is_number() || x.get<double>() < 0 || x.get<double>() >= 1)
            throw SpecError("'breaks' must be an array of parameters in [0, 1)", key_line(text, "breaks"));
        v.push_back(x.get<double>());
    }
    return v.empty() ? ArcPartition::circle() : ArcPartition::from_breaks(v);
}

inline const std::vector<std::string>& problem_kinds() {
    static const std::vector<std::string> k{"hilbert",  "dirichlet", "neumann", "directional",
                                            "poincare", "capacity",  "qhb",     "a-condition"};
    return k;
}

inline Numerics numerics_from(const json& doc, const std::string& text) {
    Numerics n;
    if (!doc.contains("numerics")) return n;
    const auto& m = doc["numerics"];
    const int line = key_line(text, "numerics");
    if (!m.is_object()) throw SpecError("'numerics' must be an object", line);
    static const std::vector<std::string> known{"fourier_modes", "grid_size", "grid_extent", "tol",       "max_iter",
                                                "radii",         "aperture",  "residual_tol", "seed",     "map_modes",
                                                "field_points"};
    for (const auto& [k, v] : m.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw SpecError("unknown numerics field '" + k + "'", key_line(text, k));
    auto integer = [&](const char* key, long dflt) -> long {
        if (!m.contains(key)) return dflt;
        if (!m[key].is_number_integer()) throw SpecError(std::string("'") + key + "' must be an integer", key_line(text, key));
        return m[key].get<long>();
    };
    n.fourier_modes = static_cast<int>(integer("fourier_modes", n.fourier_modes));
    n.grid_size = static_cast<int>(integer("grid_size", n.grid_size));
    n.max_iter = static_cast<int>(integer("max_iter", n.max_iter));
    n.map_modes = static_cast<int>(integer("map_modes", n.map_modes));
    n.field_points = static_cast<int>(integer("field_points", n.field_points));
    n.seed = static_cast<std::uint64_t>(integer("seed", static_cast<long>(n.seed)));
    n.grid_extent = number(m, "grid_extent", n.grid_extent, text);
    n.tol = number(m, "tol", n.tol, text);
    n.aperture = number(m, "aperture", n.aperture, text);
    if (m.contains("residual_tol")) n.residual_tol = number(m, "residual_tol", 0, text);
    if (m.contains("radii")) {
        if (!m["radii"].is_array()) throw SpecError("'radii' must be an array", key_line(text, "radii"));
        for (const auto& r : m["radii"]) {
            if (!r.is_number() || !(r.get<double>() > 0 && r.get<double>() < 1))
                throw SpecError("radii must lie in (0, 1)", key_line(text, "radii"));
            n.radii.push_back(r.get<double>());
        }
        if (n.radii.size() < 2) throw SpecError("at least two radii are needed", key_line(text, "radii"));
    }
    return n;
}

}  // namespace detail

/// Range checks shared by files and command-line overrides.
inline void validate(const Numerics& n, const std::string& text = {}) {
    using detail::key_line;
    if (!detail::power_of_two(n.fourier_modes) || n.fourier_modes < 16 || n.fourier_modes > 65536)
        throw SpecError("fourier_modes must be a power of two in [16, 65536]", key_line(text, "fourier_modes"));
    if (!detail::power_of_two(n.grid_size) || n.grid_size < 16 || n.grid_size > 8192)
        throw SpecError("grid_size must be a power of two in [16, 8192]", key_line(text, "grid_size"));
    if (!detail::power_of_two(n.map_modes) || n.map_modes < 16 || n.map_modes > 65536)
        throw SpecError("map_modes must be a power of two in [16, 65536]", key_line(text, "map_modes"));
    if (!(n.grid_extent > 1)) throw SpecError("grid_extent must exceed 1", key_line(text, "grid_extent"));
    if (!(n.tol > 0 && n.tol < 1)) throw SpecError("tol must lie in (0, 1)", key_line(text, "tol"));
    if (n.max_iter < 1) throw SpecError("max_iter must be positive", key_line(text, "max_iter"));
    if (!(n.aperture >= 0 && n.aperture < pi / 2)) throw SpecError("aperture must lie in [0, pi/2)", key_line(text, "aperture"));
    if (n.residual_tol && !(*n.residual_tol > 0)) throw SpecError("residual_tol must be positive", key_line(text, "residual_tol"));
    if (n.field_points < 2 || n.field_points > 1024)
        throw SpecError("field_points must lie in [2, 1024]", key_line(text, "field_points"));
}

/// Parses and validates a problem document. `expected_kind` (from the
/// subcommand) fills in or must match the document's kind.
inline ProblemSpec parse_problem_text(const std::string& text, const std::string& expected_kind = {}) {
    ProblemSpec p;
    p.text = text;
    try {
        p.doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(std::string("invalid JSON: ") + e.what(), detail::line_of(text, e.byte));
    }
    if (!p.doc.is_object()) throw SpecError("problem must be a JSON object", 1);
    if (p.doc.contains("schema")) {
        if (!p.doc["schema"].is_number_integer() || p.doc["schema"].get<int>() != 1)
            throw SpecError("unsupported schema version (expected 1)", detail::key_line(text, "schema"));
    }
    if (p.doc.contains("kind")) {
        if (!p.doc["kind"].is_string()) throw SpecError("'kind' must be a string", detail::key_line(text, "kind"));
        p.kind = p.doc["kind"].get<std::string>();
    }
    const auto& kinds = detail::problem_kinds();
    if (!p.kind.empty() && std::find(kinds.begin(), kinds.end(), p.kind) == kinds.end())
        throw SpecError("unknown kind '" + p.kind + "'", detail::key_line(text, "kind"));
    if (!expected_kind.empty()) {
        if (!p.kind.empty() && p.kind != expected_kind)
            throw SpecError("kind '" + p.kind + "' does not match the subcommand (" + expected_kind + ")",
                            detail::key_line(text, "kind"));
        p.kind = expected_kind;
    }
    if (p.kind.empty()) throw SpecError("missing 'kind'", 1);
    p.numerics = detail::numerics_from(p.doc, text);
    validate(p.numerics, text);

    // required blocks per kind
    auto need = [&](const char* key) {
        if (!p.doc.contains(key)) throw SpecError("kind '" + p.kind + "' needs '" + key + "'", 1);
    };
    const auto& k = p.kind;
    if (k != "capacity") need("domain");
    if (k == "hilbert") need("lambda");
    if (k == "hilbert" || k == "dirichlet" || k == "neumann" || k == "directional" || k == "poincare") need("phi");
    if (k == "directional" || k == "poincare") need("nu");
    if (k == "poincare") need("b");
    if (k == "capacity") need("set");
    if (k == "qhb") need("probes");
    if (k == "a-condition") need("zeta");

    // build once to surface errors at parse time
    if (p.doc.contains("domain")) {
        const auto D = detail::domain_from(p.doc["domain"], text);
        detail::coefficient_from(p.doc, D, text);
        for (const char* key : {"lambda", "phi", "a", "b"})
            if (p.doc.contains(key)) detail::boundary_from(p.doc[key], key, D, text);
        if (p.doc.contains("nu") && !(p.doc["nu"].is_string() && p.doc["nu"] == "normal"))
            detail::boundary_from(p.doc["nu"], "nu", D, text);
        detail::partition_from(p.doc, text);
    }
    return p;
}

inline ProblemSpec parse_problem(const std::filesystem::path& path, const std::string& expected_kind = {}) {
    std::ifstream in(path);
    if (!in) throw InputError("parse_problem", "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem_text(ss.str(), expected_kind);
}

// ---------------------------------------------------------------------------
// runs

struct FieldSample {
    double x, y, u, v;
};

struct RunResult {
    json report;                     // deterministic
    json timings;                    // wall-clock, kept apart from the report
    std::vector<FieldSample> field;  // plot-ready samples
    bool complex_field = false;      // CSV carries v = Im f
    std::vector<LimitTable> tables;
    bool pass = false;
};

namespace detail {

class Stopwatch {
public:
    void start(const std::string& stage) {
        stage_ = stage;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop(json& out) {
        out[stage_] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::string stage_;
    std::chrono::steady_clock::time_point t0_;
};

inline json table_summary(const LimitTable& t) {
    json j;
    j["name"] = t.name;
    j["nodes"] = t.params.size();
    j["verified"] = t.verified;
    j["failed"] = t.failed;
    j["exceptional"] = t.exceptional.size();
    j["excluded"] = t.excluded.size();
    j["tolerance"] = t.tolerance;
    j["max_residual"] = t.max_residual;
    j["pass_fraction"] = t.pass_fraction();
    j["required"] = t.required;
    j["pass"] = t.pass;
    return j;
}

inline std::vector<FieldSample> sample_field(const PlanarDomain& D, const std::function<Complex(Complex)>& F, int n) {
    const auto [lo, hi] = D.boundary().bounding_box();
    const double margin = 0.02 * std::max(hi.real() - lo.real(), hi.imag() - lo.imag());
    std::vector<FieldSample> out;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Complex z(lo.real() + (hi.real() - lo.real()) * i / (n - 1),
                            lo.imag() + (hi.imag() - lo.imag()) * j / (n - 1));
            if (!D.contains(z) || D.boundary().distance(z) < margin) continue;
            const Complex w = F(z);
            out.push_back({z.real(), z.imag(), w.real(), w.imag()});
        }
    return out;
}

inline json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline FrontendOptions frontend_options(const Numerics& n, double tol) {
    FrontendOptions o;
    o.modes = n.fourier_modes;
    o.aperture = n.aperture;
    o.residual_tol = tol;
    o.beltrami.grid = static_cast<std::size_t>(n.grid_size);
    o.beltrami.extent = n.grid_extent;
    o.beltrami.tol = n.tol;
    o.beltrami.max_iter = n.max_iter;
    o.map_modes = n.map_modes;
    o.radii = n.distances();
    return o;
}

inline BoundaryFunction direction_from(const json& doc, const PlanarDomain& D, const std::string& text) {
    if (doc["nu"].is_string() && doc["nu"] == "normal") return interior_normal(D);
    return boundary_from(doc["nu"], "nu", D, text);
}

}  // namespace detail

/// Runs a parsed problem. Library errors propagate to the caller.
inline RunResult run(const ProblemSpec& p) {
    using namespace detail;
    RunResult R;
    Stopwatch sw;
    const auto& doc = p.doc;
    const auto& text = p.text;
    const auto& num = p.numerics;
    auto& rep = R.report;
    rep["schema"] = 1;
    rep["kind"] = p.kind;
    json& tim = R.timings;
    tim["stages"] = json::object();
    auto& st = tim["stages"];

    if (p.kind == "capacity") {
        sw.start("sample");
        const auto& s = doc["set"];
        const auto type = s.value("type", std::string());
        const auto m = static_cast<std::size_t>(number(s, "samples", 2048, text));
        std::vector<Complex> cand;
        if (type == "circle") cand = circle_sampler(s.contains("center") ? to_complex(s["center"], "center", text) : 0.0,
                                                    number(s, "radius", 1, text), m);
        else if (type == "segment") cand = segment_sampler(to_complex(s.at("a"), "a", text), to_complex(s.at("b"), "b", text), m);
        else if (type == "points") {
            for (const auto& q : s.at("points")) cand.push_back(to_complex(q, "points", text));
        } else if (type == "domain-boundary") {
            const auto D = domain_from(s.at("domain"), text);
            for (std::size_t k = 0; k < m; ++k) cand.push_back(D.boundary().point(static_cast<double>(k) / m));
        } else {
            throw SpecError("unknown set type '" + type + "'", key_line(text, "set"));
        }
        sw.stop(st);
        sw.start("fekete");
        const auto n_max = static_cast<std::size_t>(number(doc, "n_max", 30, text));
        const auto est = transfinite_diameter(cand, n_max);
        sw.stop(st);
        rep["tau"] = est.tau;
        rep["n"] = est.n;
        rep["extrapolated_tau"] = est.extrapolated_tau;
        rep["monotone"] = est.monotone;
        rep["stagnated"] = est.stagnated;
        R.pass = est.monotone && !est.stagnated;
        if (doc.contains("expect")) {
            const double want = number(doc["expect"], "tau", 0, text), tol = number(doc["expect"], "tol", 0.01, text);
            rep["expected_tau"] = want;
            rep["expected_tol"] = tol;
            R.pass = R.pass && std::abs(est.extrapolated_tau - want) <= tol * std::max(1.0, want);
        }
    } else if (p.kind == "qhb") {
        sw.start("setup");
        const auto D = domain_from(doc["domain"], text);
        const Complex z0 = doc.contains("basepoint") ? to_complex(doc["basepoint"], "basepoint", text) : D.basepoint();
        std::vector<Complex> probes;
        if (!doc["probes"].is_array()) throw SpecError("'probes' must be an array of points", key_line(text, "probes"));
        for (const auto& q : doc["probes"]) probes.push_back(to_complex(q, "probes", text));
        for (const auto& z : probes)
            if (!D.contains(z)) throw SpecError("probe outside the domain", key_line(text, "probes"));
        sw.stop(st);
        sw.start("qhb");
        const auto fit = check_qhb_condition(D, z0, probes, number(doc, "resolution", 1.0 / 256, text),
                                             number(doc, "tolerance", 0.1, text));
        sw.stop(st);
        rep["a"] = fit.a;
        rep["b"] = fit.b;
        rep["max_residual"] = fit.max_residual;
        rep["max_violation"] = fit.max_violation;
        rep["violations"] = fit.violations;
        rep["tolerance"] = fit.tolerance;
        rep["k"] = fit.k;
        rep["log_ratio"] = fit.log_ratio;
        R.pass = fit.holds;
    } else if (p.kind == "a-condition") {
        sw.start("setup");
        const auto D = domain_from(doc["domain"], text);
        const Complex zeta = to_complex(doc["zeta"], "zeta", text);
        std::vector<double> radii{0.2, 0.1, 0.05, 0.025};
        if (doc.contains("radii")) radii = doc["radii"].get<std::vector<double>>();
        sw.stop(st);
        sw.start("sampling");
        const auto prof = check_A_condition(D, zeta, radii, static_cast<std::size_t>(number(doc, "samples", 100000, text)),
                                            num.seed, number(doc, "tolerance", 0.05, text));
        sw.stop(st);
        rep["radii"] = prof.radii;
        rep["ratio"] = prof.ratio;
        rep["theta0"] = prof.theta0;
        rep["theta_star"] = prof.theta_star;
        rep["degenerate_side"] = prof.degenerate_side;
        rep["monotone_to_degenerate"] = prof.monotone_to_degenerate;
        rep["domain_side_holds"] = prof.domain_side_holds;
        rep["complement_side_holds"] = prof.complement_side_holds;
        // the verdict is that the profile is conclusive: either the condition
        // holds on both sides or the degeneration is monotone
        R.pass = prof.degenerate_side.empty() || prof.monotone_to_degenerate;
        if (doc.contains("expect") && doc["expect"].contains("degenerate_side"))
            R.pass = R.pass && prof.degenerate_side == doc["expect"]["degenerate_side"].get<std::string>();
    } else {
        sw.start("setup");
        const auto D = domain_from(doc["domain"], text);
        const auto mu = coefficient_from(doc, D, text);
        const auto g = map_for(D, doc, num, text);
        const auto part = partition_from(doc, text);
        const auto phi = boundary_from(doc["phi"], "phi", D, text);
        const double tol = num.residual_tol.value_or(mu.is_zero() ? 1e-6 : 1e-2);
        auto fo = frontend_options(num, tol);
        sw.stop(st);
        rep["domain"] = D.name();
        rep["coefficient_sup"] = mu.k;
        rep["residual_tol"] = tol;
        json diag = json::object();
        SolutionField field;
        sw.start("solve");
        if (p.kind == "hilbert") {
            PipelineOptions po;
            po.beltrami = fo.beltrami;
            po.modes = fo.modes;
            po.aperture = fo.aperture;
            po.residual_tol = tol;
            po.radii = fo.radii;
            const auto lambda = boundary_from(doc["lambda"], "lambda", D, text);
            auto sol = std::make_shared<RegularSolution>(assemble_regular_solution(D, mu, g, lambda, part, phi, po));
            field.F = [sol](Complex z) { return (*sol)(z); };
            auto t = to_table(sol->report.boundary, "boundary", phi);
            field.tables.push_back(t);
            field.exceptional = sol->report.exceptional;
            const auto& r = sol->report;
            diag["beltrami_ratio"] = r.beltrami_ratio;
            diag["beltrami_points"] = r.beltrami_points;
            diag["circle_deviation"] = r.circle_deviation;
            diag["contraction"] = r.contraction;
            diag["iterations"] = r.iterations;
            diag["null_constant"] = sol->A.null_constant;
            field.pass = r.pass;
            R.complex_field = true;
        } else if (p.kind == "dirichlet") {
            std::optional<BeltramiCoefficient> m;
            if (!mu.is_zero()) m = mu;
            field = solve_dirichlet(D, g, phi, part, m, fo);
        } else {
            BoundaryFunction nu = p.kind == "neumann" ? interior_normal(D) : direction_from(doc, D, text);
            BoundaryFunction data = phi;
            if (p.kind == "poincare") {
                const auto a = doc.contains("a") ? boundary_from(doc["a"], "a", D, text)
                                                 : BoundaryFunction::sample([](double) { return Complex(0.0); }, 1);
                const auto b = boundary_from(doc["b"], "b", D, text);
                if (mu.is_zero()) {
                    PoincareProblemSpec ps;
                    ps.domain = D;
                    ps.a = a;
                    ps.b = b;
                    ps.nu = nu;
                    ps.phi = phi;
                    ps.partition = part;
                    field = solve_poincare(ps, g, fo);
                } else {
                    for (int j = 0; j < 4096; ++j)
                        if (std::abs(a(j / 4096.0)) > 1e-14)
                            throw UnsupportedError("solve_poincare", "a != 0: no construction for the general Poincare problem");
                    data = BoundaryFunction::sample([b, phi](double s) { return Complex(phi(s).real() / b(s).real()); }, 64);
                }
            }
            if (!mu.is_zero()) {
                auto ah = solve_a_harmonic_directional(D, EllipticMatrix::from_mu(mu), nu, data, part, fo);
                field = ah.field;
                diag["min_h_nu"] = ah.diag.min_h_nu;
                diag["h_nu_vanishing"] = ah.diag.vanishing.size();
            } else if (p.kind == "neumann") {
                field = solve_neumann(D, g, phi, part, fo);
            } else if (p.kind == "directional") {
                field = solve_directional(D, g, nu, phi, part, fo);
            }
            if (p.kind == "neumann") field.flux = qcbvp::detail::boundary_integral(D, phi);
        }
        sw.stop(st);
        sw.start("field");
        R.field = sample_field(D, field.F, num.field_points);
        sw.stop(st);
        json tables = json::array();
        for (const auto& t : field.tables) tables.push_back(table_summary(t));
        rep["tables"] = tables;
        rep["exceptional"] = field.exceptional;
        rep["operator_residual"] = field.operator_residual;
        rep["operator_points"] = field.operator_points;
        if (p.kind == "neumann") rep["flux"] = field.flux;
        rep["diagnostics"] = diag;
        R.tables = field.tables;
        R.pass = field.pass;
    }
    json echo;
    echo["fourier_modes"] = num.fourier_modes;
    echo["grid_size"] = num.grid_size;
    echo["grid_extent"] = num.grid_extent;
    echo["tol"] = num.tol;
    echo["max_iter"] = num.max_iter;
    echo["aperture"] = num.aperture;
    echo["radii"] = num.radii.empty() ? json("default") : json(num.radii);
    echo["seed"] = num.seed;
    rep["numerics"] = echo;
    rep["verdict"] = R.pass ? "pass" : "fail";
    double total = 0;
    for (const auto& [k, v] : st.items()) total += v.get<double>();
    tim["total"] = total;
    return R;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// report.json, timings.json, field.csv and tables.csv in `dir`.
inline void write_outputs(const RunResult& R, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw InputError("output", "cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("report.json");
        f << R.report.dump(2) << "\n";
    }
    {
        auto f = open("timings.json");
        f << R.timings.dump(2) << "\n";
    }
    if (!R.field.empty() || R.report.contains("tables")) {
        auto f = open("field.csv");
        f << (R.complex_field ? "x,y,u,v\n" : "x,y,u\n");
        for (const auto& s : R.field) {
            f << format_double(s.x) << ',' << format_double(s.y) << ',' << format_double(s.u);
            if (R.complex_field) f << ',' << format_double(s.v);
            f << '\n';
        }
    }
    if (!R.tables.empty()) {
        auto f = open("tables.csv");
        f << "table,s,limit,target,residual,status\n";
        for (const auto& t : R.tables) {
            std::vector<char> status(t.params.size(), 'v');
            for (auto j : t.exceptional) status[j] = 'e';
            for (auto j : t.excluded) status[j] = 'x';
            for (std::size_t j = 0; j < t.params.size(); ++j) {
                f << t.name << ',' << format_double(t.params[j]) << ',' << format_double(t.limits[j]) << ','
                  << format_double(t.targets[j]) << ',' << format_double(t.residuals[j]) << ',';
                f << (status[j] == 'e' ? "exceptional" : status[j] == 'x' ? "excluded" : "verified") << '\n';
            }
        }
    }
}

inline std::string text_summary(const RunResult& R) {
    std::ostringstream o;
    const auto& r = R.report;
    o << "kind: " << r["kind"].get<std::string>() << "\n";
    if (r.contains("tables"))
        for (const auto& t : r["tables"])
            o << "  table " << t["name"].get<std::string>() << ": verified " << t["verified"].get<std::size_t>()
              << ", failed " << t["failed"].get<std::size_t>() << ", max residual "
              << format_double(t["max_residual"].get<double>()) << (t["pass"].get<bool>() ? " (pass)" : " (fail)")
              << "\n";
    for (const char* key : {"extrapolated_tau", "a", "b", "violations", "degenerate_side", "operator_residual"})
        if (r.contains(key)) o << "  " << key << ": " << r[key].dump() << "\n";
    o << "verdict: " << r["verdict"].get<std::string>() << "\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// fixtures

inline const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> n{"unit-disk", "three-disks", "constant-mu", "matrix"};
    return n;
}

/// File name -> problem document.
inline std::map<std::string, json> make_fixture(const std::string& name) {
    std::map<std::string, json> out;
    const json disk = {{"type", "circle"}, {"center", {0.0, 0.0}}, {"radius", 1.0}};
    const json three = {{"type", "three-disks"},
                        {"circles",
                         {{{"center", {0.0, 0.0}}, {"radius", 1.0}},
                          {{"center", {1.0, 1.0}}, {"radius", 1.0}},
                          {{"center", {1.0, -1.0}}, {"radius", 1.0}}}}};
    auto problem = [](const std::string& kind) {
        json j;
        j["schema"] = 1;
        j["kind"] = kind;
        return j;
    };
    if (name == "unit-disk") {
        out["domain.json"] = disk;
        auto h = problem("hilbert");
        h["domain"] = disk;
        h["lambda"] = 1;
        h["phi"] = "cos(t)";
        h["numerics"] = {{"fourier_modes", 1024}, {"residual_tol", 1e-6}};
        out["hilbert_identity.json"] = h;
        h["lambda"] = -1;
        out["hilbert_negative.json"] = h;
        auto d = problem("dirichlet");
        d["domain"] = disk;
        d["phi"] = "cos(t)";
        d["numerics"] = {{"fourier_modes", 256}, {"residual_tol", 1e-6}};
        out["dirichlet_cos.json"] = d;
        auto n = problem("neumann");
        n["domain"] = disk;
        n["phi"] = "cos(t)";
        n["numerics"] = {{"fourier_modes", 256}, {"residual_tol", 1e-4}};
        out["neumann_cos.json"] = n;
        auto dir = problem("directional");
        dir["domain"] = disk;
        dir["nu"] = "normal";
        dir["phi"] = "sin(t)";
        dir["numerics"] = {{"fourier_modes", 256}, {"residual_tol", 1e-6}};
        out["directional_sin.json"] = dir;
        auto pc = problem("poincare");
        pc["domain"] = disk;
        pc["a"] = 0;
        pc["b"] = 2;
        pc["nu"] = "normal";
        pc["phi"] = "2*cos(t)";
        pc["numerics"] = {{"fourier_modes", 256}, {"residual_tol", 1e-6}};
        out["poincare_b2.json"] = pc;
        auto cap = problem("capacity");
        cap["set"] = {{"type", "circle"}, {"center", {0.0, 0.0}}, {"radius", 2.0}};
        cap["n_max"] = 30;
        cap["expect"] = {{"tau", 2.0}, {"tol", 0.01}};
        out["capacity_circle.json"] = cap;
        auto seg = problem("capacity");
        seg["set"] = {{"type", "segment"}, {"a", {-2.0, 0.0}}, {"b", {2.0, 0.0}}};
        seg["n_max"] = 30;
        seg["expect"] = {{"tau", 1.0}, {"tol", 0.02}};
        out["capacity_segment.json"] = seg;
        auto q = problem("qhb");
        q["domain"] = disk;
        q["basepoint"] = {0.0, 0.0};
        json probes = json::array();
        for (double t : {0.5, 0.3, 0.1, 0.05, 0.02, 0.01, 0.005}) probes.push_back({1 - t, 0.0});
        q["probes"] = probes;
        out["qhb_disk.json"] = q;
    } else if (name == "three-disks") {
        out["domain.json"] = three;
        auto q = problem("qhb");
        q["domain"] = three;
        q["basepoint"] = {0.0, 0.0};
        json probes = json::array();
        for (double t : {0.5, 0.3, 0.1, 0.05, 0.02, 0.01, 0.005}) {
            const Complex c = Complex(1, 1) + (1 - t) * std::polar(1.0, pi / 4);
            probes.push_back({1 - t, 0.0});
            probes.push_back({c.real(), c.imag()});
            probes.push_back({0.0, -(1 - t)});
            probes.push_back({-1 + t, 0.0});
        }
        q["probes"] = probes;
        q["resolution"] = 1.0 / 256;
        out["qhb.json"] = q;
        auto a = problem("a-condition");
        a["domain"] = three;
        a["zeta"] = {1.0, 0.0};
        a["radii"] = {0.2, 0.1, 0.05, 0.025};
        a["samples"] = 100000;
        a["expect"] = {{"degenerate_side", "complement"}};
        a["numerics"] = {{"seed", 12345}};
        out["a_condition.json"] = a;
    } else if (name == "constant-mu") {
        auto h = problem("hilbert");
        h["domain"] = disk;
        h["coefficient"] = {{"type", "constant"}, {"mu", 0.3}};
        h["lambda"] = 1;
        h["phi"] = "cos(t)";
        h["numerics"] = {{"fourier_modes", 1024}, {"grid_size", 1024}, {"grid_extent", 8.0}, {"residual_tol", 1e-2}};
        out["hilbert_mu03.json"] = h;
        auto d = problem("dirichlet");
        d["domain"] = disk;
        d["coefficient"] = {{"type", "constant"}, {"mu", 0.3}};
        d["phi"] = "cos(t)";
        d["numerics"] = {{"fourier_modes", 1024}, {"grid_size", 256}, {"residual_tol", 1e-2}};
        out["dirichlet_mu03.json"] = d;
    } else if (name == "matrix") {
        const json A = {{"type", "matrix"}, {"a11", 1.0 / 3}, {"a12", 0.0}, {"a22", 3.0}};
        auto d = problem("dirichlet");
        d["domain"] = disk;
        d["coefficient"] = A;
        d["phi"] = "cos(t)";
        d["numerics"] = {{"fourier_modes", 1024}, {"grid_size", 256}, {"residual_tol", 1e-2}};
        out["dirichlet_matrix.json"] = d;
        auto n = problem("neumann");
        n["domain"] = disk;
        n["coefficient"] = A;
        n["phi"] = "cos(t)";
        n["numerics"] = {{"fourier_modes", 1024}, {"grid_size", 256}, {"residual_tol", 5e-2}};
        out["neumann_matrix.json"] = n;
    } else {
        throw InputError("fixtures", "unknown fixture '" + name + "'");
    }
    return out;
}

inline std::vector<std::filesystem::path> write_fixture(const std::string& name, const std::filesystem::path& dir) {
    const auto files = make_fixture(name);
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [file, doc] : files) {
        std::ofstream f(dir / file);
        if (!f) throw InputError("fixtures", "cannot write " + (dir / file).string());
        f << doc.dump(2) << "\n";
        written.push_back(dir / file);
    }
    return written;
}

}  // namespace qcbvp::cli
