#include "temperfield/io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tf {

namespace {

using json = nlohmann::json;

struct LineCounter {
    int line = 1;
    /// Line of the most recently consumed character.
    int last_line = 1;
};

// Feeds the parser while counting newlines, so SAX events can be located.
struct CountingIt {
    using iterator_category = std::forward_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    const char* p = nullptr;
    LineCounter* c = nullptr;

    reference operator*() const { return *p; }
    CountingIt& operator++() {
        c->last_line = c->line;
        if (*p == '\n') ++c->line;
        ++p;
        return *this;
    }
    CountingIt operator++(int) {
        CountingIt old = *this;
        ++*this;
        return old;
    }
    bool operator==(const CountingIt& o) const { return p == o.p; }
    bool operator!=(const CountingIt& o) const { return p != o.p; }
};

std::string escape_token(const std::string& k) {
    std::string out;
    for (char ch : k) {
        if (ch == '~') out += "~0";
        else if (ch == '/') out += "~1";
        else out += ch;
    }
    return out;
}

// DOM builder that also records the line of every member key and array element.
class LocatingSax {
public:
    using Dom = nlohmann::detail::json_sax_dom_parser<json>;
    using number_integer_t = json::number_integer_t;
    using number_unsigned_t = json::number_unsigned_t;
    using number_float_t = json::number_float_t;
    using string_t = json::string_t;
    using binary_t = json::binary_t;

    LocatingSax(json& root, LineCounter& c, std::map<std::string, int>& lines) : dom_(root, true), c_(c), lines_(lines) {}

    bool null() { return value(), dom_.null(); }
    bool boolean(bool v) { return value(), dom_.boolean(v); }
    bool number_integer(number_integer_t v) { return value(), dom_.number_integer(v); }
    bool number_unsigned(number_unsigned_t v) { return value(), dom_.number_unsigned(v); }
    bool number_float(number_float_t v, const string_t& s) { return value(), dom_.number_float(v, s); }
    bool string(string_t& v) { return value(), dom_.string(v); }
    bool binary(binary_t& v) { return value(), dom_.binary(v); }
    bool start_object(std::size_t n) {
        value();
        stack_.push_back({false, -1, {}});
        return dom_.start_object(n);
    }
    bool key(string_t& k) {
        stack_.back().key = k;
        lines_[path()] = c_.last_line;
        return dom_.key(k);
    }
    bool end_object() {
        stack_.pop_back();
        return dom_.end_object();
    }
    bool start_array(std::size_t n) {
        value();
        stack_.push_back({true, -1, {}});
        return dom_.start_array(n);
    }
    bool end_array() {
        stack_.pop_back();
        return dom_.end_array();
    }
    template <class E>
    bool parse_error(std::size_t pos, const std::string& tok, const E& ex) {
        return dom_.parse_error(pos, tok, ex);
    }

private:
    struct Frame {
        bool array;
        long index;
        std::string key;
    };

    std::string path() const {
        std::string out;
        for (const Frame& f : stack_) out += "/" + (f.array ? std::to_string(f.index) : escape_token(f.key));
        return out;
    }

    void value() {
        if (stack_.empty()) {
            lines_[""] = c_.last_line;
        } else if (stack_.back().array) {
            ++stack_.back().index;
            lines_[path()] = c_.last_line;
        }
    }

    Dom dom_;
    LineCounter& c_;
    std::map<std::string, int>& lines_;
    std::vector<Frame> stack_;
};

int line_of_offset(std::string_view text, std::size_t pos) {
    int line = 1;
    for (std::size_t i = 0; i < pos && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

class Reader {
public:
    Reader(const json& root, std::map<std::string, int> lines, std::string source)
        : root_(root), lines_(std::move(lines)), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
        std::string p = path;
        int line = 1;
        for (;;) {
            auto it = lines_.find(p);
            if (it != lines_.end()) {
                line = it->second;
                break;
            }
            if (p.empty()) break;
            p = p.substr(0, p.rfind('/'));
        }
        throw SchemaError(source_ + ":" + std::to_string(line) + ": " + msg + (path.empty() ? "" : " (at " + path + ")"),
                          line);
    }

    void only(const json& obj, const std::string& path, const std::set<std::string>& allowed) const {
        if (!obj.is_object()) fail(path, "expected an object");
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!allowed.count(it.key())) fail(path + "/" + escape_token(it.key()), "unknown key \"" + it.key() + "\"");
    }

    double number(const json& v, const std::string& path) const {
        if (!v.is_number()) fail(path, "expected a number");
        return v.get<double>();
    }

    long integer(const json& v, const std::string& path) const {
        if (!v.is_number_integer()) fail(path, "expected an integer");
        return v.get<long>();
    }

    std::uint64_t unsigned_integer(const json& v, const std::string& path) const {
        if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const json& v, const std::string& path) const {
        if (!v.is_boolean()) fail(path, "expected true or false");
        return v.get<bool>();
    }

    std::string string(const json& v, const std::string& path) const {
        if (!v.is_string()) fail(path, "expected a string");
        return v.get<std::string>();
    }

    Vec vec(const json& v, const std::string& path, long size = -1) const {
        if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of numbers");
        if (size >= 0 && static_cast<long>(v.size()) != size)
            fail(path, "expected " + std::to_string(size) + " entries, got " + std::to_string(v.size()));
        Vec out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], path + "/" + std::to_string(i));
        return out;
    }

    Mat mat(const json& v, const std::string& path, long size) const {
        if (!v.is_array() || static_cast<long>(v.size()) != size)
            fail(path, "expected a " + std::to_string(size) + " x " + std::to_string(size) + " matrix (array of rows)");
        Mat out(size, size);
        for (long i = 0; i < size; ++i) out.row(i) = vec(v[static_cast<std::size_t>(i)], path + "/" + std::to_string(i), size).transpose();
        return out;
    }

    std::vector<Vec> vec_list(const json& v, const std::string& path, long size) const {
        if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of vectors");
        std::vector<Vec> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(vec(v[i], path + "/" + std::to_string(i), size));
        return out;
    }

    /// Runs f, turning std::invalid_argument and gate errors into located schema errors.
    template <class F>
    auto guarded(const std::string& path, const F& f) const -> decltype(f()) {
        try {
            return f();
        } catch (const GateViolation&) {
            throw;
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
    }

    const json& root() const { return root_; }

private:
    const json& root_;
    std::map<std::string, int> lines_;
    std::string source_;
};

SpectralMeasure read_sigma(const Reader& R, const json& j, int dim, bool harmonizable, std::vector<std::string>& warnings) {
    R.only(j, "/sigma", {"dim", "atoms", "orbit"});
    if (!j.contains("atoms")) R.fail("/sigma", "missing key \"atoms\"");
    const int atom_dim = harmonizable ? 2 * dim : dim;
    if (j.contains("dim") && R.integer(j["dim"], "/sigma/dim") != atom_dim)
        R.fail("/sigma/dim", "dim must be " + std::to_string(atom_dim));
    const json& atoms = j["atoms"];
    if (!atoms.is_array() || atoms.empty()) R.fail("/sigma/atoms", "expected a non-empty array of atoms");
    std::optional<long> orbit;
    if (j.contains("orbit")) {
        if (!harmonizable) R.fail("/sigma/orbit", "orbit averaging applies to harmonizable fields only");
        orbit = R.integer(j["orbit"], "/sigma/orbit");
        if (*orbit < 4) R.fail("/sigma/orbit", "orbit must be at least 4");
    }
    std::vector<Atom> list;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string p = "/sigma/atoms/" + std::to_string(i);
        R.only(atoms[i], p, {"dir", "w"});
        if (!atoms[i].contains("dir") || !atoms[i].contains("w")) R.fail(p, "atom needs \"dir\" and \"w\"");
        const Vec dir = R.vec(atoms[i]["dir"], p + "/dir", atom_dim);
        const double w = R.number(atoms[i]["w"], p + "/w");
        if (!(w > 0.0)) R.fail(p + "/w", "weight must be positive");
        if (dir.norm() == 0.0) R.fail(p + "/dir", "direction must be non-zero");
        list.push_back({dir, w});
    }
    if (orbit) return R.guarded("/sigma", [&] { return make_orbit_uniform(dim, list, static_cast<int>(*orbit)); });
    SpectralMeasure s = R.guarded("/sigma", [&] { return SpectralMeasure(atom_dim, list); });
    if (s.symmetrized()) warnings.push_back("sigma was not symmetric; reflected atoms were added");
    return s;
}

FieldKind read_kind(const Reader& R, const json& v) {
    const std::string k = R.string(v, "/kind");
    if (k == "moving_average") return FieldKind::moving_average;
    if (k == "harmonizable") return FieldKind::harmonizable;
    if (k == "kernel_tempered_ma") return FieldKind::kernel_tempered_ma;
    R.fail("/kind", "kind must be moving_average, harmonizable or kernel_tempered_ma");
}

Box read_box(const Reader& R, const json& j, const std::string& path, long n) {
    R.only(j, path, {"lo", "hi"});
    if (!j.contains("lo") || !j.contains("hi")) R.fail(path, "box needs \"lo\" and \"hi\"");
    Box b{R.vec(j["lo"], path + "/lo", n), R.vec(j["hi"], path + "/hi", n)};
    for (long i = 0; i < n; ++i)
        if (!(b.lo[i] < b.hi[i])) R.fail(path, "box needs lo < hi in every coordinate");
    return b;
}

}  // namespace

SpecDocument parse_spec(std::string_view text, const std::string& source) {
    json root;
    LineCounter counter;
    std::map<std::string, int> lines;
    LocatingSax sax(root, counter, lines);
    CountingIt first{text.data(), &counter}, last{text.data() + text.size(), &counter};
    try {
        json::sax_parse(first, last, &sax);
    } catch (const json::parse_error& e) {
        const int line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string msg = e.what();
        throw SchemaError(source + ":" + std::to_string(line) + ": " + msg, line);
    }
    const Reader R(root, lines, source);
    SpecDocument doc;
    doc.source = source;
    doc.canonical = root.dump();
    R.only(root, "", {"n", "d", "alpha", "lambda", "E", "D", "sigma", "kind", "phi", "beta", "query", "integrand",
                      "simulation", "quadrature"});
    for (const char* k : {"alpha", "lambda", "sigma"})
        if (!root.contains(k)) R.fail("", std::string("missing key \"") + k + "\"");
    doc.params.alpha = R.number(root["alpha"], "/alpha");
    doc.params.lambda = R.number(root["lambda"], "/lambda");
    if (!(doc.params.lambda >= 0.0) || !std::isfinite(doc.params.lambda))
        R.fail("/lambda", "lambda must be finite and nonnegative");
    R.guarded("/alpha", [&] {
        doc.params.validate();
        return 0;
    });

    const std::vector<std::string> field_keys{"n", "d", "E", "D", "kind", "phi"};
    int present = 0;
    for (const std::string& k : field_keys) present += root.contains(k);
    if (present != 0 && present != static_cast<int>(field_keys.size())) {
        std::string at;
        for (const std::string& k : field_keys)
            if (root.contains(k) && at.empty()) at = "/" + k;
        for (const std::string& k : field_keys)
            if (!root.contains(k)) R.fail(at, "field block incomplete: missing key \"" + k + "\"");
    }
    const bool has_field = present != 0;
    if (!has_field && root.contains("beta")) R.fail("/beta", "beta given without the field block");

    int d = 0, n = 0;
    bool harmonizable = false;
    if (has_field) {
        n = static_cast<int>(R.integer(root["n"], "/n"));
        d = static_cast<int>(R.integer(root["d"], "/d"));
        if (n < 1) R.fail("/n", "n must be at least 1");
        if (d < 1) R.fail("/d", "d must be at least 1");
        harmonizable = read_kind(R, root["kind"]) == FieldKind::harmonizable;
    } else {
        const json& atoms = root["sigma"].is_object() && root["sigma"].contains("atoms") ? root["sigma"]["atoms"] : json();
        if (!atoms.is_array() || atoms.empty() || !atoms[0].is_object() || !atoms[0].contains("dir") ||
            !atoms[0]["dir"].is_array())
            R.fail("/sigma", "cannot infer the dimension from sigma");
        d = static_cast<int>(atoms[0]["dir"].size());
    }
    doc.sigma = read_sigma(R, root["sigma"], d, harmonizable, doc.warnings);

    if (has_field) {
        FieldSpec f;
        f.n = n;
        f.d = d;
        f.params = doc.params;
        f.sigma = doc.sigma;
        f.kind = read_kind(R, root["kind"]);
        f.E = R.guarded("/E", [&] { return OperatorSpec(R.mat(root["E"], "/E", n)); });
        f.D = R.mat(root["D"], "/D", d);
        if (root.contains("beta")) {
            f.beta = R.number(root["beta"], "/beta");
            if (!(f.beta > 0.0)) R.fail("/beta", "beta must be positive");
        }
        const std::string phi = R.string(root["phi"], "/phi");
        if (phi == "radial") f.phi = HomogeneousFn::radial(f.E, f.beta);
        else if (phi == "abs") {
            if (n != 1) R.fail("/phi", "phi \"abs\" needs n = 1");
            f.phi = HomogeneousFn::absolute(f.E, f.beta);
        } else
            R.fail("/phi", "phi must be \"radial\" or \"abs\"");
        for (const std::string& w : gate_warnings(f)) doc.warnings.push_back(w);
        doc.field = std::move(f);
    }

    if (root.contains("query")) {
        if (!has_field) R.fail("/query", "query needs the field block");
        const json& q = root["query"];
        R.only(q, "/query", {"points", "directions"});
        if (!q.contains("points") || !q.contains("directions")) R.fail("/query", "query needs \"points\" and \"directions\"");
        FddQuery Q{R.vec_list(q["points"], "/query/points", n), R.vec_list(q["directions"], "/query/directions", d)};
        if (Q.points.size() != Q.directions.size()) R.fail("/query", "points and directions differ in length");
        doc.query = std::move(Q);
    }

    if (root.contains("integrand")) {
        const json& g = root["integrand"];
        R.only(g, "/integrand", {"kernel_at", "pieces", "scale"});
        IntegrandSpec spec;
        if (g.contains("scale")) spec.scale = R.number(g["scale"], "/integrand/scale");
        if (g.contains("kernel_at") == g.contains("pieces")) R.fail("/integrand", "give exactly one of \"kernel_at\" and \"pieces\"");
        if (g.contains("kernel_at")) {
            if (!has_field) R.fail("/integrand/kernel_at", "kernel_at needs the field block");
            spec.kernel_at = R.vec(g["kernel_at"], "/integrand/kernel_at", n);
        } else {
            const json& pcs = g["pieces"];
            if (!pcs.is_array() || pcs.empty()) R.fail("/integrand/pieces", "expected a non-empty array of pieces");
            const int pn = static_cast<int>(
                pcs[0].is_object() && pcs[0].contains("lo") && pcs[0]["lo"].is_array() ? pcs[0]["lo"].size() : 0);
            if (has_field && pn != n) R.fail("/integrand/pieces/0/lo", "piece dimension must equal n");
            if (pn < 1) R.fail("/integrand/pieces/0", "piece needs \"lo\", \"hi\" and \"value\"");
            for (std::size_t i = 0; i < pcs.size(); ++i) {
                const std::string p = "/integrand/pieces/" + std::to_string(i);
                R.only(pcs[i], p, {"lo", "hi", "value"});
                if (!pcs[i].contains("value")) R.fail(p, "piece needs \"value\"");
                json box = {{"lo", pcs[i].value("lo", json())}, {"hi", pcs[i].value("hi", json())}};
                SimplePiece piece{read_box(R, box, p, pn), R.mat(pcs[i]["value"], p + "/value", doc.sigma.dim())};
                spec.pieces.push_back(std::move(piece));
            }
        }
        doc.integrand = std::move(spec);
    }

    if (root.contains("quadrature")) {
        const json& q = root["quadrature"];
        R.only(q, "/quadrature", {"box_radius", "rel_tol", "max_evals", "mc_samples"});
        if (q.contains("box_radius")) {
            doc.quad.box_radius = R.number(q["box_radius"], "/quadrature/box_radius");
            doc.quad_box_radius_set = true;
        }
        if (q.contains("rel_tol")) doc.quad.rel_tol = R.number(q["rel_tol"], "/quadrature/rel_tol");
        if (q.contains("max_evals")) doc.quad.max_evals = R.integer(q["max_evals"], "/quadrature/max_evals");
        if (q.contains("mc_samples")) doc.quad.mc_fallback_n = R.integer(q["mc_samples"], "/quadrature/mc_samples");
        R.guarded("/quadrature", [&] {
            doc.quad.validate();
            return 0;
        });
    }
    if (!doc.quad_box_radius_set && doc.field) doc.quad.box_radius = default_box_radius(*doc.field);

    SimSection& sim = doc.sim;
    sim.target = has_field ? SimTarget::path : SimTarget::tas;
    if (root.contains("simulation")) {
        const json& s = root["simulation"];
        R.only(s, "/simulation", {"target", "eps", "replicates", "seed", "gaussian_refinement", "domain_box",
                                  "box_tail_tol", "grid", "mass"});
        if (s.contains("target")) {
            const std::string t = R.string(s["target"], "/simulation/target");
            if (t == "path") sim.target = SimTarget::path;
            else if (t == "tas") sim.target = SimTarget::tas;
            else if (t == "integral") sim.target = SimTarget::integral;
            else R.fail("/simulation/target", "target must be path, tas or integral");
        }
        if (s.contains("eps")) {
            sim.config.jump_cutoff_eps = R.number(s["eps"], "/simulation/eps");
            if (!(sim.config.jump_cutoff_eps > 0.0 && sim.config.jump_cutoff_eps < 1.0))
                R.fail("/simulation/eps", "eps must lie in (0, 1)");
        }
        if (s.contains("replicates")) {
            sim.config.n_replicates = R.integer(s["replicates"], "/simulation/replicates");
            if (sim.config.n_replicates < 1) R.fail("/simulation/replicates", "replicates must be at least 1");
        }
        if (s.contains("seed")) sim.config.seed = R.unsigned_integer(s["seed"], "/simulation/seed");
        if (s.contains("gaussian_refinement"))
            sim.config.gaussian_refinement = R.boolean(s["gaussian_refinement"], "/simulation/gaussian_refinement");
        if (s.contains("box_tail_tol")) {
            sim.config.box_tail_tol = R.number(s["box_tail_tol"], "/simulation/box_tail_tol");
            if (!(sim.config.box_tail_tol > 0.0)) R.fail("/simulation/box_tail_tol", "box_tail_tol must be positive");
        }
        if (s.contains("mass")) {
            sim.mass = R.number(s["mass"], "/simulation/mass");
            if (!(sim.mass > 0.0)) R.fail("/simulation/mass", "mass must be positive");
        }
        if (s.contains("domain_box")) {
            const long bn = has_field ? n
                                      : (s["domain_box"].is_object() && s["domain_box"].contains("lo") &&
                                                 s["domain_box"]["lo"].is_array()
                                             ? static_cast<long>(s["domain_box"]["lo"].size())
                                             : 1);
            sim.config.domain_box = read_box(R, s["domain_box"], "/simulation/domain_box", bn);
        }
        if (s.contains("grid")) {
            if (!has_field) R.fail("/simulation/grid", "grid needs the field block");
            sim.grid = R.vec_list(s["grid"], "/simulation/grid", n);
        }
        R.guarded("/simulation", [&] {
            sim.config.validate();
            return 0;
        });
    }
    if (sim.target == SimTarget::path && !has_field) R.fail("/simulation/target", "target path needs the field block");
    if (sim.target == SimTarget::integral && !doc.integrand)
        R.fail("/simulation/target", "target integral needs an \"integrand\" section");
    if (sim.target == SimTarget::path && sim.grid.empty()) {
        if (doc.query) sim.grid = doc.query->points;
        else sim.grid = {Vec::Ones(n)};
    }
    sim.config.quad = doc.quad;
    return doc;
}

SpecDocument load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path + ":0: cannot open file", 0);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_spec(os.str(), path);
}

IntegrandFn make_integrand(const SpecDocument& doc) {
    if (!doc.integrand) throw std::invalid_argument("spec has no integrand section");
    const IntegrandSpec& s = *doc.integrand;
    IntegrandFn f;
    if (s.kernel_at) {
        if (!doc.field) throw std::invalid_argument("kernel_at needs the field block");
        f = field_integrand(*doc.field, *s.kernel_at);
    } else {
        f = IntegrandFn::simple(s.pieces.front().box.dim(), doc.sigma.dim(), s.pieces);
    }
    return s.scale == 1.0 ? f : f.scaled(s.scale);
}

}  // namespace tf
