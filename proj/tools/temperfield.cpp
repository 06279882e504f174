// Command-line front end: reads a JSON spec, runs one computation, writes CSV
// to --out (or stdout) and, with --out, a JSON sidecar next to it.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "temperfield/io.hpp"

namespace {

using json = nlohmann::json;
using namespace tf;

enum Exit { ok = 0, usage = 1, gate = 2, nonconv = 3 };

struct Flags {
    std::string spec;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<double> tol;
    std::optional<double> box_radius;
    std::optional<double> eps;
};

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

const char* status_name(cub::Status s) {
    switch (s) {
        case cub::Status::converged: return "converged";
        case cub::Status::diverged: return "diverged";
        default: return "inconclusive";
    }
}

class Run {
public:
    explicit Run(Flags f) : flags_(std::move(f)) {
        if (!flags_.threads) {
            if (const char* env = std::getenv("TEMPERFIELD_THREADS")) {
                try {
                    flags_.threads = std::stoi(env);
                } catch (const std::exception&) {
                    throw CLI::ValidationError("TEMPERFIELD_THREADS", "not an integer");
                }
            }
        }
        threads_ = std::max(1, flags_.threads.value_or(1));
    }

    SpecDocument load() {
        if (flags_.spec.empty()) throw CLI::RequiredError("--spec");
        SpecDocument doc = load_spec(flags_.spec);
        if (flags_.tol) doc.quad.rel_tol = *flags_.tol;
        if (flags_.box_radius) {
            doc.quad.box_radius = *flags_.box_radius;
            doc.quad_box_radius_set = true;
        }
        doc.quad.threads = threads_;
        doc.quad.validate();
        if (flags_.seed) doc.sim.config.seed = *flags_.seed;
        if (flags_.eps) doc.sim.config.jump_cutoff_eps = *flags_.eps;
        doc.sim.config.threads = threads_;
        doc.sim.config.quad = doc.quad;
        doc.sim.config.validate();
        for (const std::string& w : doc.warnings) std::cerr << "warning: " << w << "\n";
        side_["spec"] = flags_.spec;
        side_["spec_hash"] = fnv1a_hex(doc.canonical);
        side_["quadrature"] = {{"rel_tol", doc.quad.rel_tol}, {"box_radius", doc.quad.box_radius}};
        if (!doc.warnings.empty()) side_["warnings"] = doc.warnings;
        return doc;
    }

    std::ostream& out() {
        if (flags_.out.empty()) return std::cout;
        if (!file_) {
            file_ = std::make_unique<std::ofstream>(flags_.out, std::ios::binary);
            if (!*file_) throw std::runtime_error("cannot write " + flags_.out);
        }
        return *file_;
    }

    void not_converged(const std::string& what) {
        std::cerr << "warning: " << what << " did not converge\n";
        exit_ = nonconv;
    }

    /// Writes the sidecar (with --out) and returns the exit code.
    int finish(const std::string& command) {
        if (!flags_.out.empty()) {
            side_["command"] = command;
            side_["flags"] = {{"seed", flags_.seed ? json(*flags_.seed) : json()},
                              {"threads", threads_},
                              {"tol", flags_.tol ? json(*flags_.tol) : json()},
                              {"box_radius", flags_.box_radius ? json(*flags_.box_radius) : json()},
                              {"eps", flags_.eps ? json(*flags_.eps) : json()}};
            side_["exit_code"] = exit_;
            if (file_) file_->close();
            std::ofstream s(flags_.out + ".json", std::ios::binary);
            s << side_.dump(2) << "\n";
        }
        return exit_;
    }

    json& sidecar() { return side_; }
    const Flags& flags() const { return flags_; }
    int threads() const { return threads_; }

private:
    Flags flags_;
    int threads_ = 1;
    std::unique_ptr<std::ofstream> file_;
    json side_;
    int exit_ = ok;
};

const FieldSpec& need_field(const SpecDocument& doc) {
    if (!doc.field) throw SchemaError(doc.source + ":1: this command needs the field block (n, d, E, D, kind, phi)", 1);
    return *doc.field;
}

const FddQuery& need_query(const SpecDocument& doc) {
    if (!doc.query) throw SchemaError(doc.source + ":1: this command needs a \"query\" section", 1);
    return *doc.query;
}

Vec parse_vec(const std::vector<double>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

std::vector<double> grid(double lo, double hi, int points, bool logscale) {
    std::vector<double> g;
    for (int i = 0; i < points; ++i) {
        const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        g.push_back(logscale ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
    }
    return g;
}

// lcf: psi(s * direction) over a grid of s.
struct LcfCmd {
    double smax = 10.0;
    int points = 101;
    std::vector<double> direction;

    int run(Run& r) {
        const SpecDocument doc = r.load();
        Vec dir = direction.empty() ? doc.sigma.half_atoms().front().dir : parse_vec(direction);
        if (dir.size() != doc.sigma.dim()) throw CLI::ValidationError("--direction", "length must equal the dimension of sigma");
        std::ostream& o = r.out();
        for (int i = 0; i < dir.size(); ++i) o << "u_" << i + 1 << ",";
        o << "psi\n";
        for (double s : grid(0.0, smax, points, false)) {
            const Vec u = s * dir;
            for (int i = 0; i < u.size(); ++i) o << num(u[i]) << ",";
            o << num(lcf(doc.params, doc.sigma, u)) << "\n";
        }
        return r.finish("lcf");
    }
};

// field-lcf: Lambda for the query, optionally with the directions scaled over a grid.
struct FieldLcfCmd {
    double smin = 1.0, smax = 1.0;
    int points = 1;

    int run(Run& r) {
        const SpecDocument doc = r.load();
        const FieldSpec& spec = need_field(doc);
        const FddQuery& Q = need_query(doc);
        check_gates(spec);
        std::ostream& o = r.out();
        for (std::size_t j = 0; j < Q.points.size(); ++j)
            for (int i = 0; i < spec.n; ++i) o << "t" << j + 1 << "_" << i + 1 << ",";
        for (std::size_t j = 0; j < Q.points.size(); ++j)
            for (int i = 0; i < spec.d; ++i) o << "u" << j + 1 << "_" << i + 1 << ",";
        o << "lcf,error,status\n";
        for (double s : grid(smin, smax, points, false)) {
            FddQuery q = Q;
            for (Vec& u : q.directions) u *= s;
            const LcfResult L = field_lcf(spec, q, doc.quad);
            for (const Vec& t : q.points)
                for (int i = 0; i < t.size(); ++i) o << num(t[i]) << ",";
            for (const Vec& u : q.directions)
                for (int i = 0; i < u.size(); ++i) o << num(u[i]) << ",";
            o << num(L.value) << "," << num(L.error) << "," << status_name(L.status) << "\n";
            if (L.status != cub::Status::converged) r.not_converged("field LCF at scale " + num(s));
        }
        return r.finish("field-lcf");
    }
};

int quasi_norm_cmd(Run& r) {
    const SpecDocument doc = r.load();
    const IntegrandFn f = make_integrand(doc);
    const QuasiNormReport q = quasi_norm(f, doc.params, doc.sigma, doc.quad);
    std::ostream& o = r.out();
    o << "quasi_norm,H_at_1,converged,diverged,iterations\n";
    o << num(q.value) << "," << num(q.H_at_1) << "," << q.converged << "," << q.diverged << "," << q.iterations << "\n";
    if (!q.converged) r.not_converged("quasi-norm");
    return r.finish("quasi-norm");
}

int membership_cmd(Run& r) {
    const SpecDocument doc = r.load();
    const IntegrandFn f = make_integrand(doc);
    const MembershipReport m = membership(f, doc.params, doc.sigma, doc.quad);
    std::ostream& o = r.out();
    o << "in_space,diverged,inconclusive,H_at_1,companion_in_space,companion_diverged,inclusion_ok\n";
    o << m.in_space << "," << m.diverged << "," << m.inconclusive << "," << num(m.H_at_1) << "," << m.companion_in_space
      << "," << m.companion_diverged << "," << m.inclusion_ok << "\n";
    std::cerr << m.diagnostics << "\n";
    if (m.inconclusive) r.not_converged("membership test");
    return r.finish("membership");
}

int simulate_cmd(Run& r) {
    const SpecDocument doc = r.load();
    const SimConfig& cfg = doc.sim.config;
    SampleBatch b;
    std::vector<Vec> ts;
    int n = 0;
    switch (doc.sim.target) {
        case SimTarget::tas: b = sample_tas(doc.params, doc.sigma, doc.sim.mass, cfg); break;
        case SimTarget::integral: b = sample_integral(make_integrand(doc), doc.params, doc.sigma, cfg); break;
        case SimTarget::path:
            b = sample_field_path(need_field(doc), doc.sim.grid, cfg);
            ts = doc.sim.grid;
            n = need_field(doc).n;
            break;
    }
    const int G = ts.empty() ? 1 : static_cast<int>(ts.size());
    const int d = static_cast<int>(b.values.cols()) / G;
    std::ostream& o = r.out();
    o << "replicate_id";
    for (int i = 0; i < n; ++i) o << ",t_" << i + 1;
    for (int i = 0; i < d; ++i) o << ",X_" << i + 1;
    o << "\n";
    for (Eigen::Index rep = 0; rep < b.values.rows(); ++rep)
        for (int g = 0; g < G; ++g) {
            o << rep;
            if (!ts.empty())
                for (int i = 0; i < n; ++i) o << "," << num(ts[static_cast<std::size_t>(g)][i]);
            for (int i = 0; i < d; ++i) o << "," << num(b.values(rep, g * d + i));
            o << "\n";
        }
    for (const std::string& w : b.meta.warnings) std::cerr << "warning: " << w << "\n";
    json meta = {{"seed", b.meta.seed},
                 {"eps", b.meta.eps},
                 {"replicates", b.meta.n_replicates},
                 {"sample_hash", b.meta.spec_hash},
                 {"gaussian_refinement", cfg.gaussian_refinement},
                 {"proposals", b.meta.proposals},
                 {"accepted", b.meta.accepted},
                 {"predicted_acceptance", b.meta.predicted_acceptance},
                 {"mean_jumps", b.meta.mean_jumps},
                 {"warnings", b.meta.warnings}};
    if (b.meta.domain_box) {
        std::vector<double> lo(b.meta.domain_box->lo.data(), b.meta.domain_box->lo.data() + b.meta.domain_box->lo.size());
        std::vector<double> hi(b.meta.domain_box->hi.data(), b.meta.domain_box->hi.data() + b.meta.domain_box->hi.size());
        meta["domain_box"] = {{"lo", lo}, {"hi", hi}};
    }
    r.sidecar()["simulation"] = meta;
    return r.finish("simulate");
}

struct CheckCmd {
    std::vector<double> cs{2.0};
    std::vector<double> shift;
    std::vector<double> lambdas{1.0, 0.1, 0.01, 0.0};
    std::vector<double> tangent_cs;
    std::vector<double> base;

    int scaling(Run& r) {
        const SpecDocument doc = r.load();
        const FieldSpec& spec = need_field(doc);
        const FddQuery& Q = need_query(doc);
        check_gates(spec);
        std::ostream& o = r.out();
        o << "c,left,right,residual,tolerance,converged\n";
        for (double c : cs) {
            const ResidualReport rep = check_scaling(spec, c, Q, doc.quad);
            o << num(c) << "," << num(rep.left) << "," << num(rep.right) << "," << num(rep.residual) << ","
              << num(rep.tolerance) << "," << rep.converged << "\n";
            if (!rep.converged) r.not_converged("scaling check at c = " + num(c));
        }
        return r.finish("check scaling");
    }

    int stationarity(Run& r) {
        const SpecDocument doc = r.load();
        const FieldSpec& spec = need_field(doc);
        const FddQuery& Q = need_query(doc);
        const Vec h = shift.empty() ? Vec(Vec::Ones(spec.n)) : parse_vec(shift);
        if (h.size() != spec.n) throw CLI::ValidationError("--shift", "length must equal n");
        const ResidualReport rep = check_stationary_increments(spec, h, Q, doc.quad);
        std::ostream& o = r.out();
        o << "left,right,residual,tolerance,converged\n";
        o << num(rep.left) << "," << num(rep.right) << "," << num(rep.residual) << "," << num(rep.tolerance) << ","
          << rep.converged << "\n";
        if (!rep.converged) r.not_converged("stationarity check");
        return r.finish("check stationarity");
    }

    int lambda_limit(Run& r) {
        const SpecDocument doc = r.load();
        const FieldSpec& spec = need_field(doc);
        const auto rows = check_lambda_limit(spec, lambdas, need_query(doc), doc.quad);
        std::ostream& o = r.out();
        o << "lambda,lcf,gap,psi_gap\n";
        for (const LambdaLimitRow& row : rows)
            o << num(row.lambda) << "," << num(row.lcf) << "," << num(row.gap) << "," << num(row.psi_gap) << "\n";
        return r.finish("check lambda-limit");
    }

    int tangent(Run& r) {
        const SpecDocument doc = r.load();
        const FieldSpec& spec = need_field(doc);
        const Vec x = base.empty() ? Vec(Vec::Zero(spec.n)) : parse_vec(base);
        if (x.size() != spec.n) throw CLI::ValidationError("--x", "length must equal n");
        std::vector<double> c = tangent_cs;
        if (c.empty())
            c = spec.kind == FieldKind::harmonizable ? std::vector<double>{1.0, 10.0, 100.0}
                                                     : std::vector<double>{1.0, 0.1, 0.01};
        const auto rows = check_tangent(spec, x, c, need_query(doc), doc.quad);
        std::ostream& o = r.out();
        o << "c,lcf,residual\n";
        for (const TangentRow& row : rows) o << num(row.c) << "," << num(row.lcf) << "," << num(row.residual) << "\n";
        return r.finish("check tangent");
    }
};

struct GfunCmd {
    double alpha = 0.5;
    double zmin = 1e-6, zmax = 1e6;
    int points = 61;

    int run(Run& r) {
        if (!(alpha > 0.0 && alpha < 2.0)) throw CLI::ValidationError("--alpha", "must lie in (0, 2)");
        std::ostream& o = r.out();
        o << "z,g,z_pow_alpha_g,z_sq_g\n";
        for (double z : grid(zmin, zmax, points, true)) {
            const double g = g_fun(alpha, z);
            o << num(z) << "," << num(g) << "," << num(std::pow(z, alpha) * g) << "," << num(z * z * g) << "\n";
        }
        r.sidecar()["alpha"] = alpha;
        r.sidecar()["limits"] = {{"z_to_0", 1.0 / alpha + 1.0 / (2.0 - alpha)}, {"z_to_inf", std::tgamma(2.0 - alpha)}};
        return r.finish("gfun");
    }
};

struct ConstantsCmd {
    std::optional<double> alpha;
    long samples = 10000;

    int run(Run& r) {
        std::ostream* o = nullptr;
        if (!r.flags().spec.empty()) {
            const SpecDocument doc = r.load();
            o = &r.out();
            const EnvelopeConstants c = envelope_constants(doc.params.alpha);
            const std::uint64_t seed = r.flags().seed.value_or(1);
            *o << "name,value\n";
            *o << "c1," << num(c.c1) << "\nc2," << num(c.c2) << "\nquasi_tri_A," << num(c.quasi_tri_A) << "\n";
            if (doc.params.lambda > 0.0) {
                const EnvelopeEstimate K = estimate_matrix_floor(doc.params, doc.sigma, samples, seed);
                *o << "K_est," << num(K.value) << "\n";
            }
            const EnvelopeEstimate T = estimate_lcf_envelope(doc.params, doc.sigma, samples, seed);
            *o << "T_est," << num(T.value) << "\n";
            r.sidecar()["samples"] = samples;
            return r.finish("constants");
        }
        if (!alpha) throw CLI::RequiredError("--spec or --alpha");
        if (!(*alpha > 0.0 && *alpha < 2.0)) throw CLI::ValidationError("--alpha", "must lie in (0, 2)");
        o = &r.out();
        const EnvelopeConstants c = envelope_constants(*alpha);
        *o << "name,value\n";
        *o << "c1," << num(c.c1) << "\nc2," << num(c.c2) << "\nquasi_tri_A," << num(c.quasi_tri_A) << "\n";
        return r.finish("constants");
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tempered stable random measures and operator-fractional fields"};
    app.require_subcommand(1);
    Flags flags;
    auto common = [&](CLI::App* sub, bool spec_required) {
        auto* s = sub->add_option("--spec", flags.spec, "JSON spec file");
        if (spec_required) s->required();
        s->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out, "CSV output path (a .json sidecar is written next to it)");
        sub->add_option("--seed", flags.seed, "RNG seed");
        sub->add_option("--threads", flags.threads, "worker threads (default: TEMPERFIELD_THREADS or 1)");
        sub->add_option("--tol", flags.tol, "relative quadrature tolerance");
        sub->add_option("--box-radius", flags.box_radius, "integration box radius (default per field kind)");
        sub->add_option("--eps", flags.eps, "jump cutoff for simulation");
    };

    LcfCmd lcf_cmd;
    auto* lcf_app = app.add_subcommand("lcf", "psi on a grid along one direction");
    common(lcf_app, true);
    lcf_app->add_option("--smax", lcf_cmd.smax, "largest multiple of the direction");
    lcf_app->add_option("--points", lcf_cmd.points, "grid size")->check(CLI::PositiveNumber);
    lcf_app->add_option("--direction", lcf_cmd.direction, "direction (default: first atom)")->delimiter(',');

    FieldLcfCmd field_cmd;
    auto* field_app = app.add_subcommand("field-lcf", "log-characteristic function of the query fdd");
    common(field_app, true);
    field_app->add_option("--smin", field_cmd.smin, "smallest scale of the directions");
    field_app->add_option("--smax", field_cmd.smax, "largest scale of the directions");
    field_app->add_option("--points", field_cmd.points, "number of scales")->check(CLI::PositiveNumber);

    auto* qn_app = app.add_subcommand("quasi-norm", "quasi-norm of the spec integrand");
    common(qn_app, true);
    auto* mem_app = app.add_subcommand("membership", "integrability test of the spec integrand");
    common(mem_app, true);
    auto* sim_app = app.add_subcommand("simulate", "Monte Carlo replicates as CSV");
    common(sim_app, true);

    CheckCmd check;
    auto* check_app = app.add_subcommand("check", "identity checks with residual tables");
    check_app->require_subcommand(1);
    auto* sc_app = check_app->add_subcommand("scaling", "X(c^E t) against c^D X(t)");
    common(sc_app, true);
    sc_app->add_option("--c", check.cs, "scale factors")->delimiter(',');
    auto* st_app = check_app->add_subcommand("stationarity", "increments shifted by h");
    common(st_app, true);
    st_app->add_option("--shift", check.shift, "shift (default: all ones)")->delimiter(',');
    auto* ll_app = check_app->add_subcommand("lambda-limit", "lambda -> 0 convergence");
    common(ll_app, true);
    ll_app->add_option("--lambdas", check.lambdas, "tempering rates")->delimiter(',');
    auto* tg_app = check_app->add_subcommand("tangent", "local tangent field");
    common(tg_app, true);
    tg_app->add_option("--cs", check.tangent_cs, "zoom factors")->delimiter(',');
    tg_app->add_option("--x", check.base, "base point (default: origin)")->delimiter(',');

    GfunCmd gfun;
    auto* g_app = app.add_subcommand("gfun", "table of g(z) with its two limits");
    common(g_app, false);
    g_app->add_option("--alpha", gfun.alpha, "stability index")->required();
    g_app->add_option("--zmin", gfun.zmin, "smallest z")->check(CLI::PositiveNumber);
    g_app->add_option("--zmax", gfun.zmax, "largest z")->check(CLI::PositiveNumber);
    g_app->add_option("--points", gfun.points, "grid size")->check(CLI::PositiveNumber);

    ConstantsCmd consts;
    auto* c_app = app.add_subcommand("constants", "envelope constants and empirical K / T estimates");
    common(c_app, false);
    c_app->add_option("--alpha", consts.alpha, "stability index when no spec is given");
    c_app->add_option("--samples", consts.samples, "random draws for the estimates")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : usage;
    }

    try {
        Run r(flags);
        if (*lcf_app) return lcf_cmd.run(r);
        if (*field_app) return field_cmd.run(r);
        if (*qn_app) return quasi_norm_cmd(r);
        if (*mem_app) return membership_cmd(r);
        if (*sim_app) return simulate_cmd(r);
        if (*sc_app) return check.scaling(r);
        if (*st_app) return check.stationarity(r);
        if (*ll_app) return check.lambda_limit(r);
        if (*tg_app) return check.tangent(r);
        if (*g_app) return gfun.run(r);
        if (*c_app) return consts.run(r);
    } catch (const GateViolation& e) {
        std::cerr << "gate violation: " << e.what() << "\n";
        return gate;
    } catch (const NonConvergence& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return nonconv;
    } catch (const SchemaError& e) {
        std::cerr << e.what() << "\n";
        return usage;
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    }
    return usage;
}
