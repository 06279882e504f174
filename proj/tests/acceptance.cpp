// Acceptance run: one PASS/FAIL line per criterion, exit status = number of
// failures. Criteria 2 and 4 contain checks that fail for mathematical
// reasons; they are kept literal and reported, see README.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "temperfield/fields.hpp"
#include "temperfield/integrability.hpp"
#include "temperfield/simulate.hpp"
#include "temperfield/tstable.hpp"

using namespace tf;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail << "first failure: " << what << "; ";
            pass = false;
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Vec v1(double x) { return Vec::Constant(1, x); }

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

QuadratureConfig quad(double box, double tol) {
    QuadratureConfig q;
    q.box_radius = box;
    q.rel_tol = tol;
    return q;
}

FieldSpec ma_1d() {
    FieldSpec s;
    s.params = {0.5, 1.0};
    s.sigma = SpectralMeasure::two_point(0.5);
    s.E = OperatorSpec(Mat::Constant(1, 1, 1.0));
    s.D = Mat::Constant(1, 1, 0.6);
    s.phi = HomogeneousFn::absolute(s.E);
    return s;
}

FieldSpec ma_2d() {
    FieldSpec s;
    s.n = 2;
    s.d = 2;
    s.params = {1.5, 1.0};
    s.sigma = SpectralMeasure(2, {{v2(1, 0), 0.5}, {v2(0.6, 0.8), 0.5}});
    s.E = OperatorSpec(Mat::Identity(2, 2));
    Mat D(2, 2);
    D << 0.5, 0.1, 0.0, 0.7;
    s.D = D;
    s.phi = HomogeneousFn::radial(s.E, 1.0);
    return s;
}

FieldSpec harm_1d() {
    FieldSpec s;
    s.kind = FieldKind::harmonizable;
    s.params = {1.5, 1.0};
    s.sigma = make_orbit_uniform(1, {{v2(1.0, 0.3), 1.0}}, 64);
    s.E = OperatorSpec(Mat::Constant(1, 1, 1.0));
    s.D = Mat::Constant(1, 1, 0.5);
    s.phi = HomogeneousFn::absolute(s.E);
    return s;
}

FieldSpec harm_2d() {
    FieldSpec s;
    s.n = 2;
    s.d = 2;
    s.kind = FieldKind::harmonizable;
    s.params = {1.5, 1.0};
    auto v4 = [](double a, double b, double c, double d) {
        Vec v(4);
        v << a, b, c, d;
        return v;
    };
    s.sigma = SpectralMeasure(
        4, {{v4(1, 0, 0, 0), 0.4}, {v4(0, 1, 0.5, 0), 0.3}, {v4(0.2, 0, 0, 1), 0.3}, {v4(0, 0, 1, 0.3), 0.2}});
    s.E = OperatorSpec(Mat::Identity(2, 2));
    Mat D(2, 2);
    D << 0.5, 0.1, 0.0, 0.7;
    s.D = D;
    s.phi = HomogeneousFn::radial(s.E);
    return s;
}

const FddQuery query_1d{{v1(1.0), v1(-0.7)}, {v1(0.8), v1(-1.3)}};
const FddQuery query_2d{{v2(1.0, 0.5)}, {v2(0.7, -0.4)}};

// Random simple function on n <= 2 dimensional boxes with d x d values.
IntegrandFn random_simple(int n, int d, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z;
    std::vector<SimplePiece> pieces;
    const int m = count(rng);
    double at = -2.0 + 2.0 * u(rng);
    for (int k = 0; k < m; ++k) {
        Vec lo(n), hi(n);
        const double w = 0.1 + 2.0 * u(rng);
        lo[0] = at;
        hi[0] = at + w;
        at += w + u(rng);
        for (int i = 1; i < n; ++i) {
            lo[i] = -1.0 + u(rng);
            hi[i] = lo[i] + 0.1 + u(rng);
        }
        Mat A(d, d);
        for (int i = 0; i < d * d; ++i) A.data()[i] = z(rng);
        A *= std::exp(3.0 * z(rng));
        pieces.push_back({Box{lo, hi}, A});
    }
    return IntegrandFn::simple(n, d, pieces);
}

SpectralMeasure random_sigma(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::normal_distribution<double> z;
    if (d == 1) return SpectralMeasure::two_point(u(rng));
    std::vector<Atom> atoms;
    for (int k = 0; k < 3; ++k) {
        Vec v = v2(z(rng), z(rng));
        atoms.push_back({v / v.norm(), u(rng)});
    }
    return SpectralMeasure(2, atoms);
}

// ---------------------------------------------------------------------------

Outcome closed_form_lcf() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const double c = 0.5;
    double worst = 0.0, worst_oracle = 0.0;
    for (double al : {0.3, 0.5, 1.5, 1.9}) {
        for (double lam : {0.1, 1.0, 10.0}) {
            const StableParams p{al, lam};
            for (int k = 0; k < 50; ++k) {
                const double u = std::pow(10.0, -3.0 + 6.0 * k / 49.0);
                // lambda^alpha - Re(lambda + iu)^alpha = lambda^alpha (1 - (1 + x^2)^{alpha/2} cos(alpha atan x)),
                // x = u / lambda, written without the cancellation at small x.
                const double x = u / lam, th = al * std::atan(x), sh = std::sin(0.5 * th);
                const double bracket =
                    std::pow(lam, al) * (2.0 * sh * sh - std::expm1(0.5 * al * std::log1p(x * x)) * std::cos(th));
                const double closed = -2.0 * c * std::tgamma(-al) * bracket;
                const double lib = lcf(p, SpectralMeasure::two_point(c), v1(u));
                const double quadv = 2.0 * c * radial_lcf_quadrature(p, u);
                worst = std::max({worst, rel(lib, closed), rel(quadv, closed)});
                worst_oracle = std::max(worst_oracle, rel(2.0 * c * oracle::radial_lcf(al, lam, u), closed));
            }
        }
    }
    const double secs = seconds_since(t0);
    o.require(worst <= 1e-8, "library closed form / quadrature relative error");
    o.require(worst_oracle <= 1e-8, "independent quadrature relative error");
    o.require(secs < 5.0, "runtime");
    o.detail << "max rel err " << worst << " (independent quadrature " << worst_oracle << "), " << secs << " s";
    return o;
}

Outcome g_asymptotics() {
    Outcome o;
    for (double al : {0.3, 0.5, 1.5, 1.9}) {
        const double small = 1.0 / (2.0 - al) + 1.0 / al;
        const double e_small = std::abs(std::pow(1e-6, al) * g_fun(al, 1e-6) - small) / small;
        const double e_large = std::abs(1e12 * g_fun(al, 1e6) - std::tgamma(2.0 - al)) / std::tgamma(2.0 - al);
        o.require(e_small <= 1e-3, "small-z limit at alpha " + std::to_string(al));
        o.require(e_large <= 1e-3, "large-z limit at alpha " + std::to_string(al));
        o.detail << "alpha " << al << ": " << e_small << " / " << e_large << "; ";
    }
    return o;
}

Outcome sandwich() {
    Outcome o;
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> ua(0.2, 1.9);
    const QuadratureConfig q = quad(1e3, 1e-10);
    double worst_j = -INFINITY, worst_h = -INFINITY;
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 1 + rep % 2, d = 1 + (rep / 2) % 2;
        const StableParams p{ua(rng), 1.0};
        const SpectralMeasure s = random_sigma(d, rng);
        const IntegrandFn f = random_simple(n, d, rng);
        const EnvelopeConstants ec = envelope_constants(p.alpha);
        const double H1 = big_H(f, 1.0, p, s, q).value;
        const double J = j2(f, p, s, q).value;
        worst_j = std::max({worst_j, (ec.c1 * H1 - J) / J, (J - ec.c2 * H1) / J});
        const double N = quasi_norm(f, p, s, q).value;
        for (double delta : {0.1, 0.5, 1.0, 2.0, 10.0}) {
            const double r = N / delta;
            const double lo = std::min(std::pow(r, p.alpha), r * r), hi = std::max(std::pow(r, p.alpha), r * r);
            const double H = big_H(f, delta, p, s, q).value;
            worst_h = std::max({worst_h, (lo - H) / H, (H - hi) / H});
        }
    }
    o.require(worst_j <= 1e-6, "C1 H <= J2 <= C2 H");
    o.require(worst_h <= 1e-6, "quasi-norm bounds on H(f, delta)");
    o.detail << "100 integrands; largest relative violation J2 " << worst_j << ", H " << worst_h
             << " (negative = strict)";
    return o;
}

Outcome identities() {
    Outcome o;
    double worst_scale = 0.0;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    const SpectralMeasure s2(2, {{v2(1, 0), 1.0}, {v2(1, 1), 0.5}, {v2(-0.3, 1), 0.7}});
    for (double al : {0.3, 0.5, 1.5, 1.9}) {
        for (double lam : {0.1, 1.0, 10.0}) {
            for (double rho : {0.01, 0.3, 4.0, 100.0}) {
                const Vec u = v2(z(rng), z(rng));
                const double lhs = lcf({al, lam}, s2, rho * u);
                const double rhs = std::pow(rho, al) * lcf({al, lam / rho}, s2, u);
                worst_scale = std::max(worst_scale, rel(lhs, rhs));
            }
        }
    }
    o.require(worst_scale <= 1e-12, "psi scaling");

    const QuadratureConfig q = quad(1e3, 1e-10);
    double worst_hom = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 1 + rep % 2;
        const StableParams p{0.4 + 0.15 * rep, 1.0};
        const SpectralMeasure s = random_sigma(d, rng);
        const IntegrandFn f = random_simple(1, d, rng);
        const double N = quasi_norm(f, p, s, q).value;
        for (double c : {-3.0, 0.25, 7.0}) worst_hom = std::max(worst_hom, rel(quasi_norm(f.scaled(c), p, s, q).value, std::abs(c) * N));
    }
    o.require(worst_hom <= 1e-6, "quasi-norm homogeneity");

    const SpectralMeasure half = SpectralMeasure::two_point(0.5);
    for (double al : {0.5, 1.5}) {
        const StableParams p{al, 1.0};
        const double n1 = quasi_norm(IntegrandFn::indicator({v1(0), v1(1)}, 1), p, half, q).value;
        const double n2 = quasi_norm(IntegrandFn::indicator({v1(0), v1(2)}, 1), p, half, q).value;
        o.require(std::abs(n1 - 1.0) <= 1e-6, "||1_[0,1]|| = 1");
        o.require(std::abs(n2 - std::pow(2.0, 1.0 / al)) <= 1e-6, "||1_[0,2]|| = 2^{1/alpha} at alpha " + std::to_string(al));
        o.detail << "alpha " << al << ": ||1_[0,1]|| = " << n1 << ", ||1_[0,2]|| = " << n2 << " vs 2^{1/alpha} = "
                 << std::pow(2.0, 1.0 / al) << "; ";
    }
    o.detail << "psi scaling " << worst_scale << ", homogeneity " << worst_hom;
    return o;
}

Outcome field_scaling() {
    Outcome o;
    struct Case {
        const char* name;
        FieldSpec spec;
        FddQuery query;
        QuadratureConfig q;
        double tol;
    };
    const FieldSpec m1 = ma_1d();
    const std::vector<Case> cases = {
        {"MA n=d=1", m1, query_1d, quad(default_box_radius(m1), 1e-10), 1e-6},
        {"MA n=d=2", ma_2d(), query_2d, quad(1e5, 1e-7), 1e-4},
        {"harmonizable n=d=1", harm_1d(), query_1d, quad(1e3, 1e-9), 1e-6},
        {"harmonizable n=d=2", harm_2d(), query_2d, quad(48, 1e-7), 1e-4},
    };
    for (const Case& c : cases) {
        const auto t0 = std::chrono::steady_clock::now();
        double worst = 0.0;
        for (double cc : {0.5, 2.0, 4.0}) worst = std::max(worst, check_scaling(c.spec, cc, c.query, c.q).residual);
        const double secs = seconds_since(t0);
        o.require(worst <= c.tol, std::string(c.name) + " residual");
        o.require(secs < 60.0, std::string(c.name) + " runtime");
        o.detail << c.name << ": " << worst << " (" << secs << " s); ";
    }
    return o;
}

Outcome stationarity() {
    Outcome o;
    const FieldSpec m = ma_1d(), h = harm_1d();
    double wm = 0.0, wh = 0.0;
    for (double hh : {1.0, -1.0, 2.0, -2.0}) {
        wm = std::max(wm, check_stationary_increments(m, v1(hh), query_1d, quad(default_box_radius(m), 1e-10)).residual);
        wh = std::max(wh, check_stationary_increments(h, v1(hh), query_1d, quad(1e3, 1e-9)).residual);
    }
    o.require(wm <= 1e-6, "MA residual");
    o.require(wh <= 1e-4, "harmonizable residual");
    o.detail << "MA " << wm << ", harmonizable (m = 64) " << wh;
    return o;
}

Outcome limits() {
    Outcome o;
    auto strictly_down = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] < v[i - 1])) return false;
        return true;
    };
    const FieldSpec m = ma_1d(), h = harm_1d();
    const QuadratureConfig qm = quad(default_box_radius(m), 1e-9), qh = quad(1e3, 1e-9);
    for (const auto& [name, spec, q] : {std::tuple{"MA", m, qm}, std::tuple{"harmonizable", h, qh}}) {
        std::vector<double> gaps;
        for (const LambdaLimitRow& r : check_lambda_limit(spec, {1.0, 0.1, 0.01}, query_1d, q)) gaps.push_back(r.gap);
        o.require(strictly_down(gaps), std::string(name) + " lambda gaps");
        o.detail << name << " lambda gaps " << gaps[0] << " > " << gaps[1] << " > " << gaps[2] << "; ";
    }
    std::vector<double> tm, th;
    for (const TangentRow& r : check_tangent(m, v1(0.3), {1.0, 0.1, 0.01}, query_1d, qm)) tm.push_back(r.residual);
    for (const TangentRow& r : check_tangent(h, v1(0.3), {1.0, 10.0, 100.0}, query_1d, qh)) th.push_back(r.residual);
    o.require(strictly_down(tm), "MA tangent residuals");
    o.require(strictly_down(th), "harmonizable tangent residuals");
    o.detail << "MA tangent " << tm[0] << " > " << tm[1] << " > " << tm[2] << "; harmonizable tangent " << th[0] << " > "
             << th[1] << " > " << th[2];
    return o;
}

Outcome monte_carlo() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const long N = 200000;
    const double env = 4.0 / std::sqrt(static_cast<double>(N));
    double worst_re = 0.0, worst_im = 0.0, worst_eps = 0.0;

    auto compare = [&](const SampleBatch& a, const SampleBatch& b, const std::vector<Vec>& probes,
                       const std::function<double(const Vec&)>& exact) {
        for (const Vec& u : probes) {
            const EmpiricalCf ea = empirical_cf(a, u), eb = empirical_cf(b, u);
            const double want = exact(u);
            worst_re = std::max(worst_re, std::abs(ea.value.real() - want) / env);
            worst_im = std::max(worst_im, std::abs(ea.value.imag()) / (4.0 * ea.se_im));
            // Two independent estimates: their difference has twice the variance.
            worst_eps = std::max(worst_eps, std::abs(ea.value.real() - eb.value.real()) / (std::sqrt(2.0) * env));
        }
    };

    // Tempered stable vector in R^2.
    {
        const StableParams p{0.8, 2.0};
        const SpectralMeasure s(2, {{v2(1, 0), 1.0}, {v2(1, 1), 0.5}});
        const double mass = 1.3;
        SimConfig cfg;
        cfg.n_replicates = N;
        cfg.seed = 7;
        cfg.jump_cutoff_eps = std::pow(50.0 * p.alpha, -1.0 / p.alpha);
        const SampleBatch a = sample_tas(p, s, mass, cfg);
        cfg.jump_cutoff_eps *= 0.5;
        cfg.seed = 8;
        const SampleBatch b = sample_tas(p, s, mass, cfg);
        std::vector<Vec> probes;
        for (int k = 1; k <= 20; ++k) probes.push_back(0.2 * k * v2(std::cos(k), std::sin(k)));
        compare(a, b, probes, [&](const Vec& u) { return std::exp(mass * lcf(p, s, u)); });
    }
    // Moving-average kernel integral, t = 1/2.
    {
        FieldSpec spec;
        spec.params = {0.8, 2.0};
        spec.sigma = SpectralMeasure::two_point(1.0);
        spec.E = OperatorSpec(Mat::Identity(1, 1));
        spec.D = Mat::Constant(1, 1, 0.95);
        spec.phi = HomogeneousFn::absolute(spec.E);
        const IntegrandFn f = field_integrand(spec, v1(0.5));
        SimConfig cfg;
        cfg.n_replicates = N;
        cfg.seed = 3;
        cfg.jump_cutoff_eps = 0.1;
        const SampleBatch a = sample_integral(f, spec.params, spec.sigma, cfg);
        cfg.jump_cutoff_eps = 0.05;
        cfg.seed = 4;
        const SampleBatch b = sample_integral(f, spec.params, spec.sigma, cfg);
        std::vector<Vec> probes;
        for (int k = 1; k <= 20; ++k) probes.push_back(v1(0.2 * k));
        const QuadratureConfig q = quad(default_box_radius(spec), 1e-9);
        compare(a, b, probes, [&](const Vec& u) {
            return std::exp(field_lcf(spec, FddQuery{{v1(0.5)}, {u}}, q).value);
        });
    }
    const double secs = seconds_since(t0);
    o.require(worst_re <= 1.0, "real parts within 4/sqrt(N)");
    o.require(worst_im <= 1.0, "imaginary parts within 4 SE");
    o.require(worst_eps <= 1.0, "eps halving within the MC envelope");
    o.require(secs < 120.0, "runtime");
    o.detail << "N = 2e5, 40 probes; max |Re diff| / (4/sqrt N) = " << worst_re << ", max |Im| / (4 SE) = " << worst_im
             << ", eps-halving shift / envelope = " << worst_eps << ", " << secs << " s";
    return o;
}

Outcome frontier() {
    Outcome o;
    FieldSpec f;
    f.params = {1.5, 1.0};
    f.sigma = SpectralMeasure::two_point(0.5);
    f.E = OperatorSpec(Mat::Constant(1, 1, 1.0));
    f.D = Mat::Constant(1, 1, 1.1);
    f.phi = HomogeneousFn::absolute(f.E);
    f.beta = 1.0;
    bool tempered_gate = true, stable_gate = true;
    try {
        check_gates(f);
    } catch (const GateViolation&) {
        tempered_gate = false;
    }
    try {
        check_gates(f, true);
    } catch (const GateViolation&) {
        stable_gate = false;
    }
    const MembershipReport m =
        membership(field_integrand(f, v1(1.0)), f.params, f.sigma, quad(default_box_radius(f), 1e-6));
    o.require(tempered_gate && !stable_gate, "gates");
    o.require(m.in_space, "accepted at lambda = 1");
    o.require(m.companion_diverged, "divergent at lambda = 0");
    o.detail << "H = 1.1, beta + q(1/alpha - 1/2) = 1.1667: " << m.diagnostics;
    return o;
}

Outcome envelope_stability() {
    Outcome o;
    const SpectralMeasure s(2, {{v2(1, 0), 1.0}, {v2(1, 1), 0.5}});
    for (double al : {0.7, 1.5}) {
        const StableParams p{al, 1.0};
        const double k1 = estimate_matrix_floor(p, s, 10000, 1).value, k2 = estimate_matrix_floor(p, s, 20000, 1).value;
        const double t1 = estimate_lcf_envelope(p, s, 10000, 1).value, t2 = estimate_lcf_envelope(p, s, 20000, 1).value;
        o.require(rel(k2, k1) < 0.1, "K_est change");
        o.require(rel(t2, t1) < 0.1, "T_est change");
        o.detail << "alpha " << al << ": K " << k1 << " -> " << k2 << ", T " << t1 << " -> " << t2 << "; ";
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"closed-form LCF vs quadrature", closed_form_lcf},
        {"g(z) asymptotics", g_asymptotics},
        {"sandwich bounds", sandwich},
        {"exact identities", identities},
        {"field scaling", field_scaling},
        {"stationary increments", stationarity},
        {"lambda and tangent limits", limits},
        {"Monte Carlo validity", monte_carlo},
        {"existence frontier", frontier},
        {"envelope stability", envelope_stability},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failures += !o.pass;
        std::printf("criterion %2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures;
}
