#include "temperfield/polar.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "temperfield/errors.hpp"
#include "temperfield/quadrature.hpp"

namespace tf {

namespace {

void require_Q(const OperatorSpec& E, const char* who) {
    if (!(E.re_eig_min > 0.0))
        throw std::invalid_argument(std::string(who) + ": exponent must have eigenvalues with positive real parts");
}

// e^{-v E} x
Vec decay_apply(const OperatorSpec& E, double v, const Vec& x) {
    if (E.is_diagonal()) {
        Vec r(x.size());
        for (int i = 0; i < x.size(); ++i) r[i] = std::exp(-v * E.entries(i, i)) * x[i];
        return r;
    }
    return mat_exp(-v * E.entries) * x;
}

// int_a^b ||e^{-vE} x|| dv
double orbit_length(const OperatorSpec& E, const Vec& x, double a, double b, double rel) {
    auto g = [&](double v) { return decay_apply(E, v, x).norm(); };
    auto r = quad::integrate<double>(g, a, b, 0.0, rel, 4000);
    return r.value;
}

// ||x||_E as int_0^infty ||e^{-vE}x|| dv, split on doubling intervals.
double e_norm_general(const OperatorSpec& E, const Vec& x) {
    const double rel = 1e-12;
    double total = orbit_length(E, x, 0.0, 1.0, rel);
    double a = 1.0;
    for (int k = 0; k < 60; ++k) {
        double b = 2.0 * a;
        double piece = orbit_length(E, x, a, b, rel);
        total += piece;
        a = b;
        // The integrand decays at least like e^{-re_eig_min v} up to polynomial factors.
        if (piece <= 1e-15 * total && E.re_eig_min * a > 40.0) break;
    }
    return total;
}

}  // namespace

HomogeneousFn HomogeneousFn::radial(const OperatorSpec& E, std::optional<double> beta) {
    HomogeneousFn f;
    f.exponent = E;
    f.kind = Kind::radial_part;
    f.beta_hint = beta;
    return f;
}

HomogeneousFn HomogeneousFn::absolute(const OperatorSpec& E, std::optional<double> beta) {
    if (E.dim() != 1) throw std::invalid_argument("abs homogeneous function requires n = 1");
    if (!(E.entries(0, 0) > 0.0)) throw std::invalid_argument("abs homogeneous function requires E > 0");
    HomogeneousFn f;
    f.exponent = E;
    f.kind = Kind::abs;
    f.beta_hint = beta;
    return f;
}

double e_norm(const OperatorSpec& E, const Vec& x) {
    require_Q(E, "e_norm");
    if (x.size() != E.dim()) throw std::invalid_argument("e_norm: dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("e_norm: non-finite vector");
    const double nx = x.norm();
    if (nx == 0.0) return 0.0;
    if (E.is_scalar()) return nx / E.scalar_value();
    return e_norm_general(E, x);
}

GenPolar polar_decompose(const OperatorSpec& E, const Vec& x) {
    require_Q(E, "polar_decompose");
    if (x.size() != E.dim()) throw std::invalid_argument("polar_decompose: dimension mismatch");
    const double nx = x.norm();
    if (!(nx > 0.0)) throw std::invalid_argument("polar_decompose: x must be nonzero");
    if (E.is_scalar()) {
        const double e = E.scalar_value();
        const double tau = std::pow(nx / e, 1.0 / e);
        return {tau, x * (e / nx)};
    }
    // With L = log c, ||c^{-E} x||_E = F(L) = int_L^infty ||e^{-vE}x|| dv, strictly
    // decreasing in L. Solve F(L) = 1 by Newton steps safeguarded by bisection.
    const double F0 = e_norm_general(E, x);
    auto F = [&](double L) {
        if (L == 0.0) return F0;
        return L > 0 ? F0 - orbit_length(E, x, 0.0, L, 1e-13) : F0 + orbit_length(E, x, L, 0.0, 1e-13);
    };
    double g1 = std::log(nx) / E.re_eig_min;
    double g2 = std::log(nx) / E.re_eig_max;
    double lo = std::min(g1, g2) - 1.0;
    double hi = std::max(g1, g2) + 1.0;
    double Flo = F(lo), Fhi = F(hi);
    for (int k = 0; k < 200 && !(Flo > 1.0); ++k) {
        lo -= std::ldexp(1.0, k);
        Flo = F(lo);
    }
    for (int k = 0; k < 200 && !(Fhi < 1.0); ++k) {
        hi += std::ldexp(1.0, k);
        Fhi = F(hi);
    }
    if (!(Flo > 1.0 && Fhi < 1.0)) throw NonConvergence("polar_decompose: could not bracket radial part");
    double L = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double FL = F(L) - 1.0;
        if (FL > 0) lo = L; else hi = L;
        if (std::abs(FL) < 1e-14 || hi - lo < 1e-13 * std::max(1.0, std::abs(L))) break;
        double G = decay_apply(E, L, x).norm();
        double Ln = L + FL / G;  // F' = -G
        L = (Ln > lo && Ln < hi) ? Ln : 0.5 * (lo + hi);
    }
    const double tau = std::exp(L);
    return {tau, decay_apply(E, L, x)};
}

double tau_or_zero(const OperatorSpec& E, const Vec& x) {
    if (x.norm() == 0.0) return 0.0;
    return polar_decompose(E, x).tau;
}

double phi_eval(const HomogeneousFn& phi, const Vec& x) {
    switch (phi.kind) {
        case HomogeneousFn::Kind::radial_part:
            return tau_or_zero(phi.exponent, x);
        case HomogeneousFn::Kind::abs:
            if (x.size() != 1) throw std::invalid_argument("abs homogeneous function requires n = 1");
            return std::pow(std::abs(x[0]), 1.0 / phi.exponent.entries(0, 0));
        case HomogeneousFn::Kind::user_callback: {
            if (!phi.callback) throw std::invalid_argument("phi_eval: missing callback");
            double v = phi.callback(x);
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::domain_error("phi_eval: callback returned a negative or non-finite value");
            return v;
        }
    }
    return 0.0;
}

double phi_log_ratio(const HomogeneousFn& phi, const Vec& x, const Vec& y, const Vec& xmy) {
    if (phi.kind == HomogeneousFn::Kind::abs) {
        const double e = phi.exponent.entries(0, 0);
        const double ax = std::abs(x[0]), ay = std::abs(y[0]);
        double diff = ((x[0] >= 0) == (y[0] >= 0)) ? (y[0] >= 0 ? xmy[0] : -xmy[0]) : ax - ay;
        double r = diff / ay;
        return (std::abs(r) < 0.5 ? std::log1p(r) : std::log(ax / ay)) / e;
    }
    if (phi.kind == HomogeneousFn::Kind::radial_part && phi.exponent.is_scalar()) {
        const double e = phi.exponent.scalar_value();
        const double nx = x.norm(), ny = y.norm();
        double diff = xmy.dot(2.0 * y + xmy) / (nx + ny);
        double r = diff / ny;
        return (std::abs(r) < 0.5 ? std::log1p(r) : std::log(nx / ny)) / e;
    }
    return std::log(phi_eval(phi, x)) - std::log(phi_eval(phi, y));
}

ProbeReport admissibility_probe(const HomogeneousFn& phi, const OperatorSpec& E, double beta, double A,
                                double B, long n_samples, std::uint64_t seed) {
    if (!(A > 0.0 && A < B)) throw std::invalid_argument("admissibility_probe: need 0 < A < B");
    if (!(beta > 0.0)) throw std::invalid_argument("admissibility_probe: beta must be positive");
    const int n = E.dim();
    const int shells = 8;
    ProbeReport rep;
    rep.shell_max.assign(shells, 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud;
    const long per_shell = std::max<long>(1, n_samples / shells);
    for (int k = 0; k < shells; ++k) {
        for (long i = 0; i < per_shell; ++i) {
            Vec w(n), v(n);
            for (int j = 0; j < n; ++j) {
                w[j] = nd(rng);
                v[j] = nd(rng);
            }
            Vec y = v.normalized() * (A + (B - A) * ud(rng));
            Vec dir = polar_decompose(E, w).direction;
            double tau = std::pow(10.0, -(k + ud(rng)));
            Vec x = real_power(E, tau) * dir;
            const Vec xy = x + y;
            double diff;
            if (xy.isZero(0.0)) {
                diff = phi_eval(phi, y);
            } else {
                diff = phi_eval(phi, y) * std::expm1(phi_log_ratio(phi, xy, y, x));
            }
            double ratio = std::abs(diff) / std::pow(tau, beta);
            rep.shell_max[k] = std::max(rep.shell_max[k], ratio);
            rep.max_ratio = std::max(rep.max_ratio, ratio);
            ++rep.samples;
        }
    }
    bool increasing = true;
    for (int k = shells - 4; k < shells; ++k) increasing = increasing && rep.shell_max[k] > rep.shell_max[k - 1];
    rep.growth_detected = increasing && rep.shell_max[shells - 1] > 10.0 * rep.shell_max[shells - 5];
    return rep;
}

}  // namespace tf
