#include <doctest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "temperfield/integrability.hpp"

using namespace tf;
using oracle::LineKernel;

namespace {

Vec vec1(double a) { return Vec::Constant(1, a); }

Box box1(double lo, double hi) { return Box{vec1(lo), vec1(hi)}; }

QuadratureConfig quad_default() {
    QuadratureConfig q;
    q.rel_tol = 1e-9;
    return q;
}

// With site_eval the distance to the singular site is the offset itself, so
// no precision is lost next to s = t.
IntegrandFn line_kernel_fn(const LineKernel& k, bool with_site_eval = true) {
    IntegrandFn f;
    f.n = 1;
    f.d = 1;
    f.eval = [k](const Vec& s) { return Mat::Constant(1, 1, k(s[0])); };
    if (with_site_eval) {
        f.site_eval = [k](int site, const Vec& anchor, const Vec& off) {
            const double s = anchor[0] + off[0];
            const double to_t = site == 1 ? std::abs(off[0]) : std::abs(k.t - s);
            const double to_0 = site == 0 ? std::abs(off[0]) : std::abs(s);
            return Mat::Constant(1, 1, std::pow(to_t, k.p) - std::pow(to_0, k.p));
        };
    }
    f.singular_points = {vec1(0.0), vec1(k.t)};
    f.decay_hint = 1.0 - k.p;
    return f;
}

// h(x) for d = 1, sigma = c (eps_1 + eps_-1), Rosinski radius lambda.
double h_line(double x, double alpha, double lambda, double c) {
    const double y = std::abs(lambda * x);
    return 2.0 * c * std::min(std::pow(y, alpha), y * y);
}

// Three pieces: (-inf, 0), (0, t), (t, inf). The maps flatten the |s|^{p alpha}
// singularities so that the Monte Carlo variance is finite.
double piece_value(double t, int piece, double w, double& jac) {
    if (piece == 1) {
        jac = 6.0 * t * w * (1.0 - w);
        return t * w * w * (3.0 - 2.0 * w);
    }
    const double r = w / (1.0 - w);
    jac = 2.0 * r / ((1.0 - w) * (1.0 - w));
    return piece == 0 ? -r * r : t + r * r;
}

struct McResult {
    double value;
    double se;
};

template <class F>
McResult mc_line_integral(const F& h, double t, long n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double total = 0.0, var = 0.0;
    for (int piece = 0; piece < 3; ++piece) {
        double s1 = 0.0, s2 = 0.0;
        for (long i = 0; i < n; ++i) {
            double w = u(rng);
            if (w == 0.0) w = 0.5;
            double jac;
            const double s = piece_value(t, piece, w, jac);
            const double v = h(s) * jac;
            s1 += v;
            s2 += v * v;
        }
        const double m = s1 / n;
        total += m;
        var += (s2 / n - m * m) / n;
    }
    return {total, std::sqrt(var)};
}

std::vector<SimplePiece> random_simple(int n, int d, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 4);
    std::normal_distribution<double> z;
    std::vector<SimplePiece> pieces;
    const int m = count(rng);
    for (int k = 0; k < m; ++k) {
        // Disjoint dyadic boxes along the first axis.
        Vec lo = Vec::Zero(n), hi = Vec::Ones(n);
        lo[0] = k;
        hi[0] = k + std::ldexp(1.0, -static_cast<int>(rng() % 3));
        for (int i = 1; i < n; ++i) hi[i] = std::ldexp(1.0, static_cast<int>(rng() % 3) - 1);
        Mat v(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) v(i, j) = std::exp(1.5 * z(rng)) * z(rng);
        pieces.push_back({Box{lo, hi}, v});
    }
    return pieces;
}

}  // namespace

TEST_CASE("h_fun and stable_integrand examples") {
    const SpectralMeasure s = SpectralMeasure::two_point(0.5);
    CHECK(h_fun({0.7, 1.0}, s, Mat::Zero(1, 1)) == 0.0);
    CHECK(h_fun({0.7, 1.0}, s, Mat::Constant(1, 1, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h_fun({0.5, 1.0}, s, Mat::Constant(1, 1, 4.0)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(h_fun({0.5, 2.0}, s, Mat::Constant(1, 1, 0.1)) == doctest::Approx(0.04).epsilon(1e-14));

    CHECK(stable_integrand(s, 0.7, Mat::Zero(1, 1)) == 0.0);
    CHECK(stable_integrand(s, 0.7, Mat::Identity(1, 1)) == doctest::Approx(1.0));
    Vec e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    SpectralMeasure s2(2, {{e1, 0.3}, {e2, 0.2}});
    Mat D = Mat::Zero(2, 2);
    D(0, 0) = 2.0;
    D(1, 1) = 3.0;
    CHECK(stable_integrand(s2, 1.5, D) ==
          doctest::Approx(0.6 * std::pow(2.0, 1.5) + 0.4 * std::pow(3.0, 1.5)).epsilon(1e-14));
    CHECK(stable_integrand(s2, 1.5, Mat::Identity(2, 2)) == doctest::Approx(s2.total_mass()));
}

TEST_CASE("big_H of an indicator") {
    const SpectralMeasure s = SpectralMeasure::two_point(0.5);
    const IntegrandFn f = IntegrandFn::indicator(box1(0, 1), 1);
    for (double al : {0.5, 1.5}) {
        const StableParams p{al, 1.0};
        double prev = INFINITY;
        for (double delta : {0.1, 0.5, 1.0, 2.0, 10.0}) {
            const IntegralReport r = big_H(f, delta, p, s, quad_default());
            CHECK(r.converged());
            CHECK(r.value == doctest::Approx(std::min(std::pow(delta, -al), std::pow(delta, -2.0))).epsilon(1e-12));
            CHECK(r.value <= prev);
            prev = r.value;
        }
    }
    const IntegrandFn zero = IntegrandFn::zero(1, 1);
    for (double delta : {0.1, 1.0, 3.0}) CHECK(big_H(zero, delta, {0.7, 1.0}, s, quad_default()).value == 0.0);
}

TEST_CASE("big_H of a moving-average kernel against Monte Carlo") {
    const double al = 0.5, lam = 1.0, c = 0.5;
    const LineKernel k{1.0, 0.6 - 1.0 / al};
    const SpectralMeasure s = SpectralMeasure::two_point(c);
    auto h = [&](double x) { return h_line(k(x), al, lam, c); };
    const McResult mc = mc_line_integral(h, k.t, 1000000, 17);
    const double ts = oracle::line_integral(k, lam, [&](double v) { return h_line(v, al, lam, c); });
    CHECK(std::abs(ts - mc.value) <= 3.0 * mc.se);

    const IntegralReport r = big_H(line_kernel_fn(k), 1.0, {al, lam}, s, quad_default());
    CHECK(r.converged());
    CHECK(std::abs(r.value - mc.value) <= 3.0 * mc.se);
    CHECK(r.value == doctest::Approx(ts).epsilon(1e-7));

    // Plain eval loses the offset next to s = t; a moderate tolerance still holds.
    QuadratureConfig q = quad_default();
    q.rel_tol = 1e-6;
    const IntegralReport plain = big_H(line_kernel_fn(k, false), 1.0, {al, lam}, s, q);
    CHECK(plain.converged());
    CHECK(plain.value == doctest::Approx(ts).epsilon(1e-5));
}

TEST_CASE("big_H display bounds and scaling") {
    const SpectralMeasure s = SpectralMeasure::two_point(0.5);
    const StableParams p{1.2, 0.7};
    const LineKernel k{1.0, 0.4 - 1.0 / p.alpha};
    const IntegrandFn f = line_kernel_fn(k);
    const double H1 = big_H(f, 1.0, p, s, quad_default()).value;
    for (double delta : {0.2, 0.5, 2.0, 5.0}) {
        const double Hd = big_H(f, delta, p, s, quad_default()).value;
        const double a = std::pow(delta, -p.alpha), b = std::pow(delta, -2.0);
        CHECK(Hd >= std::min(a, b) * H1 * (1 - 1e-7));
        CHECK(Hd <= std::max(a, b) * H1 * (1 + 1e-7));
        CHECK(Hd == big_H(f.scaled(1.0 / delta), 1.0, p, s, quad_default()).value);
    }
}

TEST_CASE("j2 examples and sandwich") {
    const SpectralMeasure s = SpectralMeasure::two_point(0.5);
    const IntegrandFn f = IntegrandFn::indicator(box1(0, 1), 1);
    const IntegralReport r = j2(f, {0.5, 1.0}, s, quad_default());
    CHECK(r.value == doctest::Approx(0.55709).epsilon(1e-4));
    CHECK(r.value == doctest::Approx(g_fun(0.5, 1.0)).epsilon(1e-13));
    CHECK(j2(IntegrandFn::zero(1, 1), {0.5, 1.0}, s, quad_default()).value == 0.0);

    std::mt19937_64 rng(21);
    Vec a(2), b(2), c(2);
    a << 1, 0;
    b << 0.6, 0.8;
    c << -0.3, 1;
    const SpectralMeasure s2(2, {{a, 0.5}, {b, 0.25}, {c, 0.4}});
    for (double al : {0.4, 1.1, 1.8}) {
        const EnvelopeConstants ec = envelope_constants(al);
        for (int rep = 0; rep < 5; ++rep) {
            const IntegrandFn g = IntegrandFn::simple(2, 2, random_simple(2, 2, rng));
            const double H = big_H(g, 1.0, {al, 1.0}, s2, quad_default()).value;
            const double J = j2(g, {al, 1.0}, s2, quad_default()).value;
            CHECK(ec.c1 * H <= J * (1 + 1e-9));
            CHECK(J <= ec.c2 * H * (1 + 1e-9));
        }
    }
}

TEST_CASE("quasi-norm") {
    const SpectralMeasure s = SpectralMeasure::two_point(0.5);
    for (double al : {0.5, 1.5}) {
        const StableParams p{al, 1.0};
        QuasiNormReport q = quasi_norm(IntegrandFn::indicator(box1(0, 1), 1), p, s, quad_default());
        CHECK(q.converged);
        CHECK(q.value == doctest::Approx(1.0).epsilon(1e-9));
        // H(1_[0,2] I, delta) = 2 (delta^-alpha ^ delta^-2) crosses 1 at sqrt(2).
        q = quasi_norm(IntegrandFn::indicator(box1(0, 2), 1), p, s, quad_default());
        CHECK(q.value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
        const IntegrandFn f = line_kernel_fn({1.0, 0.6 - 1.0 / al});
        const double base = quasi_norm(f, p, s, quad_default()).value;
        CHECK(quasi_norm(f.scaled(3.0), p, s, quad_default()).value == doctest::Approx(3.0 * base).epsilon(1e-6));
        CHECK(quasi_norm(f.scaled(-3.0), p, s, quad_default()).value == doctest::Approx(3.0 * base).epsilon(1e-6));
    }
    const QuasiNormReport z = quasi_norm(IntegrandFn::zero(1, 1), {0.8, 1.0}, s, quad_default());
    CHECK(z.value == 0.0);
    CHECK(z.H_at_1 == 0.0);
}

TEST_CASE("membership") {
    const SpectralMeasure s = SpectralMeasure::two_point(0.5);
    for (double lam : {0.0, 0.5, 2.0}) {
        const MembershipReport m = membership(IntegrandFn::indicator(box1(-1, 3), 1), {1.3, lam}, s, quad_default());
        CHECK(m.in_space);
        CHECK_FALSE(m.diverged);
        CHECK(m.inclusion_ok);
    }
    // Hurst exponent 0.6 with alpha = 0.5: inside the stable range.
    const IntegrandFn ok = line_kernel_fn({1.0, 0.6 - 2.0});
    CHECK(membership(ok, {0.5, 1.0}, s, quad_default()).in_space);

    // Kernel exponent 1.1 - 1/1.5: square integrable tail but not alpha integrable.
    // The tempered integrand decays like |s|^-1.13, which needs a wide box.
    QuadratureConfig q = quad_default();
    q.rel_tol = 1e-6;
    q.box_radius = 1e5;
    const IntegrandFn wide = line_kernel_fn({1.0, 1.1 - 1.0 / 1.5});
    const MembershipReport tempered = membership(wide, {1.5, 1.0}, s, q);
    CHECK(tempered.in_space);
    CHECK(tempered.companion_diverged);
    const MembershipReport stable = membership(wide, {1.5, 0.0}, s, q);
    CHECK(stable.diverged);
    CHECK_FALSE(stable.in_space);
    CHECK(stable.companion_in_space);
    CHECK(stable.inclusion_ok);
}

TEST_CASE("pushforward Levy mass") {
    const double al = 0.7, lam = 1.3, c = 0.4;
    const SpectralMeasure s = SpectralMeasure::two_point(c);
    const IntegrandFn f = IntegrandFn::indicator(box1(0, 1), 1);
    const PushforwardReport r = pushforward_levy_mass(f, {al, lam}, s, box1(1.0, INFINITY), quad_default());
    const double ref = c * std::pow(lam, al) * oracle::upper_gamma_neg(al, lam);
    CHECK(r.value == doctest::Approx(ref).epsilon(1e-9));
    CHECK(r.residual <= 1e-6);

    // Kernel scaled by 1e-12 cannot reach [1e3, 1e4] with any appreciable mass.
    const PushforwardReport far =
        pushforward_levy_mass(f.scaled(1e-12), {al, lam}, s, box1(1e3, 1e4), quad_default());
    CHECK(far.value == doctest::Approx(0.0));

    const IntegrandFn g = line_kernel_fn({1.0, 0.6 - 1.0 / al});
    const PushforwardReport rg = pushforward_levy_mass(g, {al, lam}, s, box1(0.5, 2.0), quad_default());
    CHECK(rg.value > 0.0);
    CHECK(rg.residual <= 1e-6);

    CHECK_THROWS(pushforward_levy_mass(f, {al, lam}, s, box1(-1.0, 1.0), quad_default()));
}

TEST_CASE("matrix floor estimate") {
    Vec a(2), b(2);
    a << 1, 0;
    b << 0.6, 0.8;
    const SpectralMeasure s(2, {{a, 0.5}, {b, 0.5}});
    const EnvelopeEstimate e1 = estimate_matrix_floor({1.2, 1.0}, s, 2000, 1);
    const EnvelopeEstimate e2 = estimate_matrix_floor({1.2, 1.0}, s, 4000, 2);
    CHECK(std::isfinite(e1.value));
    CHECK(e1.value > 0.0);
    CHECK(std::abs(e2.value / e1.value - 1.0) < 0.1);
    // The bound must hold on fresh draws.
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 200; ++rep) {
        const Mat D = random_scaled_matrix(2, 1e-3, 1e3, rng);
        const double nd = op_norm(D);
        CHECK(std::min(std::pow(nd, 1.2), nd * nd) <= e2.value * h_fun({1.2, 1.0}, s, D) * (1 + 1e-9));
    }
}
