#pragma once

// Adaptive one-dimensional Gauss-Kronrod quadrature and series acceleration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <vector>

namespace tf::quad {

/// Nodes and weights of the 10-point Gauss / 21-point Kronrod pair on [-1, 1].
struct GK21 {
    static constexpr std::array<double, 11> xk = {
        0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
        0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
        0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
        0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
        0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
        0.000000000000000000000000000000000};
    static constexpr std::array<double, 11> wk = {
        0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
        0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
        0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
        0.123491976262065851077600525163271, 0.134709217311473325928054001771707,
        0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
        0.149445554002916905664936468389821};
    // Gauss weights for the odd-indexed Kronrod nodes (xk[1], xk[3], ...).
    static constexpr std::array<double, 5> wg = {
        0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
        0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
        0.295524224714752870173892994651338};
};

/// Scalar/vector traits so the same integrator serves double and std::array.
template <class T>
struct ValueOps;

template <>
struct ValueOps<double> {
    static double zero() { return 0.0; }
    static double norm(double v) { return std::abs(v); }
    static double total(double v) { return v; }
    static bool finite(double v) { return std::isfinite(v); }
};

template <std::size_t N>
struct ValueOps<std::array<double, N>> {
    using A = std::array<double, N>;
    static A zero() { return A{}; }
    static double norm(const A& v) {
        double s = 0.0;
        for (double x : v) s += std::abs(x);
        return s;
    }
    static double total(const A& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    static bool finite(const A& v) {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

template <std::size_t N>
std::array<double, N> operator+(std::array<double, N> a, const std::array<double, N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
    return a;
}
template <std::size_t N>
std::array<double, N> operator-(std::array<double, N> a, const std::array<double, N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
    return a;
}
template <std::size_t N>
std::array<double, N> operator*(double s, std::array<double, N> a) {
    for (double& x : a) x *= s;
    return a;
}

template <class T>
struct Result {
    T value{};
    double error = 0.0;
    long evals = 0;
    bool converged = false;
};

template <class T, class F>
void gk21_segment(const F& f, double a, double b, T& kron, double& err) {
    using Ops = ValueOps<T>;
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    std::array<T, 21> fv;
    fv[20] = f(c);
    for (int i = 0; i < 10; ++i) {
        const double dx = h * GK21::xk[i];
        fv[2 * i] = f(c - dx);
        fv[2 * i + 1] = f(c + dx);
    }
    T k = GK21::wk[10] * fv[20];
    T g = Ops::zero();
    double resabs = GK21::wk[10] * Ops::norm(fv[20]);
    for (int i = 0; i < 10; ++i) {
        T pair = fv[2 * i] + fv[2 * i + 1];
        k = k + GK21::wk[i] * pair;
        if (i % 2 == 1) g = g + GK21::wg[i / 2] * pair;
        resabs += GK21::wk[i] * (Ops::norm(fv[2 * i]) + Ops::norm(fv[2 * i + 1]));
    }
    T mean = 0.5 * k;
    double resasc = GK21::wk[10] * Ops::norm(fv[20] - mean);
    for (int i = 0; i < 10; ++i)
        resasc += GK21::wk[i] * (Ops::norm(fv[2 * i] - mean) + Ops::norm(fv[2 * i + 1] - mean));
    const double ah = std::abs(h);
    kron = h * k;
    resabs *= ah;
    resasc *= ah;
    // QUADPACK error heuristic.
    err = Ops::norm(h * (k - g));
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    if (resabs > 1e-290) err = std::max(50.0 * 2.220446049250313e-16 * resabs, err);
    if (!Ops::finite(kron)) err = INFINITY;
}

/// Globally adaptive Gauss-Kronrod (G10/K21) integration of f over [a, b].
/// Converges when the summed error estimate is below max(abs_tol, rel_tol*|I|).
template <class T, class F>
Result<T> integrate(const F& f, double a, double b, double abs_tol, double rel_tol,
                    int max_segments = 2000) {
    using Ops = ValueOps<T>;
    struct Seg {
        double a, b;
        T val;
        double err;
        bool operator<(const Seg& o) const { return err < o.err; }
    };
    Result<T> res;
    if (a == b) {
        res.value = Ops::zero();
        res.converged = true;
        return res;
    }
    std::priority_queue<Seg> heap;
    Seg s0{a, b, Ops::zero(), 0.0};
    gk21_segment<T>(f, a, b, s0.val, s0.err);
    res.evals = 21;
    heap.push(s0);
    T total = s0.val;
    double err_total = s0.err;
    int segments = 1;
    while (true) {
        double tol = std::max(abs_tol, rel_tol * Ops::norm(total));
        if (err_total <= tol) {
            res.converged = true;
            break;
        }
        if (segments >= max_segments) break;
        Seg top = heap.top();
        double mid = 0.5 * (top.a + top.b);
        if (!(mid > top.a && mid < top.b)) break;  // cannot split further
        heap.pop();
        Seg l{top.a, mid, Ops::zero(), 0.0};
        Seg r{mid, top.b, Ops::zero(), 0.0};
        gk21_segment<T>(f, l.a, l.b, l.val, l.err);
        gk21_segment<T>(f, r.a, r.b, r.val, r.err);
        res.evals += 42;
        total = total - top.val + l.val + r.val;
        err_total += l.err + r.err - top.err;
        heap.push(l);
        heap.push(r);
        ++segments;
        if (segments % 64 == 0) {
            // Re-sum to limit drift from the incremental updates.
            auto copy = heap;
            T t = Ops::zero();
            double e = 0.0;
            while (!copy.empty()) {
                t = t + copy.top().val;
                e += copy.top().err;
                copy.pop();
            }
            total = t;
            err_total = e;
        }
    }
    res.value = total;
    res.error = err_total;
    return res;
}

/// Wynn epsilon extrapolation of a sequence of partial sums. Returns the
/// best estimate and an error indicator from consecutive diagonal entries.
struct WynnEstimate {
    double value;
    double error;
};
WynnEstimate wynn_epsilon(const std::vector<double>& partial_sums);

}  // namespace tf::quad
