#include "temperfield/integrability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "temperfield/quadrature.hpp"

namespace tf {

namespace {

using MatFn = std::function<double(const Mat&)>;

// int F(f(s)) ds over R^n; F(0) must vanish.
IntegralReport integrate_fn(const IntegrandFn& f, const MatFn& F, const QuadratureConfig& quad,
                            std::optional<double> tail_exponent) {
    quad.validate();
    IntegralReport rep;
    if (!f.pieces.empty() || f.is_simple()) {
        for (const SimplePiece& piece : f.pieces) {
            const double v = F(piece.value);
            if (v != 0.0) rep.value += piece.box.volume() * v;
        }
        return rep;
    }
    cub::RnConfig cfg;
    cfg.box_radius = quad.box_radius;
    cfg.rel_tol = quad.rel_tol;
    cfg.mc_samples = quad.mc_fallback_n;
    cfg.threads = quad.threads;
    cfg.tail_exponent = tail_exponent;
    if (!f.site_eval) {
        // eval sees anchor + offset, which cannot resolve offsets below a few
        // thousand ulp of the site; the cubature extrapolates what lies deeper.
        double m = 1.0;
        for (const Vec& s : f.singular_points) m = std::max(m, s.cwiseAbs().maxCoeff());
        cfg.near_depth = std::min(cfg.near_depth, std::log(cfg.core_radius / (4096.0 * 2.220446049250313e-16 * m)));
    }
    cub::SiteFn g = [&](int site, const Vec& anchor, const Vec& off) {
        return F(f.site_eval ? f.site_eval(site, anchor, off) : f.eval(anchor + off));
    };
    cub::RnResult r = f.support_hint ? cub::integrate_box(f.support_hint->lo, f.support_hint->hi, f.singular_points, g, cfg)
                                     : cub::integrate_rn(f.n, f.singular_points, g, cfg);
    rep.value = r.value;
    rep.error = r.error;
    rep.status = r.status;
    rep.evals = r.evals;
    rep.mc_se = r.mc_se;
    if (rep.evals > quad.max_evals && rep.status == cub::Status::converged) rep.status = cub::Status::inconclusive;
    return rep;
}

std::optional<double> tail_for(const IntegrandFn& f, double power) {
    if (!f.decay_hint || f.support_hint) return std::nullopt;
    return power * *f.decay_hint;
}

double min_pow(double x, double alpha) {
    // x^alpha ^ x^2
    return x <= 1.0 ? x * x : std::pow(x, alpha);
}

// Interval {r > 0 : r v in A} as [r1, r2]; empty when r1 >= r2.
std::pair<double, double> ray_box(const Vec& v, const Box& A) {
    double r1 = 0.0, r2 = INFINITY;
    for (int i = 0; i < v.size(); ++i) {
        if (v[i] == 0.0) {
            if (!(A.lo[i] <= 0.0 && 0.0 <= A.hi[i])) return {1.0, 0.0};
            continue;
        }
        double a = A.lo[i] / v[i], b = A.hi[i] / v[i];
        if (a > b) std::swap(a, b);
        r1 = std::max(r1, a);
        r2 = std::min(r2, b);
    }
    return {r1, r2};
}

// int_{r1}^{r2} r^{-alpha-1} e^{-lambda r} dr by quadrature in log r.
double radial_mass_numeric(double alpha, double lambda, double r1, double r2) {
    double top = r2;
    double tail = 0.0;
    if (lambda > 0.0) {
        top = std::min(r2, std::max(r1, 760.0 / lambda) * 2.0);
    } else if (!std::isfinite(r2)) {
        top = r1 * std::exp(60.0 / alpha);
        tail = std::pow(top, -alpha) / alpha;
    }
    if (!(top > r1)) return 0.0;
    auto g = [&](double u) {
        const double r = r1 * std::exp(u);
        return std::pow(r, -alpha) * std::exp(-lambda * r);
    };
    return quad::integrate<double>(g, 0.0, std::log(top / r1), 0.0, 1e-13, 4000).value + tail;
}

}  // namespace

double Box::volume() const {
    double v = 1.0;
    for (int i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
}

bool Box::contains(const Vec& x) const {
    for (int i = 0; i < lo.size(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
}

Mat IntegrandFn::at(const Vec& s) const {
    if (scalar_eval) return Mat::Constant(1, 1, scalar_eval(s[0]));
    if (site_eval) return site_eval(-1, s, Vec::Zero(s.size()));
    if (eval) return eval(s);
    for (const SimplePiece& piece : pieces)
        if (piece.box.contains(s)) return piece.value;
    return Mat::Zero(d, d);
}

IntegrandFn IntegrandFn::simple(int n, int d, std::vector<SimplePiece> pieces) {
    for (const SimplePiece& p : pieces) {
        if (p.box.dim() != n || p.box.hi.size() != n) throw std::invalid_argument("simple function: box dimension mismatch");
        if (p.value.rows() != d || p.value.cols() != d) throw std::invalid_argument("simple function: value must be d x d");
        for (int i = 0; i < n; ++i)
            if (!(p.box.hi[i] > p.box.lo[i]) || !std::isfinite(p.box.hi[i] - p.box.lo[i]))
                throw std::invalid_argument("simple function: boxes must be bounded and non-empty");
    }
    for (std::size_t a = 0; a < pieces.size(); ++a)
        for (std::size_t b = a + 1; b < pieces.size(); ++b) {
            bool overlap = true;
            for (int i = 0; i < n; ++i)
                overlap = overlap && pieces[a].box.lo[i] < pieces[b].box.hi[i] && pieces[b].box.lo[i] < pieces[a].box.hi[i];
            if (overlap) throw std::invalid_argument("simple function: boxes overlap");
        }
    IntegrandFn f;
    f.n = n;
    f.d = d;
    f.pieces = std::move(pieces);
    return f;
}

IntegrandFn IntegrandFn::indicator(const Box& box, int d) {
    return simple(box.dim(), d, {{box, Mat::Identity(d, d)}});
}

IntegrandFn IntegrandFn::zero(int n, int d) {
    IntegrandFn f;
    f.n = n;
    f.d = d;
    return f;
}

IntegrandFn IntegrandFn::scaled(double rho) const {
    IntegrandFn g = *this;
    for (SimplePiece& p : g.pieces) p.value = rho * p.value;
    if (eval) {
        auto e = eval;
        g.eval = [e, rho](const Vec& s) -> Mat { return rho * e(s); };
    }
    if (site_eval) {
        auto e = site_eval;
        g.site_eval = [e, rho](int k, const Vec& a, const Vec& o) -> Mat { return rho * e(k, a, o); };
    }
    if (scalar_eval) {
        auto e = scalar_eval;
        g.scalar_eval = [e, rho](double s) { return rho * e(s); };
    }
    return g;
}

void QuadratureConfig::validate() const {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) throw std::invalid_argument("QuadratureConfig: rel_tol must lie in (0, 1e-2]");
    if (!(box_radius > 0.0)) throw std::invalid_argument("QuadratureConfig: box_radius must be positive");
    if (max_evals < 1 || mc_fallback_n < 1) throw std::invalid_argument("QuadratureConfig: counts must be positive");
}

double h_fun(const StableParams& p, const SpectralMeasure& sigma, const Mat& D) {
    p.validate();
    if (!(p.lambda > 0.0)) throw std::invalid_argument("h_fun: lambda must be positive (use stable_integrand)");
    return h_fun(p.alpha, rosinski_of(p, sigma), D);
}

double h_fun(double alpha, const RosinskiMeasure& R, const Mat& D) {
    double s = 0.0;
    for (const Atom& a : R.base.half_atoms()) s += a.w * min_pow((D * a.dir).norm() * R.radius, alpha);
    return R.scale * s;
}

double stable_integrand(const SpectralMeasure& sigma, double alpha, const Mat& D) {
    double s = 0.0;
    for (const Atom& a : sigma.half_atoms()) s += a.w * std::pow((D * a.dir).norm(), alpha);
    return s;
}

IntegralReport big_H(const IntegrandFn& f, double delta, const StableParams& p, const SpectralMeasure& sigma,
                     const QuadratureConfig& quad) {
    p.validate();
    if (!(delta > 0.0)) throw std::invalid_argument("big_H: delta must be positive");
    if (p.lambda > 0.0) return big_H(f, delta, p.alpha, rosinski_of(p, sigma), quad);
    const double inv = 1.0 / delta;
    MatFn F = [&](const Mat& M) { return stable_integrand(sigma, p.alpha, inv * M); };
    return integrate_fn(f, F, quad, tail_for(f, p.alpha));
}

IntegralReport big_H(const IntegrandFn& f, double delta, double alpha, const RosinskiMeasure& R,
                     const QuadratureConfig& quad) {
    if (!(delta > 0.0)) throw std::invalid_argument("big_H: delta must be positive");
    const double inv = 1.0 / delta;
    MatFn F = [&](const Mat& M) { return h_fun(alpha, R, inv * M); };
    return integrate_fn(f, F, quad, tail_for(f, 2.0));
}

IntegralReport j2(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                  const QuadratureConfig& quad) {
    p.validate();
    if (!(p.lambda > 0.0)) throw std::invalid_argument("j2: lambda must be positive");
    const double la = std::pow(p.lambda, p.alpha);
    const double g_inf = std::tgamma(2.0 - p.alpha);
    MatFn F = [&](const Mat& M) {
        double s = 0.0;
        for (const Atom& a : sigma.half_atoms()) {
            const double x = (M * a.dir).norm();
            if (x == 0.0) continue;
            const double z = p.lambda / x;
            // Beyond z = 1e12 the upper-gamma part is exp-small and g = Gamma(2-alpha) z^-2.
            s += a.w * (z > 1e12 ? g_inf * (x / p.lambda) * (x / p.lambda) : g_fun(p.alpha, z));
        }
        return la * s;
    };
    return integrate_fn(f, F, quad, tail_for(f, 2.0));
}

QuasiNormReport quasi_norm(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                           const QuadratureConfig& quad) {
    QuasiNormReport rep;
    IntegralReport h1 = big_H(f, 1.0, p, sigma, quad);
    rep.H_at_1 = h1.value;
    rep.converged = h1.converged();
    if (h1.diverged() || !std::isfinite(h1.value)) {
        rep.diverged = true;
        rep.converged = false;
        rep.value = INFINITY;
        return rep;
    }
    if (h1.value == 0.0) return rep;
    // H(delta) lies between delta^-alpha H(1) and delta^-2 H(1), which brackets the root.
    const double a = std::pow(h1.value, 0.5), b = std::pow(h1.value, 1.0 / p.alpha);
    double lo = std::log(std::min(a, b)) - 1e-3, hi = std::log(std::max(a, b)) + 1e-3;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        IntegralReport r = big_H(f, std::exp(mid), p, sigma, quad);
        rep.converged = rep.converged && r.converged();
        ++rep.iterations;
        if (r.value > 1.0) lo = mid;
        else hi = mid;
    }
    rep.value = std::exp(0.5 * (lo + hi));
    return rep;
}

MembershipReport membership(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                            const QuadratureConfig& quad) {
    MembershipReport rep;
    auto classify = [](const IntegralReport& r, bool& in, bool& div, bool& inc) {
        div = r.diverged() || !std::isfinite(r.value);
        in = !div && r.converged();
        inc = !div && !in;
    };
    IntegralReport main = big_H(f, 1.0, p, sigma, quad);
    rep.H_at_1 = main.value;
    classify(main, rep.in_space, rep.diverged, rep.inconclusive);
    StableParams q = p;
    q.lambda = p.lambda > 0.0 ? 0.0 : 1.0;
    bool comp_inc = false;
    classify(big_H(f, 1.0, q, sigma, quad), rep.companion_in_space, rep.companion_diverged, comp_inc);
    const bool stable_in = p.lambda > 0.0 ? rep.companion_in_space : rep.in_space;
    const bool tempered_div = p.lambda > 0.0 ? rep.diverged : rep.companion_diverged;
    rep.inclusion_ok = !(stable_in && tempered_div);
    rep.diagnostics = std::string(rep.in_space ? "integrable" : rep.diverged ? "divergent" : "inconclusive") +
                      " at lambda=" + std::to_string(p.lambda) + "; " +
                      (rep.companion_in_space ? "integrable" : rep.companion_diverged ? "divergent" : "inconclusive") +
                      " at lambda=" + std::to_string(q.lambda);
    if (!rep.inclusion_ok) rep.diagnostics += "; accepted for the stable case but rejected when tempered";
    return rep;
}

PushforwardReport pushforward_levy_mass(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                                        const Box& A, const QuadratureConfig& quad) {
    p.validate();
    if (A.dim() != f.d || A.hi.size() != f.d) throw std::invalid_argument("pushforward_levy_mass: A must live in R^d");
    // Distance from the origin to A.
    double dist2 = 0.0;
    for (int i = 0; i < A.dim(); ++i) {
        if (!(A.hi[i] >= A.lo[i])) throw std::invalid_argument("pushforward_levy_mass: empty box");
        const double c = std::clamp(0.0, A.lo[i], A.hi[i]);
        dist2 += c * c;
    }
    if (!(dist2 > 0.0)) throw std::invalid_argument("pushforward_levy_mass: A touches the origin");

    MatFn direct = [&](const Mat& M) {
        double s = 0.0;
        for (const Atom& a : sigma.atoms()) {
            auto [r1, r2] = ray_box(M * a.dir, A);
            if (r1 < r2) s += a.w * radial_mass_numeric(p.alpha, p.lambda, r1, r2);
        }
        return s;
    };
    MatFn dual;
    std::optional<RosinskiMeasure> R;
    if (p.lambda > 0.0) R = rosinski_from_relation(p, sigma);
    dual = [&](const Mat& M) {
        double s = 0.0;
        if (!R) {
            for (const Atom& a : sigma.atoms()) {
                auto [r1, r2] = ray_box(M * a.dir, A);
                if (r1 < r2) s += a.w * (std::pow(r1, -p.alpha) - (std::isfinite(r2) ? std::pow(r2, -p.alpha) : 0.0)) / p.alpha;
            }
            return s;
        }
        // int 1_A(r y) r^{-alpha-1} e^{-r} dr over the pushed Rosinski atoms y.
        for (const Atom& a : R->base.atoms()) {
            auto [r1, r2] = ray_box(M * (R->radius * a.dir), A);
            if (!(r1 < r2)) continue;
            const double upper = std::isfinite(r2) && r2 < 760.0 ? upper_gamma_neg(p.alpha, r2) : 0.0;
            s += a.w * (upper_gamma_neg(p.alpha, r1) - upper);
        }
        return R->scale * s;
    };
    PushforwardReport rep;
    IntegralReport i1 = integrate_fn(f, direct, quad, std::nullopt);
    IntegralReport i2 = integrate_fn(f, dual, quad, std::nullopt);
    rep.value = i1.value;
    rep.dual = i2.value;
    rep.residual = std::abs(i1.value - i2.value);
    rep.status = i1.converged() && i2.converged() ? cub::Status::converged
                 : (i1.diverged() || i2.diverged()) ? cub::Status::diverged
                                                    : cub::Status::inconclusive;
    return rep;
}

double op_norm(const Mat& A) {
    if (A.size() == 1) return std::abs(A(0, 0));
    Eigen::JacobiSVD<Mat> svd(A);
    return svd.singularValues()(0);
}

Mat random_scaled_matrix(int d, double lo, double hi, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(std::log(lo), std::log(hi));
    Mat M(d, d);
    double nrm = 0.0;
    do {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) M(i, j) = nd(rng);
        nrm = op_norm(M);
    } while (!(nrm > 0.0));
    return (std::exp(ud(rng)) / nrm) * M;
}

EnvelopeEstimate estimate_matrix_floor(const StableParams& p, const SpectralMeasure& sigma, long n_samples,
                                       std::uint64_t seed) {
    p.validate();
    if (!(p.lambda > 0.0)) throw std::invalid_argument("estimate_matrix_floor: lambda must be positive");
    const int d = sigma.dim();
    const RosinskiMeasure R = rosinski_of(p, sigma);
    auto ratio = [&](const Mat& D) {
        const double h = h_fun(p.alpha, R, D);
        return h > 0.0 ? min_pow(op_norm(D), p.alpha) / h : 0.0;
    };
    std::mt19937_64 rng(seed);
    EnvelopeEstimate est;
    est.argmax_D = Mat::Zero(d, d);
    for (long i = 0; i < n_samples; ++i) {
        Mat D = random_scaled_matrix(d, 1e-3, 1e3, rng);
        const double r = ratio(D);
        if (r > est.value) {
            est.value = r;
            est.argmax_D = D;
        }
    }
    est.samples = n_samples;
    // Local random search around the best draw with a shrinking step.
    std::mt19937_64 polish(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> nd;
    double step = 0.25;
    for (int it = 0; it < 2000 && step > 1e-6; ++it) {
        Mat P(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) P(i, j) = nd(polish);
        Mat D = est.argmax_D + step * op_norm(est.argmax_D) * P / std::max(op_norm(P), 1e-300);
        const double r = ratio(D);
        if (r > est.value) {
            est.value = r;
            est.argmax_D = D;
        } else if (it % 50 == 49) {
            step *= 0.5;
        }
    }
    return est;
}

}  // namespace tf
