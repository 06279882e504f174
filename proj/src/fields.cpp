#include "temperfield/fields.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>

#include "temperfield/errors.hpp"

namespace tf {

namespace {

// exp(L M), with a scalar shortcut.
Mat exp_scaled(double L, const Mat& M) {
    if (M.rows() == 1) return Mat::Constant(1, 1, std::exp(L * M(0, 0)));
    return mat_exp(L * M);
}

Mat expm1_m(const Mat& A) {
    if (A.rows() == 1) return Mat::Constant(1, 1, std::expm1(A(0, 0)));
    return mat_expm1(A);
}

double min_pow(double x, double alpha) { return x <= 1.0 ? x * x : std::pow(x, alpha); }

bool is_ma_like(FieldKind k) { return k != FieldKind::harmonizable; }

// M = D - (q/alpha) I for the moving-average kinds; -(D + (q/alpha) I) for harmonizable.
Mat kernel_exponent(const FieldSpec& spec) {
    const Mat I = Mat::Identity(spec.d, spec.d);
    const double qa = spec.q() / spec.params.alpha;
    return is_ma_like(spec.kind) ? Mat(spec.D - qa * I) : Mat(-(spec.D + qa * I));
}

// phi(x)^M - phi(y)^M (optionally with e^{-lambda phi} damping), differencing
// through expm1 when phi(x) and phi(y) are close.
Mat power_difference(const FieldSpec& spec, const Mat& M, const Vec& x, const Vec& y, const Vec& xmy, double damp) {
    const double px = phi_eval(spec.phi, x), py = phi_eval(spec.phi, y);
    auto single = [&](double p) -> Mat {
        if (p == 0.0) return Mat::Zero(spec.d, spec.d);
        Mat P = exp_scaled(std::log(p), M);
        return damp > 0.0 ? Mat(std::exp(-damp * p) * P) : P;
    };
    if (px == 0.0 || py == 0.0) return single(px) - single(py);
    const double delta = phi_log_ratio(spec.phi, x, y, xmy);
    if (std::abs(delta) > 0.5) return single(px) - single(py);
    const Mat I = Mat::Identity(spec.d, spec.d);
    const Mat inner = damp > 0.0 ? Mat(delta * M - damp * py * std::expm1(delta) * I) : Mat(delta * M);
    return single(py) * expm1_m(inner);
}

struct Prepared {
    std::vector<Vec> pts;
    std::vector<Vec> coef;
    Vec base;
    double rho = 0.0;
    Mat Rho;
    double jac = 1.0;
    std::vector<Vec> sites;
    // pdiff[j][r] = pts[j] - pts[r]
    std::vector<std::vector<Vec>> pdiff;
    Mat Mt;
    StableParams psi_params;
    double damp = 0.0;
};

Prepared prepare(const FieldSpec& spec, const std::vector<WeightedPoint>& terms, std::optional<double> scale) {
    Prepared P;
    if (terms.empty()) throw std::invalid_argument("field_lcf: empty query");
    P.base = terms.back().point;
    for (const WeightedPoint& w : terms) {
        if (w.point.size() != spec.n || w.coef.size() != spec.d)
            throw std::invalid_argument("field_lcf: query dimensions do not match the spec");
        if (!w.point.allFinite() || !w.coef.allFinite()) throw std::invalid_argument("field_lcf: non-finite query");
        bool merged = false;
        for (std::size_t k = 0; k < P.pts.size() && !merged; ++k)
            if (P.pts[k] == w.point) {
                P.coef[k] += w.coef;
                merged = true;
            }
        if (!merged) {
            P.pts.push_back(w.point);
            P.coef.push_back(w.coef);
        }
    }
    Vec total = Vec::Zero(spec.d);
    for (const Vec& c : P.coef) total += c;
    if (total.norm() > 1e-12 * (1.0 + P.coef.front().norm()))
        throw std::invalid_argument("field_lcf: coefficients must sum to zero");
    for (std::size_t k = P.pts.size(); k-- > 0;)
        if (P.coef[k].isZero(0.0)) {
            P.pts.erase(P.pts.begin() + static_cast<long>(k));
            P.coef.erase(P.coef.begin() + static_cast<long>(k));
        }
    if (scale) {
        P.rho = *scale;
    } else {
        for (const WeightedPoint& w : terms) P.rho = std::max(P.rho, tau_or_zero(spec.E, w.point - P.base));
    }
    P.Mt = kernel_exponent(spec).transpose();
    P.psi_params = spec.params;
    if (spec.kind == FieldKind::kernel_tempered_ma) {
        P.psi_params.lambda = 0.0;
        P.damp = spec.params.lambda;
    }
    if (P.pts.empty() || !(P.rho > 0.0)) return P;
    const double q = spec.q();
    if (is_ma_like(spec.kind)) {
        P.Rho = real_power(spec.E, P.rho);
        P.jac = std::pow(P.rho, q);
        const Mat inv = real_power(spec.E, 1.0 / P.rho);
        for (const Vec& p : P.pts) P.sites.push_back(inv * p);
        P.pdiff.resize(P.pts.size());
        for (std::size_t j = 0; j < P.pts.size(); ++j)
            for (std::size_t r = 0; r < P.pts.size(); ++r) P.pdiff[j].push_back(P.pts[j] - P.pts[r]);
    } else {
        P.Rho = real_power(spec.E.entries.transpose(), 1.0 / P.rho);
        P.jac = std::pow(P.rho, -q);
        P.sites.push_back(Vec::Zero(spec.n));
    }
    return P;
}

double ma_integrand(const FieldSpec& spec, const Prepared& P, int site, const Vec& anchor, const Vec& off) {
    const std::size_t K = P.pts.size();
    std::vector<Vec> z(K);
    for (std::size_t j = 0; j < K; ++j) {
        z[j] = site >= 0 ? Vec(P.Rho * ((P.sites[j] - anchor) - off)) : Vec(P.pts[j] - P.Rho * (anchor + off));
        if (z[j].isZero(0.0)) return 0.0;
    }
    const std::size_t r = site >= 0 ? static_cast<std::size_t>(site) : 0;
    const double pr = phi_eval(spec.phi, z[r]);
    if (!(pr > 0.0)) return 0.0;
    std::vector<double> delta(K, 0.0);
    bool close = true;
    for (std::size_t j = 0; j < K && close; ++j) {
        if (j == r) continue;
        delta[j] = phi_log_ratio(spec.phi, z[j], z[r], P.pdiff[j][r]);
        close = std::abs(delta[j]) <= 0.5;
    }
    Vec v = Vec::Zero(spec.d);
    if (close) {
        const Mat I = Mat::Identity(spec.d, spec.d);
        for (std::size_t j = 0; j < K; ++j) {
            if (j == r) continue;
            const Mat inner = P.damp > 0.0 ? Mat(delta[j] * P.Mt - P.damp * pr * std::expm1(delta[j]) * I)
                                            : Mat(delta[j] * P.Mt);
            v += expm1_m(inner) * P.coef[j];
        }
        Mat Pr = exp_scaled(std::log(pr), P.Mt);
        if (P.damp > 0.0) Pr *= std::exp(-P.damp * pr);
        v = Pr * v;
    } else {
        for (std::size_t j = 0; j < K; ++j) {
            const double pj = phi_eval(spec.phi, z[j]);
            Mat Pj = exp_scaled(std::log(pj), P.Mt);
            if (P.damp > 0.0) Pj *= std::exp(-P.damp * pj);
            v += Pj * P.coef[j];
        }
    }
    return P.jac * lcf(P.psi_params, spec.sigma, v);
}

double harm_integrand(const FieldSpec& spec, const Prepared& P, const Vec& y) {
    const Vec s = P.Rho * y;
    const double ps = phi_eval(spec.phi, s);
    if (!(ps > 0.0)) return 0.0;
    const int d = spec.d;
    // C = sum_k coef_k e^{i <p_k, s>}, with the base factored out.
    const double tb = P.base.dot(s);
    const std::complex<double> eb(std::cos(tb), std::sin(tb));
    Vec re = Vec::Zero(d), im = Vec::Zero(d);
    for (std::size_t k = 0; k < P.pts.size(); ++k) {
        const double th = (P.pts[k] - P.base).dot(s);
        const double sh = std::sin(0.5 * th);
        const std::complex<double> c = eb * std::complex<double>(-2.0 * sh * sh, std::sin(th));
        re += c.real() * P.coef[k];
        im += c.imag() * P.coef[k];
    }
    const Mat Pt = exp_scaled(std::log(ps), P.Mt);
    Vec v(2 * d);
    v.head(d) = Pt * re;
    v.tail(d) = -(Pt * im);
    return P.jac * lcf(P.psi_params, spec.sigma, v);
}

}  // namespace

const char* to_string(FieldKind k) {
    switch (k) {
        case FieldKind::moving_average: return "moving_average";
        case FieldKind::harmonizable: return "harmonizable";
        case FieldKind::kernel_tempered_ma: return "kernel_tempered_ma";
    }
    return "";
}

double FieldSpec::hurst() const { return spectral_bounds(D).re_eig_max; }

FieldSpec FieldSpec::with_lambda(double lambda) const {
    FieldSpec s = *this;
    s.params.lambda = lambda;
    return s;
}

void FddQuery::validate(int n, int d) const {
    if (points.size() != directions.size()) throw std::invalid_argument("FddQuery: points and directions differ in length");
    if (points.empty()) throw std::invalid_argument("FddQuery: empty query");
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (points[j].size() != n || directions[j].size() != d)
            throw std::invalid_argument("FddQuery: dimension mismatch");
        if (!points[j].allFinite() || !directions[j].allFinite()) throw std::invalid_argument("FddQuery: non-finite entry");
    }
}

std::vector<WeightedPoint> query_terms(const FddQuery& query) {
    std::vector<WeightedPoint> terms;
    Vec total = Vec::Zero(query.directions.front().size());
    for (std::size_t j = 0; j < query.points.size(); ++j) {
        terms.push_back({query.points[j], query.directions[j]});
        total += query.directions[j];
    }
    terms.push_back({Vec::Zero(query.points.front().size()), -total});
    return terms;
}

void check_gates(const FieldSpec& spec, bool stable_limit) {
    spec.params.validate();
    const int sd = spec.kind == FieldKind::harmonizable ? 2 * spec.d : spec.d;
    if (spec.E.dim() != spec.n || spec.D.rows() != spec.d || spec.D.cols() != spec.d || spec.sigma.dim() != sd ||
        spec.phi.exponent.dim() != spec.n)
        throw std::invalid_argument("FieldSpec: inconsistent dimensions");
    if (!(spec.E.re_eig_min > 0.0)) throw GateViolation("E must have eigenvalues with positive real parts");
    const SpectralBounds db = spectral_bounds(spec.D);
    const double q = spec.q(), a = spec.params.alpha;
    const bool stable = stable_limit || spec.params.lambda == 0.0;
    auto num = [](double x) { return std::to_string(x); };
    switch (spec.kind) {
        case FieldKind::moving_average: {
            if (!(db.re_eig_min > 0.0)) throw GateViolation("moving average: D must have eigenvalues with positive real parts");
            if (!(spec.beta > 0.0)) throw GateViolation("moving average: beta must be positive");
            const double bound = stable ? spec.beta : spec.beta + q * (1.0 / a - 0.5);
            if (!(db.re_eig_max < bound))
                throw GateViolation("moving average: Hurst index " + num(db.re_eig_max) + " must be below " + num(bound) +
                                    (stable ? " (stable limit: beta)" : " (beta + q(1/alpha - 1/2))"));
            break;
        }
        case FieldKind::harmonizable: {
            const double lower = q * (0.5 - 1.0 / a);
            if (!(db.re_eig_min > lower))
                throw GateViolation("harmonizable: smallest real eigenvalue part of D must exceed q(1/2 - 1/alpha) = " + num(lower));
            if (!(db.re_eig_max < spec.E.re_eig_min))
                throw GateViolation("harmonizable: Hurst index " + num(db.re_eig_max) +
                                    " must be below the smallest real eigenvalue part of E, " + num(spec.E.re_eig_min));
            if (stable && !(db.re_eig_min > 0.0))
                throw GateViolation("harmonizable stable limit: D must have eigenvalues with positive real parts");
            break;
        }
        case FieldKind::kernel_tempered_ma: {
            if (!(db.re_eig_min > 0.0)) throw GateViolation("kernel tempered: D must have eigenvalues with positive real parts");
            if (stable) throw GateViolation("kernel tempered: the damping rate lambda must be positive");
            break;
        }
    }
}

std::vector<std::string> gate_warnings(const FieldSpec& spec) {
    std::vector<std::string> out;
    if (spec.kind != FieldKind::harmonizable) {
        Eigen::EigenSolver<Mat> es(spec.D);
        const double qa = spec.q() / spec.params.alpha;
        for (int i = 0; i < spec.d; ++i)
            if (std::abs(es.eigenvalues()[i] - std::complex<double>(qa, 0.0)) < 1e-10 * std::max(1.0, qa))
                out.push_back("q/alpha is an eigenvalue of D; X(t) may fail to be full");
    }
    if (spec.phi.kind == HomogeneousFn::Kind::radial_part) {
        const Mat want = spec.kind == FieldKind::harmonizable ? Mat(spec.E.entries.transpose()) : spec.E.entries;
        if ((spec.phi.exponent.entries - want).norm() > 1e-12 * (1.0 + want.norm()))
            out.push_back("phi exponent differs from the homogeneity exponent required by the kind");
    }
    return out;
}

Mat ma_kernel(const FieldSpec& spec, const Vec& t, const Vec& s) {
    if (s.isZero(0.0) || (s - t).isZero(0.0) || t.isZero(0.0)) return Mat::Zero(spec.d, spec.d);
    return power_difference(spec, kernel_exponent(spec), Vec(t - s), Vec(-s), t, 0.0);
}

Mat kt_kernel(const FieldSpec& spec, const Vec& t, const Vec& s) {
    if (s.isZero(0.0) || (s - t).isZero(0.0) || t.isZero(0.0)) return Mat::Zero(spec.d, spec.d);
    if (spec.params.lambda == 0.0) return ma_kernel(spec, t, s);
    return power_difference(spec, kernel_exponent(spec), Vec(t - s), Vec(-s), t, spec.params.lambda);
}

Mat harm_kernel_lift(const FieldSpec& spec, const Vec& t, const Vec& s) {
    const int d = spec.d;
    Mat G = Mat::Zero(2 * d, 2 * d);
    const double ps = phi_eval(spec.phi, s);
    if (!(ps > 0.0)) return G;
    const Mat P = exp_scaled(std::log(ps), kernel_exponent(spec));
    const double th = t.dot(s);
    const double sh = std::sin(0.5 * th);
    G.topLeftCorner(d, d) = (-2.0 * sh * sh) * P;
    G.topRightCorner(d, d) = -std::sin(th) * P;
    return G;
}

LcfResult field_lcf(const FieldSpec& spec, const FddQuery& query, const QuadratureConfig& quad, const LcfOptions& opt) {
    query.validate(spec.n, spec.d);
    return field_lcf(spec, query_terms(query), quad, opt);
}

LcfResult field_lcf(const FieldSpec& spec, const std::vector<WeightedPoint>& terms, const QuadratureConfig& quad,
                    const LcfOptions& opt) {
    if (!opt.skip_gates) check_gates(spec);
    quad.validate();
    const Prepared P = prepare(spec, terms, opt.scale);
    LcfResult res;
    if (P.pts.empty() || !(P.rho > 0.0)) return res;
    cub::RnConfig cfg;
    cfg.box_radius = quad.box_radius;
    cfg.rel_tol = quad.rel_tol;
    cfg.mc_samples = quad.mc_fallback_n;
    cfg.threads = quad.threads;
    cub::SiteFn g;
    if (is_ma_like(spec.kind))
        g = [&](int site, const Vec& a, const Vec& o) { return ma_integrand(spec, P, site, a, o); };
    else
        g = [&](int, const Vec& a, const Vec& o) { return harm_integrand(spec, P, a + o); };
    const cub::RnResult r = cub::integrate_rn(spec.n, P.sites, g, cfg);
    res.value = r.value;
    res.error = r.error;
    res.status = r.status;
    res.evals = r.evals;
    res.mc_se = r.mc_se;
    if (res.evals > quad.max_evals && res.status == cub::Status::converged) res.status = cub::Status::inconclusive;
    return res;
}

double default_box_radius(const FieldSpec& spec) {
    if (spec.kind == FieldKind::harmonizable) return spec.n == 1 ? 1e3 : 48.0;
    return spec.n == 1 ? 1e8 : 1e5;
}

IntegrandFn field_integrand(const FieldSpec& spec, const Vec& t) {
    check_gates(spec);
    IntegrandFn f;
    f.n = spec.n;
    if (spec.kind == FieldKind::harmonizable) {
        f.d = 2 * spec.d;
        f.eval = [spec, t](const Vec& s) { return harm_kernel_lift(spec, t, s); };
        f.singular_points = {Vec::Zero(spec.n)};
        return f;
    }
    f.d = spec.d;
    const Mat M = kernel_exponent(spec);
    const double damp = spec.kind == FieldKind::kernel_tempered_ma ? spec.params.lambda : 0.0;
    // Sites: 0 (index 0) and t (index 1); differences against the site stay exact.
    f.site_eval = [spec, t, M, damp](int site, const Vec& anchor, const Vec& off) -> Mat {
        Vec zt, z0;
        if (site == 0) {
            z0 = -off;
            zt = t - off;
        } else if (site == 1) {
            zt = -off;
            z0 = -t - off;
        } else {
            const Vec s = anchor + off;
            zt = t - s;
            z0 = -s;
        }
        if (zt.isZero(0.0) || z0.isZero(0.0)) return Mat::Zero(spec.d, spec.d);
        return power_difference(spec, M, zt, z0, t, damp);
    };
    f.singular_points = {Vec::Zero(spec.n), t};
    if (spec.n == 1 && spec.d == 1 && spec.phi.kind != HomogeneousFn::Kind::user_callback) {
        // phi(x) = c |x|^{1/e} for both built-in kinds; c from one evaluation.
        const double e = spec.E.entries(0, 0);
        const double c = phi_eval(spec.phi, Vec::Ones(1));
        const double m = M(0, 0), t0 = t[0];
        const double cm = std::pow(c, m), logc = std::log(c);
        auto single = [cm, logc, e, m, damp](double x) {
            if (x == 0.0) return 0.0;
            if (damp == 0.0) return cm * std::pow(std::abs(x), m / e);
            const double logp = logc + std::log(std::abs(x)) / e;
            return std::exp(m * logp - damp * std::exp(logp));
        };
        f.scalar_eval = [single, t0](double s) { return single(t0 - s) - single(-s); };
    }
    return f;
}

ResidualReport check_scaling(const FieldSpec& spec, double c, const FddQuery& query, const QuadratureConfig& quad) {
    if (!(c > 0.0)) throw std::invalid_argument("check_scaling: c must be positive");
    check_gates(spec);
    query.validate(spec.n, spec.d);
    const Mat cE = real_power(spec.E, c);
    const Mat cDt = real_power(spec.D, c).transpose();
    FddQuery left_q, right_q;
    for (std::size_t j = 0; j < query.points.size(); ++j) {
        left_q.points.push_back(cE * query.points[j]);
        left_q.directions.push_back(query.directions[j]);
        right_q.points.push_back(query.points[j]);
        right_q.directions.push_back(cDt * query.directions[j]);
    }
    const double expo = (spec.kind == FieldKind::harmonizable ? -1.0 : 1.0) * spec.q() / spec.params.alpha;
    const FieldSpec right_spec = spec.with_lambda(std::pow(c, expo) * spec.params.lambda);
    const LcfResult L = field_lcf(spec, left_q, quad);
    const LcfResult R = field_lcf(right_spec, right_q, quad);
    ResidualReport rep;
    rep.left = L.value;
    rep.right = R.value;
    rep.residual = std::abs(L.value - R.value);
    rep.tolerance = L.error + R.error + quad.rel_tol * (std::abs(L.value) + std::abs(R.value));
    rep.converged = L.status == cub::Status::converged && R.status == cub::Status::converged;
    return rep;
}

ResidualReport check_stationary_increments(const FieldSpec& spec, const Vec& h, const FddQuery& query,
                                           const QuadratureConfig& quad) {
    check_gates(spec);
    query.validate(spec.n, spec.d);
    if (h.size() != spec.n) throw std::invalid_argument("check_stationary_increments: h must lie in R^n");
    if (spec.kind == FieldKind::harmonizable && !is_orbit_uniform(spec.sigma))
        throw GateViolation(
            "harmonizable stationarity is only established for a spectral measure invariant under the rotations "
            "A(b); build sigma with make_orbit_uniform");
    std::vector<WeightedPoint> inc;
    Vec total = Vec::Zero(spec.d);
    for (std::size_t j = 0; j < query.points.size(); ++j) {
        inc.push_back({Vec(query.points[j] + h), query.directions[j]});
        total += query.directions[j];
    }
    inc.push_back({h, -total});
    const LcfResult A = field_lcf(spec, inc, quad);
    const LcfResult B = field_lcf(spec, query, quad);
    ResidualReport rep;
    rep.left = A.value;
    rep.right = B.value;
    rep.residual = std::abs(A.value - B.value);
    rep.tolerance = A.error + B.error + quad.rel_tol * (std::abs(A.value) + std::abs(B.value));
    rep.converged = A.status == cub::Status::converged && B.status == cub::Status::converged;
    return rep;
}

Mat orbit_rotation(int d, double b) {
    Mat A(2 * d, 2 * d);
    const Mat I = Mat::Identity(d, d);
    A << std::cos(b) * I, std::sin(b) * I, -std::sin(b) * I, std::cos(b) * I;
    return A;
}

SpectralMeasure make_orbit_uniform(int d, const std::vector<Atom>& generators, int m) {
    if (m < 4) throw std::invalid_argument("make_orbit_uniform: m must be at least 4");
    if (generators.empty()) throw std::invalid_argument("make_orbit_uniform: no generators");
    std::vector<Atom> atoms;
    for (const Atom& g : generators) {
        if (g.dir.size() != 2 * d) throw std::invalid_argument("make_orbit_uniform: generator must lie in R^{2d}");
        if (!(g.w > 0.0)) throw std::invalid_argument("make_orbit_uniform: weights must be positive");
        const Vec dir = g.dir.normalized();
        for (int i = 0; i < m; ++i)
            atoms.push_back({orbit_rotation(d, 2.0 * std::numbers::pi * i / m) * dir, g.w / m});
    }
    return SpectralMeasure(2 * d, atoms);
}

bool is_orbit_uniform(const SpectralMeasure& sigma, double tol) {
    if (sigma.dim() % 2 != 0) return false;
    const int d = sigma.dim() / 2;
    const Mat K = orbit_rotation(d, 0.5 * std::numbers::pi);
    const auto& atoms = sigma.atoms();
    for (const Atom& a : atoms) {
        const Vec ka = K * a.dir;
        std::vector<double> ang;
        for (const Atom& b : atoms) {
            if (std::abs(b.w - a.w) > tol * a.w) continue;
            const double x = b.dir.dot(a.dir), y = b.dir.dot(ka);
            if (std::abs(x * x + y * y - 1.0) > 1e3 * tol) continue;
            double t = std::atan2(y, x);
            if (t < 0) t += 2.0 * std::numbers::pi;
            ang.push_back(t);
        }
        const std::size_t m = ang.size();
        if (m < 4) return false;
        std::sort(ang.begin(), ang.end());
        const double step = 2.0 * std::numbers::pi / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            if (std::abs(ang[i] - step * static_cast<double>(i)) > 1e3 * tol) return false;
    }
    return true;
}

std::vector<LambdaLimitRow> check_lambda_limit(const FieldSpec& spec, const std::vector<double>& lambdas,
                                               const FddQuery& query, const QuadratureConfig& quad) {
    if (spec.kind == FieldKind::kernel_tempered_ma)
        throw GateViolation("the lambda limit applies to moving-average and harmonizable fields");
    const FieldSpec s0 = spec.with_lambda(0.0);
    check_gates(s0, true);
    const LcfResult L0 = field_lcf(s0, query, quad);
    std::vector<LambdaLimitRow> rows;
    for (double lam : lambdas) {
        if (!(lam >= 0.0)) throw std::invalid_argument("check_lambda_limit: lambdas must be nonnegative");
        LambdaLimitRow row;
        row.lambda = lam;
        const FieldSpec sl = spec.with_lambda(lam);
        row.lcf = lam == 0.0 ? L0.value : field_lcf(sl, query, quad, {std::nullopt, true}).value;
        row.gap = std::abs(row.lcf - L0.value);
        for (const Vec& u : query.directions) {
            Vec w = Vec::Zero(spec.sigma.dim());
            w.head(u.size()) = u;
            row.psi_gap = std::max(row.psi_gap, std::abs(lcf(sl.params, spec.sigma, w) - lcf(s0.params, spec.sigma, w)));
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<TangentRow> check_tangent(const FieldSpec& spec, const Vec& x, const std::vector<double>& cs,
                                      const FddQuery& query, const QuadratureConfig& quad) {
    if (spec.kind == FieldKind::kernel_tempered_ma)
        throw GateViolation("tangent limits apply to moving-average and harmonizable fields");
    check_gates(spec.with_lambda(0.0), true);
    check_gates(spec);
    query.validate(spec.n, spec.d);
    if (x.size() != spec.n) throw std::invalid_argument("check_tangent: x must lie in R^n");
    const LcfResult L0 = field_lcf(spec.with_lambda(0.0), query, quad, {std::nullopt, true});
    double rho_t = 0.0;
    for (const Vec& t : query.points) rho_t = std::max(rho_t, tau_or_zero(spec.E, t));
    std::vector<TangentRow> rows;
    for (double c : cs) {
        if (!(c > 0.0)) throw std::invalid_argument("check_tangent: c must be positive");
        const Mat cE = real_power(spec.E, c);
        const Mat cmDt = real_power(spec.D, 1.0 / c).transpose();
        std::vector<WeightedPoint> terms;
        Vec total = Vec::Zero(spec.d);
        for (std::size_t j = 0; j < query.points.size(); ++j) {
            const Vec w = cmDt * query.directions[j];
            terms.push_back({Vec(x + cE * query.points[j]), w});
            total += w;
        }
        terms.push_back({x, -total});
        TangentRow row;
        row.c = c;
        row.lcf = field_lcf(spec, terms, quad, {c * rho_t, true}).value;
        row.residual = std::abs(row.lcf - L0.value);
        rows.push_back(row);
    }
    return rows;
}

EnvelopeEstimate estimate_lcf_envelope(const StableParams& p, const SpectralMeasure& sigma, long n_samples,
                                       std::uint64_t seed) {
    p.validate();
    const int d = sigma.dim();
    auto ratio = [&](const Mat& D, const Vec& u) {
        const double den = (1.0 + u.squaredNorm()) * min_pow(op_norm(D), p.alpha);
        return den > 0.0 ? std::abs(lcf(p, sigma, D.transpose() * u)) / den : 0.0;
    };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> lu(std::log(1e-3), std::log(1e3));
    auto random_u = [&]() {
        Vec u(d);
        do {
            for (int i = 0; i < d; ++i) u[i] = nd(rng);
        } while (!(u.norm() > 0.0));
        return Vec(std::exp(lu(rng)) * u.normalized());
    };
    EnvelopeEstimate est;
    est.argmax_D = Mat::Zero(d, d);
    est.argmax_u = Vec::Zero(d);
    for (long i = 0; i < n_samples; ++i) {
        const Mat D = random_scaled_matrix(d, 1e-3, 1e3, rng);
        const Vec u = random_u();
        const double r = ratio(D, u);
        if (r > est.value) {
            est.value = r;
            est.argmax_D = D;
            est.argmax_u = u;
        }
    }
    est.samples = n_samples;
    std::mt19937_64 polish(seed ^ 0x9e3779b97f4a7c15ULL);
    double step = 0.25;
    for (int it = 0; it < 4000 && step > 1e-6; ++it) {
        Mat P(d, d);
        Vec w(d);
        for (int i = 0; i < d; ++i) {
            w[i] = nd(polish);
            for (int j = 0; j < d; ++j) P(i, j) = nd(polish);
        }
        const Mat D = est.argmax_D + step * op_norm(est.argmax_D) * P / std::max(op_norm(P), 1e-300);
        const Vec u = est.argmax_u + step * est.argmax_u.norm() * w / std::max(w.norm(), 1e-300);
        const double r = ratio(D, u);
        if (r > est.value) {
            est.value = r;
            est.argmax_D = D;
            est.argmax_u = u;
        } else if (it % 50 == 49) {
            step *= 0.5;
        }
    }
    return est;
}

}  // namespace tf
