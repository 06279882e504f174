#include "temperfield/tstable.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "temperfield/errors.hpp"
#include "temperfield/quadrature.hpp"

namespace tf {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
constexpr double kTiny = 1e-300;

// Modified Lentz evaluation of the continued fraction for Gamma(s, z); valid
// for any real s once z is past the series region.
double upper_gamma_cf(double s, double z) {
    double b = z + 1.0 - s;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(s * std::log(z) - z) * h;
}

// z^{-a} e^{-z} without intermediate overflow.
double pow_exp(double z, double a) { return std::exp(-a * std::log(z) - z); }

}  // namespace

void StableParams::validate() const {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (0, 2)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
}

SpectralMeasure::SpectralMeasure(int dim, const std::vector<Atom>& atoms) : dim_(dim) {
    if (dim <= 0) throw std::invalid_argument("SpectralMeasure: dim must be positive");
    if (atoms.empty()) throw std::invalid_argument("SpectralMeasure: no atoms");
    for (const Atom& a : atoms) {
        if (a.dir.size() != dim) throw std::invalid_argument("SpectralMeasure: atom dimension mismatch");
        if (!(a.w > 0.0) || !std::isfinite(a.w)) throw std::invalid_argument("SpectralMeasure: weights must be positive");
        const double nrm = a.dir.norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw std::invalid_argument("SpectralMeasure: zero or non-finite direction");
        atoms_.push_back({a.dir / nrm, a.w});
    }
    // Symmetric closure: pair each atom with an unused reflected atom of equal
    // weight, otherwise add the reflection.
    const std::size_t m = atoms_.size();
    std::vector<int> partner(m, -1);
    for (std::size_t i = 0; i < m; ++i) {
        if (partner[i] >= 0) continue;
        for (std::size_t j = i + 1; j < m; ++j) {
            if (partner[j] >= 0) continue;
            if ((atoms_[i].dir + atoms_[j].dir).norm() < 1e-12 &&
                std::abs(atoms_[i].w - atoms_[j].w) <= 1e-12 * atoms_[i].w) {
                partner[i] = static_cast<int>(j);
                partner[j] = static_cast<int>(i);
                break;
            }
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (partner[i] >= 0) {
            if (static_cast<std::size_t>(partner[i]) > i) half_.push_back({atoms_[i].dir, 2.0 * atoms_[i].w});
            continue;
        }
        atoms_.push_back({-atoms_[i].dir, atoms_[i].w});
        half_.push_back({atoms_[i].dir, 2.0 * atoms_[i].w});
        symmetrized_ = true;
    }
    Mat dirs(dim, static_cast<int>(atoms_.size()));
    for (std::size_t i = 0; i < atoms_.size(); ++i) dirs.col(static_cast<int>(i)) = atoms_[i].dir;
    Eigen::FullPivLU<Mat> lu(dirs);
    lu.setThreshold(1e-10);
    if (lu.rank() < dim) throw std::invalid_argument("SpectralMeasure: atom directions do not span R^d");
}

double SpectralMeasure::total_mass() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.w;
    return s;
}

SpectralMeasure SpectralMeasure::two_point(double c) {
    return SpectralMeasure(1, {{Vec::Constant(1, 1.0), c}, {Vec::Constant(1, -1.0), c}});
}

double stable_constant(double alpha) {
    if (alpha == 1.0) return std::numbers::pi / 2.0;
    return std::tgamma(2.0 - alpha) * std::cos(std::numbers::pi * alpha / 2.0) / (alpha * (1.0 - alpha));
}

double radial_lcf(const StableParams& p, double a) {
    p.validate();
    if (a == 0.0) return 0.0;
    if (p.alpha == 1.0) return radial_lcf_quadrature(p, a);
    const double al = p.alpha;
    const double A = std::abs(a);
    if (p.lambda == 0.0) return -stable_constant(al) * std::pow(A, al);
    const double lam = p.lambda;
    const double x = A / lam;
    const double G = std::tgamma(-al);
    if (x <= 1.0) {
        // Re (1 + i x)^alpha - 1 written without cancellation.
        const double ra = 0.5 * al * std::log1p(x * x);
        const double th = al * std::atan(x);
        const double s = std::sin(0.5 * th);
        return G * std::pow(lam, al) * (std::expm1(ra) * std::cos(th) - 2.0 * s * s);
    }
    return G * (std::pow(std::hypot(lam, A), al) * std::cos(al * std::atan2(A, lam)) - std::pow(lam, al));
}

double radial_lcf_quadrature(const StableParams& p, double a) {
    p.validate();
    if (a == 0.0) return 0.0;
    const double al = p.alpha;
    const double A = std::abs(a);
    const double eps = p.lambda / A;
    const double two_pi = 2.0 * std::numbers::pi;
    // Must stay above the Gauss-Kronrod error floor of 50 ulp.
    const double rel = 1e-13;

    // Head on (0, 1]: x = e^{-v}, integrand -2 (sin(x/2)/x)^2 x^{2-alpha} e^{-eps x}.
    const double vmax = 60.0 / (2.0 - al);
    auto head_v = [&](double v) {
        const double x = std::exp(-v);
        const double s = std::sin(0.5 * x) / x;
        return -2.0 * s * s * std::exp(-(2.0 - al) * v - eps * x);
    };
    double head = quad::integrate<double>(head_v, 0.0, vmax, 0.0, rel, 4000).value;
    head += -0.5 * std::exp(-(2.0 - al) * vmax) / (2.0 - al);
    auto body = [&](double x) {
        const double s = std::sin(0.5 * x);
        return -2.0 * s * s * std::exp(-(al + 1.0) * std::log(x) - eps * x);
    };
    head += quad::integrate<double>(body, 1.0, two_pi, 0.0, rel, 4000).value;

    // Cosine part on [2 pi, infty) between consecutive zeros of cos.
    auto w_cos = [&](double x) { return std::cos(x) * std::exp(-(al + 1.0) * std::log(x) - eps * x); };
    std::vector<double> partial;
    double sum = quad::integrate<double>(w_cos, two_pi, 2.5 * std::numbers::pi, 0.0, rel, 4000).value;
    partial.push_back(sum);
    for (int k = 2; k < 80; ++k) {
        const double lo = (k + 0.5) * std::numbers::pi;
        const double term = quad::integrate<double>(w_cos, lo, lo + std::numbers::pi, 0.0, rel, 4000).value;
        sum += term;
        partial.push_back(sum);
        if (std::abs(term) < 1e-18 * (std::abs(sum) + std::abs(head))) break;
    }
    const double cos_tail = partial.size() > 4 ? quad::wynn_epsilon(partial).value : sum;

    // Constant part int_{2 pi}^infty x^{-alpha-1} e^{-eps x} dx.
    double const_tail;
    if (eps == 0.0) {
        const_tail = std::pow(two_pi, -al) / al;
    } else {
        const_tail = std::pow(eps, al) * upper_gamma_neg(al, two_pi * eps);
    }
    return std::pow(A, al) * (head + cos_tail - const_tail);
}

double lcf(const StableParams& p, const SpectralMeasure& sigma, const Vec& u) {
    if (u.size() != sigma.dim()) throw std::invalid_argument("lcf: dimension mismatch");
    double s = 0.0;
    for (const Atom& at : sigma.half_atoms()) s += at.w * radial_lcf(p, u.dot(at.dir));
    return s;
}

double lower_gamma(double s, double z) {
    if (!(s > 0.0)) throw std::invalid_argument("lower_gamma: s must be positive");
    if (!(z >= 0.0)) throw std::invalid_argument("lower_gamma: z must be nonnegative");
    if (z == 0.0) return 0.0;
    if (std::isinf(z)) return std::tgamma(s);
    if (z < s + 1.0) {
        double term = 1.0 / s;
        double sum = term;
        for (int n = 1; n < 10000; ++n) {
            term *= z / (s + n);
            sum += term;
            if (term < sum * 1e-17) break;
        }
        return std::exp(s * std::log(z) - z) * sum;
    }
    return std::tgamma(s) - upper_gamma_cf(s, z);
}

double upper_gamma(double s, double z) {
    if (!(s > 0.0)) throw std::invalid_argument("upper_gamma: s must be positive");
    if (!(z >= 0.0)) throw std::invalid_argument("upper_gamma: z must be nonnegative");
    if (z == 0.0) return std::tgamma(s);
    if (std::isinf(z)) return 0.0;
    if (z >= s + 1.0) return upper_gamma_cf(s, z);
    // Gamma(s, z) = [Gamma(1+s) - z^s]/s - sum_{k>=1} (-1)^k z^{s+k} / (k! (s+k)),
    // with the bracket formed from expm1 terms so small s does not cancel.
    const double lz = std::log(z);
    double head = (std::expm1(std::lgamma(1.0 + s)) - std::expm1(s * lz)) / s;
    double zs = std::exp(s * lz);
    double fact = 1.0;
    double zk = 1.0;
    double series = 0.0;
    for (int k = 1; k < 200; ++k) {
        fact *= k;
        zk *= -z;
        const double term = zk / (fact * (s + k));
        series += term;
        if (std::abs(term) < 1e-18 * std::abs(series)) break;
    }
    return head - zs * series;
}

double exp_integral_e1(double z) {
    if (!(z > 0.0)) throw std::invalid_argument("E1: z must be positive");
    if (z > 1.0) return upper_gamma_cf(0.0, z);
    double sum = 0.0;
    double term = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= -z / k;
        const double t = -term / k;
        sum += t;
        if (std::abs(t) < 1e-18 * std::abs(sum)) break;
    }
    return -kEulerGamma - std::log(z) + sum;
}

double upper_gamma_neg(double alpha, double z) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("upper_gamma_neg: alpha must lie in (0, 2)");
    if (!(z > 0.0)) throw std::invalid_argument("upper_gamma_neg: z must be positive");
    if (std::isinf(z)) return 0.0;
    if (alpha == 1.0) return pow_exp(z, 1.0) - exp_integral_e1(z);
    if (alpha < 1.0) return (pow_exp(z, alpha) - upper_gamma(1.0 - alpha, z)) / alpha;
    const double g1 = (upper_gamma(2.0 - alpha, z) - pow_exp(z, alpha - 1.0)) / (1.0 - alpha);
    return (pow_exp(z, alpha) - g1) / alpha;
}

double g_fun(double alpha, double z) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("g_fun: alpha must lie in (0, 2)");
    if (!(z > 0.0)) throw std::invalid_argument("g_fun: z must be positive");
    if (z < 1e-12 && alpha != 1.0) {
        // Small-z expansion; the next neglected term is O(z^{2-alpha}).
        return std::pow(z, -alpha) * (1.0 / (2.0 - alpha) + 1.0 / alpha) + std::tgamma(-alpha) +
               std::pow(z, 1.0 - alpha) * (1.0 / (1.0 - alpha) - 1.0 / (3.0 - alpha));
    }
    return lower_gamma(2.0 - alpha, z) / (z * z) + upper_gamma_neg(alpha, z);
}

RosinskiMeasure rosinski_of(const StableParams& p, const SpectralMeasure& sigma) {
    p.validate();
    if (!(p.lambda > 0.0)) throw std::invalid_argument("rosinski_of: lambda must be positive");
    return {sigma, p.lambda, 1.0};
}

RosinskiMeasure rosinski_from_relation(const StableParams& p, const SpectralMeasure& sigma) {
    p.validate();
    if (!(p.lambda > 0.0)) throw std::invalid_argument("rosinski_from_relation: lambda must be positive");
    return {sigma, 1.0 / p.lambda, std::pow(p.lambda, p.alpha)};
}

namespace {

double envelope_ratio(double alpha, double logz) {
    const double z = std::exp(logz);
    const double g = g_fun(alpha, z);
    return z <= 1.0 ? std::exp(alpha * logz) * g : z * z * g;
}

// Golden-section search for an extremum of the ratio on [a, b] in log z.
double golden(double alpha, double a, double b, bool maximize) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    auto f = [&](double x) { return maximize ? -envelope_ratio(alpha, x) : envelope_ratio(alpha, x); };
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 100 && b - a > 1e-12; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return envelope_ratio(alpha, 0.5 * (a + b));
}

}  // namespace

EnvelopeConstants envelope_constants(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("envelope_constants: alpha must lie in (0, 2)");
    static std::mutex mu;
    static std::map<double, EnvelopeConstants> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(alpha);
        if (it != cache.end()) return it->second;
    }
    const int N = 4001;
    const double lo = std::log(1e-8), hi = std::log(1e8);
    const double h = (hi - lo) / (N - 1);
    std::vector<double> r(N);
    int imin = 0, imax = 0;
    for (int i = 0; i < N; ++i) {
        r[i] = envelope_ratio(alpha, lo + i * h);
        if (r[i] < r[imin]) imin = i;
        if (r[i] > r[imax]) imax = i;
    }
    double c1 = r[imin], c2 = r[imax];
    if (imin > 0 && imin < N - 1) c1 = std::min(c1, golden(alpha, lo + (imin - 1) * h, lo + (imin + 1) * h, false));
    if (imax > 0 && imax < N - 1) c2 = std::max(c2, golden(alpha, lo + (imax - 1) * h, lo + (imax + 1) * h, true));
    // The extremes can sit at the ends of (0, infty), where the ratio tends to
    // the two limits; include them so the bounds hold for every z.
    const double small_lim = 1.0 / (2.0 - alpha) + 1.0 / alpha;
    const double large_lim = std::tgamma(2.0 - alpha);
    c1 = std::min({c1, small_lim, large_lim});
    c2 = std::max({c2, small_lim, large_lim});
    EnvelopeConstants ec{c1, c2, std::pow(4.0 * c2 / c1, 1.0 / alpha)};
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(alpha, ec);
    return ec;
}

}  // namespace tf
