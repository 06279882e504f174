#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "temperfield/cubature.hpp"
#include "temperfield/tstable.hpp"

namespace tf {

/// Axis-aligned box; bounds may be infinite where noted.
struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const;
    bool contains(const Vec& x) const;
};

struct SimplePiece {
    Box box;
    Mat value;
};

/// Matrix-valued integrand f : R^n -> L(R^d).
struct IntegrandFn {
    int n = 1;
    int d = 1;
    std::function<Mat(const Vec&)> eval;
    /// Optional site-aware evaluation at anchor + offset (see cub::SiteFn);
    /// used instead of eval when present.
    std::function<Mat(int site, const Vec& anchor, const Vec& offset)> site_eval;
    /// Optional allocation-free evaluation for n = d = 1, used by the samplers.
    std::function<double(double)> scalar_eval;
    std::optional<Box> support_hint;
    /// p with ||f(s)|| ~ |s|^{-p} as |s| -> infinity.
    std::optional<double> decay_hint;
    /// Points where f may be singular or non-smooth.
    std::vector<Vec> singular_points;
    /// Non-empty for simple functions: f = sum of value * 1_box over disjoint boxes.
    std::vector<SimplePiece> pieces;

    Mat at(const Vec& s) const;
    bool is_simple() const { return !pieces.empty() || (!eval && !site_eval && !scalar_eval); }

    static IntegrandFn simple(int n, int d, std::vector<SimplePiece> pieces);
    static IntegrandFn indicator(const Box& box, int d);
    static IntegrandFn zero(int n, int d);
    /// rho * f, sharing structure with f.
    IntegrandFn scaled(double rho) const;
};

struct QuadratureConfig {
    double box_radius = 1e3;
    double rel_tol = 1e-8;
    long max_evals = 200000000;
    long mc_fallback_n = 1000000;
    int threads = 1;

    void validate() const;
};

struct IntegralReport {
    double value = 0.0;
    double error = 0.0;
    cub::Status status = cub::Status::converged;
    long evals = 0;
    double mc_se = 0.0;

    bool diverged() const { return status == cub::Status::diverged; }
    bool converged() const { return status == cub::Status::converged; }
};

/// h(D) = sum_j w_j (||lambda D theta_j||^alpha ^ ||lambda D theta_j||^2); needs lambda > 0.
double h_fun(const StableParams& p, const SpectralMeasure& sigma, const Mat& D);
/// h(D) = int (||D x||^alpha ^ ||D x||^2) R(dx) for a discrete Rosinski measure.
double h_fun(double alpha, const RosinskiMeasure& rosinski, const Mat& D);

/// sum_j w_j ||D theta_j||^alpha.
double stable_integrand(const SpectralMeasure& sigma, double alpha, const Mat& D);

/// H(f, delta) = int h(f(s) / delta) ds. At lambda = 0 the integrand is the
/// stable one, sum_j w_j ||f(s) theta_j / delta||^alpha.
IntegralReport big_H(const IntegrandFn& f, double delta, const StableParams& p, const SpectralMeasure& sigma,
                     const QuadratureConfig& quad);
IntegralReport big_H(const IntegrandFn& f, double delta, double alpha, const RosinskiMeasure& rosinski,
                     const QuadratureConfig& quad);

/// J2(f) = sum_j w_j lambda^alpha int g(lambda / ||f(s) theta_j||) ds; needs lambda > 0.
IntegralReport j2(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                  const QuadratureConfig& quad);

struct QuasiNormReport {
    double value = 0.0;
    double H_at_1 = 0.0;
    bool converged = true;
    bool diverged = false;
    int iterations = 0;
};

/// inf{delta > 0 : H(f, delta) <= 1} by bisection on log delta.
QuasiNormReport quasi_norm(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                           const QuadratureConfig& quad);

struct MembershipReport {
    bool in_space = false;
    bool diverged = false;
    bool inconclusive = false;
    double H_at_1 = 0.0;
    /// Same test at the other side of lambda = 0 (lambda = 1 when the query is
    /// stable, lambda = 0 otherwise).
    bool companion_in_space = false;
    bool companion_diverged = false;
    /// False when f is accepted at lambda = 0 but rejected for lambda > 0.
    bool inclusion_ok = true;
    std::string diagnostics;
};

MembershipReport membership(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                            const QuadratureConfig& quad);

struct PushforwardReport {
    /// Direct evaluation of (ds x Levy measure){(s, x) : f(s) x in A}.
    double value = 0.0;
    /// The same mass through the Rosinski pushforward and incomplete gammas.
    double dual = 0.0;
    double residual = 0.0;
    cub::Status status = cub::Status::converged;
};

/// A may have infinite bounds but must be bounded away from the origin.
PushforwardReport pushforward_levy_mass(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                                        const Box& A, const QuadratureConfig& quad);

struct EnvelopeEstimate {
    double value = 0.0;
    long samples = 0;
    Mat argmax_D;
    Vec argmax_u;
};

/// Largest observed (||D||^alpha ^ ||D||^2) / h(D) over random D (log-uniform
/// scale in [1e-3, 1e3] times a random unit-norm direction), then polished by
/// a local search.
EnvelopeEstimate estimate_matrix_floor(const StableParams& p, const SpectralMeasure& sigma, long n_samples,
                                       std::uint64_t seed);

/// Random d x d matrix with operator norm exp(log-uniform in [log lo, log hi]).
Mat random_scaled_matrix(int d, double lo, double hi, std::mt19937_64& rng);

/// Largest singular value.
double op_norm(const Mat& A);

}  // namespace tf
