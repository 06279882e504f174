#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "temperfield/integrability.hpp"
#include "temperfield/polar.hpp"
#include "temperfield/tstable.hpp"

namespace tf {

enum class FieldKind { moving_average, harmonizable, kernel_tempered_ma };

const char* to_string(FieldKind k);

struct FieldSpec {
    int n = 1;
    int d = 1;
    StableParams params;
    /// Dimension d for the moving-average kinds, 2d for harmonizable.
    SpectralMeasure sigma;
    OperatorSpec E;
    Mat D;
    /// E-homogeneous (moving average) or E^T-homogeneous (harmonizable).
    HomogeneousFn phi;
    FieldKind kind = FieldKind::moving_average;
    double beta = 1.0;

    double q() const { return E.trace_q; }
    /// Largest real part of the eigenvalues of D.
    double hurst() const;
    /// Copy with a different tempering rate.
    FieldSpec with_lambda(double lambda) const;
};

struct FddQuery {
    std::vector<Vec> points;
    std::vector<Vec> directions;

    void validate(int n, int d) const;
};

/// Linear combination sum_k coef_k * (field kernel at point_k) with sum coef_k = 0.
/// A query {t_j, u_j} is the combination {(t_j, u_j)} plus (0, -sum u_j).
struct WeightedPoint {
    Vec point;
    Vec coef;
};

/// Existence gate of the kind; with stable_limit the stricter lambda = 0 gate.
/// Throws GateViolation.
void check_gates(const FieldSpec& spec, bool stable_limit = false);
/// Non-fatal remarks (for instance q/alpha being an eigenvalue of D).
std::vector<std::string> gate_warnings(const FieldSpec& spec);

Mat ma_kernel(const FieldSpec& spec, const Vec& t, const Vec& s);
Mat harm_kernel_lift(const FieldSpec& spec, const Vec& t, const Vec& s);
Mat kt_kernel(const FieldSpec& spec, const Vec& t, const Vec& s);

struct LcfOptions {
    /// Scale rho of the integration coordinates (s = rho^E y, or rho^{-E^T} y
    /// for harmonizable). Defaults to the largest tau_E(point - last point).
    std::optional<double> scale;
    /// Skip the existence gate (callers that already checked a stricter one).
    bool skip_gates = false;
};

struct LcfResult {
    double value = 0.0;
    double error = 0.0;
    cub::Status status = cub::Status::converged;
    long evals = 0;
    double mc_se = 0.0;
};

/// Lambda = int psi(sum_k kernel_k(s)^T coef_k) ds, exp(Lambda) being the
/// characteristic function of the fdd vector at the directions.
LcfResult field_lcf(const FieldSpec& spec, const FddQuery& query, const QuadratureConfig& quad,
                    const LcfOptions& opt = {});
LcfResult field_lcf(const FieldSpec& spec, const std::vector<WeightedPoint>& terms, const QuadratureConfig& quad,
                    const LcfOptions& opt = {});

std::vector<WeightedPoint> query_terms(const FddQuery& query);

/// Default integration radius (integration coordinates) per kind and dimension.
double default_box_radius(const FieldSpec& spec);

/// The scaled vector-valued kernel as an integrand for the integrability
/// functionals: s -> f_t(s) (moving average / kernel tempered) or the lifted
/// harmonizable kernel.
IntegrandFn field_integrand(const FieldSpec& spec, const Vec& t);

struct ResidualReport {
    double left = 0.0;
    double right = 0.0;
    double residual = 0.0;
    double tolerance = 0.0;
    bool converged = true;
};

/// X(c^E t) against c^D X(t) at tempering c^{q/alpha} lambda (moving average)
/// or c^{-q/alpha} lambda (harmonizable).
ResidualReport check_scaling(const FieldSpec& spec, double c, const FddQuery& query, const QuadratureConfig& quad);

/// LCF of {X(t_j + h) - X(h)} against that of {X(t_j)}. Harmonizable specs
/// must have an orbit-uniform sigma.
ResidualReport check_stationary_increments(const FieldSpec& spec, const Vec& h, const FddQuery& query,
                                           const QuadratureConfig& quad);

/// sigma in R^{2d} invariant under the rotations A(2 pi i / m) of the form
/// ((cos b) I, (sin b) I; -(sin b) I, (cos b) I). Each generator atom becomes m
/// atoms of weight w / m.
SpectralMeasure make_orbit_uniform(int d, const std::vector<Atom>& generators, int m);
/// True when every atom lies on an equally spaced, equally weighted orbit of at least 4 points.
bool is_orbit_uniform(const SpectralMeasure& sigma, double tol = 1e-9);
/// The rotation A(b) in L(R^{2d}).
Mat orbit_rotation(int d, double b);

struct LambdaLimitRow {
    double lambda = 0.0;
    double lcf = 0.0;
    double gap = 0.0;
    /// max |psi_lambda(u) - psi_0(u)| over probe directions.
    double psi_gap = 0.0;
};

std::vector<LambdaLimitRow> check_lambda_limit(const FieldSpec& spec, const std::vector<double>& lambdas,
                                               const FddQuery& query, const QuadratureConfig& quad);

struct TangentRow {
    double c = 0.0;
    double lcf = 0.0;
    double residual = 0.0;
};

/// LCF of c^{-D}(X(x + c^E t_j) - X(x)) against the stable limit Lambda_0(t, u).
std::vector<TangentRow> check_tangent(const FieldSpec& spec, const Vec& x, const std::vector<double>& cs,
                                      const FddQuery& query, const QuadratureConfig& quad);

/// Largest observed |psi(D^T u)| / ((1 + ||u||^2)(||D||^alpha ^ ||D||^2)) over
/// random (D, u), polished by local search.
EnvelopeEstimate estimate_lcf_envelope(const StableParams& p, const SpectralMeasure& sigma, long n_samples,
                                       std::uint64_t seed);

}  // namespace tf
