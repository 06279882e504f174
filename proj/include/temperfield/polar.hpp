#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "temperfield/operators.hpp"

namespace tf {

/// Generalized polar coordinates x = tau^E direction.
struct GenPolar {
    double tau;
    Vec direction;
};

/// E-homogeneous function phi with phi(c^E x) = c phi(x).
struct HomogeneousFn {
    enum class Kind { radial_part, abs, user_callback };

    OperatorSpec exponent;
    Kind kind = Kind::radial_part;
    std::optional<double> beta_hint;
    /// Only for Kind::user_callback; must be reentrant.
    std::function<double(const Vec&)> callback;

    static HomogeneousFn radial(const OperatorSpec& E, std::optional<double> beta = std::nullopt);
    /// n = 1 shortcut |x|^(1/e) for E = [e]; equals the radial part up to a constant.
    static HomogeneousFn absolute(const OperatorSpec& E, std::optional<double> beta = std::nullopt);
};

/// ||x||_E = int_0^1 ||t^E x|| dt / t, adaptive quadrature in log t.
double e_norm(const OperatorSpec& E, const Vec& x);

GenPolar polar_decompose(const OperatorSpec& E, const Vec& x);

/// tau_E(x), with the convention tau_E(0) = 0.
double tau_or_zero(const OperatorSpec& E, const Vec& x);

double phi_eval(const HomogeneousFn& phi, const Vec& x);

/// log phi(x) - log phi(y) for x, y != 0, given x - y. Uses cancellation-free
/// forms for the abs and scalar-exponent radial cases.
double phi_log_ratio(const HomogeneousFn& phi, const Vec& x, const Vec& y, const Vec& x_minus_y);

struct ProbeReport {
    double max_ratio = 0.0;
    /// Max ratio per shell tau(x) in [10^{-k-1}, 10^{-k}], k = 0..shells-1.
    std::vector<double> shell_max;
    /// Set when the shell maxima keep growing as tau(x) shrinks.
    bool growth_detected = false;
    long samples = 0;
};

/// Empirical constant C in |phi(x+y) - phi(y)| <= C tau(x)^beta over
/// A <= ||y|| <= B and tau(x) <= 1. Reports, never certifies.
ProbeReport admissibility_probe(const HomogeneousFn& phi, const OperatorSpec& E, double beta,
                                double A, double B, long n_samples, std::uint64_t seed = 1);

}  // namespace tf
