#pragma once

#include <vector>

#include "temperfield/operators.hpp"

namespace tf {

/// Stability index alpha in (0, 2) and exponential tempering rate lambda >= 0
/// (lambda = 0 is the pure stable case).
struct StableParams {
    double alpha = 1.5;
    double lambda = 1.0;

    void validate() const;
};

struct Atom {
    Vec dir;
    double w;
};

/// Finite symmetric atomic measure on the unit sphere of R^dim.
///
/// Construction normalizes directions, adds the reflected atom (-theta, w) for
/// every atom that lacks one, and rejects measures whose directions do not span
/// R^dim.
class SpectralMeasure {
public:
    SpectralMeasure() = default;
    SpectralMeasure(int dim, const std::vector<Atom>& atoms);

    int dim() const { return dim_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    /// One representative per +-theta pair, weight doubled. Since the radial
    /// integrand is even this halves the cost of LCF sums.
    const std::vector<Atom>& half_atoms() const { return half_; }
    double total_mass() const;
    /// True when reflected atoms had to be added on construction.
    bool symmetrized() const { return symmetrized_; }

    /// d = 1 canonical measure c (eps_1 + eps_{-1}).
    static SpectralMeasure two_point(double c);

private:
    int dim_ = 0;
    std::vector<Atom> atoms_;
    std::vector<Atom> half_;
    bool symmetrized_ = false;
};

/// Discrete Rosinski measure: atoms at radius * theta_j with weights scale * w_j.
struct RosinskiMeasure {
    SpectralMeasure base;
    double radius = 1.0;
    double scale = 1.0;

    double total_mass() const { return scale * base.total_mass(); }
};

struct EnvelopeConstants {
    double c1;
    double c2;
    double quasi_tri_A;
};

/// R(a) = int_0^infty (cos(a r) - 1) r^{-alpha-1} e^{-lambda r} dr, closed form
/// for alpha != 1 and quadrature for alpha = 1.
double radial_lcf(const StableParams& p, double a);

/// Same integral evaluated by adaptive quadrature in x = |a| r: a
/// Gauss-Kronrod head on [0, 2 pi], Wynn-accelerated half-period sums of the
/// cosine part and an incomplete-gamma closed form for the constant part.
double radial_lcf_quadrature(const StableParams& p, double a);

/// psi(u) = sum_j w_j R(<u, theta_j>).
double lcf(const StableParams& p, const SpectralMeasure& sigma, const Vec& u);

/// C_alpha with R(a) = -C_alpha |a|^alpha when lambda = 0.
double stable_constant(double alpha);

/// gamma(s, z) = int_0^z u^{s-1} e^{-u} du, s > 0.
double lower_gamma(double s, double z);
/// Gamma(s, z) = int_z^infty u^{s-1} e^{-u} du, s > 0.
double upper_gamma(double s, double z);
/// E_1(z) = Gamma(0, z).
double exp_integral_e1(double z);
/// Gamma(-alpha, z) by downward recurrence from a positive parameter.
double upper_gamma_neg(double alpha, double z);

/// g(z) = z^{-2} gamma(2 - alpha, z) + Gamma(-alpha, z).
double g_fun(double alpha, double z);

/// Rosinski measure as stated for exponential tempering: sigma carried to
/// radius lambda with unchanged weights.
RosinskiMeasure rosinski_of(const StableParams& p, const SpectralMeasure& sigma);

/// Rosinski measure solving phi(A) = int int 1_A(r x) r^{-alpha-1} e^{-r} dr R(dx)
/// for phi = r^{-alpha-1} e^{-lambda r} dr sigma(d theta): radius 1/lambda,
/// weights lambda^alpha w.
RosinskiMeasure rosinski_from_relation(const StableParams& p, const SpectralMeasure& sigma);

/// inf / sup of g(z) / (z^{-alpha} ^ z^{-2}) over z > 0: a refined grid on
/// [1e-8, 1e8] together with the limits at both ends. Cached per alpha.
EnvelopeConstants envelope_constants(double alpha);

}  // namespace tf
