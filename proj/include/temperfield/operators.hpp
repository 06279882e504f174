#pragma once

#include <Eigen/Dense>

namespace tf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct SpectralBounds {
    double re_eig_min;
    double re_eig_max;
    double trace;
};

/// Square real matrix with cached spectral metadata. Used for both the
/// time-domain exponent E and the state-space exponent D.
struct OperatorSpec {
    Mat entries;
    double trace_q = 0.0;
    double re_eig_min = 0.0;
    double re_eig_max = 0.0;

    OperatorSpec() = default;
    explicit OperatorSpec(const Mat& m);

    int dim() const { return static_cast<int>(entries.rows()); }
    /// True when entries is a positive multiple of the identity.
    bool is_scalar() const { return scalar_ > 0.0; }
    double scalar_value() const { return scalar_; }
    bool is_diagonal() const { return diagonal_; }

private:
    double scalar_ = 0.0;
    bool diagonal_ = false;
};

/// exp(A) by scaling and squaring with Pade approximants of degree 3..13.
Mat mat_exp(const Mat& A);

/// exp(A) - I, accurate when A is small (Taylor series below norm 1/2).
Mat mat_expm1(const Mat& A);

/// c^E = exp(log(c) E).
Mat real_power(const OperatorSpec& E, double c);
Mat real_power(const Mat& E, double c);

SpectralBounds spectral_bounds(const Mat& A);

bool is_in_Q(const Mat& A);

}  // namespace tf
