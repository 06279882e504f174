#include "temperfield/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "temperfield/errors.hpp"

namespace tf {

namespace {

void check_square_finite(const Mat& A, const char* who) {
    if (A.rows() != A.cols() || A.rows() == 0)
        throw std::invalid_argument(std::string(who) + ": matrix must be square and non-empty");
    if (!A.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

// Pade coefficients b_0..b_m for degrees 3, 5, 7, 9, 13 (Higham 2005).
constexpr double b3[] = {120., 60., 12., 1.};
constexpr double b5[] = {30240., 15120., 3360., 420., 30., 1.};
constexpr double b7[] = {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
constexpr double b9[] = {17643225600., 8821612800., 2075673600., 302702400., 30270240.,
                         2162160.,     110880.,     3960.,       90.,        1.};
constexpr double b13[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                          1187353796428800.,  129060195264000.,   10559470521600.,
                          670442572800.,      33522128640.,       1323241920.,
                          40840800.,          960960.,            16380.,
                          182.,               1.};
constexpr double theta[] = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                            2.097847961257068e0, 5.371920351148152e0};

Mat pade_small(const Mat& A, const double* b, int m) {
    const int n = static_cast<int>(A.rows());
    const Mat I = Mat::Identity(n, n);
    const Mat A2 = A * A;
    Mat P = I;  // running even power
    Mat U = b[1] * I;
    Mat V = b[0] * I;
    for (int k = 2; k <= m; k += 2) {
        P = P * A2;
        U += b[k + 1] * P;
        V += b[k] * P;
    }
    U = A * U;
    return (V - U).partialPivLu().solve(V + U);
}

Mat pade13(const Mat& A) {
    const int n = static_cast<int>(A.rows());
    const Mat I = Mat::Identity(n, n);
    const Mat A2 = A * A;
    const Mat A4 = A2 * A2;
    const Mat A6 = A4 * A2;
    Mat U = A * (A6 * (b13[13] * A6 + b13[11] * A4 + b13[9] * A2) + b13[7] * A6 + b13[5] * A4 +
                 b13[3] * A2 + b13[1] * I);
    Mat V = A6 * (b13[12] * A6 + b13[10] * A4 + b13[8] * A2) + b13[6] * A6 + b13[4] * A4 +
            b13[2] * A2 + b13[0] * I;
    return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

OperatorSpec::OperatorSpec(const Mat& m) : entries(m) {
    check_square_finite(m, "OperatorSpec");
    SpectralBounds b = spectral_bounds(m);
    trace_q = b.trace;
    re_eig_min = b.re_eig_min;
    re_eig_max = b.re_eig_max;
    const int n = dim();
    Mat off = m;
    off.diagonal().setZero();
    diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;
    if (diagonal_) {
        double d0 = m(0, 0);
        bool same = true;
        for (int i = 1; i < n; ++i) same = same && m(i, i) == d0;
        if (same && d0 > 0) scalar_ = d0;
    }
}

Mat mat_exp(const Mat& A) {
    check_square_finite(A, "mat_exp");
    const int n = static_cast<int>(A.rows());
    if (n == 1) return Mat::Constant(1, 1, std::exp(A(0, 0)));
    const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 <= theta[0]) return pade_small(A, b3, 3);
    if (norm1 <= theta[1]) return pade_small(A, b5, 5);
    if (norm1 <= theta[2]) return pade_small(A, b7, 7);
    if (norm1 <= theta[3]) return pade_small(A, b9, 9);
    int s = 0;
    if (norm1 > theta[4]) s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta[4]))));
    Mat X = pade13(A / std::ldexp(1.0, s));
    for (int i = 0; i < s; ++i) X = X * X;
    return X;
}

Mat mat_expm1(const Mat& A) {
    check_square_finite(A, "mat_expm1");
    const int n = static_cast<int>(A.rows());
    if (n == 1) return Mat::Constant(1, 1, std::expm1(A(0, 0)));
    const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 >= 0.5) return mat_exp(A) - Mat::Identity(n, n);
    Mat term = A;
    Mat sum = A;
    for (int k = 2; k < 40; ++k) {
        term = term * A / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() <= 1e-18 * sum.cwiseAbs().maxCoeff()) break;
    }
    return sum;
}

Mat real_power(const Mat& E, double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("real_power: c must be positive");
    check_square_finite(E, "real_power");
    return mat_exp(std::log(c) * E);
}

Mat real_power(const OperatorSpec& E, double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("real_power: c must be positive");
    const int n = E.dim();
    const double lc = std::log(c);
    if (E.is_diagonal()) {
        Mat r = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) r(i, i) = std::exp(lc * E.entries(i, i));
        return r;
    }
    return mat_exp(lc * E.entries);
}

SpectralBounds spectral_bounds(const Mat& A) {
    check_square_finite(A, "spectral_bounds");
    const int n = static_cast<int>(A.rows());
    SpectralBounds out{0, 0, A.trace()};
    if (n == 1) {
        out.re_eig_min = out.re_eig_max = A(0, 0);
        return out;
    }
    Eigen::EigenSolver<Mat> es(A, false);
    if (es.info() != Eigen::Success)
        throw NonConvergence("spectral_bounds: eigenvalue iteration did not converge");
    const auto re = es.eigenvalues().real();
    out.re_eig_min = re.minCoeff();
    out.re_eig_max = re.maxCoeff();
    return out;
}

bool is_in_Q(const Mat& A) { return spectral_bounds(A).re_eig_min > 0.0; }

}  // namespace tf
