#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "temperfield/operators.hpp"

using namespace tf;

namespace {

Mat diag2(double a, double b) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

// Plain Taylor series in long double, only trusted for ||A|| <= 1.
Mat taylor_exp(const Mat& A) {
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    LMat a = A.cast<long double>();
    LMat term = LMat::Identity(A.rows(), A.cols());
    LMat sum = term;
    for (int k = 1; k < 60; ++k) {
        term = term * a / static_cast<long double>(k);
        sum += term;
    }
    return sum.cast<double>();
}

Mat random_matrix(int m, double norm, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Mat A(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) A(i, j) = z(rng);
    return A * (norm / A.norm());
}

double rel_err(const Mat& a, const Mat& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("mat_exp small cases") {
    CHECK(rel_err(mat_exp(Mat::Zero(3, 3)), Mat::Identity(3, 3)) == 0.0);
    Mat e = mat_exp(diag2(1, 2));
    CHECK(e(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(e(1, 1) == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
    CHECK(e(0, 1) == 0.0);
    Mat n(2, 2);
    n << 0, 1, 0, 0;
    Mat en(2, 2);
    en << 1, 1, 0, 1;
    CHECK(rel_err(mat_exp(n), en) < 1e-15);
}

TEST_CASE("mat_exp agrees with the Taylor series for norm <= 1") {
    std::mt19937_64 rng(7);
    for (int m : {1, 2, 3, 5}) {
        for (int rep = 0; rep < 20; ++rep) {
            Mat A = random_matrix(m, std::uniform_real_distribution<double>(0.01, 1.0)(rng), rng);
            CHECK(rel_err(mat_exp(A), taylor_exp(A)) < 1e-13);
        }
    }
}

TEST_CASE("mat_exp for larger norms via the group property") {
    // Skew A keeps exp(A) orthogonal, so the checks stay well conditioned at norm 50.
    std::mt19937_64 rng(11);
    for (double nrm : {5.0, 20.0, 50.0}) {
        Mat A = random_matrix(3, nrm, rng);
        A = (0.5 * (A - A.transpose())).eval();
        Mat E = mat_exp(A);
        CHECK((E * E.transpose() - Mat::Identity(3, 3)).norm() < 1e-12);
        Mat half = mat_exp(0.5 * A);
        CHECK(rel_err(half * half, E) < 1e-12);
    }
    Mat d = diag2(30.0, -20.0);
    Mat e = mat_exp(d);
    CHECK(e(0, 0) == doctest::Approx(std::exp(30.0)).epsilon(1e-13));
    CHECK(e(1, 1) == doctest::Approx(std::exp(-20.0)).epsilon(1e-13));
}

TEST_CASE("mat_expm1 matches mat_exp minus identity") {
    std::mt19937_64 rng(3);
    Mat A = random_matrix(3, 1e-6, rng);
    // Series without the identity term, so the reference keeps full relative accuracy.
    Mat ref = A + A * A / 2.0 + A * A * A / 6.0;
    CHECK(rel_err(mat_expm1(A), ref) < 1e-12);
    Mat B = random_matrix(3, 3.0, rng);
    CHECK(rel_err(mat_expm1(B), mat_exp(B) - Mat::Identity(3, 3)) < 1e-13);
}

TEST_CASE("mat_exp rejects bad input") {
    CHECK_THROWS_AS(mat_exp(Mat::Zero(2, 3)), std::invalid_argument);
    Mat bad = Mat::Zero(2, 2);
    bad(0, 1) = NAN;
    CHECK_THROWS_AS(mat_exp(bad), std::invalid_argument);
}

TEST_CASE("real_power examples and group law") {
    OperatorSpec E(diag2(1, 2));
    CHECK(rel_err(real_power(E, 1.0), Mat::Identity(2, 2)) == 0.0);
    CHECK(rel_err(real_power(E, 4.0), diag2(4, 16)) < 1e-14);
    OperatorSpec I(Mat::Identity(3, 3));
    CHECK(rel_err(real_power(I, 2.5), 2.5 * Mat::Identity(3, 3)) < 1e-15);
    CHECK_THROWS_AS(real_power(E, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(real_power(E, -1.0), std::invalid_argument);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> logc(std::log(1e-3), std::log(1e3));
    for (int rep = 0; rep < 30; ++rep) {
        OperatorSpec F(random_matrix(3, std::uniform_real_distribution<double>(0.1, 5.0)(rng), rng));
        const double c1 = std::exp(logc(rng)), c2 = std::exp(logc(rng));
        Mat P = real_power(F, c1);
        Mat Q = real_power(F, c2);
        Mat Pinv = real_power(F, 1.0 / c1);
        // Rounding in a product of matrices grows with ||P|| ||P^{-1}||, which
        // reaches 1e15 at c = 1e3, so the tolerances carry that factor.
        const double kappa = std::max(1.0, P.norm() * Pinv.norm());
        const Mat PQ = real_power(F, c1 * c2);
        CHECK(rel_err(P * Q, PQ) < 1e-12 * std::max(1.0, P.norm() * Q.norm() / PQ.norm()));
        CHECK((P * Pinv - Mat::Identity(3, 3)).norm() < 1e-12 * kappa);
        if (kappa < 1e4) CHECK((P * Pinv - Mat::Identity(3, 3)).norm() < 1e-10);
        const double det_ref = std::pow(c1, F.trace_q);
        CHECK(std::abs(P.determinant() - det_ref) / det_ref < 1e-12 * kappa);
    }
}

TEST_CASE("spectral bounds") {
    auto b = spectral_bounds(diag2(1, 2));
    CHECK(b.re_eig_min == doctest::Approx(1.0));
    CHECK(b.re_eig_max == doctest::Approx(2.0));
    CHECK(b.trace == doctest::Approx(3.0));
    Mat rot(2, 2);
    rot << 0, 1, -1, 0;
    b = spectral_bounds(rot);
    CHECK(std::abs(b.re_eig_min) < 1e-12);
    CHECK(std::abs(b.re_eig_max) < 1e-12);
    CHECK(b.trace == 0.0);
    b = spectral_bounds(diag2(0.6, 0.9));
    CHECK(b.re_eig_min == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(b.re_eig_max == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(b.trace == doctest::Approx(1.5).epsilon(1e-15));

    // Defective block: the double eigenvalue 0.5 is only resolved to ~sqrt(eps).
    Mat J(3, 3);
    J << 0.5, 1, 0, 0, 0.5, 0, 0, 0, 2;
    b = spectral_bounds(J);
    CHECK(b.re_eig_min == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(b.re_eig_max == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("OperatorSpec caches metadata") {
    Mat m(2, 2);
    m << 0.7, 0.2, -0.1, 0.9;
    OperatorSpec E(m);
    CHECK(E.trace_q == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(E.re_eig_min <= E.re_eig_max);
    CHECK_FALSE(E.is_scalar());
    CHECK(OperatorSpec(2.0 * Mat::Identity(2, 2)).is_scalar());
    CHECK(OperatorSpec(diag2(1, 3)).is_diagonal());
}

TEST_CASE("is_in_Q") {
    CHECK(is_in_Q(Mat::Identity(2, 2)));
    Mat rot(2, 2);
    rot << 0, 1, -1, 0;
    CHECK_FALSE(is_in_Q(rot));
    CHECK_FALSE(is_in_Q(diag2(0.6, -0.1)));
}
