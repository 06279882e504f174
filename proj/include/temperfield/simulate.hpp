#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "temperfield/errors.hpp"
#include "temperfield/fields.hpp"
#include "temperfield/integrability.hpp"
#include "temperfield/rng.hpp"

namespace tf {

struct SimConfig {
    double jump_cutoff_eps = 1e-3;
    /// Window for the shot noise of non-simple integrands. When absent it is
    /// grown from the integrand's singular points until the tail test passes.
    std::optional<Box> domain_box;
    long n_replicates = 1000;
    std::uint64_t seed = 1;
    bool gaussian_refinement = true;
    int threads = 1;
    /// Largest allowed share of H(f, 1) outside domain_box.
    double box_tail_tol = 1e-3;
    /// Quadrature for the refinement covariance and the tail test.
    QuadratureConfig quad;

    void validate() const;
};

/// Raised when domain_box leaves too much of H(f, 1) outside.
class BoxTooSmall : public GateViolation {
public:
    BoxTooSmall(const std::string& what, Box required) : GateViolation(what), required(std::move(required)) {}
    Box required;
};

struct SampleMeta {
    std::string spec_hash;
    std::uint64_t seed = 0;
    double eps = 0.0;
    long n_replicates = 0;
    /// Pareto proposals and accepted radii over all replicates.
    long proposals = 0;
    long accepted = 0;
    double predicted_acceptance = 1.0;
    /// Expected number of jumps per replicate.
    double mean_jumps = 0.0;
    std::optional<Box> domain_box;
    std::vector<std::string> warnings;
};

struct SampleBatch {
    /// One replicate per row.
    Mat values;
    SampleMeta meta;
};

/// Replicates of a tempered stable vector with Levy measure mass * phi.
/// Replicate r draws from the Philox stream (seed, r) only.
SampleBatch sample_tas(const StableParams& p, const SpectralMeasure& sigma, double mass, const SimConfig& cfg);

/// Replicates of int f dM. Simple f is a sum of independent tempered stable
/// vectors, one per piece, drawn in piece order from the replicate's stream;
/// otherwise shot noise over the domain box.
SampleBatch sample_integral(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                            const SimConfig& cfg);

/// Field values at every grid point from one Poisson cloud per replicate.
/// Row r holds X(t_1), ..., X(t_G) concatenated (G * d columns).
SampleBatch sample_field_path(const FieldSpec& spec, const std::vector<Vec>& t_grid, const SimConfig& cfg);

struct EmpiricalCf {
    std::complex<double> value;
    double se_re = 0.0;
    double se_im = 0.0;
    /// sqrt(se_re^2 + se_im^2) <= 1 / sqrt(N).
    double se = 0.0;
};

/// (1/N) sum_r exp(i <u, X_r>) over the rows of values.
EmpiricalCf empirical_cf(const Mat& values, const Vec& u);
inline EmpiricalCf empirical_cf(const SampleBatch& batch, const Vec& u) { return empirical_cf(batch.values, u); }

/// Jump rate int_eps^infty r^{-alpha-1} e^{-lambda r} dr.
double jump_rate(const StableParams& p, double eps);
/// Small-jump variance int_0^eps r^{1-alpha} e^{-lambda r} dr.
double small_jump_variance(const StableParams& p, double eps);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace tf
