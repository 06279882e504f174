#pragma once

// Integration over R^n (n <= 2 deterministic, n >= 3 Monte Carlo) of functions
// with integrable point singularities at known sites and algebraic tails.
//
// The plane is split into the Voronoi cells of the sites. Each cell is
// integrated in polar coordinates centred at its site: an exponential radial
// map resolves the singularity, a logarithmic map covers the far field, and
// the four dyadic shells [R/4, 4R] feed a geometric tail extrapolation that
// also decides convergence under two box doublings.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "temperfield/operators.hpp"

namespace tf::cub {

struct RnConfig {
    /// Truncation radius R (integration coordinates).
    double box_radius = 1e3;
    double rel_tol = 1e-9;
    double abs_tol = 0.0;
    /// Depth of the exponential map at sites: offsets reach e^{-near_depth}.
    double near_depth = 230.0;
    /// Length scale separating the near-site and far-field maps.
    double core_radius = 1.0;
    long mc_samples = 1000000;
    std::uint64_t mc_seed = 0x5eed;
    int max_segments = 4000;
    /// Worker threads over cells (deterministic summation order).
    int threads = 1;
    /// Known asymptotic decay |x|^{-p} of the integrand. When set, the tail
    /// beyond each shell uses the ratio 2^{n-p} instead of the measured one.
    std::optional<double> tail_exponent;
};

enum class Status { converged, diverged, inconclusive };

struct RnResult {
    double value = 0.0;
    double error = 0.0;
    Status status = Status::converged;
    long evals = 0;
    /// Estimates with the box at R, 2R, 4R (each with its extrapolated tail).
    std::array<double, 3> totals{};
    /// Extrapolated tail beyond 4R.
    double tail = 0.0;
    /// Monte Carlo standard error (n >= 3 only).
    double mc_se = 0.0;
};

/// Integrand receives (site index or -1, anchor, offset); the evaluation point
/// is anchor + offset. When site >= 0 the anchor is that site exactly, so the
/// integrand may form differences against the site without rounding.
using SiteFn = std::function<double(int site, const Vec& anchor, const Vec& offset)>;

RnResult integrate_rn(int n, const std::vector<Vec>& sites, const SiteFn& f, const RnConfig& cfg);

/// Integration over the box [lo, hi] (finite), split at site coordinates.
RnResult integrate_box(const Vec& lo, const Vec& hi, const std::vector<Vec>& sites, const SiteFn& f,
                       const RnConfig& cfg);

}  // namespace tf::cub
