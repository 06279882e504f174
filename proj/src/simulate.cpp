#include "temperfield/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Eigenvalues>

namespace tf {

void SimConfig::validate() const {
    if (!(jump_cutoff_eps > 0.0 && jump_cutoff_eps < 1.0))
        throw std::invalid_argument("SimConfig: jump_cutoff_eps must lie in (0, 1)");
    if (n_replicates < 1) throw std::invalid_argument("SimConfig: n_replicates must be at least 1");
    if (!(box_tail_tol > 0.0)) throw std::invalid_argument("SimConfig: box_tail_tol must be positive");
    if (domain_box) {
        for (int i = 0; i < domain_box->dim(); ++i)
            if (!(std::isfinite(domain_box->lo[i]) && std::isfinite(domain_box->hi[i]) &&
                  domain_box->lo[i] < domain_box->hi[i]))
                throw std::invalid_argument("SimConfig: domain_box must be bounded and non-degenerate");
    }
    quad.validate();
}

double jump_rate(const StableParams& p, double eps) {
    if (p.lambda == 0.0) return std::pow(eps, -p.alpha) / p.alpha;
    return std::pow(p.lambda, p.alpha) * upper_gamma_neg(p.alpha, p.lambda * eps);
}

double small_jump_variance(const StableParams& p, double eps) {
    if (p.lambda == 0.0) return std::pow(eps, 2.0 - p.alpha) / (2.0 - p.alpha);
    return std::pow(p.lambda, p.alpha - 2.0) * lower_gamma(2.0 - p.alpha, p.lambda * eps);
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

struct Counts {
    long proposals = 0;
    long accepted = 0;
};

/// Jumps of radius >= eps for a unit of Levy mass.
struct JumpLaw {
    int d = 1;
    double alpha = 1.0;
    double lambda = 0.0;
    double eps = 1e-3;
    std::vector<Vec> dirs;
    std::vector<double> cum;
    /// Expected jump count per unit mass.
    double rate = 0.0;
    std::vector<Vec> half_dirs;
    /// Per unit mass: sqrt(w_half * small-jump variance).
    std::vector<double> half_sd;
    /// Sum over full atoms of w * variance * theta theta^T.
    Mat cov;

    JumpLaw(const StableParams& p, const SpectralMeasure& sigma, double eps_) : alpha(p.alpha), lambda(p.lambda), eps(eps_) {
        d = sigma.dim();
        double total = 0.0;
        for (const Atom& a : sigma.atoms()) {
            dirs.push_back(a.dir);
            total += a.w;
            cum.push_back(total);
        }
        for (double& c : cum) c /= total;
        cum.back() = 1.0;
        rate = total * jump_rate(p, eps);
        const double v = small_jump_variance(p, eps);
        cov = Mat::Zero(d, d);
        for (const Atom& a : sigma.half_atoms()) {
            half_dirs.push_back(a.dir);
            half_sd.push_back(std::sqrt(a.w * v));
            cov += (a.w * v) * a.dir * a.dir.transpose();
        }
    }

    /// Share of Pareto proposals kept by the rejection step.
    double predicted_acceptance() const {
        if (lambda == 0.0) return 1.0;
        return jump_rate({alpha, lambda}, eps) * alpha * std::pow(eps, alpha) * std::exp(lambda * eps);
    }

    // Target density on [eps, inf) is proportional to r^{-alpha-1} e^{-lambda (r - eps)};
    // the Pareto proposal dominates it with constant 1.
    double radius(Philox4x32& g, Counts& c) const {
        const double inv = -1.0 / alpha;
        for (;;) {
            ++c.proposals;
            const double r = eps * std::pow(g.uniform_open(), inv);
            if (lambda == 0.0 || g.uniform32() < std::exp(-lambda * (r - eps))) {
                ++c.accepted;
                return r;
            }
        }
    }

    const Vec& direction(Philox4x32& g) const {
        if (dirs.size() == 1) return dirs[0];
        const double u = g.uniform32();
        const auto it = std::lower_bound(cum.begin(), cum.end(), u);
        return dirs[static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cum.begin(), dirs.size() - 1))];
    }

    long count(Philox4x32& g, double mass) const {
        const double mean = mass * rate;
        if (!(mean > 0.0)) return 0;
        return std::poisson_distribution<long>(mean)(g);
    }

    /// One tempered stable vector with Levy measure mass * phi, added to out.
    void draw(Philox4x32& g, double mass, bool refine, Counts& c, Eigen::Ref<Vec> out) const {
        const long k = count(g, mass);
        for (long i = 0; i < k; ++i) {
            const double r = radius(g, c);
            out += r * direction(g);
        }
        if (refine) {
            std::normal_distribution<double> normal;
            const double sm = std::sqrt(mass);
            for (std::size_t h = 0; h < half_dirs.size(); ++h) out += (sm * half_sd[h] * normal(g)) * half_dirs[h];
        }
    }
};

/// Runs body(begin, end, counts) over contiguous replicate ranges.
template <class F>
Counts for_replicates(long n, int threads, const F& body) {
    const int t = static_cast<int>(std::clamp<long>(threads, 1, std::max<long>(1, n)));
    std::vector<Counts> counts(static_cast<std::size_t>(t));
    if (t == 1) {
        body(0, n, counts[0]);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < t; ++k) {
            const long b = n * k / t, e = n * (k + 1) / t;
            pool.emplace_back([&, b, e, k] { body(b, e, counts[static_cast<std::size_t>(k)]); });
        }
        for (auto& th : pool) th.join();
    }
    Counts total;
    for (const Counts& c : counts) {
        total.proposals += c.proposals;
        total.accepted += c.accepted;
    }
    return total;
}

void check_sigma(const StableParams& p, const SpectralMeasure& sigma) {
    p.validate();
    if (sigma.dim() < 1 || sigma.atoms().empty()) throw std::invalid_argument("simulate: empty spectral measure");
}

std::string hex(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", x);
    return buf;
}

void describe(std::ostringstream& os, const StableParams& p, const SpectralMeasure& sigma) {
    os << "alpha=" << hex(p.alpha) << ";lambda=" << hex(p.lambda) << ";sigma=";
    for (const Atom& a : sigma.atoms()) {
        os << hex(a.w) << "@";
        for (int i = 0; i < a.dir.size(); ++i) os << hex(a.dir[i]) << ",";
        os << "|";
    }
}

void describe(std::ostringstream& os, const SimConfig& cfg) {
    os << ";eps=" << hex(cfg.jump_cutoff_eps) << ";N=" << cfg.n_replicates << ";seed=" << cfg.seed
       << ";refine=" << cfg.gaussian_refinement;
}

SampleMeta base_meta(const SimConfig& cfg, const JumpLaw& law, const Counts& c) {
    SampleMeta m;
    m.seed = cfg.seed;
    m.eps = cfg.jump_cutoff_eps;
    m.n_replicates = cfg.n_replicates;
    m.proposals = c.proposals;
    m.accepted = c.accepted;
    m.predicted_acceptance = law.predicted_acceptance();
    return m;
}

void small_jump_warning(const StableParams& p, const SimConfig& cfg, SampleMeta& m) {
    if (p.lambda == 0.0 && !cfg.gaussian_refinement && p.alpha >= 1.0)
        m.warnings.push_back("lambda = 0 and alpha >= 1 without gaussian_refinement: dropping jumps below eps "
                             "biases the sample");
}

/// Evaluation of f at anchor + offset where the caller's site index refers to
/// a shared list of points; map[k] is f's own index of shared site k or -1.
Mat eval_mapped(const IntegrandFn& f, const std::vector<int>& map, int site, const Vec& anchor, const Vec& off) {
    if (f.site_eval) return f.site_eval(site >= 0 ? map[static_cast<std::size_t>(site)] : -1, anchor, off);
    return f.at(anchor + off);
}

std::vector<int> site_map(const IntegrandFn& f, const std::vector<Vec>& shared) {
    std::vector<int> map(shared.size(), -1);
    for (std::size_t k = 0; k < shared.size(); ++k)
        for (std::size_t m = 0; m < f.singular_points.size(); ++m)
            if (f.singular_points[m] == shared[k]) map[k] = static_cast<int>(m);
    return map;
}

std::vector<Vec> union_sites(const std::vector<const IntegrandFn*>& fs) {
    std::vector<Vec> out;
    for (const IntegrandFn* f : fs)
        for (const Vec& p : f->singular_points)
            if (std::none_of(out.begin(), out.end(), [&](const Vec& q) { return q == p; })) out.push_back(p);
    return out;
}

Box grow(const Box& b, double factor) {
    const Vec c = 0.5 * (b.lo + b.hi);
    const Vec h = 0.5 * factor * (b.hi - b.lo);
    return {c - h, c + h};
}

std::string box_string(const Box& b) {
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < b.dim(); ++i) os << (i ? " x " : "") << b.lo[i] << ", " << b.hi[i];
    os << "]";
    return os.str();
}

/// Smallest doubling of the start box (or of cfg.domain_box, which must then
/// already pass) whose outside carries at most box_tail_tol of H(f, 1) for every f.
Box choose_box(const std::vector<const IntegrandFn*>& fs, const StableParams& p, const SpectralMeasure& sigma,
               const SimConfig& cfg, std::vector<std::string>& warnings) {
    const int n = fs.front()->n;
    std::vector<double> totals;
    for (const IntegrandFn* f : fs) {
        const IntegralReport h = big_H(*f, 1.0, p, sigma, cfg.quad);
        if (h.diverged() || !std::isfinite(h.value))
            throw GateViolation("sample_integral: H(f, 1) diverges, f is not integrable");
        if (!h.converged()) warnings.push_back("H(f, 1) over R^n did not converge; tail test is approximate");
        totals.push_back(h.value);
    }
    auto passes = [&](const Box& b) {
        for (std::size_t i = 0; i < fs.size(); ++i) {
            if (totals[i] == 0.0) continue;
            IntegrandFn g = *fs[i];
            g.support_hint = b;
            const IntegralReport h = big_H(g, 1.0, p, sigma, cfg.quad);
            if (totals[i] - h.value > cfg.box_tail_tol * totals[i] + h.error) return false;
        }
        return true;
    };
    Box start;
    if (cfg.domain_box) {
        if (cfg.domain_box->dim() != n) throw std::invalid_argument("sample_integral: domain_box dimension mismatch");
        start = *cfg.domain_box;
        if (passes(start)) return start;
    } else {
        Vec lo = Vec::Zero(n), hi = Vec::Zero(n);
        for (const IntegrandFn* f : fs)
            for (const Vec& s : f->singular_points) {
                lo = lo.cwiseMin(s);
                hi = hi.cwiseMax(s);
            }
        const double half = std::max(1.0, (hi - lo).maxCoeff());
        const Vec c = 0.5 * (lo + hi);
        start = {c.array() - half, c.array() + half};
    }
    Box b = start;
    for (int k = 0; k < 40; ++k) {
        b = grow(b, 2.0);
        if (passes(b)) {
            if (cfg.domain_box)
                throw BoxTooSmall("sample_integral: domain_box " + box_string(start) + " leaves more than " +
                                      std::to_string(cfg.box_tail_tol) + " of H(f, 1) outside; need at least " +
                                      box_string(b),
                                  b);
            return b;
        }
    }
    throw NonConvergence("sample_integral: no box up to 2^40 times the start passes the tail test");
}

/// Joint covariance of the Gaussian refinement: block (i, j) is
/// int_box f_i(s) cov f_j(s)^T ds.
Mat refinement_covariance(const std::vector<const IntegrandFn*>& fs, const Mat& cov, const Box& box,
                          const SimConfig& cfg, std::vector<std::string>& warnings) {
    const std::vector<Vec> sites = union_sites(fs);
    std::vector<std::vector<int>> maps;
    for (const IntegrandFn* f : fs) maps.push_back(site_map(*f, sites));
    const int r = fs.front()->d;
    const int m = static_cast<int>(fs.size());
    Mat C = Mat::Zero(m * r, m * r);
    cub::RnConfig rc;
    rc.rel_tol = std::max(cfg.quad.rel_tol, 1e-8);
    rc.threads = cfg.quad.threads;
    rc.mc_samples = cfg.quad.mc_fallback_n;
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j)
            for (int a = 0; a < r; ++a)
                for (int b = (i == j ? a : 0); b < r; ++b) {
                    cub::SiteFn g = [&](int site, const Vec& anchor, const Vec& off) {
                        const Mat Fi = eval_mapped(*fs[i], maps[i], site, anchor, off);
                        const Mat Fj = i == j ? Fi : eval_mapped(*fs[j], maps[j], site, anchor, off);
                        return Fi.row(a).dot(cov * Fj.row(b).transpose());
                    };
                    const cub::RnResult res = cub::integrate_box(box.lo, box.hi, sites, g, rc);
                    if (res.status == cub::Status::diverged || !std::isfinite(res.value))
                        throw NonConvergence(
                            "Gaussian refinement covariance diverges: the kernel is not square integrable near a "
                            "singular point; disable gaussian_refinement");
                    if (res.status != cub::Status::converged)
                        warnings.push_back("refinement covariance entry did not converge");
                    C(i * r + a, j * r + b) = res.value;
                    C(j * r + b, i * r + a) = res.value;
                }
    return C;
}

/// Square root with clipped negative eigenvalues.
Mat psd_sqrt(const Mat& C) {
    if (C.size() == 0) return C;
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

/// Shot noise sum_k f_i(s_k) J_k for every kernel from one Poisson cloud,
/// plus the joint Gaussian refinement. Kernels that are null pointers stay zero.
SampleBatch shot_noise(const std::vector<const IntegrandFn*>& fs, int out_dim, const StableParams& jump_params,
                       const SpectralMeasure& sigma, const Box& box, const SimConfig& cfg, SampleMeta meta_extra) {
    const JumpLaw law(jump_params, sigma, cfg.jump_cutoff_eps);
    std::vector<const IntegrandFn*> live;
    std::vector<int> live_slot;
    for (std::size_t i = 0; i < fs.size(); ++i)
        if (fs[i]) {
            live.push_back(fs[i]);
            live_slot.push_back(static_cast<int>(i));
        }
    const int m = static_cast<int>(fs.size());
    const int r = live.empty() ? out_dim : live.front()->d;
    Mat L;
    if (cfg.gaussian_refinement && !live.empty()) L = psd_sqrt(refinement_covariance(live, law.cov, box, cfg, meta_extra.warnings));
    const double vol = box.volume();
    const bool scalar = r == 1 && out_dim == 1 &&
                        std::all_of(live.begin(), live.end(), [](const IntegrandFn* f) { return f->n == 1 && bool(f->scalar_eval); });
    SampleBatch batch;
    batch.values = Mat::Zero(cfg.n_replicates, static_cast<Eigen::Index>(m) * out_dim);
    const Counts c = for_replicates(cfg.n_replicates, cfg.threads, [&](long b, long e, Counts& cnt) {
        // Cloud columns: positions in S, jump vectors in J.
        Mat S(box.dim(), 0), J(law.d, 0);
        Vec acc(r), pos(box.dim());
        Vec z(L.cols());
        for (long rep = b; rep < e; ++rep) {
            Philox4x32 g(cfg.seed, static_cast<std::uint64_t>(rep));
            const long k = law.count(g, vol);
            if (k > S.cols()) {
                S.resize(box.dim(), 2 * k);
                J.resize(law.d, 2 * k);
            }
            for (long i = 0; i < k; ++i) {
                for (int a = 0; a < box.dim(); ++a) S(a, i) = box.lo[a] + (box.hi[a] - box.lo[a]) * g.uniform32();
                const double rad = law.radius(g, cnt);
                J.col(i) = rad * law.direction(g);
            }
            if (L.size() > 0) {
                std::normal_distribution<double> normal;
                for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(g);
            }
            for (std::size_t li = 0; li < live.size(); ++li) {
                const IntegrandFn& f = *live[li];
                if (scalar) {
                    double x = 0.0;
                    for (long i = 0; i < k; ++i) x += f.scalar_eval(S(0, i)) * J(0, i);
                    if (L.size() > 0) x += L.row(static_cast<Eigen::Index>(li)).dot(z);
                    batch.values(rep, live_slot[li]) = x;
                    continue;
                }
                acc.setZero();
                for (long i = 0; i < k; ++i) {
                    pos = S.col(i);
                    acc += f.at(pos) * J.col(i);
                }
                if (L.size() > 0) acc += L.middleRows(static_cast<Eigen::Index>(li) * r, r) * z;
                batch.values.row(rep).segment(static_cast<Eigen::Index>(live_slot[li]) * out_dim, out_dim) =
                    acc.head(out_dim).transpose();
            }
        }
    });
    SampleMeta meta = base_meta(cfg, law, c);
    meta.mean_jumps = vol * law.rate;
    meta.domain_box = box;
    meta.warnings = std::move(meta_extra.warnings);
    meta.spec_hash = meta_extra.spec_hash;
    batch.meta = std::move(meta);
    return batch;
}

}  // namespace

SampleBatch sample_tas(const StableParams& p, const SpectralMeasure& sigma, double mass, const SimConfig& cfg) {
    check_sigma(p, sigma);
    cfg.validate();
    if (!(mass > 0.0) || !std::isfinite(mass)) throw std::invalid_argument("sample_tas: mass must be positive and finite");
    const JumpLaw law(p, sigma, cfg.jump_cutoff_eps);
    SampleBatch batch;
    batch.values = Mat::Zero(cfg.n_replicates, sigma.dim());
    const Counts c = for_replicates(cfg.n_replicates, cfg.threads, [&](long b, long e, Counts& cnt) {
        Vec x(sigma.dim());
        for (long rep = b; rep < e; ++rep) {
            Philox4x32 g(cfg.seed, static_cast<std::uint64_t>(rep));
            x.setZero();
            law.draw(g, mass, cfg.gaussian_refinement, cnt, x);
            batch.values.row(rep) = x.transpose();
        }
    });
    batch.meta = base_meta(cfg, law, c);
    batch.meta.mean_jumps = mass * law.rate;
    small_jump_warning(p, cfg, batch.meta);
    std::ostringstream os;
    os << "tas;";
    describe(os, p, sigma);
    os << ";mass=" << hex(mass);
    describe(os, cfg);
    batch.meta.spec_hash = fnv1a_hex(os.str());
    return batch;
}

SampleBatch sample_integral(const IntegrandFn& f, const StableParams& p, const SpectralMeasure& sigma,
                            const SimConfig& cfg) {
    check_sigma(p, sigma);
    cfg.validate();
    if (f.d != sigma.dim()) throw std::invalid_argument("sample_integral: integrand and sigma dimensions differ");
    std::ostringstream os;
    os << "integral;";
    describe(os, p, sigma);
    describe(os, cfg);

    if (f.is_simple()) {
        const JumpLaw law(p, sigma, cfg.jump_cutoff_eps);
        for (const SimplePiece& piece : f.pieces)
            if (!std::isfinite(piece.box.volume()))
                throw std::invalid_argument("sample_integral: simple function pieces must be bounded");
        SampleBatch batch;
        batch.values = Mat::Zero(cfg.n_replicates, f.d);
        const Counts c = for_replicates(cfg.n_replicates, cfg.threads, [&](long b, long e, Counts& cnt) {
            Vec x(f.d), y(f.d);
            for (long rep = b; rep < e; ++rep) {
                Philox4x32 g(cfg.seed, static_cast<std::uint64_t>(rep));
                x.setZero();
                for (const SimplePiece& piece : f.pieces) {
                    y.setZero();
                    law.draw(g, piece.box.volume(), cfg.gaussian_refinement, cnt, y);
                    x += piece.value * y;
                }
                batch.values.row(rep) = x.transpose();
            }
        });
        batch.meta = base_meta(cfg, law, c);
        for (const SimplePiece& piece : f.pieces) batch.meta.mean_jumps += piece.box.volume() * law.rate;
        small_jump_warning(p, cfg, batch.meta);
        for (const SimplePiece& piece : f.pieces) {
            os << ";piece=";
            for (int i = 0; i < piece.box.dim(); ++i) os << hex(piece.box.lo[i]) << ":" << hex(piece.box.hi[i]) << ",";
            for (Eigen::Index i = 0; i < piece.value.size(); ++i) os << hex(piece.value.data()[i]) << ",";
        }
        batch.meta.spec_hash = fnv1a_hex(os.str());
        return batch;
    }

    SampleMeta extra;
    small_jump_warning(p, cfg, extra);
    const Box box = choose_box({&f}, p, sigma, cfg, extra.warnings);
    os << ";box=" << box_string(box);
    extra.spec_hash = fnv1a_hex(os.str());
    return shot_noise({&f}, f.d, p, sigma, box, cfg, std::move(extra));
}

SampleBatch sample_field_path(const FieldSpec& spec, const std::vector<Vec>& t_grid, const SimConfig& cfg) {
    check_gates(spec);
    cfg.validate();
    if (t_grid.empty()) throw std::invalid_argument("sample_field_path: empty grid");
    for (const Vec& t : t_grid)
        if (t.size() != spec.n) throw std::invalid_argument("sample_field_path: grid point dimension must be n");
    // Kernel-tempered fields damp the kernel and drive it with stable jumps.
    StableParams jump_params = spec.params;
    if (spec.kind == FieldKind::kernel_tempered_ma) jump_params.lambda = 0.0;

    std::vector<IntegrandFn> kernels;
    kernels.reserve(t_grid.size());
    std::vector<const IntegrandFn*> slots(t_grid.size(), nullptr);
    std::vector<const IntegrandFn*> live;
    for (const Vec& t : t_grid) {
        kernels.push_back(field_integrand(spec, t));
    }
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (!t_grid[i].isZero(0.0)) {
            slots[i] = &kernels[i];
            live.push_back(&kernels[i]);
        }

    std::ostringstream os;
    os << "path;kind=" << to_string(spec.kind) << ";n=" << spec.n << ";d=" << spec.d << ";beta=" << hex(spec.beta) << ";";
    describe(os, spec.params, spec.sigma);
    for (const Mat* M : {&spec.E.entries, &spec.D})
        for (Eigen::Index i = 0; i < M->size(); ++i) os << hex(M->data()[i]) << ",";
    for (const Vec& t : t_grid)
        for (int i = 0; i < t.size(); ++i) os << hex(t[i]) << ",";
    describe(os, cfg);

    SampleMeta extra;
    small_jump_warning(jump_params, cfg, extra);
    if (live.empty()) {
        SampleBatch batch;
        batch.values = Mat::Zero(cfg.n_replicates, static_cast<Eigen::Index>(t_grid.size()) * spec.d);
        batch.meta = extra;
        batch.meta.seed = cfg.seed;
        batch.meta.eps = cfg.jump_cutoff_eps;
        batch.meta.n_replicates = cfg.n_replicates;
        batch.meta.spec_hash = fnv1a_hex(os.str());
        return batch;
    }
    const Box box = choose_box(live, jump_params, spec.sigma, cfg, extra.warnings);
    os << ";box=" << box_string(box);
    extra.spec_hash = fnv1a_hex(os.str());
    return shot_noise(slots, spec.d, jump_params, spec.sigma, box, cfg, std::move(extra));
}

EmpiricalCf empirical_cf(const Mat& values, const Vec& u) {
    if (values.cols() != u.size()) throw std::invalid_argument("empirical_cf: direction dimension mismatch");
    const Eigen::Index N = values.rows();
    EmpiricalCf out;
    if (N == 0) return out;
    double sc = 0.0, ss = 0.0, sc2 = 0.0, ss2 = 0.0;
    for (Eigen::Index r = 0; r < N; ++r) {
        const double x = values.row(r).dot(u.transpose());
        const double c = std::cos(x), s = std::sin(x);
        sc += c;
        ss += s;
        sc2 += c * c;
        ss2 += s * s;
    }
    const double n = static_cast<double>(N);
    const double mc = sc / n, ms = ss / n;
    out.value = {mc, ms};
    if (N > 1) {
        out.se_re = std::sqrt(std::max(0.0, sc2 / n - mc * mc) / n);
        out.se_im = std::sqrt(std::max(0.0, ss2 / n - ms * ms) / n);
    }
    out.se = std::hypot(out.se_re, out.se_im);
    return out;
}

}  // namespace tf
