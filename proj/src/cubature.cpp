#include "temperfield/cubature.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

#include "temperfield/quadrature.hpp"

namespace tf::cub {

namespace {

using quad::operator+;
using quad::operator-;
using quad::operator*;
using A5 = std::array<double, 5>;

struct Ctx {
    const SiteFn& f;
    const RnConfig& cfg;
    double inner_rel;
    long evals = 0;
    bool all_converged = true;
    bool site_divergent = false;

    double eval(int site, const Vec& anchor, const Vec& off) {
        ++evals;
        const double v = f(site, anchor, off);
        return std::isfinite(v) ? v : 0.0;
    }

    template <class F>
    double gk(const F& g, double a, double b) {
        auto r = quad::integrate<double>(g, a, b, cfg.abs_tol * 1e-3, inner_rel, cfg.max_segments);
        all_converged = all_converged && r.converged;
        return r.value;
    }
};

// Radial integral from a site along dir over r in (0, rmax], with Jacobian r^jac.
// Slots: [0, R/4], [R/4, R/2], [R/2, R], [R, 2R], [2R, 4R]; nothing beyond 4R.
A5 radial(Ctx& c, int site, const Vec& anchor, const Vec& dir, double rmax, int jac) {
    const double R = c.cfg.box_radius;
    A5 out{};
    auto G = [&](double r) {
        const double v = c.eval(site, anchor, r * dir);
        return jac == 0 ? v : v * std::pow(r, jac);
    };
    const double L0 = std::min(c.cfg.core_radius, 0.5 * rmax);
    if (site >= 0) {
        const double V = c.cfg.near_depth;
        auto Gv = [&](double v) {
            const double r = L0 * std::exp(-v);
            return G(r) * r;
        };
        double near = c.gk(Gv, 0.0, V);
        // Remainder below the map depth, from the local exponential decay rate.
        const double g1 = Gv(V - 1.0), g2 = Gv(V);
        if (g2 != 0.0 && g1 != 0.0 && (g1 > 0) == (g2 > 0)) {
            if (std::abs(g2) < std::abs(g1))
                near += g2 / std::log(g1 / g2);
            else if (std::abs(g2) > 1e-8 * std::abs(near))
                c.site_divergent = true;
        }
        out[0] += near;
    } else {
        out[0] += c.gk(G, 0.0, L0);
    }
    const double cuts[6] = {L0, 0.25 * R, 0.5 * R, R, 2.0 * R, 4.0 * R};
    for (int i = 0; i < 5; ++i) {
        const double a = std::max(cuts[i], L0);
        const double b = std::min(cuts[i + 1], rmax);
        if (!(b > a)) continue;
        auto Gw = [&](double w) {
            const double r = std::exp(w);
            return G(r) * r;
        };
        out[i] += c.gk(Gw, std::log(a), std::log(b));
    }
    return out;
}

// Geometric extrapolation of the tail past the outer edge of shell b, given the
// preceding shell a. NaN when the shells do not decay.
double shell_tail(double a, double b) {
    if (b == 0.0) return 0.0;
    if (a == 0.0) return NAN;
    const double rho = b / a;
    if (!(rho >= 0.0 && rho < 1.0)) return NAN;
    return b * rho / (1.0 - rho);
}

RnResult finalize(int n, const A5& s, const RnConfig& cfg, long evals, bool converged, bool site_div) {
    RnResult res;
    res.evals = evals;
    const double IR = s[0] + s[1] + s[2];
    const double scale = std::abs(IR) + std::abs(s[3]) + std::abs(s[4]);
    const double negligible = 1e-3 * cfg.rel_tol * scale + cfg.abs_tol;
    const double hint_rho = cfg.tail_exponent ? std::exp2(n - *cfg.tail_exponent) : NAN;
    if (cfg.tail_exponent && hint_rho >= 1.0 && std::abs(s[4]) > negligible) site_div = true;
    auto tail = [&](double a, double b) {
        if (std::abs(b) <= negligible) return 0.0;
        if (cfg.tail_exponent) return hint_rho < 1.0 ? b * hint_rho / (1.0 - hint_rho) : NAN;
        return shell_tail(a, b);
    };
    const double t1 = tail(s[1], s[2]);
    const double t2 = tail(s[2], s[3]);
    const double t3 = tail(s[3], s[4]);
    res.totals = {IR + t1, IR + s[3] + t2, IR + s[3] + s[4] + t3};
    res.tail = t3;
    res.value = res.totals[2];
    if (site_div) {
        res.status = Status::diverged;
        res.value = INFINITY;
        return res;
    }
    if (std::isnan(t3)) {
        // The last shell pair does not decay: non-integrable tail.
        const double rho = s[3] != 0.0 ? s[4] / s[3] : INFINITY;
        res.status = rho >= 1.0 ? Status::diverged : Status::inconclusive;
        res.value = res.status == Status::diverged ? std::copysign(INFINITY, s[4]) : IR + s[3] + s[4];
        return res;
    }
    const double T = std::abs(res.value);
    const double tol = std::max(cfg.rel_tol * T, cfg.abs_tol);
    const bool stable = !std::isnan(t1) && !std::isnan(t2) && std::abs(res.totals[2] - res.totals[1]) <= tol &&
                        std::abs(res.totals[1] - res.totals[0]) <= tol;
    res.status = stable && converged ? Status::converged : Status::inconclusive;
    res.error = std::isnan(t2) ? std::abs(t3) : std::abs(res.totals[2] - res.totals[1]);
    return res;
}

double wrap_angle(double a) {
    const double tp = 2.0 * std::numbers::pi;
    a = std::fmod(a, tp);
    return a < 0 ? a + tp : a;
}

// Angles at which the radial extent of the Voronoi cell of site k changes form.
std::vector<double> cell_breakpoints(const std::vector<Vec>& p, std::size_t k) {
    std::vector<double> br = {0.0, 2.0 * std::numbers::pi};
    const double pi = std::numbers::pi;
    for (std::size_t q = 0; q < p.size(); ++q) {
        if (q == k) continue;
        const Vec d = p[q] - p[k];
        const double phi = std::atan2(d[1], d[0]);
        br.push_back(wrap_angle(phi));
        br.push_back(wrap_angle(phi + pi / 2));
        br.push_back(wrap_angle(phi - pi / 2));
    }
    for (std::size_t q1 = 0; q1 < p.size(); ++q1) {
        for (std::size_t q2 = q1 + 1; q2 < p.size(); ++q2) {
            if (q1 == k || q2 == k) continue;
            const Vec a = p[q1] - p[k], b = p[q2] - p[k];
            const double det = 2.0 * (a[0] * b[1] - a[1] * b[0]);
            if (std::abs(det) < 1e-14 * (a.squaredNorm() + b.squaredNorm())) continue;
            Vec c(2);
            c[0] = (b[1] * a.squaredNorm() - a[1] * b.squaredNorm()) / det;
            c[1] = (a[0] * b.squaredNorm() - b[0] * a.squaredNorm()) / det;
            const double rk = c.norm();
            bool vertex = true;
            for (std::size_t r = 0; r < p.size() && vertex; ++r)
                if ((c + p[k] - p[r]).norm() < rk * (1 - 1e-12)) vertex = false;
            if (vertex) br.push_back(wrap_angle(std::atan2(c[1], c[0])));
        }
    }
    std::sort(br.begin(), br.end());
    std::vector<double> out;
    for (double a : br)
        if (out.empty() || a - out.back() > 1e-12) out.push_back(a);
    return out;
}

double cell_extent(const std::vector<Vec>& p, std::size_t k, const Vec& dir) {
    double rmax = INFINITY;
    for (std::size_t q = 0; q < p.size(); ++q) {
        if (q == k) continue;
        const Vec d = p[q] - p[k];
        const double b = d.dot(dir);
        if (b > 0) rmax = std::min(rmax, d.squaredNorm() / (2.0 * b));
    }
    return rmax;
}

std::vector<Vec> unique_sites(int n, const std::vector<Vec>& sites, std::vector<int>& index) {
    std::vector<Vec> out;
    index.clear();
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (sites[i].size() != n) throw std::invalid_argument("integrate_rn: site dimension mismatch");
        bool dup = false;
        for (const Vec& s : out) dup = dup || (s - sites[i]).norm() == 0.0;
        if (!dup) {
            out.push_back(sites[i]);
            index.push_back(static_cast<int>(i));
        }
    }
    if (out.empty()) {
        out.push_back(Vec::Zero(n));
        index.push_back(-1);
    }
    return out;
}

RnResult monte_carlo(int n, const std::vector<Vec>& p, const std::vector<int>& idx, const SiteFn& f,
                     const RnConfig& cfg) {
    // Mixture proposal: a site chosen uniformly, uniform direction, and
    // log-radius with a Student-t(3) law around log(core_radius).
    std::mt19937_64 rng(cfg.mc_seed);
    std::normal_distribution<double> nd;
    std::student_t_distribution<double> td(3.0);
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
    const double scale = 2.0;
    auto t3pdf = [](double x) { return 6.0 * std::sqrt(3.0) / (std::numbers::pi * 9.0 * std::pow(1.0 + x * x / 3.0, 2)); };
    auto density = [&](const Vec& s) {
        double q = 0.0;
        for (const Vec& c : p) {
            const double r = (s - c).norm();
            const double x = (std::log(r) - std::log(cfg.core_radius)) / scale;
            q += t3pdf(x) / scale / (std::pow(r, n) * sphere);
        }
        return q / static_cast<double>(p.size());
    };
    double mean = 0.0, m2 = 0.0;
    long N = std::max<long>(cfg.mc_samples, 2);
    for (long i = 0; i < N; ++i) {
        const std::size_t k = pick(rng);
        Vec dir(n);
        for (int j = 0; j < n; ++j) dir[j] = nd(rng);
        dir.normalize();
        const double r = cfg.core_radius * std::exp(scale * td(rng));
        const Vec off = r * dir;
        double v = f(idx[k], p[k], off);
        if (!std::isfinite(v)) v = 0.0;
        const double w = v / density(p[k] + off);
        const double delta = w - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (w - mean);
    }
    RnResult res;
    res.value = mean;
    res.mc_se = std::sqrt(m2 / static_cast<double>(N - 1) / static_cast<double>(N));
    res.error = res.mc_se;
    res.evals = N;
    res.totals = {mean, mean, mean};
    res.status = res.mc_se <= 0.1 * std::abs(mean) ? Status::converged : Status::inconclusive;
    return res;
}

template <class F>
void run_tasks(std::size_t count, int threads, const F& task) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t j = 0; j < count; ++j) task(j);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t j = next++; j < count; j = next++) task(j);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

RnResult integrate_rn(int n, const std::vector<Vec>& sites, const SiteFn& f, const RnConfig& cfg) {
    if (n < 1) throw std::invalid_argument("integrate_rn: n must be positive");
    std::vector<int> idx;
    std::vector<Vec> p = unique_sites(n, sites, idx);
    if (n >= 3) return monte_carlo(n, p, idx, f, cfg);
    // One task per site cell; partial results are summed in site order.
    struct Part {
        A5 sum{};
        long evals = 0;
        bool converged = true;
        bool site_div = false;
    };
    std::vector<Part> parts(p.size());
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (n == 1)
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a][0] < p[b][0]; });
    auto cell = [&](std::size_t j) {
        Ctx c{f, cfg, std::max(0.1 * cfg.rel_tol, 1e-13)};
        const std::size_t k = order[j];
        A5 total{};
        if (n == 1) {
            const double left = j == 0 ? INFINITY : 0.5 * (p[k][0] - p[order[j - 1]][0]);
            const double right = j + 1 == order.size() ? INFINITY : 0.5 * (p[order[j + 1]][0] - p[k][0]);
            total = total + radial(c, idx[k], p[k], Vec::Constant(1, -1.0), left, 0);
            total = total + radial(c, idx[k], p[k], Vec::Constant(1, 1.0), right, 0);
        } else {
            const std::vector<double> br = cell_breakpoints(p, k);
            auto ang = [&](double th) {
                Vec dir(2);
                dir << std::cos(th), std::sin(th);
                return radial(c, idx[k], p[k], dir, cell_extent(p, k, dir), 1);
            };
            for (std::size_t i = 0; i + 1 < br.size(); ++i) {
                auto r = quad::integrate<A5>(ang, br[i], br[i + 1], cfg.abs_tol * 1e-2, cfg.rel_tol, cfg.max_segments);
                c.all_converged = c.all_converged && r.converged;
                total = total + r.value;
            }
        }
        parts[j] = {total, c.evals, c.all_converged, c.site_divergent};
    };
    run_tasks(parts.size(), cfg.threads, cell);
    A5 total{};
    long evals = 0;
    bool converged = true, site_div = false;
    for (const Part& q : parts) {
        total = total + q.sum;
        evals += q.evals;
        converged = converged && q.converged;
        site_div = site_div || q.site_div;
    }
    return finalize(n, total, cfg, evals, converged, site_div);
}

RnResult integrate_box(const Vec& lo, const Vec& hi, const std::vector<Vec>& sites, const SiteFn& f,
                       const RnConfig& cfg) {
    const int n = static_cast<int>(lo.size());
    if (hi.size() != n || n < 1) throw std::invalid_argument("integrate_box: bad box");
    for (int i = 0; i < n; ++i)
        if (!(hi[i] > lo[i]) || !std::isfinite(hi[i] - lo[i])) throw std::invalid_argument("integrate_box: empty or unbounded box");
    Ctx c{f, cfg, std::max(0.1 * cfg.rel_tol, 1e-13)};
    RnResult res;
    if (n >= 3) {
        std::mt19937_64 rng(cfg.mc_seed);
        std::uniform_real_distribution<double> ud;
        double vol = (hi - lo).prod();
        double mean = 0.0, m2 = 0.0;
        const long N = std::max<long>(cfg.mc_samples, 2);
        for (long i = 0; i < N; ++i) {
            Vec s(n);
            for (int j = 0; j < n; ++j) s[j] = lo[j] + (hi[j] - lo[j]) * ud(rng);
            double v = f(-1, s, Vec::Zero(n));
            if (!std::isfinite(v)) v = 0.0;
            const double d = v * vol - mean;
            mean += d / static_cast<double>(i + 1);
            m2 += d * (v * vol - mean);
        }
        res.value = mean;
        res.mc_se = std::sqrt(m2 / static_cast<double>(N - 1) / static_cast<double>(N));
        res.error = res.mc_se;
        res.evals = N;
        res.totals = {mean, mean, mean};
        return res;
    }
    std::vector<int> idx;
    std::vector<Vec> p = unique_sites(n, sites, idx);
    if (n == 1) {
        // Breakpoints: box ends and interior sites; halves adjacent to a site use
        // the site-anchored radial map.
        struct Bp {
            double x;
            int site;
        };
        std::vector<Bp> bp = {{lo[0], -1}, {hi[0], -1}};
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (idx[k] < 0) continue;
            const double x = p[k][0];
            if (x == lo[0]) bp[0].site = idx[k];
            else if (x == hi[0]) bp[1].site = idx[k];
            else if (x > lo[0] && x < hi[0]) bp.push_back({x, idx[k]});
        }
        std::sort(bp.begin(), bp.end(), [](const Bp& a, const Bp& b) { return a.x < b.x; });
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
            const double half = 0.5 * (bp[i + 1].x - bp[i].x);
            const Bp ends[2] = {bp[i], bp[i + 1]};
            for (int side = 0; side < 2; ++side) {
                const Vec anchor = Vec::Constant(1, ends[side].x);
                const Vec dir = Vec::Constant(1, side == 0 ? 1.0 : -1.0);
                if (ends[side].site >= 0) {
                    A5 r = radial(c, ends[side].site, anchor, dir, half, 0);
                    sum += quad::ValueOps<A5>::total(r);
                } else {
                    auto g = [&](double r) { return c.eval(-1, anchor, r * dir); };
                    sum += c.gk(g, 0.0, half);
                }
            }
        }
        res.value = sum;
    } else {
        std::vector<double> xs = {lo[0], hi[0]}, ys = {lo[1], hi[1]};
        for (const Vec& s : p) {
            if (s[0] > lo[0] && s[0] < hi[0]) xs.push_back(s[0]);
            if (s[1] > lo[1] && s[1] < hi[1]) ys.push_back(s[1]);
        }
        std::sort(xs.begin(), xs.end());
        std::sort(ys.begin(), ys.end());
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            auto inner = [&](double x) {
                double s = 0.0;
                for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
                    Vec anchor(2);
                    anchor << x, ys[j];
                    auto g = [&](double y) {
                        Vec off(2);
                        off << 0.0, y - ys[j];
                        return c.eval(-1, anchor, off);
                    };
                    s += c.gk(g, ys[j], ys[j + 1]);
                }
                return s;
            };
            auto r = quad::integrate<double>(inner, xs[i], xs[i + 1], cfg.abs_tol, cfg.rel_tol, cfg.max_segments);
            c.all_converged = c.all_converged && r.converged;
            sum += r.value;
        }
        res.value = sum;
    }
    res.evals = c.evals;
    res.totals = {res.value, res.value, res.value};
    res.status = c.site_divergent ? Status::diverged : c.all_converged ? Status::converged : Status::inconclusive;
    if (c.site_divergent) res.value = INFINITY;
    return res;
}

}  // namespace tf::cub
