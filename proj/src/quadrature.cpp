#include "temperfield/quadrature.hpp"

#include <cmath>
#include <limits>

namespace tf::quad {

WynnEstimate wynn_epsilon(const std::vector<double>& s) {
    const std::size_t n = s.size();
    if (n == 0) return {0.0, INFINITY};
    if (n < 3) return {s.back(), n == 2 ? std::abs(s[1] - s[0]) : INFINITY};
    // eps[k] holds column k of the epsilon table, rebuilt column by column.
    std::vector<double> prev(n + 1, 0.0);  // column -1 (zeros)
    std::vector<double> cur(s.begin(), s.end());
    double best = s.back();
    double best_err = std::abs(s[n - 1] - s[n - 2]);
    double last_even = s.back();
    for (std::size_t k = 1; k < n; ++k) {
        std::vector<double> next(n - k);
        bool ok = true;
        for (std::size_t i = 0; i + k < n; ++i) {
            double d = cur[i + 1] - cur[i];
            if (d == 0.0 || !std::isfinite(d)) {
                ok = false;
                break;
            }
            next[i] = prev[i + 1] + 1.0 / d;
        }
        if (!ok) break;
        if (k % 2 == 0) {
            // Even columns are estimates of the limit.
            double est = next.back();
            double err = std::abs(est - last_even);
            if (next.size() >= 2) err = std::max(err, std::abs(next.back() - next[next.size() - 2]));
            if (err < best_err) {
                best = est;
                best_err = err;
            }
            last_even = est;
        }
        prev = std::move(cur);
        cur = std::move(next);
        if (cur.size() < 2) break;
    }
    return {best, best_err};
}

}  // namespace tf::quad
