#include "dyncontract/piecewise.hpp"

#include "dyncontract/game.hpp"

#include <algorithm>
#include <cmath>

namespace dyncontract {

std::vector<double> upper_concave_envelope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidInput("envelope input size mismatch");
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(y[i])) continue;
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2], b = hull.back();
            // drop b when it lies on or below the chord from a to i
            const double cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if (cross >= 0.0) hull.pop_back();
            else break;
        }
        hull.push_back(i);
    }
    std::vector<double> out(x.size(), -INFINITY);
    if (hull.empty()) return out;
    std::size_t h = 0;
    for (std::size_t i = hull.front(); i <= hull.back(); ++i) {
        while (h + 1 < hull.size() && hull[h + 1] <= i) ++h;
        if (hull[h] == i) {
            out[i] = y[i];
            continue;
        }
        const std::size_t a = hull[h], b = hull[h + 1];
        const double t = (x[i] - x[a]) / (x[b] - x[a]);
        out[i] = std::max(y[i], y[a] + t * (y[b] - y[a]));
    }
    return out;
}

std::size_t right_segment(const std::vector<double>& x, double at) {
    if (x.size() < 2) throw OutOfRange("need at least two knots");
    const double tol = 1e-12 * (1.0 + std::abs(x.back()) + std::abs(x.front()));
    if (at < x.front() - tol || at > x.back() + tol) throw OutOfRange("point outside the knot range");
    auto it = std::upper_bound(x.begin(), x.end(), at + tol);
    std::size_t m = std::size_t(it - x.begin());
    m = m == 0 ? 0 : m - 1;
    return std::min(m, x.size() - 2);
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
    const std::size_t m = right_segment(x, at);
    if (std::abs(at - x[m]) <= 0.0) return y[m];
    if (!std::isfinite(y[m]) || !std::isfinite(y[m + 1])) {
        if (at == x[m + 1]) return y[m + 1];
        return -INFINITY;
    }
    const double t = (at - x[m]) / (x[m + 1] - x[m]);
    return y[m] + t * (y[m + 1] - y[m]);
}

bool is_concave(const std::vector<double>& x, const std::vector<double>& y, double tol) {
    double prev = INFINITY;
    for (std::size_t m = 0; m + 1 < x.size(); ++m) {
        if (!std::isfinite(y[m]) || !std::isfinite(y[m + 1])) continue;
        const double s = (y[m + 1] - y[m]) / (x[m + 1] - x[m]);
        if (s > prev + tol) return false;
        prev = s;
    }
    return true;
}

}  // namespace dyncontract
