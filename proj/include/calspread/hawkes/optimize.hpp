#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace calspread::hawkes {

struct MinimizeOptions {
    std::size_t max_iters = 200;
    double tolerance = 1e-8; // relative change of the objective
    std::size_t memory = 8;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    double initial_value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool finite = true;
};

/// Objective: returns f(x) and fills grad.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

/// Box-projected L-BFGS with Armijo backtracking. Every accepted step
/// decreases f, so the result is never worse than the starting point.
inline MinimizeResult minimize_lbfgs(const Objective& f, std::vector<double> x, const MinimizeOptions& opt = {}) {
    const std::size_t n = x.size();
    auto project = [&](std::vector<double>& v) {
        for (auto& e : v) {
            e = std::clamp(e, opt.lower, opt.upper);
        }
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    };

    project(x);
    std::vector<double> g(n);
    double fx = f(x, g);
    MinimizeResult res;
    res.initial_value = fx;
    if (!std::isfinite(fx)) {
        res.x = x;
        res.value = fx;
        res.finite = false;
        return res;
    }

    std::deque<std::vector<double>> s_hist;
    std::deque<std::vector<double>> y_hist;
    std::deque<double> rho_hist;
    std::vector<double> d(n);
    std::vector<double> xn(n);
    std::vector<double> gn(n);
    std::size_t quiet = 0;

    for (std::size_t it = 0; it < opt.max_iters; ++it) {
        res.iterations = it + 1;
        // Two-loop recursion for d = -H g.
        std::vector<double> q = g;
        std::vector<double> alphas(s_hist.size());
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alphas[k] = rho_hist[k] * dot(s_hist[k], q);
            for (std::size_t m = 0; m < n; ++m) {
                q[m] -= alphas[k] * y_hist[k][m];
            }
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
        } else {
            const double gnorm = std::sqrt(dot(g, g));
            gamma = gnorm > 0 ? std::min(1.0, 1.0 / gnorm) : 1.0;
        }
        for (auto& e : q) {
            e *= gamma;
        }
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * dot(y_hist[k], q);
            for (std::size_t m = 0; m < n; ++m) {
                q[m] += s_hist[k][m] * (alphas[k] - beta);
            }
        }
        for (std::size_t m = 0; m < n; ++m) {
            d[m] = -q[m];
        }
        // Coordinates pinned at a bound and pushing outward are frozen.
        for (std::size_t m = 0; m < n; ++m) {
            if ((x[m] <= opt.lower && d[m] < 0) || (x[m] >= opt.upper && d[m] > 0)) {
                d[m] = 0.0;
            }
        }
        double slope = dot(g, d);
        if (!(slope < 0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            const double gnorm = std::sqrt(dot(g, g));
            for (std::size_t m = 0; m < n; ++m) {
                d[m] = gnorm > 0 ? -g[m] / std::max(1.0, gnorm) : 0.0;
                if ((x[m] <= opt.lower && d[m] < 0) || (x[m] >= opt.upper && d[m] > 0)) {
                    d[m] = 0.0;
                }
            }
            slope = dot(g, d);
            if (!(slope < 0)) {
                res.converged = true;
                break;
            }
        }

        double step = 1.0;
        double fn = fx;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (std::size_t m = 0; m < n; ++m) {
                xn[m] = x[m] + step * d[m];
            }
            project(xn);
            double actual = 0.0;
            for (std::size_t m = 0; m < n; ++m) {
                actual += g[m] * (xn[m] - x[m]);
            }
            fn = f(xn, gn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * std::min(actual, 0.0)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.converged = true; // no further decrease available at machine precision
            break;
        }
        std::vector<double> s(n);
        std::vector<double> y(n);
        for (std::size_t m = 0; m < n; ++m) {
            s[m] = xn[m] - x[m];
            y[m] = gn[m] - g[m];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        const double change = std::abs(fx - fn) / std::max(1.0, std::abs(fn));
        x.swap(xn);
        g.swap(gn);
        fx = fn;
        quiet = change < opt.tolerance ? quiet + 1 : 0;
        if (quiet >= 2) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    res.value = fx;
    return res;
}

} // namespace calspread::hawkes
