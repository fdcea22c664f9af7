#pragma once

#include "calspread/hawkes/likelihood.hpp"
#include "calspread/hawkes/model.hpp"
#include "calspread/hawkes/optimize.hpp"

#include <cmath>
#include <vector>

namespace calspread::hawkes {

struct FitConfig {
    std::size_t max_iters = 200;
    double tolerance = 1e-8;
    std::vector<double> sumexp_betas{10.0, 100.0, 1000.0};
    std::size_t em_bins = 20;
    double em_support = 0.1; // seconds
    std::size_t em_max_iters = 500;
};

struct FitResult {
    HawkesModel model;
    double log_likelihood = 0.0;
    double initial_log_likelihood = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool unstable = false;
    double spectral_radius = 0.0;
};

namespace detail {

// Log-parameter box: keeps exp() finite and strictly positive.
inline constexpr double kLogLower = -27.6; // ~1e-12
inline constexpr double kLogUpper = 16.1;  // ~1e7

inline void check_series(const EventSeries& series) {
    if (!(series.horizon > 0.0)) {
        fail(Errc::InvalidArgument, "fit window must have positive length");
    }
    if (series.total() == 0) {
        fail(Errc::NoEvents, "no events in the fit window");
    }
}

inline void finish(FitResult& r) {
    if (!std::isfinite(r.log_likelihood)) {
        fail(Errc::Diverged, "non-finite log-likelihood after fit");
    }
    r.spectral_radius = branching_ratio(r.model);
    r.unstable = r.spectral_radius >= 1.0;
}

inline double initial_beta(const EventSeries& series) {
    // 1 / mean inter-arrival time of the pooled process.
    return static_cast<double>(series.total()) / series.horizon;
}

} // namespace detail

/// Exponential-kernel MLE. Rows decouple, so each dimension's (mu_i, alpha_i., beta_i.)
/// is fit separately in log-parameter space.
inline FitResult fit_exponential_mle(const EventSeries& series, const FitConfig& cfg = {}, EventTypeIndex index = {}) {
    detail::check_series(series);
    const std::size_t d = series.dim();
    const auto di = static_cast<Eigen::Index>(d);
    if (index.dim() == 0) {
        index = numbered_index(d);
    }
    const double beta0 = detail::initial_beta(series);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(di);
    Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(di, di);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(di, di, beta0);

    FitResult res;
    res.converged = true;
    std::vector<std::size_t> sources(d);
    for (std::size_t j = 0; j < d; ++j) {
        sources[j] = j;
    }
    for (std::size_t i = 0; i < d; ++i) {
        const auto n_i = series.times[i].size();
        if (n_i == 0) {
            continue; // mu = alpha = 0 maximizes a row without events
        }
        const ExpRowLikelihood row(series, i, sources);
        std::vector<double> a(d);
        std::vector<double> b(d);
        std::vector<double> g;
        auto objective = [&](const std::vector<double>& th, std::vector<double>& grad) {
            const double m = std::exp(th[0]);
            for (std::size_t c = 0; c < d; ++c) {
                a[c] = std::exp(th[1 + c]);
                b[c] = std::exp(th[1 + d + c]);
            }
            const double ll = row.evaluate(m, a, b, &g);
            grad.resize(th.size());
            grad[0] = -g[0] * m;
            for (std::size_t c = 0; c < d; ++c) {
                grad[1 + c] = -g[1 + c] * a[c];
                grad[1 + d + c] = -g[1 + d + c] * b[c];
            }
            return -ll;
        };
        std::vector<double> th(1 + 2 * d);
        th[0] = std::log(static_cast<double>(n_i) / series.horizon);
        for (std::size_t c = 0; c < d; ++c) {
            th[1 + c] = std::log(0.1);
            th[1 + d + c] = std::log(beta0);
        }
        MinimizeOptions opt;
        opt.max_iters = cfg.max_iters;
        opt.tolerance = cfg.tolerance;
        opt.lower = detail::kLogLower;
        opt.upper = detail::kLogUpper;
        const auto r = minimize_lbfgs(objective, th, opt);
        if (!r.finite || !std::isfinite(r.value)) {
            fail(Errc::Diverged, "non-finite log-likelihood in row " + std::to_string(i));
        }
        const auto ii = static_cast<Eigen::Index>(i);
        mu(ii) = std::exp(r.x[0]);
        for (std::size_t c = 0; c < d; ++c) {
            alpha(ii, static_cast<Eigen::Index>(c)) = std::exp(r.x[1 + c]);
            beta(ii, static_cast<Eigen::Index>(c)) = std::exp(r.x[1 + d + c]);
        }
        res.log_likelihood += -r.value;
        res.initial_log_likelihood += -r.initial_value;
        res.iterations = std::max(res.iterations, r.iterations);
        res.converged = res.converged && r.converged;
    }
    res.model = exponential_model(mu, alpha, beta, std::move(index));
    detail::finish(res);
    return res;
}

/// Sum-of-exponentials MLE with fixed decay rates and free amplitudes.
inline FitResult fit_sum_exponential_mle(const EventSeries& series, const FitConfig& cfg = {},
                                         EventTypeIndex index = {}) {
    detail::check_series(series);
    if (cfg.sumexp_betas.empty()) {
        fail(Errc::InvalidArgument, "sum-of-exponentials needs at least one decay rate");
    }
    const std::size_t d = series.dim();
    const std::size_t u_count = cfg.sumexp_betas.size();
    const auto di = static_cast<Eigen::Index>(d);
    if (index.dim() == 0) {
        index = numbered_index(d);
    }
    SumExponentialKernel kernel;
    kernel.betas = cfg.sumexp_betas;
    kernel.alpha.assign(u_count, Eigen::MatrixXd::Zero(di, di));
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(di);

    FitResult res;
    res.converged = true;
    // Terms ordered (j, u).
    std::vector<std::size_t> sources;
    std::vector<double> betas;
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t u = 0; u < u_count; ++u) {
            sources.push_back(j);
            betas.push_back(cfg.sumexp_betas[u]);
        }
    }
    const std::size_t terms = sources.size();
    for (std::size_t i = 0; i < d; ++i) {
        const auto n_i = series.times[i].size();
        if (n_i == 0) {
            continue;
        }
        const ExpRowLikelihood row(series, i, sources);
        std::vector<double> a(terms);
        std::vector<double> g;
        auto objective = [&](const std::vector<double>& th, std::vector<double>& grad) {
            const double m = std::exp(th[0]);
            for (std::size_t c = 0; c < terms; ++c) {
                a[c] = std::exp(th[1 + c]);
            }
            const double ll = row.evaluate(m, a, betas, &g);
            grad.resize(th.size());
            grad[0] = -g[0] * m;
            for (std::size_t c = 0; c < terms; ++c) {
                grad[1 + c] = -g[1 + c] * a[c];
            }
            return -ll;
        };
        std::vector<double> th(1 + terms, std::log(0.1));
        th[0] = std::log(static_cast<double>(n_i) / series.horizon);
        MinimizeOptions opt;
        opt.max_iters = cfg.max_iters;
        opt.tolerance = cfg.tolerance;
        opt.lower = detail::kLogLower;
        opt.upper = detail::kLogUpper;
        const auto r = minimize_lbfgs(objective, th, opt);
        if (!r.finite || !std::isfinite(r.value)) {
            fail(Errc::Diverged, "non-finite log-likelihood in row " + std::to_string(i));
        }
        const auto ii = static_cast<Eigen::Index>(i);
        mu(ii) = std::exp(r.x[0]);
        for (std::size_t c = 0; c < terms; ++c) {
            kernel.alpha[c % u_count](ii, static_cast<Eigen::Index>(c / u_count)) = std::exp(r.x[1 + c]);
        }
        res.log_likelihood += -r.value;
        res.initial_log_likelihood += -r.initial_value;
        res.iterations = std::max(res.iterations, r.iterations);
        res.converged = res.converged && r.converged;
    }
    res.model = HawkesModel{std::move(index), mu, std::move(kernel)};
    detail::finish(res);
    return res;
}

/// EM for a piecewise-constant kernel on em_bins bins over [0, em_support).
/// Each target event is attributed to the background or to one earlier event
/// within the support; the M-step divides attributed mass by the exact exposure
/// of each bin inside the window, so every iteration is a true EM step and the
/// likelihood never decreases.
inline FitResult fit_em_nonparametric(const EventSeries& series, const FitConfig& cfg = {},
                                      EventTypeIndex index = {}) {
    detail::check_series(series);
    if (cfg.em_bins == 0 || !(cfg.em_support > 0.0)) {
        fail(Errc::InvalidArgument, "EM needs at least one bin and a positive support");
    }
    const std::size_t d = series.dim();
    const std::size_t nb = cfg.em_bins;
    const double width = cfg.em_support / static_cast<double>(nb);
    const double horizon = series.horizon;
    if (index.dim() == 0) {
        index = numbered_index(d);
    }
    auto slot = [&](std::size_t i, std::size_t j, std::size_t b) { return (i * d + j) * nb + b; };

    // Exposure of each (source dim, bin) inside the window.
    std::vector<double> exposure(d * nb, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (double tl : series.times[j]) {
            for (std::size_t b = 0; b < nb; ++b) {
                exposure[j * nb + b] += std::clamp(horizon - tl - static_cast<double>(b) * width, 0.0, width);
            }
        }
    }
    // Candidate parents per target event: flat list of slot indices.
    struct Row {
        std::vector<std::size_t> offsets; // size n_i + 1
        std::vector<std::size_t> slots;
    };
    std::vector<Row> rows(d);
    for (std::size_t i = 0; i < d; ++i) {
        auto& row = rows[i];
        row.offsets.push_back(0);
        for (double t : series.times[i]) {
            for (std::size_t j = 0; j < d; ++j) {
                const auto& tj = series.times[j];
                auto lo = std::upper_bound(tj.begin(), tj.end(), t - cfg.em_support);
                for (; lo != tj.end() && *lo < t; ++lo) {
                    const auto b = static_cast<std::size_t>((t - *lo) / width);
                    if (b < nb) {
                        row.slots.push_back(slot(i, j, b));
                    }
                }
            }
            row.offsets.push_back(row.slots.size());
        }
    }

    std::vector<double> mu(d, 0.0);
    std::vector<double> v(d * d * nb, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const auto n_i = static_cast<double>(series.times[i].size());
        if (n_i == 0) {
            continue;
        }
        mu[i] = 0.5 * n_i / horizon;
        for (std::size_t j = 0; j < d; ++j) {
            double exp_total = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                exp_total += exposure[j * nb + b];
            }
            if (exp_total <= 0) {
                continue;
            }
            for (std::size_t b = 0; b < nb; ++b) {
                if (exposure[j * nb + b] > 0) {
                    v[slot(i, j, b)] = 0.5 * n_i / (static_cast<double>(d) * exp_total);
                }
            }
        }
    }

    auto loglik = [&]() {
        double ll = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            ll -= mu[i] * horizon;
            for (std::size_t j = 0; j < d; ++j) {
                for (std::size_t b = 0; b < nb; ++b) {
                    ll -= v[slot(i, j, b)] * exposure[j * nb + b];
                }
            }
            const auto& row = rows[i];
            for (std::size_t k = 0; k + 1 < row.offsets.size(); ++k) {
                double lambda = mu[i];
                for (std::size_t p = row.offsets[k]; p < row.offsets[k + 1]; ++p) {
                    lambda += v[row.slots[p]];
                }
                ll += std::log(lambda);
            }
        }
        return ll;
    };

    FitResult res;
    double ll = loglik();
    res.initial_log_likelihood = ll;
    std::vector<double> num(v.size());
    for (std::size_t it = 0; it < cfg.em_max_iters; ++it) {
        res.iterations = it + 1;
        std::fill(num.begin(), num.end(), 0.0);
        std::vector<double> background(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const auto& row = rows[i];
            for (std::size_t k = 0; k + 1 < row.offsets.size(); ++k) {
                double lambda = mu[i];
                for (std::size_t p = row.offsets[k]; p < row.offsets[k + 1]; ++p) {
                    lambda += v[row.slots[p]];
                }
                background[i] += mu[i] / lambda;
                for (std::size_t p = row.offsets[k]; p < row.offsets[k + 1]; ++p) {
                    num[row.slots[p]] += v[row.slots[p]] / lambda;
                }
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            mu[i] = background[i] / horizon;
            for (std::size_t j = 0; j < d; ++j) {
                for (std::size_t b = 0; b < nb; ++b) {
                    const double e = exposure[j * nb + b];
                    v[slot(i, j, b)] = e > 0 ? num[slot(i, j, b)] / e : 0.0;
                }
            }
        }
        const double next = loglik();
        if (!std::isfinite(next)) {
            fail(Errc::Diverged, "non-finite log-likelihood during EM");
        }
        if (next < ll - 1e-9 * std::max(1.0, std::abs(ll))) {
            fail(Errc::NonMonotoneEM, "EM log-likelihood decreased from " + std::to_string(ll) + " to " +
                                          std::to_string(next));
        }
        const double change = std::abs(next - ll) / std::max(1.0, std::abs(next));
        ll = next;
        if (change < cfg.tolerance) {
            res.converged = true;
            break;
        }
    }

    DiscretizedKernel kernel;
    kernel.support = cfg.em_support;
    const auto di = static_cast<Eigen::Index>(d);
    kernel.values.assign(nb, Eigen::MatrixXd::Zero(di, di));
    Eigen::VectorXd mu_vec(di);
    for (std::size_t i = 0; i < d; ++i) {
        mu_vec(static_cast<Eigen::Index>(i)) = mu[i];
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t b = 0; b < nb; ++b) {
                kernel.values[b](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[slot(i, j, b)];
            }
        }
    }
    res.model = HawkesModel{std::move(index), mu_vec, std::move(kernel)};
    res.log_likelihood = ll;
    detail::finish(res);
    return res;
}

inline FitResult fit(KernelKind kind, const EventSeries& series, const FitConfig& cfg = {},
                     EventTypeIndex index = {}) {
    switch (kind) {
    case KernelKind::Exponential: return fit_exponential_mle(series, cfg, std::move(index));
    case KernelKind::SumExponential: return fit_sum_exponential_mle(series, cfg, std::move(index));
    case KernelKind::Discretized: return fit_em_nonparametric(series, cfg, std::move(index));
    }
    fail(Errc::InvalidArgument, "unknown kernel kind");
}

} // namespace calspread::hawkes
