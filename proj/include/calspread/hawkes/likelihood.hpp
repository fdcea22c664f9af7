#pragma once

#include "calspread/hawkes/model.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace calspread::hawkes {

/// Per-dimension sorted event times in seconds, observed on [0, horizon).
struct EventSeries {
    double horizon = 0.0;
    std::vector<std::vector<double>> times;

    EventSeries() = default;
    EventSeries(double h, std::size_t d) : horizon(h), times(d) {}

    [[nodiscard]] std::size_t dim() const { return times.size(); }
    [[nodiscard]] std::size_t total() const {
        std::size_t n = 0;
        for (const auto& t : times) {
            n += t.size();
        }
        return n;
    }
};

namespace detail {

/// One exponential term feeding row i: alpha * exp(-beta (t - t_l)) summed over
/// events t_l of dimension j.
struct ExpTerm {
    std::size_t j = 0;
    double alpha = 0.0;
    double beta = 1.0;
};

inline std::vector<ExpTerm> exp_terms(const HawkesModel& model, std::size_t i) {
    std::vector<ExpTerm> terms;
    const auto ii = static_cast<Eigen::Index>(i);
    if (const auto* k = std::get_if<ExponentialKernel>(&model.kernel)) {
        for (Eigen::Index j = 0; j < k->alpha.cols(); ++j) {
            terms.push_back({static_cast<std::size_t>(j), k->alpha(ii, j), k->beta(ii, j)});
        }
    } else if (const auto* k = std::get_if<SumExponentialKernel>(&model.kernel)) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(model.dim()); ++j) {
            for (std::size_t u = 0; u < k->betas.size(); ++u) {
                terms.push_back({static_cast<std::size_t>(j), k->alpha[u](ii, j), k->betas[u]});
            }
        }
    }
    return terms;
}

} // namespace detail

/// Log-likelihood of one row (target dimension i) for a sum of exponential
/// terms. Built once per (series, row); evaluate() is O(sum over terms of
/// N_i + N_j) through the usual recursion, with each term's sources merged
/// into the row's event times. Sources at exactly the same time as a target
/// event do not excite it.
class ExpRowLikelihood {
public:
    ExpRowLikelihood(const EventSeries& series, std::size_t i, std::vector<std::size_t> sources)
        : series_(&series), i_(i), sources_(std::move(sources)) {
        const auto& ti = series.times[i];
        for (std::size_t j : sources_) {
            auto& cut = cuts_.emplace_back();
            cut.reserve(ti.size());
            const auto& tj = series.times[j];
            for (double t : ti) {
                cut.push_back(static_cast<std::size_t>(std::lower_bound(tj.begin(), tj.end(), t) - tj.begin()));
            }
        }
    }

    [[nodiscard]] std::size_t events() const { return series_->times[i_].size(); }
    [[nodiscard]] std::size_t terms() const { return sources_.size(); }

    /// Returns the row log-likelihood. When `grad` is given it receives
    /// [d/dmu, d/dalpha_c..., d/dbeta_c...] (size 1 + 2C).
    double evaluate(double mu, std::span<const double> alpha, std::span<const double> beta,
                    std::vector<double>* grad = nullptr) const {
        const auto& ti = series_->times[i_];
        const double horizon = series_->horizon;
        const std::size_t n = ti.size();
        const std::size_t c_count = sources_.size();
        lambda_.assign(n, mu);
        if (grad) {
            s_.assign(c_count * n, 0.0);
            b_.assign(c_count * n, 0.0);
        }
        double compensator = mu * horizon;
        for (std::size_t c = 0; c < c_count; ++c) {
            const auto& tj = series_->times[sources_[c]];
            const double a = alpha[c];
            const double be = beta[c];
            if (a == 0.0 && !grad) {
                continue;
            }
            double s = 0.0;
            double bsum = 0.0;
            std::size_t next = 0;
            double prev = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double t = ti[k];
                if (k > 0) {
                    const double dt = t - prev;
                    const double e = std::exp(-be * dt);
                    bsum = e * (bsum + dt * s);
                    s *= e;
                }
                for (const std::size_t hi = cuts_[c][k]; next < hi; ++next) {
                    const double d = t - tj[next];
                    const double e = std::exp(-be * d);
                    s += e;
                    bsum += d * e;
                }
                prev = t;
                lambda_[k] += a * s;
                if (grad) {
                    s_[c * n + k] = s;
                    b_[c * n + k] = bsum;
                }
            }
            double comp = 0.0;
            double dcomp = 0.0;
            for (double tl : tj) {
                const double tau = horizon - tl;
                if (tau <= 0.0) {
                    continue;
                }
                const double e = std::exp(-be * tau);
                comp += 1.0 - e;
                dcomp += tau * e / be - (1.0 - e) / (be * be);
            }
            compensator += a / be * comp;
            if (grad) {
                comp_.resize(c_count);
                dcomp_.resize(c_count);
                comp_[c] = comp / be;
                dcomp_[c] = dcomp;
            }
        }
        double ll = -compensator;
        for (std::size_t k = 0; k < n; ++k) {
            ll += std::log(lambda_[k]);
        }
        if (grad) {
            grad->assign(1 + 2 * c_count, 0.0);
            auto& g = *grad;
            g[0] = -horizon;
            for (std::size_t k = 0; k < n; ++k) {
                g[0] += 1.0 / lambda_[k];
            }
            for (std::size_t c = 0; c < c_count; ++c) {
                double gs = 0.0;
                double gb = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double inv = 1.0 / lambda_[k];
                    gs += s_[c * n + k] * inv;
                    gb += b_[c * n + k] * inv;
                }
                g[1 + c] = gs - comp_[c];
                g[1 + c_count + c] = -alpha[c] * gb - alpha[c] * dcomp_[c];
            }
        }
        return ll;
    }

private:
    const EventSeries* series_;
    std::size_t i_;
    std::vector<std::size_t> sources_;
    std::vector<std::vector<std::size_t>> cuts_; // per term: first source index at or after each target time
    mutable std::vector<double> lambda_, s_, b_, comp_, dcomp_;
};

/// Intensity of dimension i at each of its own events plus the row's
/// compensator, for a discretized kernel (direct summation over the support).
inline double discretized_row_loglik(const HawkesModel& model, const DiscretizedKernel& k, const EventSeries& series,
                                     std::size_t i) {
    const auto& ti = series.times[i];
    const double width = k.bin_width();
    const auto ii = static_cast<Eigen::Index>(i);
    double ll = -model.mu(ii) * series.horizon;
    for (std::size_t j = 0; j < series.dim(); ++j) {
        const auto& tj = series.times[j];
        for (double tl : tj) {
            for (std::size_t b = 0; b < k.bins(); ++b) {
                const double start = tl + static_cast<double>(b) * width;
                const double overlap = std::clamp(series.horizon - start, 0.0, width);
                ll -= k.values[b](ii, static_cast<Eigen::Index>(j)) * overlap;
            }
        }
    }
    for (double t : ti) {
        double lambda = model.mu(ii);
        for (std::size_t j = 0; j < series.dim(); ++j) {
            const auto& tj = series.times[j];
            auto lo = std::lower_bound(tj.begin(), tj.end(), t - k.support);
            for (; lo != tj.end() && *lo < t; ++lo) {
                const auto bin = static_cast<std::size_t>((t - *lo) / width);
                if (bin < k.bins()) {
                    lambda += k.values[bin](ii, static_cast<Eigen::Index>(j));
                }
            }
        }
        ll += std::log(lambda);
    }
    return ll;
}

/// Full log-likelihood of `series` under `model` over [0, horizon).
inline double log_likelihood(const HawkesModel& model, const EventSeries& series) {
    if (series.dim() != model.dim()) {
        fail(Errc::InvalidArgument, "series dimension does not match model");
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < model.dim(); ++i) {
        if (const auto* k = std::get_if<DiscretizedKernel>(&model.kernel)) {
            ll += discretized_row_loglik(model, *k, series, i);
            continue;
        }
        const auto terms = detail::exp_terms(model, i);
        std::vector<std::size_t> sources;
        std::vector<double> alpha;
        std::vector<double> beta;
        for (const auto& t : terms) {
            sources.push_back(t.j);
            alpha.push_back(t.alpha);
            beta.push_back(t.beta);
        }
        const ExpRowLikelihood row(series, i, std::move(sources));
        ll += row.evaluate(model.mu(static_cast<Eigen::Index>(i)), alpha, beta);
    }
    return ll;
}

/// Intensity lambda_i(t) given every event strictly before t in `series`.
inline double intensity(const HawkesModel& model, const EventSeries& series, std::size_t i, double t) {
    const auto ii = static_cast<Eigen::Index>(i);
    double lambda = model.mu(ii);
    if (const auto* k = std::get_if<DiscretizedKernel>(&model.kernel)) {
        for (std::size_t j = 0; j < series.dim(); ++j) {
            for (double tl : series.times[j]) {
                if (tl < t && t - tl < k->support) {
                    const auto bin = static_cast<std::size_t>((t - tl) / k->bin_width());
                    if (bin < k->bins()) {
                        lambda += k->values[bin](ii, static_cast<Eigen::Index>(j));
                    }
                }
            }
        }
        return lambda;
    }
    for (const auto& term : detail::exp_terms(model, i)) {
        for (double tl : series.times[term.j]) {
            if (tl < t) {
                lambda += term.alpha * std::exp(-term.beta * (t - tl));
            }
        }
    }
    return lambda;
}

/// Integral of lambda_i over (a, b] for an exponential-family model; events in
/// `series` before b contribute. Used for time-rescaling residuals.
inline double compensator_between(const HawkesModel& model, const EventSeries& series, std::size_t i, double a,
                                  double b) {
    const auto ii = static_cast<Eigen::Index>(i);
    double total = model.mu(ii) * (b - a);
    if (const auto* k = std::get_if<DiscretizedKernel>(&model.kernel)) {
        const double width = k->bin_width();
        for (std::size_t j = 0; j < series.dim(); ++j) {
            for (double tl : series.times[j]) {
                if (tl >= b) {
                    break;
                }
                for (std::size_t bin = 0; bin < k->bins(); ++bin) {
                    const double lo = std::max(a, tl + static_cast<double>(bin) * width);
                    const double hi = std::min(b, tl + static_cast<double>(bin + 1) * width);
                    if (hi > lo) {
                        total += k->values[bin](ii, static_cast<Eigen::Index>(j)) * (hi - lo);
                    }
                }
            }
        }
        return total;
    }
    for (const auto& term : detail::exp_terms(model, i)) {
        for (double tl : series.times[term.j]) {
            if (tl >= b) {
                break;
            }
            const double lo = std::max(a, tl);
            total += term.alpha / term.beta * (std::exp(-term.beta * (lo - tl)) - std::exp(-term.beta * (b - tl)));
        }
    }
    return total;
}

/// Time-rescaled inter-arrival residuals of a 1-D (or single-row) process with
/// exponential kernels, computed recursively in O(N). Under the true model
/// they are i.i.d. Exp(1).
inline std::vector<double> rescaled_residuals(const HawkesModel& model, const EventSeries& series, std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto terms = detail::exp_terms(model, i);
    std::vector<double> out;
    // Merge all events by time once; state per term tracks sum exp(-beta (t - t_l)).
    struct Ev {
        double t;
        std::size_t dim;
    };
    std::vector<Ev> all;
    for (std::size_t j = 0; j < series.dim(); ++j) {
        for (double t : series.times[j]) {
            all.push_back({t, j});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Ev& a, const Ev& b) { return a.t < b.t; });
    std::vector<double> state(terms.size(), 0.0);
    double last = 0.0;
    double acc = 0.0;
    for (const auto& ev : all) {
        const double dt = ev.t - last;
        acc += model.mu(ii) * dt;
        for (std::size_t c = 0; c < terms.size(); ++c) {
            const double decay = std::exp(-terms[c].beta * dt);
            acc += terms[c].alpha / terms[c].beta * state[c] * (1.0 - decay);
            state[c] *= decay;
        }
        last = ev.t;
        if (ev.dim == i) {
            out.push_back(acc);
            acc = 0.0;
        }
        for (std::size_t c = 0; c < terms.size(); ++c) {
            if (terms[c].j == ev.dim) {
                state[c] += 1.0;
            }
        }
    }
    return out;
}

} // namespace calspread::hawkes
