#pragma once

#include "calspread/hawkes/likelihood.hpp"
#include "calspread/hawkes/model.hpp"
#include "calspread/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

namespace calspread::hawkes {

struct SimulationOptions {
    std::size_t max_events = 100'000;
};

struct SimulationResult {
    std::vector<std::vector<double>> times; // per dimension, in (0, horizon]
    bool capped = false;                    // max_events reached; remaining horizon not simulated

    [[nodiscard]] std::size_t total() const {
        std::size_t n = 0;
        for (const auto& t : times) {
            n += t.size();
        }
        return n;
    }
};

/// Ogata thinning conditioned on a history. History times are relative to the
/// simulation origin and must be <= 0; the initial state is built once and
/// reused across runs, so K paths from one model cost one history pass.
class Simulator {
public:
    Simulator(const HawkesModel& model, const EventSeries& history, SimulationOptions opt = {})
        : model_(&model), opt_(opt), d_(model.dim()) {
        if (history.dim() != 0 && history.dim() != d_) {
            fail(Errc::InvalidArgument, "history dimension does not match model");
        }
        if (const auto* k = std::get_if<DiscretizedKernel>(&model.kernel)) {
            disc_ = k;
            width_ = k->bin_width();
            // Suffix maxima give a bound that is non-increasing in elapsed time.
            suffix_max_.assign(d_ * d_ * (k->bins() + 1), 0.0);
            for (std::size_t i = 0; i < d_; ++i) {
                for (std::size_t j = 0; j < d_; ++j) {
                    double m = 0.0;
                    for (std::size_t b = k->bins(); b-- > 0;) {
                        m = std::max(m, k->values[b](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                        suffix_max_[(i * d_ + j) * (k->bins() + 1) + b] = m;
                    }
                }
            }
            for (std::size_t j = 0; j < history.dim(); ++j) {
                for (double t : history.times[j]) {
                    if (t <= 0.0 && -t < k->support) {
                        initial_active_.push_back({t, j});
                    }
                }
            }
            std::stable_sort(initial_active_.begin(), initial_active_.end(),
                             [](const Active& a, const Active& b) { return a.t < b.t; });
        } else {
            for (std::size_t i = 0; i < d_; ++i) {
                for (const auto& term : detail::exp_terms(model, i)) {
                    if (term.alpha == 0.0) {
                        continue;
                    }
                    double s = 0.0;
                    if (history.dim() != 0) {
                        for (double t : history.times[term.j]) {
                            if (t <= 0.0) {
                                s += std::exp(term.beta * t);
                            }
                        }
                    }
                    terms_.push_back({i, term.j, term.alpha, term.beta, s});
                }
            }
        }
    }

    SimulationResult run(double horizon, std::uint64_t seed) const {
        Rng rng(seed);
        return run(horizon, rng);
    }

    SimulationResult run(double horizon, Rng& rng) const {
        if (!(horizon > 0.0)) {
            fail(Errc::InvalidArgument, "simulation horizon must be positive");
        }
        SimulationResult out;
        out.times.resize(d_);
        if (disc_) {
            run_discretized(horizon, rng, out);
        } else {
            run_exponential(horizon, rng, out);
        }
        return out;
    }

private:
    struct Term {
        std::size_t i, j;
        double alpha, beta, state;
    };
    struct Active {
        double t;
        std::size_t j;
    };

    void run_exponential(double horizon, Rng& rng, SimulationResult& out) const {
        std::vector<Term> terms = terms_;
        std::vector<double> lambda(d_);
        auto intensities = [&]() {
            double total = 0.0;
            for (std::size_t i = 0; i < d_; ++i) {
                lambda[i] = model_->mu(static_cast<Eigen::Index>(i));
            }
            for (const auto& term : terms) {
                lambda[term.i] += term.alpha * term.state;
            }
            for (double l : lambda) {
                total += l;
            }
            return total;
        };
        double t = 0.0;
        std::size_t count = 0;
        double bound = intensities();
        while (bound > 0.0) {
            const double dt = rng.exponential(bound);
            t += dt;
            if (t > horizon) {
                break;
            }
            for (auto& term : terms) {
                term.state *= std::exp(-term.beta * dt);
            }
            const double total = intensities();
            const double u = rng.uniform() * bound;
            if (u < total) {
                std::size_t dim = 0;
                double acc = lambda[0];
                while (acc <= u && dim + 1 < d_) {
                    acc += lambda[++dim];
                }
                out.times[dim].push_back(t);
                for (auto& term : terms) {
                    if (term.j == dim) {
                        term.state += 1.0;
                    }
                }
                if (++count >= opt_.max_events) {
                    out.capped = true;
                    return;
                }
                bound = intensities();
            } else {
                bound = total; // intensity only decays until the next event
            }
        }
    }

    void run_discretized(double horizon, Rng& rng, SimulationResult& out) const {
        const auto& k = *disc_;
        const std::size_t nb = k.bins();
        std::deque<Active> active(initial_active_.begin(), initial_active_.end());
        std::vector<double> lambda(d_);
        auto prune = [&](double now) {
            while (!active.empty() && now - active.front().t >= k.support) {
                active.pop_front();
            }
        };
        auto bin_of = [&](double elapsed) {
            return std::min(static_cast<std::size_t>(elapsed / width_), nb);
        };
        auto upper = [&](double now) {
            double total = 0.0;
            for (std::size_t i = 0; i < d_; ++i) {
                total += model_->mu(static_cast<Eigen::Index>(i));
            }
            for (const auto& a : active) {
                const std::size_t b = bin_of(now - a.t);
                for (std::size_t i = 0; i < d_; ++i) {
                    total += suffix_max_[(i * d_ + a.j) * (nb + 1) + b];
                }
            }
            return total;
        };
        auto intensities = [&](double now) {
            double total = 0.0;
            for (std::size_t i = 0; i < d_; ++i) {
                lambda[i] = model_->mu(static_cast<Eigen::Index>(i));
            }
            for (const auto& a : active) {
                const double elapsed = now - a.t;
                if (elapsed <= 0.0) {
                    continue;
                }
                const std::size_t b = bin_of(elapsed);
                if (b >= nb) {
                    continue;
                }
                for (std::size_t i = 0; i < d_; ++i) {
                    lambda[i] += k.values[b](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a.j));
                }
            }
            for (double l : lambda) {
                total += l;
            }
            return total;
        };
        double t = 0.0;
        std::size_t count = 0;
        while (true) {
            prune(t);
            const double bound = upper(t);
            if (!(bound > 0.0)) {
                break;
            }
            t += rng.exponential(bound);
            if (t > horizon) {
                break;
            }
            prune(t);
            const double total = intensities(t);
            const double u = rng.uniform() * bound;
            if (u < total) {
                std::size_t dim = 0;
                double acc = lambda[0];
                while (acc <= u && dim + 1 < d_) {
                    acc += lambda[++dim];
                }
                out.times[dim].push_back(t);
                active.push_back({t, dim});
                if (++count >= opt_.max_events) {
                    out.capped = true;
                    return;
                }
            }
        }
    }

    const HawkesModel* model_;
    SimulationOptions opt_;
    std::size_t d_;
    std::vector<Term> terms_;
    const DiscretizedKernel* disc_ = nullptr;
    double width_ = 0.0;
    std::vector<double> suffix_max_;
    std::vector<Active> initial_active_;
};

/// One conditional path over (0, horizon] from a fixed seed.
inline SimulationResult simulate_thinning(const HawkesModel& model, const EventSeries& history, double horizon,
                                          std::uint64_t seed, SimulationOptions opt = {}) {
    return Simulator(model, history, opt).run(horizon, seed);
}

} // namespace calspread::hawkes
