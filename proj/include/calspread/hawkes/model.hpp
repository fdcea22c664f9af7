#pragma once

#include "calspread/error.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace calspread::hawkes {

/// Ordered labels of the process dimensions.
struct EventTypeIndex {
    std::vector<std::string> labels;

    [[nodiscard]] std::size_t dim() const { return labels.size(); }
    bool operator==(const EventTypeIndex&) const = default;
};

/// T_A, T_B, C_A, C_B, PDM_A, PDM_B: the reference-impacting types.
inline EventTypeIndex reference_index() { return {{"T_A", "T_B", "C_A", "C_B", "PDM_A", "PDM_B"}}; }

/// Reference types plus the remaining (non-impacting) flow on each side.
inline EventTypeIndex all_events_index() {
    return {{"T_A", "T_B", "C_A", "C_B", "PDM_A", "PDM_B", "O_A", "O_B"}};
}

inline EventTypeIndex numbered_index(std::size_t d) {
    EventTypeIndex idx;
    for (std::size_t i = 0; i < d; ++i) {
        idx.labels.push_back("e" + std::to_string(i));
    }
    return idx;
}

/// phi_ij(t) = alpha_ij exp(-beta_ij t)
struct ExponentialKernel {
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd beta;
    bool operator==(const ExponentialKernel&) const = default;
};

/// phi_ij(t) = sum_u alpha_u,ij exp(-beta_u t), decay rates shared by all pairs.
struct SumExponentialKernel {
    std::vector<double> betas;
    std::vector<Eigen::MatrixXd> alpha; // one D x D matrix per decay
    bool operator==(const SumExponentialKernel&) const = default;
};

/// Piecewise-constant kernel on a uniform grid over [0, support).
struct DiscretizedKernel {
    double support = 0.1;
    std::vector<Eigen::MatrixXd> values; // one D x D matrix per bin

    [[nodiscard]] std::size_t bins() const { return values.size(); }
    [[nodiscard]] double bin_width() const { return support / static_cast<double>(values.size()); }
    bool operator==(const DiscretizedKernel&) const = default;
};

using Kernel = std::variant<ExponentialKernel, SumExponentialKernel, DiscretizedKernel>;

enum class KernelKind { Exponential, SumExponential, Discretized };

inline std::string to_string(KernelKind k) {
    switch (k) {
    case KernelKind::Exponential: return "exp";
    case KernelKind::SumExponential: return "sumexp";
    case KernelKind::Discretized: return "em";
    }
    return "?";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "exp" || s == "exponential") {
        return KernelKind::Exponential;
    }
    if (s == "sumexp" || s == "sum_exponential") {
        return KernelKind::SumExponential;
    }
    if (s == "em" || s == "discretized") {
        return KernelKind::Discretized;
    }
    fail(Errc::Config, "unknown kernel kind '" + s + "'");
}

struct HawkesModel {
    EventTypeIndex index;
    Eigen::VectorXd mu;
    Kernel kernel;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
    [[nodiscard]] KernelKind kind() const { return static_cast<KernelKind>(kernel.index()); }
    bool operator==(const HawkesModel&) const = default;
};

inline HawkesModel exponential_model(Eigen::VectorXd mu, Eigen::MatrixXd alpha, Eigen::MatrixXd beta,
                                     EventTypeIndex index = {}) {
    if (index.dim() == 0) {
        index = numbered_index(static_cast<std::size_t>(mu.size()));
    }
    return {std::move(index), std::move(mu), ExponentialKernel{std::move(alpha), std::move(beta)}};
}

inline HawkesModel poisson_model(Eigen::VectorXd mu, EventTypeIndex index = {}) {
    const auto d = mu.size();
    return exponential_model(std::move(mu), Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Ones(d, d),
                             std::move(index));
}

/// D x D matrix of kernel integrals (the branching matrix).
inline Eigen::MatrixXd kernel_norms(const HawkesModel& model) {
    const auto d = static_cast<Eigen::Index>(model.dim());
    Eigen::MatrixXd norms = Eigen::MatrixXd::Zero(d, d);
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ExponentialKernel>) {
                norms = k.alpha.cwiseQuotient(k.beta);
            } else if constexpr (std::is_same_v<K, SumExponentialKernel>) {
                for (std::size_t u = 0; u < k.betas.size(); ++u) {
                    norms += k.alpha[u] / k.betas[u];
                }
            } else {
                for (const auto& bin : k.values) {
                    norms += bin * k.bin_width();
                }
            }
        },
        model.kernel);
    return norms;
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    if (m.size() == 1) {
        return std::abs(m(0, 0));
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double branching_ratio(const HawkesModel& model) { return spectral_radius(kernel_norms(model)); }

/// Per-dimension stationary rates (I - K)^-1 mu; only meaningful when stable.
inline Eigen::VectorXd stationary_rates(const HawkesModel& model) {
    const Eigen::MatrixXd k = kernel_norms(model);
    const auto d = k.rows();
    return (Eigen::MatrixXd::Identity(d, d) - k).partialPivLu().solve(model.mu);
}

// ---------------------------------------------------------------------------
// Text dump: exact round trip (shortest repr doubles).
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& tok) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        fail(Errc::InvalidArgument, "bad number '" + tok + "' in model dump");
    }
    return v;
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << (j ? " " : "") << fmt(m(i, j));
        }
        out << '\n';
    }
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string word() {
        std::string w;
        if (!(in_ >> w)) {
            fail(Errc::InvalidArgument, "truncated model dump");
        }
        return w;
    }
    void expect(const std::string& key) {
        const auto w = word();
        if (w != key) {
            fail(Errc::InvalidArgument, "model dump: expected '" + key + "', got '" + w + "'");
        }
    }
    double number() { return parse_double(word()); }
    std::size_t count() { return static_cast<std::size_t>(std::stoull(word())); }
    Eigen::MatrixXd matrix(Eigen::Index d) {
        Eigen::MatrixXd m(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                m(i, j) = number();
            }
        }
        return m;
    }

private:
    std::istream& in_;
};

} // namespace detail

inline void write_model(std::ostream& out, const HawkesModel& model) {
    out << "calspread-hawkes 1\n";
    out << "kernel " << to_string(model.kind()) << '\n';
    out << "dim " << model.dim() << '\n';
    out << "labels";
    for (const auto& l : model.index.labels) {
        out << ' ' << l;
    }
    out << "\nmu";
    for (Eigen::Index i = 0; i < model.mu.size(); ++i) {
        out << ' ' << detail::fmt(model.mu(i));
    }
    out << '\n';
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ExponentialKernel>) {
                out << "alpha\n";
                detail::write_matrix(out, k.alpha);
                out << "beta\n";
                detail::write_matrix(out, k.beta);
            } else if constexpr (std::is_same_v<K, SumExponentialKernel>) {
                out << "decays " << k.betas.size();
                for (double b : k.betas) {
                    out << ' ' << detail::fmt(b);
                }
                out << '\n';
                for (std::size_t u = 0; u < k.alpha.size(); ++u) {
                    out << "alpha " << u << '\n';
                    detail::write_matrix(out, k.alpha[u]);
                }
            } else {
                out << "support " << detail::fmt(k.support) << "\nbins " << k.values.size() << '\n';
                for (std::size_t b = 0; b < k.values.size(); ++b) {
                    out << "bin " << b << '\n';
                    detail::write_matrix(out, k.values[b]);
                }
            }
        },
        model.kernel);
}

inline HawkesModel read_model(std::istream& in) {
    detail::Reader r(in);
    r.expect("calspread-hawkes");
    if (r.word() != "1") {
        fail(Errc::InvalidArgument, "unsupported model dump version");
    }
    r.expect("kernel");
    const KernelKind kind = kernel_kind_from_string(r.word());
    r.expect("dim");
    const auto d = static_cast<Eigen::Index>(r.count());
    HawkesModel model;
    r.expect("labels");
    for (Eigen::Index i = 0; i < d; ++i) {
        model.index.labels.push_back(r.word());
    }
    r.expect("mu");
    model.mu.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        model.mu(i) = r.number();
    }
    switch (kind) {
    case KernelKind::Exponential: {
        ExponentialKernel k;
        r.expect("alpha");
        k.alpha = r.matrix(d);
        r.expect("beta");
        k.beta = r.matrix(d);
        model.kernel = std::move(k);
        break;
    }
    case KernelKind::SumExponential: {
        SumExponentialKernel k;
        r.expect("decays");
        const auto u = r.count();
        for (std::size_t i = 0; i < u; ++i) {
            k.betas.push_back(r.number());
        }
        for (std::size_t i = 0; i < u; ++i) {
            r.expect("alpha");
            r.count();
            k.alpha.push_back(r.matrix(d));
        }
        model.kernel = std::move(k);
        break;
    }
    case KernelKind::Discretized: {
        DiscretizedKernel k;
        r.expect("support");
        k.support = r.number();
        r.expect("bins");
        const auto bins = r.count();
        for (std::size_t b = 0; b < bins; ++b) {
            r.expect("bin");
            r.count();
            k.values.push_back(r.matrix(d));
        }
        model.kernel = std::move(k);
        break;
    }
    }
    return model;
}

inline std::string model_to_string(const HawkesModel& model) {
    std::ostringstream os;
    write_model(os, model);
    return os.str();
}

} // namespace calspread::hawkes
