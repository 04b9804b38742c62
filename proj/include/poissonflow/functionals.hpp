#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "poissonflow/pmf.hpp"

namespace pflow {

/// A scalar functional value in nats, together with the truncation slack
/// band (combined input deficits scaled by log support size) that should be
/// added to any tolerance it is compared against.
struct FunctionalValue {
    double value = 0.0;
    double deficit_budget = 0.0;

    bool finite() const { return std::isfinite(value); }
};

inline constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();

/// One-sided support mass below this threshold is treated as a truncation
/// artifact by symmetrized_divergence instead of an infinite divergence.
inline constexpr double kSupportMismatchTolerance = 1e-9;

namespace detail {

inline double deficit_budget(double combined_deficit, std::size_t support) {
    return combined_deficit * std::log(double(std::max<std::size_t>(2, support)));
}

}  // namespace detail

/// Shannon entropy -sum P log P in nats, with the 0 log 0 = 0 convention.
inline FunctionalValue entropy(const Pmf& pmf) {
    detail::Accumulator acc;
    for (double p : pmf.probs())
        if (p > 0.0) acc.add(-p * std::log(p));
    return {acc.total(), detail::deficit_budget(pmf.deficit(), pmf.size())};
}

/// Cross-entropy against the Poisson(lambda) reference:
///   Lambda(P) = -sum_x P(x) log Pi_lambda(x) = sum_x P(x) (lambda - x log lambda + log x!).
/// Coincides with entropy exactly on the Poisson itself.
inline FunctionalValue poisson_cross_entropy(const Pmf& pmf, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw domain_error("poisson_cross_entropy: lambda must be finite and > 0");
    const double log_lambda = std::log(lambda);
    detail::Accumulator acc;
    const auto& p = pmf.probs();
    for (std::size_t x = 0; x < p.size(); ++x)
        if (p[x] > 0.0)
            acc.add(p[x] * (lambda - double(x) * log_lambda + std::lgamma(double(x) + 1.0)));
    return {acc.total(), detail::deficit_budget(pmf.deficit(), pmf.size())};
}

/// Relative entropy over raw non-negative sequences (the log-sum inequality
/// form): sum a_i log(a_i / b_i), infinite when some a_i > 0 has b_i = 0.
inline double kl_divergence(std::span<const double> a, std::span<const double> b) {
    detail::Accumulator acc;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        const double bi = i < b.size() ? b[i] : 0.0;
        if (bi == 0.0) return kInfiniteDivergence;
        acc.add(a[i] * std::log(a[i] / bi));
    }
    return acc.total();
}

/// D(P || Q) = sum P log(P/Q).  Mass of P outside the support of Q yields
/// the distinguished infinite value rather than an error, so search loops
/// can rank candidates.
inline FunctionalValue relative_entropy(const Pmf& p, const Pmf& q) {
    const double budget =
        detail::deficit_budget(p.deficit() + q.deficit(), std::max(p.size(), q.size()));
    detail::Accumulator acc;
    for (std::size_t x = 0; x < p.size(); ++x) {
        const double px = p.probs()[x];
        if (px == 0.0) continue;
        const double qx = q(std::int64_t(x));
        if (qx == 0.0) return {kInfiniteDivergence, budget};
        acc.add(px * std::log(px / qx));
    }
    return {acc.total(), budget};
}

/// D(P || Poisson(lambda)) with the reference evaluated analytically, so a
/// truncated Poisson never produces a spurious support mismatch.
inline FunctionalValue relative_entropy_vs_poisson(const Pmf& p, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw domain_error("relative_entropy_vs_poisson: lambda must be finite and > 0");
    detail::Accumulator acc;
    const auto& probs = p.probs();
    for (std::size_t x = 0; x < probs.size(); ++x)
        if (probs[x] > 0.0)
            acc.add(probs[x] *
                    (std::log(probs[x]) - detail::log_poisson_pmf(lambda, std::int64_t(x))));
    return {acc.total(), detail::deficit_budget(p.deficit(), p.size())};
}

/// Symmetrized divergence D(P||Q) + D(Q||P) = sum (P-Q) log(P/Q).
/// One-sided support mass up to kSupportMismatchTolerance is dropped as a
/// truncation artifact; beyond that the value is infinite.
inline FunctionalValue symmetrized_kl(const Pmf& p, const Pmf& q) {
    const std::size_t n = std::max(p.size(), q.size());
    const double budget = detail::deficit_budget(p.deficit() + q.deficit(), n);
    detail::Accumulator acc;
    double only_p = 0.0, only_q = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        const double px = p(std::int64_t(x)), qx = q(std::int64_t(x));
        if (px > 0.0 && qx > 0.0)
            acc.add((px - qx) * std::log(px / qx));
        else if (px > 0.0)
            only_p += px;
        else if (qx > 0.0)
            only_q += qx;
    }
    if (std::max(only_p, only_q) > kSupportMismatchTolerance)
        return {kInfiniteDivergence, budget};
    return {acc.total(), budget};
}

/// First Cramer-Rao functional: sum_z (z+1)^2 P(z+1)^2 / (lambda^2 P(z)).
/// Requires interval support starting at 0.  When mean(P) = lambda it equals
/// 1 + sum P rho^2 (up to the deficit), hence is >= 1 with equality exactly
/// on the Poisson.
inline double cramer_rao_1(const Pmf& pmf, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw domain_error("cramer_rao_1: lambda must be finite and > 0");
    if (!pmf.interval_supported() || pmf.support_lo() != 0)
        throw domain_error("cramer_rao_1: pmf must be interval-supported from 0");
    detail::Accumulator acc;
    for (int z = 0; z < pmf.support_hi(); ++z) {
        const double num = double(z + 1) * pmf(z + 1);
        acc.add(num * num / (lambda * lambda * pmf(z)));
    }
    return acc.total();
}

/// Second Cramer-Rao functional: sum_{z>=1} P(z-1)^2 / (z P(z)), summed over
/// the represented support (the vanishing-denominator boundary term above the
/// top of support is dropped).  For mean-lambda inputs with light Poisson-like
/// tails it is >= 1/lambda with equality exactly on the Poisson.
inline double cramer_rao_2(const Pmf& pmf, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw domain_error("cramer_rao_2: lambda must be finite and > 0");
    if (!pmf.interval_supported())
        throw domain_error("cramer_rao_2: pmf must be interval-supported");
    detail::Accumulator acc;
    for (int z = std::max(1, pmf.support_lo() + 1); z <= pmf.support_hi(); ++z) {
        const double num = pmf(z - 1);
        acc.add(num * num / (double(z) * pmf(z)));
    }
    return acc.total();
}

/// Forward difference (Delta f)(x) = f(x+1) - f(x), reading out-of-range
/// entries as 0; the result has the same length as the input.
inline std::vector<double> delta(std::span<const double> f) {
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t x = 0; x < f.size(); ++x)
        out[x] = (x + 1 < f.size() ? f[x + 1] : 0.0) - f[x];
    return out;
}

/// Adjoint difference (Delta* f)(x) = f(x-1) - f(x); one entry longer than
/// the input so the top boundary term f(n-1) is kept.
inline std::vector<double> delta_star(std::span<const double> f) {
    std::vector<double> out(f.size() + 1, 0.0);
    for (std::size_t x = 0; x <= f.size(); ++x) {
        const double prev = x > 0 ? f[x - 1] : 0.0;
        const double cur = x < f.size() ? f[x] : 0.0;
        out[x] = prev - cur;
    }
    return out;
}

/// Infinitesimal generator of the M/M/infinity queue acting on functions:
///   (L f)(z) = -lambda (Delta Delta* f)(z) + (z - lambda) (Delta* f)(z).
/// Zero extension applies beyond the input range, so the last entry carries
/// a boundary artifact; interior entries follow the closed form.
inline std::vector<double> mm_infinity_generator(std::span<const double> f, double lambda) {
    auto at = [&](std::int64_t x) { return (x >= 0 && x < std::int64_t(f.size())) ? f[std::size_t(x)] : 0.0; };
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t z = 0; z < f.size(); ++z) {
        const std::int64_t iz = std::int64_t(z);
        const double dstar = at(iz - 1) - at(iz);
        const double ddstar = (at(iz) - at(iz + 1)) - dstar;
        out[z] = -lambda * ddstar + (double(z) - lambda) * dstar;
    }
    return out;
}

inline std::vector<double> delta(std::initializer_list<double> f) {
    return delta(std::span<const double>(f.begin(), f.size()));
}
inline std::vector<double> delta_star(std::initializer_list<double> f) {
    return delta_star(std::span<const double>(f.begin(), f.size()));
}

}  // namespace pflow
