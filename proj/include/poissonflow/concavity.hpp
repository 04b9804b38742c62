#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "poissonflow/pmf.hpp"
#include "poissonflow/transforms.hpp"

namespace pflow {

/// Outcome of a pointwise inequality scan.  Margins are raw (lhs - rhs);
/// the pass test compares each margin against -slack * max(1, lhs, rhs).
struct MarginReport {
    bool pass = true;
    double min_margin = 0.0;
    int argmin = -1;  // -1 when nothing was checked
    double slack = 0.0;
    bool all_equal = true;  // every margin within equality tolerance; Poisson signature for ULC
};

namespace detail {

template <typename LhsRhs>
MarginReport scan_margins(const Pmf& pmf, double slack, LhsRhs&& at) {
    if (!pmf.interval_supported())
        throw domain_error("log-concavity check: pmf must be interval-supported");
    if (!(slack >= 0.0))
        throw domain_error("log-concavity check: slack must be >= 0");
    MarginReport rep;
    rep.slack = slack;
    const double eq_tol = std::max(slack, 1e-12);
    bool first = true;
    for (int i = std::max(1, pmf.support_lo()); i <= pmf.support_hi(); ++i) {
        const auto [lhs, rhs] = at(i);
        const double margin = lhs - rhs;
        const double scale = std::max({1.0, lhs, rhs});
        if (margin < -slack * scale) rep.pass = false;
        if (std::abs(margin) > eq_tol * scale) rep.all_equal = false;
        if (first || margin < rep.min_margin) {
            rep.min_margin = margin;
            rep.argmin = i;
            first = false;
        }
    }
    if (first) {  // single-point support: nothing to check
        rep.min_margin = 0.0;
        rep.argmin = -1;
    }
    return rep;
}

}  // namespace detail

/// Log-concavity: P(i)^2 >= P(i+1) P(i-1) for interior i.  Boundary terms
/// with a vanishing neighbour satisfy the inequality automatically.
inline MarginReport is_log_concave(const Pmf& pmf, double slack = 1e-9) {
    return detail::scan_margins(pmf, slack, [&](int i) {
        return std::pair{pmf(i) * pmf(i), pmf(i + 1) * pmf(i - 1)};
    });
}

/// Ultra log-concavity: i P(i)^2 >= (i+1) P(i+1) P(i-1) for i >= 1.
/// Equality at every i exactly characterizes the Poisson family, which the
/// report flags through all_equal.
inline MarginReport is_ultra_log_concave(const Pmf& pmf, double slack = 1e-9) {
    return detail::scan_margins(pmf, slack, [&](int i) {
        return std::pair{double(i) * pmf(i) * pmf(i), double(i + 1) * pmf(i + 1) * pmf(i - 1)};
    });
}

/// Margins of ultra log-concavity of order n, in cross-multiplied form:
/// margin_i = i P(i)^2 (n-i) - (i+1)(n-i+1) P(i+1) P(i-1), for i = 1..hi.
/// All >= -slack iff the mass function over [0, n] satisfies the Newton
/// inequalities.  Entry k of the result corresponds to i = k+1.
inline std::vector<double> ulc_order_n_margin(const Pmf& pmf, int n) {
    if (n < 1) throw domain_error("ulc_order_n_margin: n must be a positive integer");
    if (pmf.support_hi() > n)
        throw domain_error("ulc_order_n_margin: support exceeds n");
    std::vector<double> margins;
    for (int i = 1; i <= pmf.support_hi(); ++i)
        margins.push_back(double(i) * pmf(i) * pmf(i) * double(n - i) -
                          double(i + 1) * double(n - i + 1) * pmf(i + 1) * pmf(i - 1));
    return margins;
}

/// Scaled score rho(i) = (i+1) P(i+1) / (lambda P(i)) - 1 on the closed
/// support [lo, hi]; the top-of-support value is -1 (P(hi+1) = 0), which
/// makes the measure-weighted score sum to zero over supports starting at 0.
struct ScoreVector {
    std::vector<double> values;  // indexed by i - lo
    int lo = 0;
    double lambda = 0.0;

    int hi() const { return lo + int(values.size()) - 1; }
    double operator()(int i) const {
        if (i < lo || i > hi())
            throw domain_error("score: index outside the support interval");
        return values[std::size_t(i - lo)];
    }
};

inline ScoreVector score(const Pmf& pmf, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw domain_error("score: lambda must be finite and > 0");
    if (!pmf.interval_supported())
        throw domain_error("score: pmf must be interval-supported");
    ScoreVector s;
    s.lo = pmf.support_lo();
    s.lambda = lambda;
    s.values.resize(std::size_t(pmf.support_hi() - pmf.support_lo()) + 1);
    for (int i = pmf.support_lo(); i <= pmf.support_hi(); ++i)
        s.values[std::size_t(i - pmf.support_lo())] =
            double(i + 1) * pmf(i + 1) / (lambda * pmf(i)) - 1.0;
    return s;
}

/// Decreasing score is the second characterization of ultra log-concavity;
/// agrees with is_ultra_log_concave on every interval-supported input.
inline bool is_score_decreasing(const Pmf& pmf, double lambda) {
    const ScoreVector s = score(pmf, lambda);
    for (std::size_t k = 0; k + 1 < s.values.size(); ++k) {
        const double a = s.values[k], b = s.values[k + 1];
        if (b > a + 1e-9 * std::max({1.0, std::abs(a), std::abs(b)})) return false;
    }
    return true;
}

/// Law of a sum of independent Bernoulli(p_i) variables, by iterated
/// convolution; a member of B_n(sum p_i).
inline Pmf bernoulli_sum(std::span<const double> p_vec) {
    for (double p : p_vec)
        if (!(p >= 0.0 && p <= 1.0))
            throw domain_error("bernoulli_sum: every p must lie in [0, 1]");
    Pmf acc = point_mass(0);
    for (double p : p_vec) {
        if (p == 0.0) continue;
        acc = convolve(acc, binomial(1, p));
    }
    return acc;
}

inline Pmf bernoulli_sum(std::initializer_list<double> p_vec) {
    return bernoulli_sum(std::span<const double>(p_vec.begin(), p_vec.size()));
}

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
    // 53-bit mantissa draw in (0, 1]; stable across standard libraries.
    return double((rng() >> 11) + 1) * 0x1.0p-53;
}

/// Exponentially tilt weights exp(lw[i]) by theta (multiplying mass i by
/// theta^i) and solve for the theta whose tilted mean equals target, by
/// monotone bisection on log(theta).  Returns the normalized tilted vector.
inline std::vector<double> tilt_to_mean(std::span<const double> log_weights, double target) {
    const std::size_t n = log_weights.size();
    if (n < 2 || !(target > 0.0) || target >= double(n - 1))
        throw sampler_error("tilt_to_mean: target mean unreachable on this support");

    std::vector<double> w(n);
    auto mean_at = [&](double log_theta) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i)
            hi = std::max(hi, log_weights[i] + double(i) * log_theta);
        detail::Accumulator tot, first;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = std::exp(log_weights[i] + double(i) * log_theta - hi);
            tot.add(w[i]);
            first.add(double(i) * w[i]);
        }
        return first.total() / tot.total();
    };

    double lo = 0.0, hi = 0.0;
    if (mean_at(0.0) < target) {
        double step = 1.0;
        while (mean_at(hi) < target) {
            hi += step;
            step *= 2.0;
            if (hi > 1e4) throw sampler_error("tilt_to_mean: failed to bracket theta from above");
        }
    } else {
        double step = 1.0;
        while (mean_at(lo) > target) {
            lo -= step;
            step *= 2.0;
            if (lo < -1e4) throw sampler_error("tilt_to_mean: failed to bracket theta from below");
        }
    }
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_at(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double achieved = mean_at(0.5 * (lo + hi));
    if (std::abs(achieved - target) > 1e-9)
        throw sampler_error("tilt_to_mean: bisection stalled at mean " + std::to_string(achieved));
    detail::Accumulator tot;
    for (double v : w) tot.add(v);
    const double t = tot.total();
    for (double& v : w) v /= t;
    return w;
}

}  // namespace detail

/// Build the ultra log-concave distribution with prescribed score ratios
/// r(i) = (i+1) P(i+1) / P(i) (any positive non-increasing sequence), then
/// exponentially tilt it to the target mean.  Tilting multiplies every ratio
/// by theta, so the non-increasing property -- hence ultra log-concavity --
/// is preserved exactly.
inline Pmf ulc_from_ratios(std::span<const double> ratios, double target_mean) {
    if (ratios.empty()) throw domain_error("ulc_from_ratios: empty ratio sequence");
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (!(ratios[i] > 0.0) || !std::isfinite(ratios[i]))
            throw domain_error("ulc_from_ratios: ratios must be finite and > 0");
        if (i + 1 < ratios.size() && ratios[i + 1] > ratios[i] * (1.0 + 1e-12))
            throw domain_error("ulc_from_ratios: ratios must be non-increasing");
    }
    std::vector<double> lw(ratios.size() + 1, 0.0);
    for (std::size_t i = 0; i < ratios.size(); ++i)
        lw[i + 1] = lw[i] + std::log(ratios[i]) - std::log(double(i + 1));
    return Pmf::from_parts(detail::tilt_to_mean(lw, target_mean), 0.0);
}

/// Random member of the ultra log-concave class with mean lambda, supported
/// on {0, ..., hi} with hi <= max_support.  Ratios are drawn as sorted
/// exponential variates (strictly decreasing almost surely), so the output
/// passes is_ultra_log_concave with zero slack; deterministic given seed.
inline Pmf random_ulc(double lambda, int max_support, std::uint64_t seed) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw domain_error("random_ulc: lambda must be finite and > 0");
    const int hi_min = std::max(3, int(std::ceil(lambda)) + 2);
    if (hi_min > max_support)
        throw sampler_error("random_ulc: max_support too small for mean " + std::to_string(lambda));
    std::mt19937_64 rng(seed);
    const int hi = std::min(max_support, hi_min + int(rng() % 24));

    std::vector<double> ratios(std::size_t(hi));
    for (double& r : ratios) r = -std::log(detail::uniform01(rng)) * lambda;
    std::sort(ratios.begin(), ratios.end(), std::greater<>());
    for (std::size_t i = 0; i + 1 < ratios.size(); ++i)  // enforce strict decrease on ties
        if (ratios[i + 1] >= ratios[i]) ratios[i + 1] = ratios[i] * (1.0 - 1e-12);
    return ulc_from_ratios(ratios, lambda);
}

/// Max-over-w residual of the score projection identity
///   rho_{U+V}(w) = E[alpha rho_U(U) + (1-alpha) rho_V(V) | U+V = w],
/// with alpha = EU / (EU + EV), for independent interval-supported U, V.
inline double score_projection_residual(const Pmf& u, const Pmf& v) {
    const double mu = mean(u), mv = mean(v);
    if (!(mu > 0.0) || !(mv > 0.0))
        throw domain_error("score_projection_residual: both means must be > 0");
    const ScoreVector su = score(u, mu);
    const ScoreVector sv = score(v, mv);
    const double alpha = mu / (mu + mv);
    const Pmf w = convolve(u, v);
    const ScoreVector sw = score(w, mu + mv);

    double worst = 0.0;
    for (int t = w.support_lo(); t <= w.support_hi(); ++t) {
        if (w(t) <= 0.0) continue;
        detail::Accumulator num;
        const int a_lo = std::max(u.support_lo(), t - v.support_hi());
        const int a_hi = std::min(u.support_hi(), t - v.support_lo());
        for (int a = a_lo; a <= a_hi; ++a) {
            const double joint = u(a) * v(t - a);
            if (joint == 0.0) continue;
            num.add(joint * (alpha * su(a) + (1.0 - alpha) * sv(t - a)));
        }
        worst = std::max(worst, std::abs(sw(t) - num.total() / w(t)));
    }
    return worst;
}

/// P(X >= 2 | X > 0); the truncated tail (deficit) counts toward both events.
inline double conditional_tail_ratio(const Pmf& pmf) {
    detail::Accumulator ge1, ge2;
    const auto& p = pmf.probs();
    for (std::size_t x = 1; x < p.size(); ++x) {
        ge1.add(p[x]);
        if (x >= 2) ge2.add(p[x]);
    }
    const double den = ge1.total() + pmf.deficit();
    if (den <= 0.0) throw domain_error("conditional_tail_ratio: P(X > 0) is zero");
    return (ge2.total() + pmf.deficit()) / den;
}

}  // namespace pflow
