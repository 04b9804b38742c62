#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poissonflow/errors.hpp"

namespace pflow {

namespace detail {

/// Kahan-Neumaier compensated summation.  Normalization and moment checks
/// sit near the 1e-12 band, so plain accumulation is not good enough.
class Accumulator {
  public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double total() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// log of the Poisson mass e^{-lambda} lambda^x / x!, for lambda > 0.
inline double log_poisson_pmf(double lambda, std::int64_t x) {
    return -lambda + double(x) * std::log(lambda) - std::lgamma(double(x) + 1.0);
}

inline double poisson_pmf_at(double lambda, std::int64_t x) {
    if (lambda == 0.0) return x == 0 ? 1.0 : 0.0;
    return std::exp(log_poisson_pmf(lambda, x));
}

}  // namespace detail

/// Controls how infinite-support distributions are cut to a finite vector.
struct TruncationPolicy {
    double tail_epsilon = 1e-12;     // admissible truncated tail mass, in (0, 1e-6]
    std::size_t max_support = 4096;  // cap on the top index N

    void validate() const {
        if (!(tail_epsilon > 0.0) || tail_epsilon > 1e-6)
            throw domain_error("TruncationPolicy: tail_epsilon must lie in (0, 1e-6]");
        if (max_support < 1)
            throw domain_error("TruncationPolicy: max_support must be >= 1");
    }
};

/// Dense mass function on {0, ..., N}.  `deficit` carries the truncated tail
/// mass explicitly; it is never renormalized away, so every downstream
/// tolerance can be quoted as (analytic tolerance + deficit).
///
/// Immutable after construction; all operations on Pmf are pure functions.
class Pmf {
  public:
    /// Validating constructor used by every factory.  Trims trailing exact
    /// zeros, checks non-negativity and |sum + deficit - 1| <= 1e-12, and
    /// scans the support hint.
    static Pmf from_parts(std::vector<double> probs, double deficit) {
        if (probs.empty())
            throw construction_error("pmf: empty mass vector");
        if (!std::isfinite(deficit) || deficit < 0.0)
            throw construction_error("pmf: deficit must be finite and >= 0");
        for (double p : probs)
            if (!std::isfinite(p) || p < 0.0)
                throw construction_error("pmf: masses must be finite and >= 0");
        while (probs.size() > 1 && probs.back() == 0.0) probs.pop_back();

        detail::Accumulator acc;
        for (double p : probs) acc.add(p);
        const double total = acc.total();
        if (std::abs(total + deficit - 1.0) > 1e-12)
            throw construction_error("pmf: mass " + std::to_string(total) + " + deficit " +
                                     std::to_string(deficit) + " must equal 1 within 1e-12");

        Pmf out;
        out.probs_ = std::move(probs);
        out.deficit_ = deficit;
        out.total_ = total;
        int lo = -1, hi = -1;
        for (int i = 0; i < int(out.probs_.size()); ++i) {
            if (out.probs_[std::size_t(i)] > 0.0) {
                if (lo < 0) lo = i;
                hi = i;
            }
        }
        if (lo < 0)
            throw construction_error("pmf: no positive mass");
        out.lo_ = lo;
        out.hi_ = hi;
        out.interval_ = true;
        for (int i = lo; i <= hi; ++i)
            if (out.probs_[std::size_t(i)] <= 0.0) { out.interval_ = false; break; }
        return out;
    }

    const std::vector<double>& probs() const { return probs_; }
    double deficit() const { return deficit_; }
    std::size_t size() const { return probs_.size(); }  // N + 1
    int top() const { return int(probs_.size()) - 1; }  // N

    /// Mass at x; zero outside the stored range.
    double operator()(std::int64_t x) const {
        return (x >= 0 && x < std::int64_t(probs_.size())) ? probs_[std::size_t(x)] : 0.0;
    }

    int support_lo() const { return lo_; }
    int support_hi() const { return hi_; }
    /// True when probs[i] > 0 exactly for lo <= i <= hi (required by the
    /// score and log-concavity operations).
    bool interval_supported() const { return interval_; }

    double total_mass() const { return total_; }  // = 1 - deficit up to rounding

  private:
    Pmf() = default;
    std::vector<double> probs_;
    double deficit_ = 0.0;
    double total_ = 0.0;
    int lo_ = 0, hi_ = 0;
    bool interval_ = true;
};

/// Normalize non-negative weights into a Pmf with zero deficit.
inline Pmf from_weights(std::span<const double> weights) {
    if (weights.empty())
        throw construction_error("from_weights: empty input");
    detail::Accumulator acc;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0)
            throw construction_error("from_weights: weights must be finite and >= 0");
        acc.add(w);
    }
    const double total = acc.total();
    if (total <= 0.0)
        throw construction_error("from_weights: at least one weight must be > 0");
    std::vector<double> probs(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / total;
    return Pmf::from_parts(std::move(probs), 0.0);
}

inline Pmf from_weights(std::initializer_list<double> weights) {
    return from_weights(std::span<const double>(weights.begin(), weights.size()));
}

/// Point mass at k.
inline Pmf point_mass(int k) {
    if (k < 0) throw domain_error("point_mass: k must be >= 0");
    std::vector<double> probs(std::size_t(k) + 1, 0.0);
    probs[std::size_t(k)] = 1.0;
    return Pmf::from_parts(std::move(probs), 0.0);
}

/// Poisson(lambda), truncated at the smallest N whose tail mass is below
/// policy.tail_epsilon.  Masses are evaluated through log-gamma in log space,
/// which stays stable for lambda in the hundreds.
inline Pmf poisson(double lambda, const TruncationPolicy& policy = {}) {
    policy.validate();
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw domain_error("poisson: lambda must be finite and >= 0");
    if (lambda == 0.0) return point_mass(0);

    std::vector<double> probs;
    detail::Accumulator acc;
    for (std::size_t x = 0; x <= policy.max_support; ++x) {
        const double p = std::exp(detail::log_poisson_pmf(lambda, std::int64_t(x)));
        probs.push_back(p);
        acc.add(p);
        const double tail = 1.0 - acc.total();
        if (tail < policy.tail_epsilon)
            return Pmf::from_parts(std::move(probs), std::max(0.0, tail));
    }
    throw truncation_error("poisson: max_support " + std::to_string(policy.max_support) +
                           " reached before tail dropped below tail_epsilon at lambda = " +
                           std::to_string(lambda));
}

/// Binomial(n, p) on {0, ..., n}; exact support, zero deficit.
inline Pmf binomial(int n, double p) {
    if (n < 1) throw domain_error("binomial: n must be a positive integer");
    if (!(p >= 0.0 && p <= 1.0)) throw domain_error("binomial: p must lie in [0, 1]");
    if (p == 0.0) return point_mass(0);
    if (p == 1.0) return point_mass(n);
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    const double lgn = std::lgamma(double(n) + 1.0);
    std::vector<double> probs(std::size_t(n) + 1);
    for (int k = 0; k <= n; ++k)
        probs[std::size_t(k)] = std::exp(lgn - std::lgamma(double(k) + 1.0) -
                                         std::lgamma(double(n - k) + 1.0) + k * lp + (n - k) * lq);
    return Pmf::from_parts(std::move(probs), 0.0);
}

/// Geometric with success parameter p: probs[k] = p (1-p)^k, truncated with
/// recorded deficit.
inline Pmf geometric(double p, const TruncationPolicy& policy = {}) {
    policy.validate();
    if (!(p > 0.0 && p <= 1.0)) throw domain_error("geometric: p must lie in (0, 1]");
    if (p == 1.0) return point_mass(0);
    const double q = 1.0 - p;
    std::vector<double> probs;
    detail::Accumulator acc;
    double term = p;
    for (std::size_t x = 0; x <= policy.max_support; ++x) {
        probs.push_back(term);
        acc.add(term);
        const double tail = 1.0 - acc.total();
        if (tail < policy.tail_epsilon)
            return Pmf::from_parts(std::move(probs), std::max(0.0, tail));
        term *= q;
    }
    throw truncation_error("geometric: max_support reached before tail_epsilon at p = " +
                           std::to_string(p));
}

inline double mean(const Pmf& pmf) {
    detail::Accumulator acc;
    const auto& p = pmf.probs();
    for (std::size_t x = 0; x < p.size(); ++x) acc.add(double(x) * p[x]);
    return acc.total();
}

inline double variance(const Pmf& pmf) {
    const double m = mean(pmf);
    detail::Accumulator acc;
    const auto& p = pmf.probs();
    for (std::size_t x = 0; x < p.size(); ++x) {
        const double d = double(x) - m;
        acc.add(d * d * p[x]);
    }
    return acc.total();
}

/// r-th falling moment E[X (X-1) ... (X-r+1)].
inline double falling_moment(const Pmf& pmf, int r) {
    if (r < 1) throw domain_error("falling_moment: r must be a positive integer");
    detail::Accumulator acc;
    const auto& p = pmf.probs();
    for (std::size_t x = 0; x < p.size(); ++x) {
        double f = 1.0;
        for (int j = 0; j < r; ++j) f *= double(x) - double(j);
        if (std::int64_t(x) >= r) acc.add(f * p[x]);
    }
    return acc.total();
}

/// Convolution (P*Q)(z) = sum_x P(x) Q(z-x).  Deficits add; if the combined
/// support exceeds policy.max_support the overflow mass is re-truncated into
/// the deficit, and rejected when it exceeds tail_epsilon.
inline Pmf convolve(const Pmf& a, const Pmf& b, const TruncationPolicy& policy = {}) {
    policy.validate();
    const auto& pa = a.probs();
    const auto& pb = b.probs();
    std::vector<double> out(pa.size() + pb.size() - 1, 0.0);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i] == 0.0) continue;
        const double ai = pa[i];
        for (std::size_t j = 0; j < pb.size(); ++j) out[i + j] += ai * pb[j];
    }
    double cut = 0.0;
    if (out.size() - 1 > policy.max_support) {
        detail::Accumulator dropped;
        for (std::size_t k = policy.max_support + 1; k < out.size(); ++k) dropped.add(out[k]);
        cut = std::max(0.0, dropped.total());
        if (cut > policy.tail_epsilon)
            throw truncation_error("convolve: re-truncation would cut mass " +
                                   std::to_string(cut) + " > tail_epsilon");
        out.resize(policy.max_support + 1);
    }
    return Pmf::from_parts(std::move(out), a.deficit() + b.deficit() + cut);
}

/// Probability generating function sum_x P(x) t^x, by Horner evaluation.
inline double pgf_eval(const Pmf& pmf, double t) {
    if (!std::isfinite(t)) throw domain_error("pgf_eval: t must be finite");
    const auto& p = pmf.probs();
    double acc = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) acc = acc * t + p[i];
    return acc;
}

/// Total variation (1/2) sum_x |P(x) - Q(x)|, with the deficit difference
/// folded in as (1/2)|d_P - d_Q|.
inline double total_variation(const Pmf& a, const Pmf& b) {
    const std::size_t n = std::max(a.size(), b.size());
    detail::Accumulator acc;
    for (std::size_t x = 0; x < n; ++x) acc.add(std::abs(a(std::int64_t(x)) - b(std::int64_t(x))));
    acc.add(std::abs(a.deficit() - b.deficit()));
    return 0.5 * acc.total();
}

}  // namespace pflow
