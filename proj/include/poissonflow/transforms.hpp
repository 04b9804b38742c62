#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "poissonflow/pmf.hpp"

namespace pflow {

namespace detail {

/// row[z] = C(x, z) alpha^z (1-alpha)^(x-z) for z = 0..x, alpha in (0, 1).
/// Direct multiplicative recurrence for short rows; log-gamma in log space
/// when x > 60 or the (1-alpha)^x seed underflows.
inline void binomial_row(int x, double alpha, std::vector<double>& row) {
    row.assign(std::size_t(x) + 1, 0.0);
    if (x == 0) {
        row[0] = 1.0;
        return;
    }
    const double q = 1.0 - alpha;
    if (x <= 60) {
        double b = std::pow(q, double(x));
        if (b > 0.0 && std::isfinite(b)) {
            const double r = alpha / q;
            row[0] = b;
            for (int z = 0; z < x; ++z) {
                b *= r * double(x - z) / double(z + 1);
                row[std::size_t(z) + 1] = b;
            }
            return;
        }
    }
    const double la = std::log(alpha);
    const double lq = std::log1p(-alpha);
    const double lgx = std::lgamma(double(x) + 1.0);
    for (int z = 0; z <= x; ++z)
        row[std::size_t(z)] = std::exp(lgx - std::lgamma(double(z) + 1.0) -
                                       std::lgamma(double(x - z) + 1.0) + z * la + (x - z) * lq);
}

}  // namespace detail

/// Binomial thinning: (T_alpha P)(z) = sum_{x >= z} P(x) C(x,z) alpha^z (1-alpha)^{x-z}.
/// Deficit is preserved; the mean scales exactly by alpha.
inline Pmf thin(const Pmf& pmf, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw domain_error("thin: alpha must lie in [0, 1]");
    if (alpha == 1.0) return pmf;
    if (alpha == 0.0)
        return Pmf::from_parts({pmf.total_mass()}, pmf.deficit());

    const auto& p = pmf.probs();
    std::vector<double> out(p.size(), 0.0);
    std::vector<double> row;
    for (std::size_t x = 0; x < p.size(); ++x) {
        if (p[x] == 0.0) continue;
        detail::binomial_row(int(x), alpha, row);
        const double px = p[x];
        for (std::size_t z = 0; z <= x; ++z) out[z] += px * row[z];
    }
    return Pmf::from_parts(std::move(out), pmf.deficit());
}

/// S_beta: convolution with an independent Poisson(beta).
inline Pmf add_poisson(const Pmf& pmf, double beta, const TruncationPolicy& policy = {}) {
    if (!std::isfinite(beta) || beta < 0.0)
        throw domain_error("add_poisson: beta must be finite and >= 0");
    if (beta == 0.0) return pmf;
    return convolve(pmf, poisson(beta, policy), policy);
}

/// The two-parameter map: thin by alpha, then add Poisson(beta).
inline Pmf thin_add(const Pmf& pmf, double alpha, double beta, const TruncationPolicy& policy = {}) {
    return add_poisson(thin(pmf, alpha), beta, policy);
}

/// Mean-preserving interpolation between P (alpha = 1) and Poisson(lambda)
/// (alpha = 0): thin by alpha, then add Poisson(lambda (1 - alpha)).
/// Requires lambda = mean(P) within 1e-9; refuses mismatches rather than
/// silently re-deriving lambda.
inline Pmf interpolate(const Pmf& pmf, double alpha, double lambda,
                       const TruncationPolicy& policy = {}) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw domain_error("interpolate: alpha must lie in [0, 1]");
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw domain_error("interpolate: lambda must be finite and >= 0");
    const double m = mean(pmf);
    if (std::abs(m - lambda) > 1e-9)
        throw contract_error("interpolate: measured mean " + std::to_string(m) +
                             " does not match lambda " + std::to_string(lambda));
    return thin_add(pmf, alpha, lambda * (1.0 - alpha), policy);
}

/// Size-biased version: P~(z) = (z+1) P(z+1) / mean(P).
inline Pmf size_bias(const Pmf& pmf) {
    const double m = mean(pmf);
    if (!(m > 0.0)) throw domain_error("size_bias: mean must be > 0");
    if (pmf.size() < 2) throw domain_error("size_bias: no mass above 0");
    const auto& p = pmf.probs();
    std::vector<double> out(p.size() - 1);
    for (std::size_t z = 0; z + 1 < p.size(); ++z) out[z] = double(z + 1) * p[z + 1] / m;
    return Pmf::from_parts(std::move(out), 0.0);
}

/// Unnormalized mass sequence with its recorded total.
struct MassSequence {
    std::vector<double> values;
    double total = 0.0;
};

/// Second-order size-biasing: values(z) = (z+2)(z+1) P(z+2) / mean^2.
/// The total S = E X(X-1) / mean^2 need not be 1, so the sequence is
/// returned unnormalized with S recorded.
inline MassSequence size_bias_second(const Pmf& pmf) {
    const double m = mean(pmf);
    if (!(m > 0.0)) throw domain_error("size_bias_second: mean must be > 0");
    if (falling_moment(pmf, 2) <= 0.0)
        throw domain_error("size_bias_second: second falling moment must be > 0");
    const auto& p = pmf.probs();
    MassSequence out;
    out.values.assign(p.size() - 2, 0.0);
    detail::Accumulator acc;
    for (std::size_t z = 0; z + 2 < p.size(); ++z) {
        out.values[z] = double(z + 2) * double(z + 1) * p[z + 2] / (m * m);
        acc.add(out.values[z]);
    }
    out.total = acc.total();
    return out;
}

}  // namespace pflow
