#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poissonflow/functionals.hpp"
#include "poissonflow/pmf.hpp"
#include "poissonflow/transforms.hpp"

namespace pflow {

/// A Poisson-rate path along the thinning flow: the state at alpha is
/// thin_add(X, alpha, f(alpha)).  g(alpha) = f(alpha)/alpha - f'(alpha) is
/// the coefficient of the birth term in the evolution equation; it is
/// supplied analytically for the built-in kinds and by the caller for
/// custom paths (checked against a numerical derivative at construction).
class FlowPath {
  public:
    enum class Kind { constant_zero, u_flow, custom };

    static FlowPath constant_zero() { return FlowPath(Kind::constant_zero, 0.0, {}, {}); }

    /// The mean-preserving path f(alpha) = lambda (1 - alpha), g(alpha) = lambda/alpha.
    static FlowPath u_flow(double lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw domain_error("FlowPath::u_flow: lambda must be finite and >= 0");
        return FlowPath(Kind::u_flow, lambda, {}, {});
    }

    static FlowPath custom(double lambda, std::function<double(double)> f,
                           std::function<double(double)> g) {
        if (!f || !g) throw construction_error("FlowPath::custom: f and g are required");
        FlowPath path(Kind::custom, lambda, std::move(f), std::move(g));
        const double h = 1e-6;
        for (double a = 0.05; a < 1.0; a += 0.1) {
            const double fprime = (path.f_(a + h) - path.f_(a - h)) / (2.0 * h);
            const double expected = path.f_(a) / a - fprime;
            if (std::abs(path.g_(a) - expected) > 1e-6)
                throw construction_error(
                    "FlowPath::custom: g is inconsistent with f/alpha - f' at alpha = " +
                    std::to_string(a));
        }
        return path;
    }

    double rate(double alpha) const {  // f(alpha)
        switch (kind_) {
            case Kind::constant_zero: return 0.0;
            case Kind::u_flow: return lambda_ * (1.0 - alpha);
            default: return f_(alpha);
        }
    }

    double drift(double alpha) const {  // g(alpha) = f(alpha)/alpha - f'(alpha)
        switch (kind_) {
            case Kind::constant_zero: return 0.0;
            case Kind::u_flow: return lambda_ / alpha;
            default: return g_(alpha);
        }
    }

    Kind kind() const { return kind_; }
    double lambda() const { return lambda_; }

  private:
    FlowPath(Kind kind, double lambda, std::function<double(double)> f,
             std::function<double(double)> g)
        : kind_(kind), lambda_(lambda), f_(std::move(f)), g_(std::move(g)) {}

    Kind kind_;
    double lambda_;
    std::function<double(double)> f_;
    std::function<double(double)> g_;
};

/// The flowed state at alpha along a path: thin, then add Poisson(f(alpha)).
inline Pmf flowed_state(const Pmf& x, const FlowPath& path, double alpha,
                        const TruncationPolicy& policy = {}) {
    return thin_add(x, alpha, path.rate(alpha), policy);
}

/// The product P(z) rho(z) = (z+1) P(z+1)/lambda - P(z) in closed form,
/// defined for every z (no division), for z = 0..N.
inline std::vector<double> score_product(const Pmf& pmf, double lambda) {
    if (!(lambda > 0.0)) throw domain_error("score_product: lambda must be > 0");
    std::vector<double> out(pmf.size());
    for (std::size_t z = 0; z < out.size(); ++z)
        out[z] = double(z + 1) * pmf(std::int64_t(z) + 1) / lambda - pmf.probs()[z];
    return out;
}

/// Right-hand side of the evolution equation at the flowed state P_alpha:
///   g(alpha)(P(z) - P(z-1)) - (1/alpha)((z+1) P(z+1) - z P(z)),
/// evaluated for z = 0..len-1.
inline std::vector<double> heat_rhs(const Pmf& state, const FlowPath& path, double alpha,
                                    std::size_t len) {
    const double g = path.drift(alpha);
    std::vector<double> out(len);
    for (std::size_t z = 0; z < len; ++z) {
        const std::int64_t iz = std::int64_t(z);
        out[z] = g * (state(iz) - state(iz - 1)) -
                 (1.0 / alpha) * (double(z + 1) * state(iz + 1) - double(z) * state(iz));
    }
    return out;
}

/// Mean-preserving-path right-hand side in score form: (lambda/alpha) Delta*(P rho).
inline std::vector<double> heat_rhs_score_form(const Pmf& state, double lambda, double alpha,
                                               std::size_t len) {
    const std::vector<double> sp = score_product(state, lambda);
    auto at = [&](std::int64_t z) {
        return (z >= 0 && z < std::int64_t(sp.size())) ? sp[std::size_t(z)] : 0.0;
    };
    std::vector<double> out(len);
    for (std::size_t z = 0; z < len; ++z)
        out[z] = (lambda / alpha) * (at(std::int64_t(z) - 1) - at(std::int64_t(z)));
    return out;
}

/// The same right-hand side written against the Poisson reference:
/// (lambda/alpha) Delta*( Pi_lambda(z) Delta(P(z)/Pi_lambda(z)) ).
inline std::vector<double> heat_rhs_poisson_form(const Pmf& state, double lambda, double alpha,
                                                 std::size_t len) {
    std::vector<double> w(state.size());
    for (std::size_t z = 0; z < w.size(); ++z) {
        const double pi_z = detail::poisson_pmf_at(lambda, std::int64_t(z));
        const double pi_z1 = detail::poisson_pmf_at(lambda, std::int64_t(z) + 1);
        w[z] = pi_z * (state(std::int64_t(z) + 1) / pi_z1 - state.probs()[z] / pi_z);
    }
    auto at = [&](std::int64_t z) {
        return (z >= 0 && z < std::int64_t(w.size())) ? w[std::size_t(z)] : 0.0;
    };
    std::vector<double> out(len);
    for (std::size_t z = 0; z < len; ++z)
        out[z] = (lambda / alpha) * (at(std::int64_t(z) - 1) - at(std::int64_t(z)));
    return out;
}

/// Max-over-z residual between the central difference
/// (P_{alpha+h} - P_{alpha-h})/(2h) and the closed-form right-hand side.
/// Second-order accurate: halving h divides the residual by ~4 away from
/// fixed points.
inline double heat_residual(const Pmf& x, const FlowPath& path, double alpha, double h,
                            const TruncationPolicy& policy = {}) {
    if (!(h > 0.0)) throw domain_error("heat_residual: h must be > 0");
    if (!(alpha - h > 0.0) || !(alpha + h <= 1.0))
        throw domain_error("heat_residual: alpha +/- h must stay inside (0, 1]");
    const Pmf plus = flowed_state(x, path, alpha + h, policy);
    const Pmf minus = flowed_state(x, path, alpha - h, policy);
    const Pmf mid = flowed_state(x, path, alpha, policy);
    const std::size_t len = std::max({plus.size(), minus.size(), mid.size()}) + 2;
    const std::vector<double> rhs = heat_rhs(mid, path, alpha, len);
    double worst = 0.0;
    for (std::size_t z = 0; z < len; ++z) {
        const double fd = (plus(std::int64_t(z)) - minus(std::int64_t(z))) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - rhs[z]));
    }
    return worst;
}

/// d/dalpha of the Poisson cross-entropy along the mean-preserving flow,
/// evaluated at the flowed state: (lambda/alpha) sum_z P rho(z) log((z+1)/lambda).
/// Non-positive for ultra log-concave states, zero exactly on the Poisson.
inline double cross_entropy_slope(const Pmf& state, double lambda, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw domain_error("cross_entropy_slope: alpha must lie in (0, 1]");
    const std::vector<double> sp = score_product(state, lambda);
    detail::Accumulator acc;
    for (std::size_t z = 0; z < sp.size(); ++z)
        acc.add(sp[z] * std::log(double(z + 1) / lambda));
    return (lambda / alpha) * acc.total();
}

/// d^2/dalpha^2 of the Poisson cross-entropy along the flow (signed value,
/// cross-checked against central second differences):
///   (lambda^2/alpha^2) sum_z P rho(z) ( (z/lambda) log((z+1)/z) - log((z+2)/(z+1)) ),
/// with the z = 0 weight term read as 0.  Non-positive for ultra
/// log-concave states.
inline double cross_entropy_curvature(const Pmf& state, double lambda, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw domain_error("cross_entropy_curvature: alpha must lie in (0, 1]");
    const std::vector<double> sp = score_product(state, lambda);
    detail::Accumulator acc;
    for (std::size_t z = 0; z < sp.size(); ++z) {
        const double zz = double(z);
        const double w = (z > 0 ? (zz / lambda) * std::log1p(1.0 / zz) : 0.0) -
                         std::log1p(1.0 / (zz + 1.0));
        acc.add(sp[z] * w);
    }
    return (lambda * lambda / (alpha * alpha)) * acc.total();
}

/// d/dalpha of D(P_alpha || Pi_lambda): the symmetrized divergence between
/// the state and its size-biased version, scaled by lambda/alpha.  Terms
/// where either mass vanishes (the truncation edge) are dropped under the
/// 0 log 0 convention, which keeps every retained term non-negative.
inline double divergence_slope(const Pmf& state, double lambda, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw domain_error("divergence_slope: alpha must lie in (0, 1]");
    detail::Accumulator acc;
    for (std::size_t z = 0; z < state.size(); ++z) {
        const double p = state.probs()[z];
        const double biased = double(z + 1) * state(std::int64_t(z) + 1) / lambda;
        if (p > 0.0 && biased > 0.0) acc.add((biased - p) * std::log(biased / p));
    }
    return (lambda / alpha) * acc.total();
}

/// The same slope in score form, (lambda/alpha) sum P rho log(1 + rho),
/// with identical skip convention; agrees with divergence_slope to
/// rounding and exists for the dual-route check.
inline double divergence_slope_score_form(const Pmf& state, double lambda, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw domain_error("divergence_slope_score_form: alpha must lie in (0, 1]");
    detail::Accumulator acc;
    for (std::size_t z = 0; z < state.size(); ++z) {
        const double p = state.probs()[z];
        if (p <= 0.0) continue;
        const double rho = double(z + 1) * state(std::int64_t(z) + 1) / (lambda * p) - 1.0;
        if (rho > -1.0) acc.add(p * rho * std::log1p(rho));
    }
    return (lambda / alpha) * acc.total();
}

/// d^2/dalpha^2 of D(P_alpha || Pi_lambda), using the closed-form evolution
/// derivative dP/dalpha = (lambda/alpha) Delta*(P rho) (not finite
/// differences).  Non-negative whenever Var(state) <= lambda.
inline double divergence_curvature(const Pmf& state, double lambda, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw domain_error("divergence_curvature: alpha must lie in (0, 1]");
    const auto& p = state.probs();
    detail::Accumulator entropic;
    for (std::size_t z = 0; z < p.size(); ++z) {
        const double pt = double(z + 1) * state(std::int64_t(z) + 1) / lambda;
        const double ptt =
            double(z + 2) * double(z + 1) * state(std::int64_t(z) + 2) / (lambda * lambda);
        if (pt > 0.0 && ptt * p[z] > 0.0)
            entropic.add((ptt - 2.0 * pt + p[z]) * std::log(ptt * p[z] / (pt * pt)));
    }
    const std::vector<double> sp = score_product(state, lambda);
    auto sp_at = [&](std::int64_t z) {
        return (z >= 0 && z < std::int64_t(sp.size())) ? sp[std::size_t(z)] : 0.0;
    };
    detail::Accumulator fisher;
    for (std::size_t z = 0; z < p.size(); ++z) {
        if (p[z] <= 0.0) continue;
        const double dp = (lambda / alpha) * (sp_at(std::int64_t(z) - 1) - sp_at(std::int64_t(z)));
        fisher.add(dp * dp / p[z]);
    }
    return (lambda * lambda / (alpha * alpha)) * entropic.total() + fisher.total();
}

/// Per-alpha record along the mean-preserving flow.
struct FlowRow {
    double alpha = 0.0;
    double entropy = 0.0;            // H
    double cross_entropy = 0.0;      // Lambda
    double divergence = 0.0;         // D
    double d_cross_entropy = 0.0;    // dLambda/dalpha, closed form
    double d_divergence = 0.0;       // dD/dalpha, closed form
    double d2_cross_entropy = 0.0;   // d2Lambda/dalpha2, closed form
    double d2_divergence = 0.0;      // d2D/dalpha2, closed form
    double heat_residual = 0.0;
    double deficit_budget = 0.0;
};

struct FlowCurve {
    double lambda = 0.0;
    std::vector<FlowRow> rows;
};

namespace detail {

/// Heat residual usable at every grid point: central difference where
/// alpha + h fits below 1, second-order backward difference at the right
/// edge.
inline double curve_heat_residual(const Pmf& x, const FlowPath& path, double alpha, double h,
                                  const TruncationPolicy& policy) {
    const Pmf mid = flowed_state(x, path, alpha, policy);
    if (alpha + h <= 1.0) {
        const Pmf plus = flowed_state(x, path, alpha + h, policy);
        const Pmf minus = flowed_state(x, path, alpha - h, policy);
        const std::size_t len = std::max({plus.size(), minus.size(), mid.size()}) + 2;
        const std::vector<double> rhs = heat_rhs(mid, path, alpha, len);
        double worst = 0.0;
        for (std::size_t z = 0; z < len; ++z) {
            const double fd = (plus(std::int64_t(z)) - minus(std::int64_t(z))) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - rhs[z]));
        }
        return worst;
    }
    const Pmf m1 = flowed_state(x, path, alpha - h, policy);
    const Pmf m2 = flowed_state(x, path, alpha - 2.0 * h, policy);
    const std::size_t len = std::max({m1.size(), m2.size(), mid.size()}) + 2;
    const std::vector<double> rhs = heat_rhs(mid, path, alpha, len);
    double worst = 0.0;
    for (std::size_t z = 0; z < len; ++z) {
        const double fd = (3.0 * mid(std::int64_t(z)) - 4.0 * m1(std::int64_t(z)) +
                           m2(std::int64_t(z))) /
                          (2.0 * h);
        worst = std::max(worst, std::abs(fd - rhs[z]));
    }
    return worst;
}

}  // namespace detail

/// Evaluate the full per-alpha table along the mean-preserving flow.  Each
/// row is recomputed from X independently (no stepping), so rows stay
/// order-independent.
inline FlowCurve entropy_curve(const Pmf& x, double lambda, std::span<const double> grid,
                               const TruncationPolicy& policy = {},
                               double residual_h = 1e-4) {
    if (grid.empty()) throw domain_error("entropy_curve: empty alpha grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 && grid[i] <= 1.0))
            throw domain_error("entropy_curve: grid must lie inside (0, 1]");
        if (i > 0 && grid[i] <= grid[i - 1])
            throw domain_error("entropy_curve: grid must be strictly increasing");
    }
    const double m = mean(x);
    if (std::abs(m - lambda) > 1e-9)
        throw contract_error("entropy_curve: measured mean " + std::to_string(m) +
                             " does not match lambda " + std::to_string(lambda));
    const FlowPath path = FlowPath::u_flow(lambda);

    FlowCurve curve;
    curve.lambda = lambda;
    curve.rows.reserve(grid.size());
    for (double alpha : grid) {
        const Pmf state = flowed_state(x, path, alpha, policy);
        FlowRow row;
        row.alpha = alpha;
        const FunctionalValue h_val = entropy(state);
        const FunctionalValue lam_val = poisson_cross_entropy(state, lambda);
        const FunctionalValue d_val = relative_entropy_vs_poisson(state, lambda);
        row.entropy = h_val.value;
        row.cross_entropy = lam_val.value;
        row.divergence = d_val.value;
        row.d_cross_entropy = cross_entropy_slope(state, lambda, alpha);
        row.d_divergence = divergence_slope(state, lambda, alpha);
        row.d2_cross_entropy = cross_entropy_curvature(state, lambda, alpha);
        row.d2_divergence = divergence_curvature(state, lambda, alpha);
        const double h = std::min(residual_h, alpha / 4.0);
        row.heat_residual = detail::curve_heat_residual(x, path, alpha, h, policy);
        row.deficit_budget = h_val.deficit_budget + lam_val.deficit_budget + d_val.deficit_budget;
        curve.rows.push_back(row);
    }
    return curve;
}

/// CSV emission with 17 significant digits for bit-stable round-trips.
inline std::string to_csv(const FlowCurve& curve) {
    std::string out = "alpha,H,Lambda,D,dLambda,dD,d2Lambda,d2D,heat_residual\n";
    char buf[256];
    for (const FlowRow& r : curve.rows) {
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.alpha,
                      r.entropy, r.cross_entropy, r.divergence, r.d_cross_entropy,
                      r.d_divergence, r.d2_cross_entropy, r.d2_divergence, r.heat_residual);
        out += buf;
    }
    return out;
}

}  // namespace pflow
