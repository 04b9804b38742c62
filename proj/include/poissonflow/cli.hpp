#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "poissonflow/concavity.hpp"
#include "poissonflow/flow.hpp"
#include "poissonflow/functionals.hpp"
#include "poissonflow/pmf.hpp"
#include "poissonflow/transforms.hpp"

namespace pflow {

/// One verified property inside a suite.  `value` is a margin (pass when
/// value >= -tolerance) or a residual (pass when value <= tolerance),
/// depending on kind; it is the worst instance over the randomized batch.
struct VerificationCase {
    std::string id;
    bool pass = true;
    double value = 0.0;
    double tolerance = 0.0;
    bool is_margin = false;
    std::string details;
};

struct VerificationReport {
    std::string suite;
    std::uint64_t seed = 0;
    std::vector<VerificationCase> cases;
    double wall_seconds = 0.0;

    bool pass() const {
        for (const auto& c : cases)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull));
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Random interval-supported pmf from strictly positive weights.
inline Pmf random_weights_pmf(std::mt19937_64& rng, int max_len = 12) {
    const int len = 2 + int(rng() % std::uint64_t(std::max(1, max_len - 1)));
    std::vector<double> w(std::size_t(len));
    for (double& v : w) v = uniform_in(rng, 0.05, 1.05);
    return from_weights(w);
}

/// Random log-concave pmf: exponential of a random concave sequence.
inline Pmf random_log_concave(std::mt19937_64& rng, int max_len = 14) {
    const int len = 3 + int(rng() % std::uint64_t(std::max(1, max_len - 2)));
    std::vector<double> logw(std::size_t(len));
    double level = 0.0;
    double slope = uniform_in(rng, -0.5, 1.5);
    for (int i = 0; i < len; ++i) {
        logw[std::size_t(i)] = level;
        level += slope;
        slope -= -std::log(uniform01(rng)) * 0.5;  // concave: slopes decrease
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(logw.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - top);
    return from_weights(w);
}

/// Random interval-supported pmf with mean lambda and a Poisson-like
/// represented tail: score ratios are drawn freely over a head block and
/// held constant (Poisson signature) beyond it, then the sequence is tilted
/// to the target mean and the far tail is folded into the deficit.  Used by
/// the Cramer-Rao suite, whose lower bounds concern light-tailed
/// representations.
inline Pmf random_mean_pmf(double lambda, std::mt19937_64& rng) {
    const int head = 4 + int(rng() % 12);
    const int total = head + 40 + int(6.0 * lambda);
    std::vector<double> lw(std::size_t(total) + 1, 0.0);
    for (int i = 0; i < total; ++i) {
        const double ratio = i < head ? lambda * uniform_in(rng, 0.25, 2.0) : lambda;
        lw[std::size_t(i) + 1] = lw[std::size_t(i)] + std::log(ratio) - std::log(double(i + 1));
    }
    std::vector<double> probs = tilt_to_mean(lw, lambda);
    Accumulator cut;
    while (probs.size() > 2 && probs.back() < 1e-17) {
        cut.add(probs.back());
        probs.pop_back();
    }
    return Pmf::from_parts(std::move(probs), std::max(0.0, cut.total()));
}

class SuiteBuilder {
  public:
    explicit SuiteBuilder(std::vector<VerificationCase>& out) : out_(out) {}

    /// pass iff value <= tolerance.
    void residual(std::string id, double value, double tolerance, std::string details = "") {
        out_.push_back({std::move(id), value <= tolerance, value, tolerance, false,
                        std::move(details)});
    }
    /// pass iff value >= -tolerance.
    void margin(std::string id, double value, double tolerance, std::string details = "") {
        out_.push_back({std::move(id), value >= -tolerance, value, tolerance, true,
                        std::move(details)});
    }
    /// boolean check encoded as a residual (0 = ok, 1 = failed).
    void boolean(std::string id, bool ok, std::string details = "") {
        residual(std::move(id), ok ? 0.0 : 1.0, 0.0, std::move(details));
    }

  private:
    std::vector<VerificationCase>& out_;
};

inline const std::vector<double>& lambda_grid() {
    static const std::vector<double> grid{0.5, 1.0, 2.0, 5.0};
    return grid;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// verify suites
// ---------------------------------------------------------------------------

namespace detail {

inline void run_algebra(std::uint64_t seed, int count, std::vector<VerificationCase>& cases) {
    SuiteBuilder b(cases);
    std::mt19937_64 rng(derive_seed(seed, 1));
    const TruncationPolicy policy{};
    const std::vector<double> t_grid{-1.0, -0.5, 0.0, 0.5, 1.0};

    double w_norm = 0, w_tail = -1, w_sym = 0, w_mean = 0, w_pgf = 0;
    double w_thin_id = 0, w_thin_pois = 0, w_pois_add = 0, w_comm = 0, w_tcomp = 0, w_scomp = 0;
    double w_semi = 0, w_theta = 0, w_pgflaw = 0, w_fall = 0, w_varev = 0;
    for (int k = 0; k < count; ++k) {
        const double lam = uniform_in(rng, 0.2, 6.0);
        const double p = uniform_in(rng, 0.05, 0.95);
        const int n = 1 + int(rng() % 24);
        const Pmf pois = poisson(lam, policy);
        const Pmf bin = binomial(n, p);
        const Pmf geo = geometric(uniform_in(rng, 0.2, 0.95), policy);
        const Pmf rnd = random_weights_pmf(rng);
        for (const Pmf* q : {&pois, &bin, &geo, &rnd})
            w_norm = std::max(w_norm,
                              std::abs(q->total_mass() + q->deficit() - 1.0));
        w_tail = std::max(w_tail, pois.deficit() - policy.tail_epsilon);

        const Pmf conv_ab = convolve(rnd, bin);
        const Pmf conv_ba = convolve(bin, rnd);
        w_sym = std::max(w_sym, total_variation(conv_ab, conv_ba));
        w_mean = std::max(w_mean, std::abs(mean(conv_ab) - mean(rnd) - mean(bin)));
        for (double t : t_grid)
            w_pgf = std::max(w_pgf, std::abs(pgf_eval(conv_ab, t) -
                                             pgf_eval(rnd, t) * pgf_eval(bin, t)));

        const double a1 = uniform_in(rng, 0.05, 1.0);
        const double a2 = uniform_in(rng, 0.05, 1.0);
        const double b1 = uniform_in(rng, 0.1, 2.5);
        const double b2 = uniform_in(rng, 0.1, 2.5);
        w_thin_id = std::max(w_thin_id, total_variation(thin(rnd, 1.0), rnd));
        w_thin_pois = std::max(w_thin_pois,
                               total_variation(thin(pois, a1), poisson(lam * a1, policy)));
        w_pois_add = std::max(w_pois_add, total_variation(add_poisson(poisson(b1, policy), b2),
                                                          poisson(b1 + b2, policy)));
        w_comm = std::max(w_comm, total_variation(thin(add_poisson(rnd, b1), a1),
                                                  add_poisson(thin(rnd, a1), a1 * b1)));
        w_tcomp = std::max(w_tcomp,
                           total_variation(thin(thin(rnd, a1), a2), thin(rnd, a1 * a2)));
        w_scomp = std::max(w_scomp, total_variation(add_poisson(add_poisson(rnd, b1), b2),
                                                    add_poisson(rnd, b1 + b2)));

        const Pmf x = random_ulc(lam, 256, rng());
        w_semi = std::max(w_semi,
                          total_variation(interpolate(interpolate(x, a2, lam), a1, lam),
                                          interpolate(x, a1 * a2, lam)));
        const double th1 = uniform_in(rng, 0.05, 1.5), th2 = uniform_in(rng, 0.05, 1.5);
        w_theta = std::max(
            w_theta,
            total_variation(
                interpolate(interpolate(x, std::exp(-th2), lam), std::exp(-th1), lam),
                interpolate(x, std::exp(-(th1 + th2)), lam)));

        const double f_a = uniform_in(rng, 0.0, 2.0);
        const Pmf moved = thin_add(rnd, a1, f_a);
        for (double t : t_grid)
            w_pgflaw = std::max(w_pgflaw,
                                std::abs(pgf_eval(moved, t) -
                                         pgf_eval(rnd, t * a1 + 1.0 - a1) *
                                             std::exp(f_a * (t - 1.0))));
        const Pmf thinned = thin(rnd, a1);
        for (int r = 1; r <= 3; ++r)
            w_fall = std::max(w_fall, std::abs(falling_moment(thinned, r) -
                                               std::pow(a1, r) * falling_moment(rnd, r)));
        const Pmf ux = interpolate(x, a1, lam);
        w_varev = std::max(w_varev, std::abs(variance(ux) - (a1 * a1 * variance(x) +
                                                             lam * (1.0 - a1 * a1))));
    }
    b.residual("algebra/01-constructor-normalization", w_norm, 1e-12);
    b.margin("algebra/02-poisson-tail-deficit", -w_tail, 0.0,
             "tail_epsilon - deficit over poisson draws");
    b.residual("algebra/03-convolution-symmetry", w_sym, 1e-14);
    b.residual("algebra/04-mean-additivity", w_mean, 1e-10);
    b.residual("algebra/05-pgf-factorization", w_pgf, 1e-10);
    b.residual("algebra/06-thin-identity", w_thin_id, 1e-14);
    b.residual("algebra/07-thin-poisson", w_thin_pois, 1e-10);
    b.residual("algebra/08-poisson-additivity", w_pois_add, 1e-10);
    b.residual("algebra/09-thin-add-commutation", w_comm, 1e-10);
    b.residual("algebra/10-thinning-composition", w_tcomp, 1e-12);
    b.residual("algebra/11-poisson-addition-composition", w_scomp, 1e-10);
    b.residual("algebra/12-interpolation-semigroup", w_semi, 1e-10);
    b.residual("algebra/13-interpolation-theta-additive", w_theta, 1e-10);
    b.residual("algebra/14-pgf-law", w_pgflaw, 1e-9);
    b.residual("algebra/15-falling-moment-scaling", w_fall, 1e-9);
    b.residual("algebra/16-variance-evolution", w_varev, 1e-9);

    // size-biasing and difference-operator identities
    std::mt19937_64 rng2(derive_seed(seed, 2));
    double w_sb = 0, w_sb2 = 0, w_adj = 0;
    const TruncationPolicy tight{1e-14, 4096};
    for (int k = 0; k < std::max(1, count / 4); ++k) {
        const double lam = uniform_in(rng2, 0.3, 5.0);
        const Pmf pois = poisson(lam, tight);
        w_sb = std::max(w_sb, total_variation(size_bias(pois), pois));
        w_sb2 = std::max(w_sb2, std::abs(size_bias_second(pois).total - 1.0));
        const int len = 3 + int(rng2() % 8);
        std::vector<double> f(std::size_t(len)), g(std::size_t(len));
        for (double& v : f) v = uniform_in(rng2, -1.0, 1.0);
        for (double& v : g) v = uniform_in(rng2, -1.0, 1.0);
        const auto df = delta(f);
        const auto dsg = delta_star(g);
        Accumulator lhs, rhs;
        for (std::size_t i = 0; i < f.size(); ++i) {
            lhs.add(df[i] * g[i]);
            rhs.add(f[i] * dsg[i]);
        }
        w_adj = std::max(w_adj, std::abs(lhs.total() - rhs.total()));
    }
    b.residual("algebra/17-size-bias-poisson-fixed-point", w_sb, 1e-12);
    b.residual("algebra/18-size-bias-second-total", w_sb2, 1e-10);
    b.residual("algebra/19-difference-adjointness", w_adj, 1e-12);

    // M/M/infinity generator sanity: constants are killed, identity maps to lam - z.
    {
        std::vector<double> cst(8, 3.25), idf(8);
        for (std::size_t z = 0; z < idf.size(); ++z) idf[z] = double(z);
        const auto lc = mm_infinity_generator(cst, 1.7);
        const auto li = mm_infinity_generator(idf, 1.7);
        double worst = 0.0;
        for (std::size_t z = 0; z + 1 < lc.size(); ++z) worst = std::max(worst, std::abs(lc[z]));
        for (std::size_t z = 0; z + 1 < li.size(); ++z)
            worst = std::max(worst, std::abs(li[z] - (1.7 - double(z))));
        b.residual("algebra/20-mm-infinity-generator", worst, 1e-12,
                   "interior action on constants and the identity");
    }
}

inline void run_concavity(std::uint64_t seed, int count, std::vector<VerificationCase>& cases) {
    SuiteBuilder b(cases);
    std::mt19937_64 rng(derive_seed(seed, 3));

    int equiv_mismatch = 0;
    double w_lc_closure = 0, w_ulc_closure = 0, w_bn = 0, w_bsum = 0;
    double w_mean_dev = 0, w_var_gap = 0, w_zero_mean = 0, w_proj = 0, w_tail = 0, w_pres = 0;
    bool ulc_slack0_ok = true, geo_eq_ok = true, geo_not_ulc_ok = true, pois_eq_ok = true;
    for (int k = 0; k < count; ++k) {
        const double lam = lambda_grid()[std::size_t(k) % lambda_grid().size()];
        const Pmf x = random_ulc(lam, 256, rng());
        const Pmf y = random_ulc(uniform_in(rng, 0.4, 3.0), 256, rng());
        const Pmf rnd = random_weights_pmf(rng);
        const Pmf geo = geometric(uniform_in(rng, 0.2, 0.9));
        const Pmf pois = poisson(uniform_in(rng, 0.3, 5.0));

        for (const Pmf* q : {&x, &rnd, &geo, &pois}) {
            const bool ulc = is_ultra_log_concave(*q).pass;
            const bool dec = is_score_decreasing(*q, mean(*q));
            if (ulc != dec) ++equiv_mismatch;
        }

        const Pmf lc1 = random_log_concave(rng), lc2 = random_log_concave(rng);
        w_lc_closure = std::min(w_lc_closure, is_log_concave(convolve(lc1, lc2)).min_margin);
        w_ulc_closure = std::min(w_ulc_closure, is_ultra_log_concave(convolve(x, y)).min_margin);

        const int nb = 2 + int(rng() % 6);
        std::vector<double> pv(std::size_t(nb));
        for (double& v : pv) v = uniform_in(rng, 0.0, 1.0);
        const Pmf s = bernoulli_sum(pv);
        for (double mgn : ulc_order_n_margin(s, nb)) w_bn = std::min(w_bn, mgn);
        w_bsum = std::min(w_bsum, is_ultra_log_concave(s).min_margin);

        ulc_slack0_ok = ulc_slack0_ok && is_ultra_log_concave(x, 0.0).pass;
        w_mean_dev = std::max(w_mean_dev, std::abs(mean(x) - lam));
        w_var_gap = std::min(w_var_gap, mean(x) - variance(x));

        const auto sc = score(x, mean(x));
        Accumulator zm;
        for (int i = sc.lo; i <= sc.hi(); ++i) zm.add(x(i) * sc(i));
        w_zero_mean = std::max(w_zero_mean, std::abs(zm.total()));

        w_proj = std::max(w_proj, score_projection_residual(x, y));
        const double bound = (std::exp(lam) - lam - 1.0) / lam;
        w_tail = std::max(w_tail, conditional_tail_ratio(x) - bound);

        const double a = uniform_in(rng, 0.05, 1.0);
        const double beta = uniform_in(rng, 0.1, 2.0);
        w_pres = std::min(w_pres, is_ultra_log_concave(thin(x, a)).min_margin);
        w_pres = std::min(w_pres, is_ultra_log_concave(add_poisson(x, beta)).min_margin);
        w_pres = std::min(w_pres, is_ultra_log_concave(interpolate(x, a, lam)).min_margin);

        const auto geo_lc = is_log_concave(geo);
        geo_eq_ok = geo_eq_ok && geo_lc.pass && geo_lc.all_equal;
        geo_not_ulc_ok = geo_not_ulc_ok && !is_ultra_log_concave(geo).pass;
        const auto pois_ulc = is_ultra_log_concave(pois);
        pois_eq_ok = pois_eq_ok && pois_ulc.pass && pois_ulc.all_equal;
    }
    b.boolean("concavity/01-ulc-score-equivalence", equiv_mismatch == 0,
              std::to_string(equiv_mismatch) + " predicate disagreements");
    b.margin("concavity/02-lc-closure", w_lc_closure, 1e-9);
    b.margin("concavity/03-ulc-closure", w_ulc_closure, 1e-9);
    b.margin("concavity/04-bernoulli-sum-order-n", w_bn, 1e-9);
    b.margin("concavity/05-bernoulli-sum-ulc", w_bsum, 1e-9);
    b.boolean("concavity/06-geometric-lc-equality", geo_eq_ok);
    b.boolean("concavity/07-geometric-not-ulc", geo_not_ulc_ok);
    b.boolean("concavity/08-poisson-ulc-all-equal", pois_eq_ok);
    b.boolean("concavity/09-random-ulc-slack-zero", ulc_slack0_ok);
    b.residual("concavity/10-random-ulc-mean", w_mean_dev, 1e-9);
    b.margin("concavity/11-ulc-variance-bound", w_var_gap, 1e-9, "mean - variance over draws");
    b.residual("concavity/12-score-zero-mean", w_zero_mean, 1e-9);
    b.residual("concavity/13-score-projection", w_proj, 1e-9);
    b.margin("concavity/14-conditional-tail-bound", -w_tail, 1e-9);
    b.margin("concavity/15-ulc-preservation", w_pres, 1e-9);

    // Poisson weights restricted to [0, 4] break order-4 ultra log-concavity.
    {
        std::vector<double> w(5);
        for (int i = 0; i <= 4; ++i) w[std::size_t(i)] = poisson_pmf_at(1.0, i);
        const auto margins = ulc_order_n_margin(from_weights(w), 4);
        const double least = *std::min_element(margins.begin(), margins.end());
        b.boolean("concavity/16-order-n-strictness-witness", least < 0.0,
                  "restricted poisson must fail ULC(4)");
    }
}

inline void run_flow(std::uint64_t seed, int count, std::vector<VerificationCase>& cases) {
    SuiteBuilder b(cases);
    std::mt19937_64 rng(derive_seed(seed, 4));
    const int m = std::max(3, std::min(count, 50));

    double w_fixed = 0, w_ratio = 0, w_small = 0, w_reform = 0;
    double w_slope_sign = 0, w_slope_fd = 0, w_curv_fd = 0, w_curv_sign = 0;
    double w_dslope_sign = 0, w_dslope_forms = 0, w_dslope_fd = 0;
    double w_dcurv_sign = 0, w_dcurv_fd = 0, w_strict = 0, w_fixed_tv = 0;
    double w_rows = 0, w_hdiff = 0, w_hdiff2 = 0;
    for (int k = 0; k < m; ++k) {
        const double lam = lambda_grid()[std::size_t(k) % lambda_grid().size()];
        const Pmf x = random_ulc(lam, 256, rng());
        const FlowPath upath = FlowPath::u_flow(lam);
        const FlowPath tpath = FlowPath::constant_zero();
        const double a = 0.5;

        w_fixed = std::max(w_fixed, heat_residual(poisson(lam), upath, a, 1e-3));
        for (const FlowPath* path : {&upath, &tpath}) {
            const double r1 = heat_residual(x, *path, a, 1e-3);
            const double r2 = heat_residual(x, *path, a, 5e-4);
            w_ratio = std::max(w_ratio, std::abs(r1 / r2 - 4.0));
            w_small = std::max(w_small, heat_residual(x, *path, a, 1e-4));
        }

        const Pmf state = flowed_state(x, upath, a);
        const std::size_t len = state.size() + 2;
        const auto rhs_a = heat_rhs_score_form(state, lam, a, len);
        const auto rhs_b = heat_rhs_poisson_form(state, lam, a, len);
        const auto rhs_c = heat_rhs(state, upath, a, len);
        for (std::size_t z = 0; z < len; ++z) {
            w_reform = std::max(w_reform, std::abs(rhs_a[z] - rhs_b[z]));
            w_reform = std::max(w_reform, std::abs(rhs_a[z] - rhs_c[z]));
        }

        auto lam_at = [&](double aa) { return poisson_cross_entropy(flowed_state(x, upath, aa), lam).value; };
        auto div_at = [&](double aa) { return relative_entropy_vs_poisson(flowed_state(x, upath, aa), lam).value; };
        const double h = 1e-4, h2 = 1e-3;
        const double slope = cross_entropy_slope(state, lam, a);
        const double slope_fd = (lam_at(a + h) - lam_at(a - h)) / (2.0 * h);
        w_slope_sign = std::max(w_slope_sign, slope);
        w_slope_fd = std::max(w_slope_fd, std::abs(slope - slope_fd) /
                                              std::max({1.0, std::abs(slope), std::abs(slope_fd)}));
        const double curv = cross_entropy_curvature(state, lam, a);
        const double curv_fd = (lam_at(a + h2) - 2.0 * lam_at(a) + lam_at(a - h2)) / (h2 * h2);
        w_curv_sign = std::max(w_curv_sign, curv);
        w_curv_fd = std::max(w_curv_fd, std::abs(curv - curv_fd) /
                                            std::max({1.0, std::abs(curv), std::abs(curv_fd)}));
        const double dsl = divergence_slope(state, lam, a);
        const double dsl_form = divergence_slope_score_form(state, lam, a);
        const double dsl_fd = (div_at(a + h) - div_at(a - h)) / (2.0 * h);
        w_dslope_sign = std::min(w_dslope_sign, dsl);
        w_dslope_forms = std::max(w_dslope_forms, std::abs(dsl - dsl_form));
        w_dslope_fd = std::max(w_dslope_fd, std::abs(dsl - dsl_fd) /
                                                std::max({1.0, std::abs(dsl), std::abs(dsl_fd)}));
        const double dcv = divergence_curvature(state, lam, a);
        const double dcv_fd = (div_at(a + h2) - 2.0 * div_at(a) + div_at(a - h2)) / (h2 * h2);
        w_dcurv_sign = std::min(w_dcurv_sign, dcv);
        w_dcurv_fd = std::max(w_dcurv_fd, std::abs(dcv - dcv_fd) /
                                              std::max({1.0, std::abs(dcv), std::abs(dcv_fd)}));

        if (total_variation(x, poisson(lam)) > 1e-3)
            w_strict = std::max(w_strict, cross_entropy_slope(x, lam, 1.0) + 1e-12);
        w_fixed_tv = std::max(w_fixed_tv, total_variation(interpolate(poisson(lam),
                                                                      uniform_in(rng, 0.1, 1.0),
                                                                      lam),
                                                          poisson(lam)));
    }

    // curve rows on a smaller batch
    std::mt19937_64 rng2(derive_seed(seed, 5));
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(0.05 + 0.0475 * double(i));
    grid.back() = 1.0;
    for (int k = 0; k < std::max(2, m / 5); ++k) {
        const double lam = lambda_grid()[std::size_t(k) % lambda_grid().size()];
        const Pmf x = random_ulc(lam, 256, rng2());
        const FlowCurve curve = entropy_curve(x, lam, grid);
        for (const FlowRow& r : curve.rows)
            w_rows = std::max(w_rows, std::abs(r.entropy - (r.cross_entropy - r.divergence)) -
                                          r.deficit_budget);
        for (std::size_t i = 0; i + 1 < curve.rows.size(); ++i)
            w_hdiff = std::max(w_hdiff, curve.rows[i + 1].entropy - curve.rows[i].entropy);
        for (std::size_t i = 1; i + 1 < curve.rows.size(); ++i)
            w_hdiff2 = std::max(w_hdiff2, curve.rows[i + 1].entropy -
                                              2.0 * curve.rows[i].entropy +
                                              curve.rows[i - 1].entropy);
    }

    b.residual("flow/01-heat-fixed-point", w_fixed, 1e-10);
    b.residual("flow/02-richardson-ratio", w_ratio, 0.5, "|ratio - 4| for both paths");
    b.residual("flow/03-residual-small-h", w_small, 1e-6);
    b.residual("flow/04-reformulation-agreement", w_reform, 1e-10);
    b.margin("flow/05-cross-entropy-slope-sign", -w_slope_sign, 1e-9);
    b.residual("flow/06-cross-entropy-slope-fd", w_slope_fd, 1e-5);
    b.margin("flow/07-cross-entropy-curvature-sign", -w_curv_sign, 1e-9);
    b.residual("flow/08-cross-entropy-curvature-fd", w_curv_fd, 1e-5);
    b.margin("flow/09-divergence-slope-sign", w_dslope_sign, 1e-9);
    b.residual("flow/10-divergence-slope-forms", w_dslope_forms, 1e-10);
    b.residual("flow/11-divergence-slope-fd", w_dslope_fd, 1e-5);
    b.margin("flow/12-divergence-curvature-sign", w_dcurv_sign, 1e-9);
    b.residual("flow/13-divergence-curvature-fd", w_dcurv_fd, 1e-5);
    b.margin("flow/14-strict-decrease", -w_strict, 0.0, "slope at alpha=1 below -1e-12");
    b.residual("flow/15-poisson-fixed-point", w_fixed_tv, 1e-10);
    b.residual("flow/16-curve-row-identity", w_rows, 1e-9);
    b.residual("flow/17-curve-monotone", w_hdiff, 1e-10);
    b.residual("flow/18-curve-concave", w_hdiff2, 1e-8);
}

inline void run_maxent(std::uint64_t seed, int count, std::vector<VerificationCase>& cases) {
    SuiteBuilder b(cases);
    std::mt19937_64 rng(derive_seed(seed, 6));

    double w_gap = 0, w_decomp = 0, w_pois_eq = 0, w_logsum = 0;
    bool implication_ok = true, reduction_ok = true, gibbs_ok = true;
    for (int k = 0; k < count; ++k) {
        const double lam = lambda_grid()[std::size_t(k) % lambda_grid().size()];
        const Pmf z = poisson(lam);
        const FunctionalValue hz = entropy(z);
        const Pmf x = random_ulc(lam, 256, rng());
        const FunctionalValue hx = entropy(x);
        const double slack = 1e-12 + hz.deficit_budget + hx.deficit_budget;
        w_gap = std::max(w_gap, hx.value - hz.value - slack);
        if (hz.value - hx.value < 1e-10 && total_variation(x, z) >= 1e-6) implication_ok = false;

        const Pmf r = random_weights_pmf(rng);
        const FunctionalValue hr = entropy(r);
        const FunctionalValue dr = relative_entropy_vs_poisson(r, lam);
        const FunctionalValue lr = poisson_cross_entropy(r, lam);
        w_decomp = std::max(w_decomp, std::abs(hr.value + dr.value - lr.value));
        if (lr.value <= poisson_cross_entropy(z, lam).value && hr.value > hz.value + 1e-10)
            reduction_ok = false;

        const FunctionalValue gibbs = relative_entropy_vs_poisson(x, lam);
        if (gibbs.value < -1e-12) gibbs_ok = false;
        if (gibbs.value < 1e-12 && total_variation(x, z) > 1e-6) gibbs_ok = false;

        const int len = 3 + int(rng() % 6);
        std::vector<double> av(std::size_t(len)), bv(std::size_t(len));
        for (double& v : av) v = uniform_in(rng, 0.05, 2.0);
        for (double& v : bv) v = uniform_in(rng, 0.05, 2.0);
        Accumulator sa, sb;
        for (double v : av) sa.add(v);
        for (double v : bv) sb.add(v);
        const double lhs = kl_divergence(av, bv);
        const double rhs = sa.total() * std::log(sa.total() / sb.total());
        w_logsum = std::min(w_logsum, lhs - rhs);
    }
    for (double lam : lambda_grid()) {
        const Pmf z = poisson(lam);
        w_pois_eq = std::max(w_pois_eq, std::abs(poisson_cross_entropy(z, lam).value -
                                                 entropy(z).value));
        // the equality branch of the implication: the Poisson itself
        const double gap = 0.0;
        if (!(gap < 1e-10 && total_variation(z, z) < 1e-6)) implication_ok = false;
    }
    b.margin("maxent/01-ulc-entropy-bound", -w_gap, 0.0,
             "H(Z) + 1e-12 + budget - H(X), worst draw");
    b.boolean("maxent/02-equality-gap-implication", implication_ok);
    b.residual("maxent/03-decomposition", w_decomp, 1e-10);
    b.residual("maxent/04-poisson-cross-entropy-equality", w_pois_eq, 1e-10);
    b.boolean("maxent/05-cross-entropy-reduction", reduction_ok);
    b.boolean("maxent/06-gibbs", gibbs_ok);
    b.margin("maxent/07-log-sum-inequality", w_logsum, 1e-10);

    // Bernoulli-sum probing against the binomial and Poisson ceilings.
    std::mt19937_64 rng2(derive_seed(seed, 7));
    double w_bn = 0, w_shepp = 0;
    const int n = 4;
    const double lam = 1.0;
    const double h_bin = entropy(binomial(n, lam / double(n))).value;
    const double h_pois = entropy(poisson(lam)).value;
    for (int k = 0; k < count; ++k) {
        std::vector<double> p(std::size_t(n));
        double total = 0.0;
        for (;;) {
            total = 0.0;
            for (double& v : p) {
                v = -std::log(uniform01(rng2));
                total += v;
            }
            bool ok = true;
            for (double& v : p) {
                v *= lam / total;
                if (v > 1.0) ok = false;
            }
            if (ok) break;
        }
        w_bn = std::max(w_bn, entropy(bernoulli_sum(p)).value - h_bin);
    }
    w_shepp = h_bin - h_pois;
    b.margin("maxent/08-bernoulli-sum-vs-binomial", -w_bn, 1e-10);
    b.margin("maxent/09-binomial-vs-poisson", -w_shepp, 1e-10);
}

inline void run_cramer_rao(std::uint64_t seed, int count, std::vector<VerificationCase>& cases) {
    SuiteBuilder b(cases);
    std::mt19937_64 rng(derive_seed(seed, 8));

    double w_eq1 = 0, w_eq2 = 0, w_b1 = 0, w_b2 = 0, w_rho = 0;
    for (double lam : lambda_grid()) {
        const Pmf z = poisson(lam);
        w_eq1 = std::max(w_eq1, std::abs(cramer_rao_1(z, lam) - 1.0));
        w_eq2 = std::max(w_eq2, std::abs(cramer_rao_2(z, lam) - 1.0 / lam));
    }
    for (int k = 0; k < count; ++k) {
        const double lam = lambda_grid()[std::size_t(k) % lambda_grid().size()];
        const Pmf p = random_mean_pmf(lam, rng);
        w_b1 = std::min(w_b1, cramer_rao_1(p, lam) - 1.0);
        w_b2 = std::min(w_b2, cramer_rao_2(p, lam) - 1.0 / lam);

        const double m = mean(p);
        const auto sc = score(p, m);
        Accumulator quad;
        for (int i = sc.lo; i <= sc.hi(); ++i) quad.add(p(i) * sc(i) * sc(i));
        w_rho = std::max(w_rho, std::abs(cramer_rao_1(p, m) - 1.0 - quad.total()));
    }
    b.residual("cramer-rao/01-poisson-equality-first", w_eq1, 1e-10);
    b.residual("cramer-rao/02-poisson-equality-second", w_eq2, 1e-10);
    b.margin("cramer-rao/03-first-bound", w_b1, 1e-9, "F1 - 1 over mean-matched draws");
    b.margin("cramer-rao/04-second-bound", w_b2, 1e-9, "F2 - 1/lambda over mean-matched draws");
    b.residual("cramer-rao/05-score-quadratic-identity", w_rho, 1e-9);

    const Pmf two = binomial(2, 0.5);
    const Pmf unif = from_weights({1.0, 1.0});
    double w_frozen = std::abs(cramer_rao_1(two, 1.0) - 1.5);
    w_frozen = std::max(w_frozen, std::abs(cramer_rao_2(two, 1.0) - 0.625));
    w_frozen = std::max(w_frozen, std::abs(cramer_rao_2(unif, 0.5) - 0.5));
    b.residual("cramer-rao/06-frozen-spot-values", w_frozen, 1e-12);
}

}  // namespace detail

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"algebra", "concavity-classes",
                                                "flow-derivatives", "maxent", "cramer-rao"};
    return names;
}

/// Run one named suite (or "all") with case_count randomized instances per
/// invariant.  Deterministic given (suite, seed, case_count).
inline VerificationReport run_suite(const std::string& suite, std::uint64_t seed,
                                    int case_count) {
    const auto start = std::chrono::steady_clock::now();
    VerificationReport report;
    report.suite = suite;
    report.seed = seed;
    const int n = std::max(1, case_count);
    if (suite == "algebra" || suite == "all") detail::run_algebra(seed, n, report.cases);
    if (suite == "concavity-classes" || suite == "all")
        detail::run_concavity(seed, n, report.cases);
    if (suite == "flow-derivatives" || suite == "all") detail::run_flow(seed, n, report.cases);
    if (suite == "maxent" || suite == "all") detail::run_maxent(seed, n, report.cases);
    if (suite == "cramer-rao" || suite == "all") detail::run_cramer_rao(seed, n, report.cases);
    if (report.cases.empty()) throw domain_error("run_suite: unknown suite '" + suite + "'");
    std::sort(report.cases.begin(), report.cases.end(),
              [](const VerificationCase& a, const VerificationCase& b) { return a.id < b.id; });
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

inline nlohmann::json pmf_to_json(const Pmf& pmf) {
    return nlohmann::json{{"probs", pmf.probs()}, {"deficit", pmf.deficit()}};
}

inline Pmf pmf_from_json(const nlohmann::json& j) {
    if (!j.contains("probs"))
        throw construction_error("pmf json: missing 'probs'");
    std::vector<double> probs = j.at("probs").get<std::vector<double>>();
    const double deficit = j.value("deficit", 0.0);
    return Pmf::from_parts(std::move(probs), deficit);
}

inline nlohmann::json margin_report_to_json(const MarginReport& rep) {
    return nlohmann::json{{"pass", rep.pass},
                          {"min_margin", rep.min_margin},
                          {"argmin", rep.argmin},
                          {"slack", rep.slack}};
}

/// Stable-key-order JSON; wall_time is reported in whole seconds so that
/// identical command + seed reproduces byte-identical output.
inline nlohmann::json report_to_json(const VerificationReport& report) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : report.cases) {
        nlohmann::json jc{{"id", c.id},
                          {"pass", c.pass},
                          {"tolerance", c.tolerance},
                          {"details", c.details}};
        jc[c.is_margin ? "margin" : "residual"] = c.value;
        cases.push_back(jc);
    }
    return nlohmann::json{{"suite", report.suite},
                          {"seed", report.seed},
                          {"pass", report.pass()},
                          {"wall_time", std::int64_t(report.wall_seconds)},
                          {"cases", cases}};
}

// ---------------------------------------------------------------------------
// named families, grids, experiments
// ---------------------------------------------------------------------------

/// Parse "family:param[,param]" -- poisson:lambda | binomial:n,p |
/// geometric:p | bernoulli:p.
inline Pmf make_family(const std::string& spec, const TruncationPolicy& policy = {}) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    std::vector<double> params;
    if (colon != std::string::npos) {
        std::string rest = spec.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size() && !rest.empty()) {
            const auto comma = rest.find(',', pos);
            const std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                                : comma - pos);
            try {
                params.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw domain_error("make_family: bad parameter '" + tok + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    auto want = [&](std::size_t k) {
        if (params.size() != k)
            throw domain_error("make_family: " + name + " expects " + std::to_string(k) +
                               " parameter(s)");
    };
    if (name == "poisson") {
        want(1);
        return poisson(params[0], policy);
    }
    if (name == "binomial") {
        want(2);
        return binomial(int(params[0]), params[1]);
    }
    if (name == "geometric") {
        want(1);
        return geometric(params[0], policy);
    }
    if (name == "bernoulli") {
        want(1);
        return binomial(1, params[0]);
    }
    throw domain_error("make_family: unknown family '" + name + "'");
}

/// Parse "lo:hi:step" into an increasing grid, inclusive of hi up to
/// rounding.
inline std::vector<double> parse_grid(const std::string& spec) {
    double lo = 0, hi = 0, step = 0;
    const auto c1 = spec.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos : spec.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw domain_error("parse_grid: expected lo:hi:step");
    try {
        lo = std::stod(spec.substr(0, c1));
        hi = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
        step = std::stod(spec.substr(c2 + 1));
    } catch (const std::exception&) {
        throw domain_error("parse_grid: bad number in '" + spec + "'");
    }
    if (!(step > 0.0) || !(hi >= lo)) throw domain_error("parse_grid: need step > 0 and hi >= lo");
    std::vector<double> grid;
    const int count = int(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int i = 0; i < count; ++i) grid.push_back(lo + step * double(i));
    return grid;
}

/// Base-family member with a prescribed mean, for the accumulation
/// experiment: bernoulli | poisson | binomial:k.
inline Pmf make_base_member(const std::string& base, double mean_target,
                            const TruncationPolicy& policy = {}) {
    if (base == "bernoulli") {
        if (!(mean_target >= 0.0 && mean_target <= 1.0))
            throw property_error("accumulate: bernoulli base needs mean in [0, 1], got " +
                                 std::to_string(mean_target));
        return binomial(1, mean_target);
    }
    if (base == "poisson") return poisson(mean_target, policy);
    if (base.rfind("binomial:", 0) == 0) {
        const int k = std::stoi(base.substr(9));
        if (k < 1 || mean_target > double(k))
            throw property_error("accumulate: binomial base order too small for mean " +
                                 std::to_string(mean_target));
        return binomial(k, mean_target / double(k));
    }
    throw domain_error("accumulate: unknown base family '" + base + "'");
}

struct AccumulateRow {
    int n = 0;
    double tv = 0.0;
};

/// n-fold convolutions of the mean-(lambda/n) base member, with total
/// variation distance to Poisson(lambda).  Enforces the base constructor
/// contract (mean + ultra log-concavity) and the monotone decrease of the
/// emitted column.
inline std::vector<AccumulateRow> accumulate_curve(double lambda, std::span<const int> n_list,
                                                   const std::string& base,
                                                   const TruncationPolicy& policy = {}) {
    if (!(lambda > 0.0)) throw domain_error("accumulate: lambda must be > 0");
    if (n_list.empty()) throw domain_error("accumulate: empty n list");
    const Pmf target = poisson(lambda, policy);
    std::vector<AccumulateRow> rows;
    for (int n : n_list) {
        if (n < 1) throw domain_error("accumulate: n must be >= 1");
        const Pmf member = make_base_member(base, lambda / double(n), policy);
        if (std::abs(mean(member) - lambda / double(n)) > 1e-9)
            throw property_error("accumulate: base member mean " + std::to_string(mean(member)) +
                                 " misses lambda/n");
        if (!is_ultra_log_concave(member, 1e-9).pass)
            throw property_error("accumulate: base member at mean " +
                                 std::to_string(lambda / double(n)) +
                                 " is not ultra log-concave");
        Pmf sum = member;
        for (int i = 1; i < n; ++i) sum = convolve(sum, member, policy);
        rows.push_back({n, total_variation(sum, target)});
    }
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
        if (rows[i + 1].tv > rows[i].tv + 1e-12)
            throw property_error("accumulate: TV column is not non-increasing at n = " +
                                 std::to_string(rows[i + 1].n));
    return rows;
}

inline std::string accumulate_csv(std::span<const AccumulateRow> rows) {
    std::string out = "n,tv\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", r.n, r.tv);
        out += buf;
    }
    return out;
}

struct MaxentProbeReport {
    int n = 0;
    double lambda = 0.0;
    int trials = 0;
    std::uint64_t seed = 0;
    bool pass = true;
    double max_entropy = -std::numeric_limits<double>::infinity();
    double binomial_entropy = 0.0;
    double poisson_entropy = 0.0;
    double worst_margin = std::numeric_limits<double>::infinity();
};

/// Draw `trials` random p-vectors with sum(p) = lambda (exponential spacings
/// rescaled, rejecting draws with a coordinate above 1), build the Bernoulli
/// sums, and compare their entropies against the binomial and Poisson
/// ceilings.
inline MaxentProbeReport maxent_probe(int n, double lambda, int trials, std::uint64_t seed) {
    if (n < 1) throw domain_error("maxent_probe: n must be >= 1");
    if (!(lambda > 0.0 && lambda < double(n)))
        throw domain_error("maxent_probe: need 0 < lambda < n");
    if (trials < 0) throw domain_error("maxent_probe: trials must be >= 0");
    MaxentProbeReport rep;
    rep.n = n;
    rep.lambda = lambda;
    rep.trials = trials;
    rep.seed = seed;
    rep.binomial_entropy = entropy(binomial(n, lambda / double(n))).value;
    rep.poisson_entropy = entropy(poisson(lambda)).value;

    std::mt19937_64 rng(seed);
    std::vector<double> p(std::size_t(n));
    for (int t = 0; t < trials; ++t) {
        int guard = 0;
        for (;;) {
            double total = 0.0;
            for (double& v : p) {
                v = -std::log(detail::uniform01(rng));
                total += v;
            }
            bool ok = true;
            for (double& v : p) {
                v *= lambda / total;
                if (v > 1.0) ok = false;
            }
            if (ok) break;
            if (++guard > 10000)
                throw sampler_error("maxent_probe: rejection sampler stalled");
        }
        const double h = entropy(bernoulli_sum(p)).value;
        rep.max_entropy = std::max(rep.max_entropy, h);
        const double margin = std::min(rep.binomial_entropy + 1e-10 - h,
                                       rep.poisson_entropy + 1e-10 - h);
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (margin < 0.0) rep.pass = false;
    }
    if (rep.binomial_entropy > rep.poisson_entropy + 1e-10) rep.pass = false;
    return rep;
}

inline nlohmann::json maxent_probe_to_json(const MaxentProbeReport& rep) {
    nlohmann::json j{{"n", rep.n},
                     {"lambda", rep.lambda},
                     {"trials", rep.trials},
                     {"seed", rep.seed},
                     {"pass", rep.pass},
                     {"binomial_entropy", rep.binomial_entropy},
                     {"poisson_entropy", rep.poisson_entropy}};
    if (rep.trials > 0) {
        j["max_entropy"] = rep.max_entropy;
        j["entropy_gap"] = rep.binomial_entropy - rep.max_entropy;
        j["worst_margin"] = rep.worst_margin;
    } else {
        j["max_entropy"] = nullptr;
        j["entropy_gap"] = nullptr;
        j["worst_margin"] = nullptr;
    }
    return j;
}

}  // namespace pflow
