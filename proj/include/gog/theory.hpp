#pragma once

// Linear-Gaussian correlation model relating features x, model error U and a
// sensitive attribute s:
//   s = a x + e_a,  e_a ~ N(mu_a, var_a)
//   s = b U + e_b,  e_b ~ N(mu_b, var_b),   x ~ N(0, 1)
// Closed forms for the correlations, a Monte Carlo estimator of the same
// quantities, and an empirical check on a trained learner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "gog/data.hpp"
#include "gog/error.hpp"
#include "gog/learner.hpp"
#include "gog/numeric.hpp"

namespace gog {

struct ClosedForms {
    double corr_x_s = 0.0;
    double corr_x_u = 0.0;
    double corr_u_s = 0.0;
    double cov_xu_s = 0.0;
    double var_s = 0.0;
    // As derived with Var(xU) = (2a^2 + var_a + var_b) / b^2.
    double var_xu = 0.0;
    double corr_xu_s = 0.0;
    double ratio = 0.0;  // (mu_a - mu_b) / sqrt(2a^2 + var_a + var_b)
    // Var(xU) including the squared noise-mean term E[e_a - e_b]^2 / b^2.
    double var_xu_exact = 0.0;
    double corr_xu_s_exact = 0.0;
    double ratio_exact = 0.0;
};

inline ClosedForms closed_forms(const SyntheticSpec& spec) {
    const double a = spec.a, b = spec.b, va = spec.var_a, vb = spec.var_b;
    const double dm = spec.mu_a - spec.mu_b;
    if (b == 0.0) throw InvalidArgument("closed_forms: b must be nonzero");
    if (a * a + va <= 0.0) throw InvalidArgument("closed_forms: a^2 + var_a must be positive");
    if (va < 0.0 || vb < 0.0) throw InvalidArgument("closed_forms: variances must be nonnegative");

    ClosedForms f;
    f.var_s = a * a + va;
    f.corr_x_s = a / std::sqrt(f.var_s);
    f.corr_x_u = a / std::sqrt(a * a + va + vb);
    f.corr_u_s = std::sqrt(f.var_s) / std::sqrt(a * a + va + vb);
    f.cov_xu_s = a * dm / b;
    f.var_xu = (2.0 * a * a + va + vb) / (b * b);
    f.corr_xu_s = f.var_xu > 0.0 ? f.cov_xu_s / std::sqrt(f.var_xu * f.var_s) : 0.0;
    f.ratio = 2.0 * a * a + va + vb > 0.0 ? dm / std::sqrt(2.0 * a * a + va + vb) : 0.0;
    f.var_xu_exact = (2.0 * a * a + va + vb + dm * dm) / (b * b);
    f.corr_xu_s_exact = f.var_xu_exact > 0.0 ? f.cov_xu_s / std::sqrt(f.var_xu_exact * f.var_s) : 0.0;
    f.ratio_exact = f.corr_x_s != 0.0 ? f.corr_xu_s_exact / f.corr_x_s : 0.0;
    return f;
}

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct MonteCarlo {
    std::size_t n = 0;
    Estimate corr_x_s, corr_x_u, corr_u_s, corr_xu_s, ratio;
};

inline constexpr std::size_t kMonteCarloMinSamples = 10000;
inline constexpr std::size_t kMonteCarloBatches = 100;

/// Standard error of a Pearson estimate: (1 - rho^2) / sqrt(n).
inline double correlation_stderr(double rho, std::size_t n) {
    return (1.0 - rho * rho) / std::sqrt(static_cast<double>(n));
}

/// Draws n samples from the model and estimates every correlation.
inline MonteCarlo monte_carlo(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n < kMonteCarloMinSamples)
        throw InvalidArgument("monte_carlo: need at least " + std::to_string(kMonteCarloMinSamples) + " samples");
    if (spec.b == 0.0) throw InvalidArgument("monte_carlo: b must be nonzero");
    if (spec.var_a < 0.0 || spec.var_b < 0.0) throw InvalidArgument("monte_carlo: variances must be nonnegative");
    Rng rng(seed);
    const double sd_a = std::sqrt(spec.var_a), sd_b = std::sqrt(spec.var_b);
    std::vector<double> x(n), s(n), u(n), xu(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        const double ea = spec.mu_a + sd_a * rng.normal();
        const double eb = spec.mu_b + sd_b * rng.normal();
        s[i] = spec.a * x[i] + ea;
        u[i] = (s[i] - eb) / spec.b;
        xu[i] = x[i] * u[i];
    }
    MonteCarlo mc;
    mc.n = n;
    auto est = [n](double rho) { return Estimate{rho, correlation_stderr(rho, n)}; };
    mc.corr_x_s = est(pearson(x, s));
    mc.corr_x_u = est(pearson(x, u));
    mc.corr_u_s = est(pearson(u, s));
    // xU is not Gaussian, so (1 - rho^2)/sqrt(n) understates the spread of the
    // two xU statistics; their standard errors come from batch means instead.
    const std::size_t batches = kMonteCarloBatches;
    const std::size_t len = n / batches;
    std::vector<double> batch_corr(batches), batch_ratio(batches);
    for (std::size_t k = 0; k < batches; ++k) {
        const std::size_t off = k * len;
        const std::span<const double> xb(x.data() + off, len), sb(s.data() + off, len), xub(xu.data() + off, len);
        batch_corr[k] = pearson(xub, sb);
        batch_ratio[k] = batch_corr[k] / pearson(xb, sb);
    }
    const double root_b = std::sqrt(static_cast<double>(batches));
    mc.corr_xu_s = {pearson(xu, s), sample_stddev(batch_corr) / root_b};
    mc.ratio = {mc.corr_xu_s.value / mc.corr_x_s.value, sample_stddev(batch_ratio) / root_b};
    return mc;
}

/// Number of standard errors between an estimate and a reference value.
inline double z_score(const Estimate& e, double reference) {
    if (e.std_error <= 0.0) return e.value == reference ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(e.value - reference) / e.std_error;
}

struct CorrReport {
    SyntheticSpec spec;
    ClosedForms closed;
    MonteCarlo empirical;

    static void write_csv_header(std::ostream& os) {
        os << "a,b,mu_a,mu_b,var_a,var_b,n,"
              "cf_corr_x_s,cf_corr_x_u,cf_corr_u_s,cf_corr_xu_s,cf_ratio,cf_corr_xu_s_exact,cf_ratio_exact,"
              "mc_corr_x_s,se_corr_x_s,mc_corr_x_u,se_corr_x_u,mc_corr_u_s,se_corr_u_s,"
              "mc_corr_xu_s,se_corr_xu_s,mc_ratio,se_ratio\n";
    }

    void write_csv(std::ostream& os) const {
        const auto& c = closed;
        const auto& m = empirical;
        os << spec.a << ',' << spec.b << ',' << spec.mu_a << ',' << spec.mu_b << ',' << spec.var_a << ','
           << spec.var_b << ',' << m.n << ',' << c.corr_x_s << ',' << c.corr_x_u << ',' << c.corr_u_s << ','
           << c.corr_xu_s << ',' << c.ratio << ',' << c.corr_xu_s_exact << ',' << c.ratio_exact << ','
           << m.corr_x_s.value << ',' << m.corr_x_s.std_error << ',' << m.corr_x_u.value << ',' << m.corr_x_u.std_error
           << ',' << m.corr_u_s.value << ',' << m.corr_u_s.std_error << ',' << m.corr_xu_s.value << ','
           << m.corr_xu_s.std_error << ',' << m.ratio.value << ',' << m.ratio.std_error << '\n';
    }
};

inline CorrReport correlation_report(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
    return {spec, closed_forms(spec), monte_carlo(spec, n, seed)};
}

/// Twelve specs on three grid lines (a = 0.5, 1, 2), each with the noise
/// variances growing along the line and mu_a - mu_b = 1.
inline std::vector<SyntheticSpec> default_theory_grid() {
    std::vector<SyntheticSpec> out;
    for (double a : {0.5, 1.0, 2.0})
        for (double v : {0.25, 1.0, 2.0, 4.0}) {
            SyntheticSpec s;
            s.a = a;
            s.b = 1.0;
            s.mu_a = 1.0;
            s.mu_b = 0.0;
            s.var_a = v;
            s.var_b = v;
            out.push_back(s);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient versus feature correlation on a trained learner

struct GradCorrComparison {
    double feature_corr = 0.0;   // max |Pearson(feature column, s)|
    std::size_t feature_column = 0;
    double gradient_corr = 0.0;  // max |Pearson(undirected-gradient column, s)|
    std::size_t gradient_column = 0;
    double accuracy = 0.0;
    double chance = 0.0;         // majority-class rate
    bool conclusive = false;     // false when the learner is not better than chance
};

/// Compares the strongest single-column correlation with s on the input side
/// and on the last-layer undirected-gradient side. The comparison is only
/// meaningful for a learner that beats the majority-class rate by `margin`.
inline GradCorrComparison empirical_grad_corr(const LearnerParams& theta, const Dataset& ds, double margin = 0.02) {
    if (ds.s_cont.size() != ds.size()) throw InvalidArgument("empirical_grad_corr: dataset carries no continuous s");
    const auto rec = forward(ds.features, ds.labels, theta, false);
    const Matrix g = last_layer_gradient_features(rec);

    GradCorrComparison out;
    std::vector<double> class_count(ds.num_classes, 0.0);
    double hits = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        class_count[static_cast<std::size_t>(ds.labels[i])] += 1.0;
        const auto row = rec.probs.row_span(i);
        hits += static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()) == ds.labels[i] ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(ds.size());
    out.accuracy = hits / n;
    out.chance = *std::max_element(class_count.begin(), class_count.end()) / n;
    out.conclusive = out.accuracy > out.chance + margin;

    auto best_column = [&](const Matrix& m, double& best, std::size_t& where) {
        std::vector<double> col(m.rows());
        for (std::size_t j = 0; j < m.cols(); ++j) {
            for (std::size_t i = 0; i < m.rows(); ++i) col[i] = m(i, j);
            const double r = pearson(col, ds.s_cont);
            if (std::isfinite(r) && std::abs(r) > best) {
                best = std::abs(r);
                where = j;
            }
        }
    };
    best_column(ds.features, out.feature_corr, out.feature_column);
    best_column(g, out.gradient_corr, out.gradient_column);
    return out;
}

}  // namespace gog
