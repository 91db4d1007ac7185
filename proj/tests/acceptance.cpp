// Acceptance checks. Run with --criterion N for one check or without
// arguments for all of them; prints one PASS/FAIL line per criterion and
// exits nonzero if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "gog/theory.hpp"
#include "gog/trainer.hpp"
#include "oracles.hpp"

using namespace gog;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::string kData = GOG_DATA_DIR;

// ---------------------------------------------------------------------------
// 1. analytic gradients of J against central differences

Outcome gradients() {
    Rng rng(2024);
    const Mode modes[] = {Mode::Gog, Mode::NoGraph, Mode::NoGrad};
    double worst_theta = 0.0, worst_phi = 0.0;
    for (int net = 0; net < 20; ++net) {
        const std::size_t in = 1 + rng.index(6), classes = 2 + rng.index(2), batch = 3 + rng.index(6);
        std::vector<std::size_t> hidden(rng.index(3));
        for (auto& h : hidden) h = 1 + rng.index(16);
        const double dropout = net % 2 ? 0.25 : 0.0;
        LearnerParams theta = LearnerParams::init(in, hidden, classes, dropout, rng);
        for (auto& l : theta.hidden)
            for (double& b : l.bias.data()) b = rng.normal(0.0, 0.3);
        const Matrix x = oracle::random_matrix(batch, in, rng);
        std::vector<int> y(batch);
        for (int& v : y) v = static_cast<int>(rng.index(classes));
        const Mode mode = modes[net % 3];
        const std::size_t k = 1 + rng.index(batch - 1);
        const std::uint64_t mask_seed = 900 + static_cast<std::uint64_t>(net);

        auto record = [&] {
            Rng r(mask_seed);
            return forward(x, y, theta, dropout > 0.0, &r);
        };
        const ForwardRecord rec = record();
        const Matrix g = mode == Mode::NoGrad ? Matrix() : last_layer_gradient_features(rec);
        const GradientGraph graph = batch_graph(mode, x, g, k);
        const EmbeddingInputs inputs = embedding_inputs(mode);
        AdversaryParams phi =
            AdversaryParams::init(theta.representation_dim() * classes, in, 1 + rng.index(8), rng);
        for (Matrix* t : phi.tensors())
            for (double& v : t->data()) v = rng.normal(0.0, 0.5);

        // theta step: lambda held at the adversary's output
        const std::vector<double> lambda = adversary_forward(x, g, graph.normalized, phi, inputs).weights;
        const LearnerParams dtheta = backward(rec, lambda, theta);
        auto j_theta = [&] { return weighted_objective(lambda, record().losses); };
        const auto at = dtheta.tensors();
        auto pt = theta.tensors();
        for (std::size_t t = 0; t < pt.size(); ++t)
            worst_theta = std::max(worst_theta, oracle::max_rel_error(*at[t], oracle::central_difference(*pt[t], j_theta)));

        // phi step: losses and graph held
        const AdversaryParams dphi = adversary_gradient(x, g, graph.normalized, phi, inputs, rec.losses);
        auto j_phi = [&] {
            return weighted_objective(adversary_forward(x, g, graph.normalized, phi, inputs).weights, rec.losses);
        };
        const auto ap = dphi.tensors();
        auto pp = phi.tensors();
        for (std::size_t t = 0; t < pp.size(); ++t) {
            if (mode == Mode::NoGrad && t == 0) continue;  // gradient embedding unused
            worst_phi = std::max(worst_phi, oracle::max_rel_error(*ap[t], oracle::central_difference(*pp[t], j_phi)));
        }
    }
    const bool ok = worst_theta <= 1e-4 && worst_phi <= 1e-4;
    return {ok, fmt("20 nets, max rel err theta %.2e phi %.2e (limit 1e-4)", worst_theta, worst_phi)};
}

// ---------------------------------------------------------------------------
// 2. correlation closed forms against Monte Carlo at n = 1e6

Outcome closed_form_check() {
    const auto grid = default_theory_grid();
    double z_printed = 0.0, z_exact = 0.0;
    std::string worst;
    std::vector<double> mc_ratio;
    std::uint64_t seed = 1;
    for (const auto& spec : grid) {
        const auto f = closed_forms(spec);
        const auto mc = monte_carlo(spec, 1000000, seed++);
        const double zs[] = {z_score(mc.corr_x_s, f.corr_x_s), z_score(mc.corr_x_u, f.corr_x_u),
                             z_score(mc.corr_u_s, f.corr_u_s), z_score(mc.ratio, f.ratio)};
        for (double z : zs)
            if (z > z_printed) {
                z_printed = z;
                worst = fmt("a=%g var=%g", spec.a, spec.var_a);
            }
        z_exact = std::max({z_exact, zs[0], zs[1], zs[2], z_score(mc.ratio, f.ratio_exact)});
        mc_ratio.push_back(mc.ratio.value);
    }
    bool monotone = true;
    for (std::size_t line = 0; line < 3; ++line)
        for (std::size_t j = 1; j < 4; ++j) monotone = monotone && mc_ratio[line * 4 + j] < mc_ratio[line * 4 + j - 1];
    const bool ok = z_printed <= 4.0 && monotone;
    return {ok, fmt("%zu specs, max z vs printed forms %.1f (at %s), vs forms with the mean term %.2f, ratio "
                    "monotone %s",
                    grid.size(), z_printed, worst.c_str(), z_exact, monotone ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 3. COMPAS-shaped data: ERM against GoG after grid selection

Outcome compas() {
    const Dataset ds = read_encoded_csv(kData + "/compas_like.csv", Schema::load(kData + "/compas_like.schema"));
    TrainConfig base;
    base.select_metric = SelectMetric::WorstGroupAuc;
    base.max_epochs = 60;
    base.patience = 20;
    Grid grid;
    grid.lr = {1e-2, 3e-3};
    grid.batch_size = {64, 128};
    grid.hidden_width = {32};
    grid.dropout = {0.1, 0.5};
    grid.k = {3, 10};
    const std::vector<std::uint64_t> seeds{1, 2, 3};

    base.mode = Mode::Erm;
    const SweepResult erm = sweep(ds, base, grid, seeds);
    base.mode = Mode::Gog;
    const SweepResult gog = sweep(ds, base, grid, seeds);
    const double auc_gain = 100.0 * (gog.worst_group_auc.mean - erm.worst_group_auc.mean);
    const double eo_drop = 100.0 * (erm.equalized_odds.mean - gog.equalized_odds.mean);
    const bool ok = auc_gain >= 2.0 && eo_drop >= 5.0;
    return {ok, fmt("worst-group AUC %.2f -> %.2f (gain %.2f, need 2), EO %.2f -> %.2f (drop %.2f, need 5), "
                    "worst-group acc %.2f -> %.2f",
                    100 * erm.worst_group_auc.mean, 100 * gog.worst_group_auc.mean, auc_gain,
                    100 * erm.equalized_odds.mean, 100 * gog.equalized_odds.mean, eo_drop,
                    100 * erm.worst_group_acc.mean, 100 * gog.worst_group_acc.mean)};
}

// ---------------------------------------------------------------------------
// synthetic benchmark runs shared by 4, 5 and 10

const Dataset& benchmark() {
    static const Dataset ds =
        read_encoded_csv(kData + "/synthetic_benchmark.csv", Schema::load(kData + "/synthetic_benchmark.schema"));
    return ds;
}

TrainConfig benchmark_config(Mode mode, std::size_t k = 3) {
    TrainConfig c;
    c.mode = mode;
    c.lr = 0.01;
    c.adv_lr = 0.1;
    c.batch_size = 64;
    c.hidden_width = 32;
    c.hidden_layers = 2;
    c.dropout = 0.1;
    c.k = k;
    c.max_epochs = 60;
    c.patience = 20;
    return c;
}

// Mean test worst-group accuracy over seeds 1..3, in points.
double benchmark_worst_acc(Mode mode, double noise = 0.0, std::size_t k = 3) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        TrainConfig cfg = benchmark_config(mode, k);
        cfg.seed = seed;
        DataSplits sp = make_splits(benchmark(), seed);
        if (noise > 0.0) sp.train = inject_label_noise(sp.train, noise, seed ^ 0x9e3779b97f4a7c15ULL);
        const auto r = train(sp, cfg);
        total += evaluate_model(r.theta, sp.test, cfg.min_group_size).worst_group_acc;
    }
    return 100.0 * total / 3.0;
}

// ---------------------------------------------------------------------------
// 4. ablation ordering

Outcome ablations() {
    const double erm = benchmark_worst_acc(Mode::Erm), ng = benchmark_worst_acc(Mode::NoGraph),
                 nd = benchmark_worst_acc(Mode::NoGrad), gog = benchmark_worst_acc(Mode::Gog);
    const bool ok = gog >= ng && gog >= nd && ng >= erm && nd >= erm;
    return {ok, fmt("worst-group acc: gog %.2f, no_graph %.2f, no_grad %.2f, erm %.2f", gog, ng, nd, erm)};
}

// ---------------------------------------------------------------------------
// 5. robustness to 10% training-label noise

Outcome robustness() {
    const double gog_clean = benchmark_worst_acc(Mode::Gog), gog_noisy = benchmark_worst_acc(Mode::Gog, 0.1);
    const double ng_clean = benchmark_worst_acc(Mode::NoGraph), ng_noisy = benchmark_worst_acc(Mode::NoGraph, 0.1);
    const double gog_drop = gog_clean - gog_noisy, ng_drop = ng_clean - ng_noisy;
    return {gog_drop <= ng_drop, fmt("worst-group acc drop: gog %.2f (%.2f -> %.2f), no_graph %.2f (%.2f -> %.2f)",
                                     gog_drop, gog_clean, gog_noisy, ng_drop, ng_clean, ng_noisy)};
}

// ---------------------------------------------------------------------------
// small synthetic training runs for 6 and 7

DataSplits small_splits() {
    SyntheticSpec spec;
    spec.n = 1200;
    return make_splits(gen_synthetic(spec, 5).data, 5);
}

TrainConfig small_config(Mode mode) {
    TrainConfig c;
    c.mode = mode;
    c.batch_size = 32;
    c.hidden_width = 16;
    c.k = 5;
    c.max_epochs = 5;
    c.adv_lr = 0.5;
    return c;
}

// 6. sum of weights equals the batch size at every step

Outcome weight_sum() {
    std::size_t steps = 0;
    double worst = 0.0;
    bool ok = true;
    for (Mode mode : {Mode::Gog, Mode::NoGraph, Mode::NoGrad}) {
        train(small_splits(), small_config(mode), [&](const StepDiagnostics& d) {
            double total = 0.0;
            for (double w : d.weights) total += w;
            const double err = std::abs(total - static_cast<double>(d.weights.size()));
            worst = std::max(worst, err);
            ok = ok && err <= 1e-6;
            ++steps;
        });
    }
    return {ok, fmt("%zu steps over gog/no_graph/no_grad, max |sum - n| %.2e", steps, worst)};
}

// 7. every batch graph built during training

Outcome graph_invariants() {
    std::size_t graphs = 0, bad = 0;
    double asym = 0.0;
    for (Mode mode : {Mode::Gog, Mode::NoGrad, Mode::NoGraph}) {
        const TrainConfig cfg = small_config(mode);
        train(small_splits(), cfg, [&](const StepDiagnostics& d) {
            const GradientGraph& g = d.graph;
            const std::size_t n = g.size();
            const std::size_t want = uses_graph(mode) ? cfg.k : 0;
            bool ok = n == d.weights.size();
            for (std::size_t u = 0; u < n && ok; ++u) {
                std::size_t out = 0;
                for (std::size_t v = 0; v < n; ++v) {
                    const double a = g.adjacency(u, v);
                    ok = ok && (a == 0.0 || a == 1.0) && !(u == v && a != 0.0);
                    out += a == 1.0;
                    asym = std::max(asym, std::abs(g.normalized(u, v) - g.normalized(v, u)));
                    ok = ok && g.normalized(u, v) == g.normalized(v, u);
                }
                ok = ok && out == want;
            }
            bad += ok ? 0 : 1;
            ++graphs;
        });
    }
    return {bad == 0 && graphs > 0,
            fmt("%zu batch graphs, %zu violations, max normalized asymmetry %.1e", graphs, bad, asym)};
}

// ---------------------------------------------------------------------------
// 8. per-epoch time is linear in n at fixed batch size

Outcome linear_time() {
    const std::size_t sizes[] = {1000, 2000, 4000};
    std::vector<double> secs;
    for (std::size_t n : sizes) {
        SyntheticSpec spec;
        spec.n = n;
        const Dataset ds = gen_synthetic(spec, 8).data;
        TrainConfig cfg;
        cfg.mode = Mode::Gog;
        cfg.batch_size = 64;
        cfg.max_epochs = 5;
        cfg.patience = 100;
        const auto r = train(ds, cfg, [](const LearnerParams&) { return ValidationScore{}; });
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : r.history.epochs) best = std::min(best, e.seconds);
        secs.push_back(best);
    }
    // least-squares line through (n, t)
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < 3; ++i) {
        mx += static_cast<double>(sizes[i]) / 3.0;
        my += secs[i] / 3.0;
    }
    double sxy = 0.0, sxx = 0.0, sst = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (static_cast<double>(sizes[i]) - mx) * (secs[i] - my);
        sxx += (static_cast<double>(sizes[i]) - mx) * (static_cast<double>(sizes[i]) - mx);
        sst += (secs[i] - my) * (secs[i] - my);
    }
    const double r2 = sst > 0.0 ? sxy * sxy / (sxx * sst) : 1.0;
    const double ratio = secs[2] / secs[0];
    return {ratio >= 3.0 && ratio <= 5.2,
            fmt("epoch seconds %.4f / %.4f / %.4f, t(4000)/t(1000) = %.2f (need 3.0..5.2), linear fit R^2 %.4f",
                secs[0], secs[1], secs[2], ratio, r2)};
}

// ---------------------------------------------------------------------------
// 9. metric oracles

Outcome metric_oracles() {
    Rng rng(9);
    int auc_mismatch = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.index(199);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial % 2 ? std::round(rng.uniform(0.0, 4.0)) : rng.uniform();
            y[i] = rng.bernoulli(0.5) ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        if (*auc(s, y) != *oracle::pairwise_auc(s, y)) ++auc_mismatch;
    }
    // group 0 positives rate (0.9 + 0.7)/2 = 0.8, group 1 positives 0.6;
    // negatives 0.8 in both: delta = 0.2
    const Matrix p{{0.1, 0.9}, {0.3, 0.7}, {0.8, 0.2}, {0.4, 0.6}, {0.4, 0.6}, {0.8, 0.2}};
    const std::vector<int> y{1, 1, 0, 1, 1, 0};
    const std::vector<std::size_t> g{0, 0, 0, 1, 1, 1};
    const double eo_err = std::abs(equalized_odds(p, y, g) - 0.2);

    const Matrix perfect{{0, 1}, {0, 1}, {1, 0}, {0, 1}, {0, 1}, {1, 0}};
    const double eo_perfect = equalized_odds(perfect, y, g);
    const bool ok = auc_mismatch == 0 && eo_err <= 1e-12 && eo_perfect == 0.0;
    return {ok, fmt("AUC mismatches %d/50, EO fixture error %.1e, perfect predictor EO %g", auc_mismatch, eo_err,
                    eo_perfect)};
}

// ---------------------------------------------------------------------------
// 10. K sensitivity

Outcome k_sensitivity() {
    std::vector<double> acc;
    for (std::size_t k : {3, 10, 30}) acc.push_back(benchmark_worst_acc(Mode::Gog, 0.0, k));
    const double spread = *std::max_element(acc.begin(), acc.end()) - *std::min_element(acc.begin(), acc.end());
    return {spread <= 1.5,
            fmt("worst-group acc K=3 %.2f, K=10 %.2f, K=30 %.2f, spread %.2f (limit 1.5)", acc[0], acc[1], acc[2],
                spread)};
}

const std::vector<std::function<Outcome()>> kCriteria{gradients, closed_form_check, compas,          ablations,
                                                       robustness, weight_sum,      graph_invariants, linear_time,
                                                       metric_oracles, k_sensitivity};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            const int n = std::atoi(argv[++i]);
            if (n < 1 || n > static_cast<int>(kCriteria.size())) {
                std::fprintf(stderr, "criterion must be 1..%zu\n", kCriteria.size());
                return 2;
            }
            which.push_back(n);
        } else {
            std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
            return 2;
        }
    }
    if (which.empty())
        for (int n = 1; n <= static_cast<int>(kCriteria.size()); ++n) which.push_back(n);

    int failed = 0;
    for (int n : which) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = kCriteria[n - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d: %s %s [%.1fs]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), s);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed ? 1 : 0;
}
