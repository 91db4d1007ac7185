#pragma once

// Alternating min-max training: per mini-batch, one ascent step on the
// adversary followed by one descent step on the learner, with early stopping
// on validation worst-group accuracy.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "gog/adversary.hpp"
#include "gog/data.hpp"
#include "gog/error.hpp"
#include "gog/gradgraph.hpp"
#include "gog/learner.hpp"
#include "gog/metrics.hpp"
#include "gog/numeric.hpp"
#include "gog/optim.hpp"

namespace gog {

enum class Mode {
    Gog,      // KNN graph over gradient features, H = gW0 + xW1
    NoGraph,  // identity adjacency, H = gW0 + xW1
    NoGrad,   // KNN graph over input features, H = xW1
    Erm,      // no adversary, every weight is 1
};

enum class GradientLayer { Last, First };

enum class SelectMetric { WorstGroupAcc, WorstGroupAuc };

inline Mode parse_mode(const std::string& s) {
    if (s == "gog") return Mode::Gog;
    if (s == "no_graph") return Mode::NoGraph;
    if (s == "no_grad") return Mode::NoGrad;
    if (s == "erm") return Mode::Erm;
    throw InvalidArgument("unknown mode '" + s + "' (expected gog, no_graph, no_grad or erm)");
}

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::Gog: return "gog";
        case Mode::NoGraph: return "no_graph";
        case Mode::NoGrad: return "no_grad";
        case Mode::Erm: return "erm";
    }
    return "?";
}

inline GradientLayer parse_gradient_layer(const std::string& s) {
    if (s == "last") return GradientLayer::Last;
    if (s == "first") return GradientLayer::First;
    throw InvalidArgument("unknown gradient_layer '" + s + "' (expected last or first)");
}

inline std::string to_string(GradientLayer g) { return g == GradientLayer::Last ? "last" : "first"; }

inline SelectMetric parse_select_metric(const std::string& s) {
    if (s == "worst_acc") return SelectMetric::WorstGroupAcc;
    if (s == "worst_auc") return SelectMetric::WorstGroupAuc;
    throw InvalidArgument("unknown select_metric '" + s + "' (expected worst_acc or worst_auc)");
}

inline std::string to_string(SelectMetric m) { return m == SelectMetric::WorstGroupAcc ? "worst_acc" : "worst_auc"; }

inline bool uses_graph(Mode m) { return m == Mode::Gog || m == Mode::NoGrad; }

struct TrainConfig {
    Mode mode = Mode::Gog;
    double lr = 1e-2;
    double adv_lr = 1e-2;
    std::size_t batch_size = 64;
    std::size_t hidden_width = 32;
    std::size_t hidden_layers = 2;
    double dropout = 0.1;
    std::size_t k = 3;
    std::size_t embed_dim = 0;  // 0: same as hidden_width
    GradientLayer gradient_layer = GradientLayer::Last;
    std::size_t max_epochs = 100;
    std::size_t patience = 20;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    SelectMetric select_metric = SelectMetric::WorstGroupAcc;
    std::size_t min_group_size = kDefaultMinGroupSize;

    std::size_t effective_embed_dim() const { return embed_dim ? embed_dim : hidden_width; }

    void validate() const {
        if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
        if (!(adv_lr >= 0.0)) throw InvalidArgument("adv_lr must be nonnegative");
        if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
        if (hidden_width == 0) throw InvalidArgument("hidden_width must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
        if (max_epochs == 0) throw InvalidArgument("max_epochs must be positive");
        if (patience == 0) throw InvalidArgument("patience must be at least 1");
        if (uses_graph(mode)) {
            if (k == 0) throw InvalidArgument("k must be at least 1");
            if (k >= batch_size)
                throw InvalidArgument("k (" + std::to_string(k) + ") must be smaller than batch_size (" +
                                      std::to_string(batch_size) + ")");
        }
        if (gradient_layer == GradientLayer::First && hidden_layers == 0)
            throw InvalidArgument("gradient_layer=first needs at least one hidden layer");
    }

    std::string describe() const {
        return "mode=" + to_string(mode) + " lr=" + std::to_string(lr) + " adv_lr=" + std::to_string(adv_lr) +
               " batch=" + std::to_string(batch_size) + " hidden=" + std::to_string(hidden_width) + "x" +
               std::to_string(hidden_layers) + " dropout=" + std::to_string(dropout) + " k=" + std::to_string(k) +
               " layer=" + to_string(gradient_layer);
    }
};

/// Learner, adversary and their optimizers plus the run's random streams.
struct TrainState {
    LearnerParams theta;
    AdversaryParams phi;
    Optimizer learner_opt;
    Optimizer adversary_opt;
    Rng dropout_rng;
    Rng shuffle_rng;

    static TrainState init(std::size_t input_dim, std::size_t classes, const TrainConfig& cfg) {
        const Rng root(cfg.seed);
        Rng learner_rng = root.split(1);
        Rng adversary_rng = root.split(2);
        const std::vector<std::size_t> sizes(cfg.hidden_layers, cfg.hidden_width);
        LearnerParams theta = LearnerParams::init(input_dim, sizes, classes, cfg.dropout, learner_rng);
        const std::size_t grad_dim = cfg.gradient_layer == GradientLayer::Last
                                         ? theta.representation_dim() * classes
                                         : input_dim * cfg.hidden_width;
        AdversaryParams phi = AdversaryParams::init(grad_dim, input_dim, cfg.effective_embed_dim(), adversary_rng);
        return {std::move(theta), std::move(phi), Optimizer(cfg.optimizer, cfg.lr),
                Optimizer(cfg.optimizer, cfg.adv_lr), root.split(3), root.split(4)};
    }
};

struct StepDiagnostics {
    double objective_before = 0.0;     // J / B with the adversary before its step
    double objective_after_adv = 0.0;  // J / B after the adversary step (theta unchanged)
    double mean_loss = 0.0;
    double weight_sum_error = 0.0;     // |sum(lambda) - B| for the weights used on theta
    std::vector<double> weights;       // lambda used for the theta step
    GradientGraph graph;               // batch graph; empty for ERM
};

/// Tolerance on |sum(lambda) - n|.
inline constexpr double kWeightSumTolerance = 1e-6;

/// Gradient features the adversary sees for this batch.
inline Matrix batch_gradient_features(const ForwardRecord& rec, const LearnerParams& theta, GradientLayer layer) {
    return layer == GradientLayer::Last ? last_layer_gradient_features(rec)
                                        : first_layer_gradient_features(rec, theta);
}

/// Graph over the batch for the configured mode.
inline GradientGraph batch_graph(Mode mode, const Matrix& x, const Matrix& g, std::size_t k) {
    switch (mode) {
        case Mode::Gog: return build_knn_graph(g, k);
        case Mode::NoGrad: return build_knn_graph(x, k);
        case Mode::NoGraph:
        case Mode::Erm: return identity_graph(x.rows());
    }
    throw InvalidArgument("batch_graph: unknown mode");
}

inline EmbeddingInputs embedding_inputs(Mode mode) {
    return mode == Mode::NoGrad ? EmbeddingInputs::FeaturesOnly : EmbeddingInputs::GradientAndFeatures;
}

inline void check_weight_sum(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double err = std::abs(total - static_cast<double>(weights.size()));
    if (!(err <= kWeightSumTolerance))
        throw InvariantError("sample weights sum to " + std::to_string(total) + ", expected " +
                             std::to_string(weights.size()));
}

/// One alternation on a mini-batch:
///   1. learner forward, per-sample losses and gradient features;
///   2. batch graph (gradients, features or identity, by mode);
///   3. lambda from the adversary;
///   4. one ascent step on phi maximizing J;
///   5. lambda recomputed, one descent step on theta minimizing J with lambda fixed.
/// ERM skips 2-4 and uses lambda = 1. Both objectives are divided by the batch size.
inline StepDiagnostics train_step(const Matrix& x, std::span<const int> labels, TrainState& state,
                                  const TrainConfig& cfg) {
    const std::size_t n = x.rows();
    if (uses_graph(cfg.mode) && cfg.k >= n)
        throw InvalidArgument("train_step: k (" + std::to_string(cfg.k) + ") must be smaller than the batch (" +
                              std::to_string(n) + ")");
    StepDiagnostics diag;
    const ForwardRecord rec = forward(x, labels, state.theta, true, &state.dropout_rng);
    diag.mean_loss = mean(rec.losses);
    const double inv_n = 1.0 / static_cast<double>(n);

    if (cfg.mode == Mode::Erm) {
        diag.weights.assign(n, 1.0);
        diag.objective_before = diag.objective_after_adv = diag.mean_loss;
    } else {
        const Matrix g = cfg.mode == Mode::NoGrad ? Matrix() : batch_gradient_features(rec, state.theta, cfg.gradient_layer);
        GradientGraph graph = batch_graph(cfg.mode, x, g, cfg.k);
        const EmbeddingInputs inputs = embedding_inputs(cfg.mode);

        const auto before = adversary_forward(x, g, graph.normalized, state.phi, inputs);
        check_weight_sum(before.weights);
        diag.objective_before = weighted_objective(before.weights, rec.losses) * inv_n;

        AdversaryParams grad = adversary_gradient(x, g, graph.normalized, state.phi, inputs, rec.losses);
        for (Matrix* t : grad.tensors()) *t = scale(*t, inv_n);
        const auto& cgrad = grad;
        state.adversary_opt.step(state.phi.tensors(), cgrad.tensors(), +1.0);

        auto after = adversary_forward(x, g, graph.normalized, state.phi, inputs);
        check_weight_sum(after.weights);
        diag.objective_after_adv = weighted_objective(after.weights, rec.losses) * inv_n;
        diag.weights = std::move(after.weights);
        diag.graph = std::move(graph);
    }
    double total = 0.0;
    for (double w : diag.weights) total += w;
    diag.weight_sum_error = std::abs(total - static_cast<double>(n));

    LearnerParams grad = backward(rec, diag.weights, state.theta);
    for (Matrix* t : grad.tensors()) *t = scale(*t, inv_n);
    const auto& cgrad = grad;
    state.learner_opt.step(state.theta.tensors(), cgrad.tensors(), -1.0);
    return diag;
}

// ---------------------------------------------------------------------------
// Full training with early stopping

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double objective = 0.0;
    double val_select = 0.0;
    double val_worst_acc = 0.0;
    double val_overall_acc = 0.0;
    double seconds = 0.0;
    double max_weight_sum_error = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based; 0 when nothing was recorded
    double best_val = -std::numeric_limits<double>::infinity();

    static void write_csv_header(std::ostream& os) {
        os << "epoch,objective,val_select,val_worst_group_acc,val_overall_acc,seconds,max_weight_sum_error\n";
    }
    void write_csv(std::ostream& os) const {
        write_csv_header(os);
        for (const auto& e : epochs)
            os << e.epoch << ',' << e.objective << ',' << e.val_select << ',' << e.val_worst_acc << ','
               << e.val_overall_acc << ',' << e.seconds << ',' << e.max_weight_sum_error << '\n';
    }
};

struct ValidationScore {
    double select = 0.0;
    double worst_acc = 0.0;
    double overall_acc = 0.0;
};

using Evaluator = std::function<ValidationScore(const LearnerParams&)>;

/// Validation evaluator: sensitive labels are read here for the metric only.
inline Evaluator validation_evaluator(const Dataset& validation, const TrainConfig& cfg) {
    const GroupIndex groups = validation.groups();
    return [&validation, groups, cfg](const LearnerParams& theta) {
        const Matrix probs = predict_proba(validation.features, theta);
        const auto report = evaluate(probs, validation.labels, groups, {cfg.min_group_size, false});
        ValidationScore s{report.worst_group_acc, report.worst_group_acc, report.overall_acc};
        if (cfg.select_metric == SelectMetric::WorstGroupAuc) {
            if (!report.worst_group_auc) throw InvalidArgument("validation split has no group with a defined AUC");
            s.select = *report.worst_group_auc;
        }
        return s;
    };
}

struct TrainResult {
    LearnerParams theta;  // parameters of the best validation epoch
    TrainHistory history;
};

/// Called after each mini-batch step; used for invariant auditing.
using StepObserver = std::function<void(const StepDiagnostics&)>;

inline TrainResult train(const Dataset& train_set, const TrainConfig& cfg, const Evaluator& evaluator,
                         const StepObserver& observer = {}) {
    cfg.validate();
    if (train_set.size() == 0) throw InvalidArgument("train: empty training split");
    if (uses_graph(cfg.mode) && train_set.size() <= cfg.k)
        throw InvalidArgument("train: training split smaller than k + 1");

    TrainState state = TrainState::init(train_set.num_features(), train_set.num_classes, cfg);
    TrainResult result;
    result.theta = state.theta;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        state.shuffle_rng.shuffle(order);
        double objective = 0.0, max_err = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t len = end - start;
            if (uses_graph(cfg.mode) && len <= cfg.k) continue;  // KNN undefined on this remainder
            const std::span<const std::size_t> rows(order.data() + start, len);
            const Matrix xb = gather_rows(train_set.features, rows);
            std::vector<int> yb(len);
            for (std::size_t i = 0; i < len; ++i) yb[i] = train_set.labels[rows[i]];
            const auto diag = train_step(xb, yb, state, cfg);
            if (observer) observer(diag);
            objective += diag.objective_after_adv;
            max_err = std::max(max_err, diag.weight_sum_error);
            ++batches;
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const ValidationScore score = evaluator(state.theta);
        result.history.epochs.push_back({epoch, batches ? objective / static_cast<double>(batches) : 0.0, score.select,
                                         score.worst_acc, score.overall_acc, seconds, max_err});
        if (score.select > result.history.best_val) {
            result.history.best_val = score.select;
            result.history.best_epoch = epoch;
            result.theta = state.theta;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

inline TrainResult train(const DataSplits& splits, const TrainConfig& cfg, const StepObserver& observer = {}) {
    if (splits.validation.size() == 0) throw InvalidArgument("train: empty validation split");
    return train(splits.train, cfg, validation_evaluator(splits.validation, cfg), observer);
}

/// Test-split report for trained parameters.
inline MetricsReport evaluate_model(const LearnerParams& theta, const Dataset& ds, std::size_t min_group_size,
                                    bool hard_rates = false) {
    return evaluate(predict_proba(ds.features, theta), ds.labels, ds.groups(), {min_group_size, hard_rates});
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep

struct Grid {
    std::vector<double> lr{1e-2};
    std::vector<std::size_t> batch_size{64};
    std::vector<std::size_t> hidden_width{32};
    std::vector<double> dropout{0.1};
    std::vector<std::size_t> k{3};

    /// Learning rate {1e-2, 3e-3, 1e-3}, batch {32, 64, 128}, hidden {16, 32, 64},
    /// dropout {0.1, 0.5}, K {3, 10, 30}.
    static Grid full() {
        return {{1e-2, 3e-3, 1e-3}, {32, 64, 128}, {16, 32, 64}, {0.1, 0.5}, {3, 10, 30}};
    }

    /// Every combination applied to `base`. K is collapsed for modes without a
    /// graph; combinations with K >= batch size are skipped. The adversary
    /// learning rate follows the learner's.
    std::vector<TrainConfig> expand(const TrainConfig& base) const {
        std::vector<TrainConfig> out;
        const std::vector<std::size_t> ks = uses_graph(base.mode) ? k : std::vector<std::size_t>{base.k};
        for (double l : lr)
            for (std::size_t b : batch_size)
                for (std::size_t h : hidden_width)
                    for (double d : dropout)
                        for (std::size_t kk : ks) {
                            TrainConfig c = base;
                            c.lr = l;
                            c.adv_lr = l;
                            c.batch_size = b;
                            c.hidden_width = h;
                            c.dropout = d;
                            c.k = kk;
                            if (uses_graph(c.mode) && kk >= b) continue;
                            out.push_back(c);
                        }
        return out;
    }
};

struct SweepRun {
    std::size_t config_index = 0;
    std::uint64_t seed = 0;
    double val_select = 0.0;
    MetricsReport test;
};

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;
};

struct SweepResult {
    std::vector<TrainConfig> configs;
    std::vector<SweepRun> runs;
    std::size_t best_config = 0;
    MetricSummary worst_group_acc, worst_group_auc, equalized_odds, overall_acc, overall_auc;

    std::vector<const SweepRun*> runs_of(std::size_t config) const {
        std::vector<const SweepRun*> out;
        for (const auto& r : runs)
            if (r.config_index == config) out.push_back(&r);
        return out;
    }

    void write_csv(std::ostream& os) const {
        os << "config,seed,mode,lr,batch_size,hidden_width,dropout,k,val_select," << MetricsReport{}.csv_header()
           << ",selected\n";
        for (const auto& r : runs) {
            const auto& c = configs[r.config_index];
            os << r.config_index << ',' << r.seed << ',' << to_string(c.mode) << ',' << c.lr << ',' << c.batch_size
               << ',' << c.hidden_width << ',' << c.dropout << ',' << c.k << ',' << r.val_select << ','
               << r.test.csv_row() << ',' << (r.config_index == best_config ? 1 : 0) << '\n';
        }
    }
};

inline MetricSummary summarize(const std::vector<double>& v) { return {mean(v), sample_stddev(v)}; }

struct SweepOptions {
    double train_noise = 0.0;  // label-noise fraction injected into each training split
    std::size_t jobs = 1;
    bool hard_rates = false;
};

/// Trains every grid point for every seed (the seed drives the split, the
/// noise and the initialization), selects the configuration with the highest
/// mean validation metric across seeds, and summarizes its test metrics as
/// mean and sample standard deviation over seeds.
inline SweepResult sweep(const Dataset& encoded, const TrainConfig& base, const Grid& grid,
                         const std::vector<std::uint64_t>& seeds, const SweepOptions& opt = {}) {
    if (seeds.empty()) throw InvalidArgument("sweep: no seeds");
    SweepResult result;
    result.configs = grid.expand(base);
    if (result.configs.empty()) throw InvalidArgument("sweep: empty grid");
    for (const auto& c : result.configs) c.validate();

    std::vector<DataSplits> splits;
    for (std::uint64_t s : seeds) {
        DataSplits sp = make_splits(encoded, s);
        if (opt.train_noise > 0.0) sp.train = inject_label_noise(sp.train, opt.train_noise, s ^ 0x9e3779b97f4a7c15ULL);
        splits.push_back(std::move(sp));
    }

    const std::size_t total = result.configs.size() * seeds.size();
    result.runs.resize(total);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t job = next++; job < total; job = next++) try {
            const std::size_t ci = job / seeds.size(), si = job % seeds.size();
            TrainConfig cfg = result.configs[ci];
            cfg.seed = seeds[si];
            const auto trained = train(splits[si], cfg);
            result.runs[job] = {ci, seeds[si], trained.history.best_val,
                                evaluate_model(trained.theta, splits[si].test, cfg.min_group_size, opt.hard_rates)};
        } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = total;
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, total));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < result.configs.size(); ++c) {
        std::vector<double> v;
        for (const auto* r : result.runs_of(c)) v.push_back(r->val_select);
        const double m = mean(v);
        if (m > best) {
            best = m;
            result.best_config = c;
        }
    }
    std::vector<double> wa, wu, eo, oa, ou;
    for (const auto* r : result.runs_of(result.best_config)) {
        wa.push_back(r->test.worst_group_acc);
        wu.push_back(r->test.worst_group_auc.value_or(std::numeric_limits<double>::quiet_NaN()));
        eo.push_back(r->test.equalized_odds);
        oa.push_back(r->test.overall_acc);
        ou.push_back(r->test.overall_auc.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    result.worst_group_acc = summarize(wa);
    result.worst_group_auc = summarize(wu);
    result.equalized_odds = summarize(eo);
    result.overall_acc = summarize(oa);
    result.overall_auc = summarize(ou);
    return result;
}

}  // namespace gog
