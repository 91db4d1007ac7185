#pragma once

// Command implementations behind the `gog` executable. Each command reports
// to the given stream and throws on failure; main() maps exceptions to exit
// codes.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gog/compas.hpp"
#include "gog/config.hpp"
#include "gog/data.hpp"
#include "gog/error.hpp"
#include "gog/gradgraph.hpp"
#include "gog/snapshot.hpp"
#include "gog/theory.hpp"
#include "gog/trainer.hpp"

namespace gog::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kTheoryMismatch = 3 };

/// Seed used for training-split label noise, kept apart from the split seed.
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec) throw Error("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
    }
    std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
    if (!os) throw Error("cannot write '" + p.string() + "'");
    return os;
}

// ---------------------------------------------------------------------------
// gen-data / gen-compas

inline void cmd_gen_data(const SyntheticSpec& spec, std::uint64_t seed, const std::string& out, std::ostream& log) {
    spec.validate();
    const auto syn = gen_synthetic(spec, seed);
    auto csv_out = open_out(out + ".csv");
    auto schema_out = open_out(out + ".schema");
    write_dataset_csv(csv_out, schema_out, syn.data);
    std::size_t pos = 0;
    for (int y : syn.data.labels) pos += y == 1 ? 1 : 0;
    const auto groups = syn.data.groups();
    log << "wrote " << out << ".csv (" << syn.data.size() << " rows, " << syn.data.num_features()
        << " features) and " << out << ".schema\n";
    log << "label 1: " << pos << ", label 0: " << syn.data.size() - pos << '\n';
    const auto counts = groups.counts();
    for (std::size_t g = 0; g < groups.num_groups(); ++g) log << "group " << groups.name(g) << ": " << counts[g] << '\n';
}

inline void cmd_gen_compas(const CompasSpec& spec, std::uint64_t seed, const std::string& out, std::ostream& log) {
    if (spec.n == 0) throw InvalidArgument("--n must be positive");
    auto csv_out = open_out(out + ".csv");
    auto schema_out = open_out(out + ".schema");
    write_compas_csv(csv_out, schema_out, spec, seed);
    log << "wrote " << out << ".csv (" << spec.n << " rows) and " << out << ".schema\n";
}

// ---------------------------------------------------------------------------
// train

inline Dataset load_encoded(const RunConfig& rc) {
    return read_encoded_csv(rc.data, Schema::load(rc.schema));
}

struct RunOutcome {
    TrainResult trained;
    MetricsReport test;
};

/// Split with `seed`, optionally corrupt the training labels, train, evaluate on the test split.
inline RunOutcome run_once(const Dataset& encoded, TrainConfig cfg, std::uint64_t seed, double train_noise,
                           bool hard_rates) {
    cfg.seed = seed;
    DataSplits splits = make_splits(encoded, seed);
    if (train_noise > 0.0) splits.train = inject_label_noise(splits.train, train_noise, noise_seed(seed));
    RunOutcome o;
    o.trained = train(splits, cfg);
    o.test = evaluate_model(o.trained.theta, splits.test, cfg.min_group_size, hard_rates);
    return o;
}

inline void require_valid(const RunConfig& rc) {
    const auto problems = validate_run_config(rc);
    if (problems.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InvalidArgument(msg);
}

inline void cmd_train(const RunConfig& rc, std::ostream& log) {
    require_valid(rc);
    const Dataset encoded = load_encoded(rc);
    const auto outcome = run_once(encoded, rc.train, rc.train.seed, rc.train_noise, rc.hard_rates);
    const std::filesystem::path dir(rc.out);
    {
        auto os = open_out(dir / "model.bin", true);
        write_arrays(os, to_arrays(outcome.trained.theta));
    }
    {
        auto os = open_out(dir / "history.csv");
        outcome.trained.history.write_csv(os);
    }
    {
        auto os = open_out(dir / "report.txt");
        outcome.test.write_text(os);
    }
    {
        auto os = open_out(dir / "report.csv");
        os << outcome.test.csv_header() << '\n' << outcome.test.csv_row() << '\n';
    }
    log << rc.train.describe() << " seed=" << rc.train.seed << '\n';
    log << "epochs run: " << outcome.trained.history.epochs.size() << ", best epoch: "
        << outcome.trained.history.best_epoch << '\n';
    outcome.test.write_text(log);
}

// ---------------------------------------------------------------------------
// robustness

struct RobustnessRow {
    double fraction = 0.0;
    Mode mode = Mode::Gog;
    MetricSummary worst_acc, worst_auc, eo, overall_acc;
    double worst_acc_drop = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<RobustnessRow> robustness_table(const Dataset& encoded, const RunConfig& rc,
                                                   const std::vector<double>& fractions) {
    std::vector<RobustnessRow> rows;
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("noise fraction outside [0, 1]");
        for (Mode m : rc.modes) {
            TrainConfig cfg = rc.train;
            cfg.mode = m;
            std::vector<double> wa, wu, eo, oa;
            for (std::uint64_t s : rc.seeds) {
                const auto o = run_once(encoded, cfg, s, f, rc.hard_rates);
                wa.push_back(o.test.worst_group_acc);
                wu.push_back(o.test.worst_group_auc.value_or(std::numeric_limits<double>::quiet_NaN()));
                eo.push_back(o.test.equalized_odds);
                oa.push_back(o.test.overall_acc);
            }
            rows.push_back({f, m, summarize(wa), summarize(wu), summarize(eo), summarize(oa)});
        }
    }
    for (auto& r : rows)
        for (const auto& base : rows)
            if (base.mode == r.mode && base.fraction == 0.0) r.worst_acc_drop = base.worst_acc.mean - r.worst_acc.mean;
    return rows;
}

inline void write_robustness_csv(std::ostream& os, const std::vector<RobustnessRow>& rows) {
    os << "noise,mode,worst_group_acc,worst_group_acc_std,worst_group_auc,worst_group_auc_std,equalized_odds,"
          "equalized_odds_std,overall_acc,overall_acc_std,worst_group_acc_drop\n";
    for (const auto& r : rows)
        os << r.fraction << ',' << to_string(r.mode) << ',' << r.worst_acc.mean << ',' << r.worst_acc.stddev << ','
           << r.worst_auc.mean << ',' << r.worst_auc.stddev << ',' << r.eo.mean << ',' << r.eo.stddev << ','
           << r.overall_acc.mean << ',' << r.overall_acc.stddev << ',' << r.worst_acc_drop << '\n';
}

inline void cmd_robustness(const RunConfig& rc, std::ostream& log) {
    require_valid(rc);
    if (rc.modes.empty()) throw InvalidArgument("robustness: no modes");
    const Dataset encoded = load_encoded(rc);
    const auto rows = robustness_table(encoded, rc, rc.noise);
    auto os = open_out(std::filesystem::path(rc.out) / "robustness.csv");
    write_robustness_csv(os, rows);
    write_robustness_csv(log, rows);
}

// ---------------------------------------------------------------------------
// sweep

/// "full": every combination; "small": one value per axis except K and the
/// learning rate; "config": exactly the configured point.
inline Grid grid_by_name(const std::string& name, const TrainConfig& base) {
    if (name == "full") return Grid::full();
    if (name == "small") return {{1e-2, 1e-3}, {base.batch_size}, {base.hidden_width}, {base.dropout}, {3, 10, 30}};
    if (name == "config") return {{base.lr}, {base.batch_size}, {base.hidden_width}, {base.dropout}, {base.k}};
    throw InvalidArgument("unknown grid '" + name + "' (expected full, small or config)");
}

inline void write_sweep_summary(std::ostream& os, const SweepResult& r) {
    const auto& c = r.configs[r.best_config];
    os << "selected: " << c.describe() << '\n';
    auto line = [&](const char* k, const MetricSummary& m) { os << k << " = " << m.mean << " +- " << m.stddev << '\n'; };
    line("worst_group_acc", r.worst_group_acc);
    line("worst_group_auc", r.worst_group_auc);
    line("equalized_odds", r.equalized_odds);
    line("overall_acc", r.overall_acc);
    line("overall_auc", r.overall_auc);
}

inline void cmd_sweep(const RunConfig& rc, const std::string& grid_name, std::ostream& log) {
    require_valid(rc);
    const Dataset encoded = load_encoded(rc);
    const Grid grid = grid_by_name(grid_name, rc.train);
    const auto result = sweep(encoded, rc.train, grid, rc.seeds, {rc.train_noise, rc.jobs, rc.hard_rates});
    const std::filesystem::path dir(rc.out);
    {
        auto os = open_out(dir / "sweep.csv");
        result.write_csv(os);
    }
    {
        auto os = open_out(dir / "sweep_summary.txt");
        write_sweep_summary(os, result);
    }
    log << result.configs.size() << " configurations x " << rc.seeds.size() << " seeds\n";
    write_sweep_summary(log, result);
}

// ---------------------------------------------------------------------------
// verify-theory

struct TheoryCheck {
    std::string quantity;
    double closed = 0.0;
    Estimate empirical;
    double z = 0.0;
};

inline constexpr double kTheoryTolerance = 4.0;  // standard errors

/// Closed form next to the Monte Carlo estimate for every quantity. With
/// `printed`, Corr(xU, s) and Ratio are compared with the forms that use
/// Var(xU) = (2a^2 + var_a + var_b) / b^2; otherwise with the forms that keep
/// the (mu_a - mu_b)^2 term.
inline std::vector<TheoryCheck> theory_checks(const CorrReport& r, bool printed) {
    const auto& c = r.closed;
    const auto& m = r.empirical;
    std::vector<TheoryCheck> out{{"corr_x_s", c.corr_x_s, m.corr_x_s},
                                 {"corr_x_u", c.corr_x_u, m.corr_x_u},
                                 {"corr_u_s", c.corr_u_s, m.corr_u_s},
                                 {"corr_xu_s", printed ? c.corr_xu_s : c.corr_xu_s_exact, m.corr_xu_s},
                                 {"ratio", printed ? c.ratio : c.ratio_exact, m.ratio}};
    for (auto& t : out) t.z = z_score(t.empirical, t.closed);
    return out;
}

/// Returns true when every estimate lies within the tolerance.
inline bool cmd_verify_theory(const std::vector<SyntheticSpec>& specs, std::size_t n, std::uint64_t seed,
                              bool printed, std::ostream& log, std::ostream* csv_out = nullptr) {
    if (specs.empty()) throw InvalidArgument("verify-theory: no specs");
    for (const auto& s : specs) {
        if (s.b == 0.0) throw InvalidArgument("--b must be nonzero");
        if (s.var_a < 0.0) throw InvalidArgument("--var-a must be nonnegative");
        if (s.var_b < 0.0) throw InvalidArgument("--var-b must be nonnegative");
    }
    if (n < kMonteCarloMinSamples)
        throw InvalidArgument("--n must be at least " + std::to_string(kMonteCarloMinSamples));
    if (csv_out) CorrReport::write_csv_header(*csv_out);
    bool ok = true;
    log << std::left << std::setw(28) << "spec" << std::setw(11) << "quantity" << std::right << std::setw(11)
        << "closed" << std::setw(11) << "monte" << std::setw(10) << "stderr" << std::setw(8) << "z" << '\n';
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto report = correlation_report(specs[i], n, seed + i);
        if (csv_out) report.write_csv(*csv_out);
        std::ostringstream name;
        name << "a=" << specs[i].a << " b=" << specs[i].b << " dmu=" << specs[i].mu_a - specs[i].mu_b
             << " v=" << specs[i].var_a << "," << specs[i].var_b;
        for (const auto& t : theory_checks(report, printed)) {
            const bool pass = t.z <= kTheoryTolerance;
            ok = ok && pass;
            log << std::left << std::setw(28) << name.str() << std::setw(11) << t.quantity << std::right << std::fixed
                << std::setprecision(5) << std::setw(11) << t.closed << std::setw(11) << t.empirical.value
                << std::setw(10) << t.empirical.std_error << std::setprecision(2) << std::setw(8) << t.z
                << (pass ? "" : "  MISMATCH") << '\n';
            log.unsetf(std::ios::fixed);
        }
        if (!printed)
            log << std::left << std::setw(28) << name.str() << std::setw(11) << "ratio*" << std::right << std::fixed
                << std::setprecision(5) << std::setw(11) << report.closed.ratio << "  (printed closed form)\n";
        log.unsetf(std::ios::fixed);
    }
    log << (ok ? "all estimates within " : "some estimates beyond ") << kTheoryTolerance << " standard errors\n";
    return ok;
}

// ---------------------------------------------------------------------------
// grad-corr

inline GradCorrComparison cmd_grad_corr(const SyntheticSpec& spec, const TrainConfig& base, std::uint64_t seed,
                                        std::ostream& log) {
    spec.validate();
    const auto syn = gen_synthetic(spec, seed);
    TrainConfig cfg = base;
    cfg.mode = Mode::Erm;
    cfg.seed = seed;
    const DataSplits splits = make_splits(syn.data, seed);
    const auto trained = train(splits, cfg);
    const auto cmp = empirical_grad_corr(trained.theta, splits.test);
    log << "feature side:  max |corr| = " << cmp.feature_corr << " (column " << cmp.feature_column << ")\n";
    log << "gradient side: max |corr| = " << cmp.gradient_corr << " (column " << cmp.gradient_column << ")\n";
    log << "accuracy " << cmp.accuracy << " vs majority rate " << cmp.chance << '\n';
    if (!cmp.conclusive) log << "inconclusive: the learner does not beat the majority rate\n";
    else log << (cmp.gradient_corr > cmp.feature_corr ? "gradient side is stronger\n" : "feature side is stronger\n");
    return cmp;
}

// ---------------------------------------------------------------------------
// dump-graph

/// One CSV row per training sample and batch (in split order), with the
/// directed KNN neighbours and the vector the graph was built from.
inline void cmd_dump_graph(const RunConfig& rc, const std::string& model_path, const std::string& out_path,
                           std::ostream& log) {
    require_valid(rc);
    if (!uses_graph(rc.train.mode)) throw InvalidArgument("dump-graph needs mode gog or no_grad");
    const Dataset encoded = load_encoded(rc);
    const DataSplits splits = make_splits(encoded, rc.train.seed);
    const LearnerParams theta = load_snapshot(model_path);
    if (theta.input_dim() != splits.train.num_features())
        throw InvalidArgument("model input width does not match the dataset");
    auto os = open_out(out_path);
    const std::size_t b = rc.train.batch_size;
    std::size_t batches = 0;
    bool header = false;
    for (std::size_t start = 0; start + rc.train.k < splits.train.size(); start += b) {
        const std::size_t len = std::min(b, splits.train.size() - start);
        std::vector<std::size_t> rows(len);
        for (std::size_t i = 0; i < len; ++i) rows[i] = start + i;
        const Matrix x = gather_rows(splits.train.features, rows);
        std::vector<int> y(len);
        for (std::size_t i = 0; i < len; ++i) y[i] = splits.train.labels[rows[i]];
        const auto rec = forward(x, y, theta, false);
        const Matrix v = rc.train.mode == Mode::NoGrad ? x : batch_gradient_features(rec, theta, rc.train.gradient_layer);
        const auto graph = build_knn_graph(v, rc.train.k);
        if (!header) {
            write_graph_dump_header(os, v.cols());
            header = true;
        }
        write_graph_dump(os, batches++, graph, v, rows);
    }
    log << "wrote " << batches << " batch graphs to " << out_path << '\n';
}

}  // namespace gog::cli
