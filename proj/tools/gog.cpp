// gog: data generation, training, sweeps, robustness runs and theory checks.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace gog;

void add_spec_flags(CLI::App* cmd, SyntheticSpec& spec, bool& touched) {
    auto mark = [&touched](auto) { touched = true; };
    cmd->add_option_function<double>("--a", [&spec, mark](double v) { spec.a = v; mark(0); }, "s = a*x + e_a slope");
    cmd->add_option_function<double>("--b", [&spec, mark](double v) { spec.b = v; mark(0); }, "s = b*U + e_b slope");
    cmd->add_option_function<double>("--mu-a", [&spec, mark](double v) { spec.mu_a = v; mark(0); }, "mean of e_a");
    cmd->add_option_function<double>("--mu-b", [&spec, mark](double v) { spec.mu_b = v; mark(0); }, "mean of e_b");
    cmd->add_option_function<double>("--var-a", [&spec, mark](double v) { spec.var_a = v; mark(0); }, "variance of e_a")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option_function<double>("--var-b", [&spec, mark](double v) { spec.var_b = v; mark(0); }, "variance of e_b")
        ->check(CLI::NonNegativeNumber);
}

void add_generator_flags(CLI::App* cmd, SyntheticSpec& spec) {
    cmd->add_option("--features", spec.num_features, "feature count")->check(CLI::Range(2, 1000));
    cmd->add_option("--group-threshold", spec.group_threshold, "two groups split at this value of s");
    cmd->add_option("--quantile-groups", spec.quantile_groups, "equal-frequency groups over s instead (>1)");
    cmd->add_option("--rule-rotation", spec.rule_rotation, "label-rule rotation in degrees for s above rule-threshold");
    cmd->add_option("--rule-threshold", spec.rule_threshold, "s above which the rotated rule applies");
    cmd->add_option("--flip-base", spec.flip_base, "label flip probability offset")->check(CLI::NonNegativeNumber);
    cmd->add_option("--flip-scale", spec.flip_scale, "label flip probability slope on sigmoid(s)")
        ->check(CLI::NonNegativeNumber);
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::size_t> k;
    std::optional<std::string> out;
    std::optional<double> noise;
    std::optional<std::size_t> jobs;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> modes;
    std::vector<double> noise_list;
};

RunConfig load_with(const std::string& path, const Overrides& o) {
    RunConfig rc = load_run_config(path);
    if (o.seed) {
        rc.train.seed = *o.seed;
        rc.seeds = {*o.seed};
    }
    if (!o.seeds.empty()) rc.seeds = o.seeds;
    if (o.mode) rc.train.mode = parse_mode(*o.mode);
    if (!o.modes.empty()) {
        rc.modes.clear();
        for (const auto& m : o.modes) rc.modes.push_back(parse_mode(m));
    }
    if (o.k) rc.train.k = *o.k;
    if (o.out) rc.out = *o.out;
    if (o.noise) rc.train_noise = *o.noise;
    if (!o.noise_list.empty()) rc.noise = o.noise_list;
    if (o.jobs) rc.jobs = *o.jobs;
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial sample reweighting over a graph of gradients"};
    app.require_subcommand(1);

    // gen-data
    SyntheticSpec gen_spec;
    bool gen_touched = false;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset (CSV + schema)");
    add_spec_flags(gen, gen_spec, gen_touched);
    add_generator_flags(gen, gen_spec);
    gen->add_option("--n", gen_spec.n, "sample count")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "random seed");
    gen->add_option("--out", gen_out, "output prefix (<out>.csv, <out>.schema)")->required();

    // gen-compas
    CompasSpec compas;
    std::uint64_t compas_seed = 1;
    std::string compas_out;
    auto* gc = app.add_subcommand("gen-compas", "write the COMPAS-shaped synthetic table (CSV + schema)");
    gc->add_option("--n", compas.n, "row count")->check(CLI::PositiveNumber);
    gc->add_option("--missing-rate", compas.missing_rate, "share of missing days_b_screening_arrest")
        ->check(CLI::Range(0.0, 1.0));
    gc->add_option("--label-noise", compas.label_noise, "extra uniform label flip rate")->check(CLI::Range(0.0, 1.0));
    gc->add_option("--seed", compas_seed, "random seed");
    gc->add_option("--out", compas_out, "output prefix")->required();

    // train / robustness / sweep / dump-graph share the config and overrides
    std::string config_path, grid_name = "small", model_path, dump_out;
    Overrides ov;
    auto* tr = app.add_subcommand("train", "train one model and report test metrics");
    auto* rb = app.add_subcommand("robustness", "worst-group metrics against training-label noise");
    auto* sw = app.add_subcommand("sweep", "grid search with selection on validation worst-group metric");
    auto* dg = app.add_subcommand("dump-graph", "export per-batch KNN graphs and gradient vectors");
    for (auto* c : {tr, rb, sw, dg}) {
        c->add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
        c->add_option("--mode", ov.mode, "gog, no_graph, no_grad or erm");
        c->add_option("--k", ov.k, "neighbours per node");
    }
    for (auto* c : {tr, sw, dg}) c->add_option("--seed", ov.seed, "seed (split, noise, initialization)");
    for (auto* c : {tr, rb, sw}) c->add_option("--out", ov.out, "output directory");
    tr->add_option("--noise", ov.noise, "training-label noise fraction")->check(CLI::Range(0.0, 1.0));
    sw->add_option("--noise", ov.noise, "training-label noise fraction")->check(CLI::Range(0.0, 1.0));
    rb->add_option("--noise", ov.noise_list, "noise fractions")->delimiter(',')->check(CLI::Range(0.0, 1.0));
    rb->add_option("--modes", ov.modes, "modes to compare")->delimiter(',');
    rb->add_option("--seeds", ov.seeds, "seeds")->delimiter(',');
    sw->add_option("--seeds", ov.seeds, "seeds")->delimiter(',');
    sw->add_option("--grid", grid_name, "full, small or config");
    sw->add_option("--jobs", ov.jobs, "worker threads")->check(CLI::PositiveNumber);
    dg->add_option("--model", model_path, "snapshot written by train")->required()->check(CLI::ExistingFile);
    dg->add_option("--out", dump_out, "CSV output path")->required();

    // verify-theory
    SyntheticSpec th_spec;
    bool th_touched = false, printed = false;
    std::size_t th_n = 1000000;
    std::uint64_t th_seed = 1;
    std::string th_csv;
    auto* th = app.add_subcommand("verify-theory", "closed-form correlations against Monte Carlo");
    add_spec_flags(th, th_spec, th_touched);
    th->add_option("--n", th_n, "Monte Carlo samples per spec");
    th->add_option("--seed", th_seed, "random seed");
    th->add_flag("--printed", printed, "compare Corr(xU,s) and Ratio with the forms lacking the (mu_a-mu_b)^2 term");
    th->add_option("--out", th_csv, "CSV report path");

    // grad-corr
    SyntheticSpec gcorr_spec;
    bool gcorr_touched = false;
    std::uint64_t gcorr_seed = 1;
    TrainConfig gcorr_cfg;
    gcorr_cfg.max_epochs = 50;
    auto* gcorr = app.add_subcommand("grad-corr", "feature vs gradient correlation with s after ERM training");
    add_spec_flags(gcorr, gcorr_spec, gcorr_touched);
    add_generator_flags(gcorr, gcorr_spec);
    gcorr->add_option("--n", gcorr_spec.n, "sample count")->check(CLI::PositiveNumber);
    gcorr->add_option("--seed", gcorr_seed, "random seed");
    gcorr->add_option("--epochs", gcorr_cfg.max_epochs, "training epochs")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kValidation;
    }

    try {
        if (*gen) {
            cli::cmd_gen_data(gen_spec, gen_seed, gen_out, std::cout);
        } else if (*gc) {
            cli::cmd_gen_compas(compas, compas_seed, compas_out, std::cout);
        } else if (*tr) {
            cli::cmd_train(load_with(config_path, ov), std::cout);
        } else if (*rb) {
            cli::cmd_robustness(load_with(config_path, ov), std::cout);
        } else if (*sw) {
            cli::cmd_sweep(load_with(config_path, ov), grid_name, std::cout);
        } else if (*dg) {
            cli::cmd_dump_graph(load_with(config_path, ov), model_path, dump_out, std::cout);
        } else if (*th) {
            const std::vector<SyntheticSpec> specs = th_touched ? std::vector<SyntheticSpec>{th_spec}
                                                                : default_theory_grid();
            std::optional<std::ofstream> csv;
            if (!th_csv.empty()) csv = cli::open_out(th_csv);
            const bool ok = cli::cmd_verify_theory(specs, th_n, th_seed, printed, std::cout, csv ? &*csv : nullptr);
            return ok ? cli::kOk : cli::kTheoryMismatch;
        } else if (*gcorr) {
            cli::cmd_grad_corr(gcorr_spec, gcorr_cfg, gcorr_seed, std::cout);
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kValidation;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kRuntime;
    }
    return cli::kOk;
}
