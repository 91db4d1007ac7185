#pragma once

// Run configuration file: flat `key = value` lines mirroring TrainConfig plus
// dataset paths and the output directory. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "gog/error.hpp"
#include "gog/kv.hpp"
#include "gog/trainer.hpp"

namespace gog {

struct RunConfig {
    TrainConfig train;
    std::string data;    // CSV path
    std::string schema;  // schema sidecar path
    std::string out = "out";
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<Mode> modes{Mode::Gog, Mode::NoGraph};  // robustness comparisons
    std::vector<double> noise{0.0, 0.1};                // robustness fractions
    double train_noise = 0.0;
    bool hard_rates = false;
    std::size_t jobs = 1;
};

/// Every accepted key, for error messages and documentation.
inline const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys{
        "mode",       "lr",          "adv_lr",       "batch_size", "hidden_width", "hidden_layers",  "dropout",
        "k",          "embed_dim",   "gradient_layer", "max_epochs", "patience",   "seed",           "optimizer",
        "select_metric", "min_group_size", "data",   "schema",     "out",          "seeds",          "modes",
        "noise",      "train_noise", "hard_rates",   "jobs"};
    return keys;
}

namespace detail {

inline std::size_t to_count(const kv::Entry& e) {
    const long long v = kv::to_int(e);
    if (v < 0) throw ParseError("'" + e.key + "' must be nonnegative", e.line);
    return static_cast<std::size_t>(v);
}

inline bool to_bool(const kv::Entry& e) {
    if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "no") return false;
    throw ParseError("'" + e.key + "' expects true or false, got '" + e.value + "'", e.line);
}

template <typename F>
auto wrap(const kv::Entry& e, F&& f) {
    try {
        return f();
    } catch (const InvalidArgument& ex) {
        throw ParseError(ex.what(), e.line);
    }
}

}  // namespace detail

/// Collects every problem before failing so a config can be fixed in one pass.
inline RunConfig parse_run_config(std::istream& in) {
    RunConfig rc;
    TrainConfig& t = rc.train;
    std::vector<std::string> problems;
    for (const auto& e : kv::parse(in)) {
        try {
            const std::string& k = e.key;
            if (k == "mode") t.mode = detail::wrap(e, [&] { return parse_mode(e.value); });
            else if (k == "lr") t.lr = kv::to_double(e);
            else if (k == "adv_lr") t.adv_lr = kv::to_double(e);
            else if (k == "batch_size") t.batch_size = detail::to_count(e);
            else if (k == "hidden_width") t.hidden_width = detail::to_count(e);
            else if (k == "hidden_layers") t.hidden_layers = detail::to_count(e);
            else if (k == "dropout") t.dropout = kv::to_double(e);
            else if (k == "k") t.k = detail::to_count(e);
            else if (k == "embed_dim") t.embed_dim = detail::to_count(e);
            else if (k == "gradient_layer") t.gradient_layer = detail::wrap(e, [&] { return parse_gradient_layer(e.value); });
            else if (k == "max_epochs") t.max_epochs = detail::to_count(e);
            else if (k == "patience") t.patience = detail::to_count(e);
            else if (k == "seed") t.seed = detail::to_count(e);
            else if (k == "optimizer") t.optimizer = detail::wrap(e, [&] { return parse_optimizer(e.value); });
            else if (k == "select_metric") t.select_metric = detail::wrap(e, [&] { return parse_select_metric(e.value); });
            else if (k == "min_group_size") t.min_group_size = detail::to_count(e);
            else if (k == "data") rc.data = e.value;
            else if (k == "schema") rc.schema = e.value;
            else if (k == "out") rc.out = e.value;
            else if (k == "seeds") {
                rc.seeds.clear();
                for (const auto& s : kv::split_list(e.value)) rc.seeds.push_back(detail::to_count({k, s, e.line}));
            } else if (k == "modes") {
                rc.modes.clear();
                for (const auto& s : kv::split_list(e.value)) rc.modes.push_back(detail::wrap(e, [&] { return parse_mode(s); }));
            } else if (k == "noise") {
                rc.noise.clear();
                for (const auto& s : kv::split_list(e.value)) rc.noise.push_back(kv::to_double({k, s, e.line}));
            } else if (k == "train_noise") rc.train_noise = kv::to_double(e);
            else if (k == "hard_rates") rc.hard_rates = detail::to_bool(e);
            else if (k == "jobs") rc.jobs = detail::to_count(e);
            else throw ParseError("unknown key '" + k + "'", e.line);
        } catch (const ParseError& ex) {
            problems.push_back(ex.what());
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ParseError(msg);
    }
    return rc;
}

/// Relative `data` and `schema` paths are taken relative to the config file.
inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    RunConfig rc = parse_run_config(in);
    const auto base = std::filesystem::path(path).parent_path();
    for (std::string* p : {&rc.data, &rc.schema})
        if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
    return rc;
}

/// Semantic checks beyond parsing; every failure is reported together.
inline std::vector<std::string> validate_run_config(const RunConfig& rc, bool need_data = true) {
    std::vector<std::string> problems;
    try {
        rc.train.validate();
    } catch (const InvalidArgument& e) {
        problems.push_back(e.what());
    }
    if (need_data && rc.data.empty()) problems.push_back("'data' is required");
    if (need_data && rc.schema.empty()) problems.push_back("'schema' is required");
    if (rc.seeds.empty()) problems.push_back("'seeds' must list at least one seed");
    for (double f : rc.noise)
        if (!(f >= 0.0 && f <= 1.0)) problems.push_back("noise fraction " + std::to_string(f) + " outside [0, 1]");
    if (!(rc.train_noise >= 0.0 && rc.train_noise <= 1.0)) problems.push_back("'train_noise' outside [0, 1]");
    for (Mode m : rc.modes) {
        if (uses_graph(m) && rc.train.k >= rc.train.batch_size)
            problems.push_back("k must be smaller than batch_size for mode " + to_string(m));
    }
    if (rc.jobs == 0) problems.push_back("'jobs' must be positive");
    return problems;
}

}  // namespace gog
