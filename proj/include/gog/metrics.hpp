#pragma once

// Accuracy, AUC and fairness metrics over sensitive-attribute groups.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gog/error.hpp"
#include "gog/numeric.hpp"

namespace gog {

inline constexpr const char* kUnknownCategory = "unknown";
inline constexpr std::size_t kDefaultMinGroupSize = 5;

/// Group id per sample; ids follow the lexicographic order of the value tuples.
struct GroupIndex {
    std::vector<std::size_t> ids;
    std::vector<std::vector<std::string>> keys;

    std::size_t num_groups() const { return keys.size(); }

    std::string name(std::size_t group) const {
        std::string out;
        for (std::size_t c = 0; c < keys[group].size(); ++c) {
            if (c) out += '|';
            out += keys[group][c];
        }
        return out;
    }

    std::vector<std::size_t> counts() const {
        std::vector<std::size_t> c(num_groups(), 0);
        for (std::size_t id : ids) ++c[id];
        return c;
    }
};

/// Partitions samples by the full tuple of their sensitive values. Only
/// combinations that occur get an id. Empty values become "unknown".
inline GroupIndex group_partition(const std::vector<std::vector<std::string>>& sensitive) {
    GroupIndex out;
    if (sensitive.empty()) return out;
    const std::size_t q = sensitive.front().size();
    if (q == 0) throw InvalidArgument("group_partition: at least one sensitive column is required");
    std::map<std::vector<std::string>, std::size_t> index;
    std::vector<std::vector<std::string>> rows;
    rows.reserve(sensitive.size());
    for (const auto& r : sensitive) {
        if (r.size() != q) throw ShapeError("group_partition: ragged sensitive rows");
        std::vector<std::string> key = r;
        for (auto& v : key)
            if (v.empty()) v = kUnknownCategory;
        index.emplace(key, 0);
        rows.push_back(std::move(key));
    }
    std::size_t next = 0;
    for (auto& [key, id] : index) {
        id = next++;
        out.keys.push_back(key);
    }
    out.ids.reserve(rows.size());
    for (const auto& r : rows) out.ids.push_back(index.at(r));
    return out;
}

/// Mann-Whitney AUC with ties counted one half. Empty when only one class is present.
inline std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("auc: score/label length mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos = 0.0, neg = 0.0, rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]] != 0) {
                rank_sum += avg_rank;
                pos += 1.0;
            } else {
                neg += 1.0;
            }
        }
        i = j;
    }
    if (pos == 0.0 || neg == 0.0) return std::nullopt;
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

struct WorstGroup {
    std::size_t group;
    double value;
};

/// Minimum over groups that have a value and at least `min_size` members;
/// the smaller id wins ties.
inline WorstGroup worst_group(std::span<const std::optional<double>> values, std::span<const std::size_t> counts,
                              std::size_t min_size = kDefaultMinGroupSize) {
    if (values.size() != counts.size()) throw ShapeError("worst_group: values and counts differ in length");
    std::optional<WorstGroup> best;
    for (std::size_t g = 0; g < values.size(); ++g) {
        if (!values[g] || counts[g] < min_size || counts[g] == 0) continue;
        if (!best || *values[g] < best->value) best = WorstGroup{g, *values[g]};
    }
    if (!best) throw InvalidArgument("worst_group: no populated group");
    return *best;
}

/// Sum over unordered group pairs and classes k of
/// |E[p_k | S=i, y=k] - E[p_k | S=j, y=k]|. Soft rates use the predicted
/// probability of class k; hard rates use argmax == k. Groups smaller than
/// `min_size`, and (pair, class) terms where either side lacks class-k
/// samples, are skipped.
inline double equalized_odds(const Matrix& probs, std::span<const int> labels, std::span<const std::size_t> groups,
                             std::size_t min_size = 1, bool hard = false) {
    const std::size_t n = probs.rows();
    const std::size_t m = probs.cols();
    if (labels.size() != n || groups.size() != n) throw ShapeError("equalized_odds: length mismatch");
    std::size_t num_groups = 0;
    for (std::size_t g : groups) num_groups = std::max(num_groups, g + 1);

    std::vector<std::size_t> size(num_groups, 0);
    std::vector<double> sum(num_groups * m, 0.0), cnt(num_groups * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(labels[i]);
        if (k >= m) throw ShapeError("equalized_odds: label out of range");
        ++size[groups[i]];
        double rate = probs(i, k);
        if (hard) {
            const auto row = probs.row_span(i);
            rate = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) == k ? 1.0 : 0.0;
        }
        sum[groups[i] * m + k] += rate;
        cnt[groups[i] * m + k] += 1.0;
    }
    std::vector<std::size_t> active;
    for (std::size_t g = 0; g < num_groups; ++g)
        if (size[g] >= std::max<std::size_t>(min_size, 1)) active.push_back(g);
    if (active.size() < 2) throw InvalidArgument("equalized_odds: need at least two groups");

    double total = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b)
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t ia = active[a] * m + k, ib = active[b] * m + k;
                if (cnt[ia] == 0.0 || cnt[ib] == 0.0) continue;
                total += std::abs(sum[ia] / cnt[ia] - sum[ib] / cnt[ib]);
            }
    return total;
}

struct GroupMetrics {
    std::string name;
    std::size_t count = 0;
    double accuracy = 0.0;
    std::optional<double> auc;
};

struct MetricsReport {
    double worst_group_acc = 0.0;
    std::string worst_group_acc_group;
    std::optional<double> worst_group_auc;
    std::string worst_group_auc_group;
    double equalized_odds = 0.0;
    double overall_acc = 0.0;
    std::optional<double> overall_auc;
    std::vector<GroupMetrics> per_group;

    static std::vector<std::string> keys() {
        return {"worst_group_acc", "worst_group_auc", "equalized_odds", "overall_acc", "overall_auc",
                "worst_group_acc_group", "worst_group_auc_group", "groups_reported"};
    }

    /// Values in the order of keys(); undefined AUCs are written as "nan".
    std::vector<std::string> values() const {
        auto num = [](double v) {
            std::ostringstream os;
            os.precision(10);
            os << v;
            return os.str();
        };
        auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string("nan"); };
        return {num(worst_group_acc), opt(worst_group_auc), num(equalized_odds), num(overall_acc),
                opt(overall_auc), worst_group_acc_group, worst_group_auc_group, std::to_string(per_group.size())};
    }

    std::string csv_header() const {
        std::string out;
        for (const auto& k : keys()) out += (out.empty() ? "" : ",") + k;
        return out;
    }

    std::string csv_row() const {
        std::string out;
        bool first = true;
        for (const auto& v : values()) {
            if (!first) out += ',';
            out += v;
            first = false;
        }
        return out;
    }

    /// `key = value` lines followed by one line per reported group.
    void write_text(std::ostream& os) const {
        const auto k = keys();
        const auto v = values();
        for (std::size_t i = 0; i < k.size(); ++i) os << k[i] << " = " << v[i] << '\n';
        for (const auto& g : per_group) {
            os << "group." << g.name << ".count = " << g.count << '\n';
            os << "group." << g.name << ".acc = " << g.accuracy << '\n';
            os << "group." << g.name << ".auc = ";
            if (g.auc) os << *g.auc; else os << "nan";
            os << '\n';
        }
    }
};

struct EvalOptions {
    std::size_t min_group_size = kDefaultMinGroupSize;
    bool hard_rates = false;
};

inline std::size_t argmax_row(const Matrix& probs, std::size_t i) {
    const auto row = probs.row_span(i);
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

/// Full report. Per-group AUC and the AUC fields are defined for binary tasks only.
inline MetricsReport evaluate(const Matrix& probs, std::span<const int> labels, const GroupIndex& groups,
                              const EvalOptions& opt = {}) {
    const std::size_t n = probs.rows();
    if (n == 0) throw InvalidArgument("evaluate: empty prediction set");
    if (labels.size() != n || groups.ids.size() != n) throw ShapeError("evaluate: length mismatch");
    const bool binary = probs.cols() == 2;

    MetricsReport r;
    std::vector<int> correct(n);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        correct[i] = static_cast<int>(argmax_row(probs, i)) == labels[i] ? 1 : 0;
        score[i] = binary ? probs(i, 1) : 0.0;
    }
    r.overall_acc = mean(std::vector<double>(correct.begin(), correct.end()));
    if (binary) r.overall_auc = auc(score, labels);

    const std::size_t g_count = groups.num_groups();
    std::vector<std::vector<std::size_t>> members(g_count);
    for (std::size_t i = 0; i < n; ++i) members[groups.ids[i]].push_back(i);

    std::vector<std::optional<double>> accs(g_count), aucs(g_count);
    std::vector<std::size_t> counts(g_count);
    for (std::size_t g = 0; g < g_count; ++g) {
        counts[g] = members[g].size();
        if (members[g].empty()) continue;
        double hits = 0.0;
        std::vector<double> s;
        std::vector<int> y;
        for (std::size_t i : members[g]) {
            hits += correct[i];
            s.push_back(score[i]);
            y.push_back(labels[i]);
        }
        accs[g] = hits / static_cast<double>(members[g].size());
        if (binary) aucs[g] = auc(s, y);
        if (members[g].size() >= opt.min_group_size)
            r.per_group.push_back({groups.name(g), members[g].size(), *accs[g], aucs[g]});
    }
    const auto wa = worst_group(accs, counts, opt.min_group_size);
    r.worst_group_acc = wa.value;
    r.worst_group_acc_group = groups.name(wa.group);
    if (binary) {
        bool any = false;
        for (std::size_t g = 0; g < g_count; ++g) any = any || (aucs[g] && counts[g] >= opt.min_group_size);
        if (any) {
            const auto wu = worst_group(aucs, counts, opt.min_group_size);
            r.worst_group_auc = wu.value;
            r.worst_group_auc_group = groups.name(wu.group);
        }
    }
    std::size_t populated = 0;
    for (std::size_t c : counts) populated += c >= opt.min_group_size ? 1 : 0;
    r.equalized_odds = populated >= 2 ? equalized_odds(probs, labels, groups.ids, opt.min_group_size, opt.hard_rates)
                                      : 0.0;
    return r;
}

}  // namespace gog
