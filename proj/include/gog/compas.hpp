#pragma once

// Generator for a COMPAS-shaped recidivism table: sex, age and race are the
// sensitive columns, two_year_recid is the label. The values are synthetic;
// only the schema, the marginals and the kind of subgroup structure imitate
// the public dataset. Subgroups follow different label rules, so a single
// unweighted fit serves the majority and misses the small groups.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "gog/csv.hpp"
#include "gog/data.hpp"
#include "gog/numeric.hpp"

namespace gog {

struct CompasSpec {
    std::size_t n = 7214;
    double missing_rate = 0.01;  // share of empty days_b_screening_arrest cells
    double label_noise = 0.0;    // extra uniform flip rate on top of the logistic draw
};

inline const std::vector<std::string>& compas_header() {
    static const std::vector<std::string> h{"id", "sex", "age", "race", "juv_fel_count", "juv_misd_count",
                                            "juv_other_count", "priors_count", "c_charge_degree", "charge_desc",
                                            "days_b_screening_arrest", "two_year_recid"};
    return h;
}

/// Schema matching compas_header(); age is binned at 25 and 45.
inline Schema compas_schema() {
    Schema s;
    s.label = "two_year_recid";
    s.classes = {"0", "1"};
    s.columns = {{"id", ColumnType::Ignore, false, {}},
                 {"sex", ColumnType::Categorical, true, {}},
                 {"age", ColumnType::Continuous, true, {25.0, 45.0}},
                 {"race", ColumnType::Categorical, true, {}},
                 {"juv_fel_count", ColumnType::Continuous, false, {}},
                 {"juv_misd_count", ColumnType::Continuous, false, {}},
                 {"juv_other_count", ColumnType::Continuous, false, {}},
                 {"priors_count", ColumnType::Continuous, false, {}},
                 {"c_charge_degree", ColumnType::Categorical, false, {}},
                 {"charge_desc", ColumnType::Categorical, false, {}},
                 {"days_b_screening_arrest", ColumnType::Continuous, false, {}}};
    return s;
}

namespace detail {

template <typename T>
std::size_t pick(Rng& rng, const std::vector<T>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.uniform(0.0, total);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

inline int poisson(Rng& rng, double mean) {
    std::poisson_distribution<int> d(mean);
    return d(rng.engine());
}

}  // namespace detail

/// Rows of the table (header first), deterministic given the seed.
inline std::vector<csv::Row> gen_compas_rows(const CompasSpec& spec, std::uint64_t seed) {
    static const std::vector<std::string> races{"African-American", "Caucasian", "Hispanic", "Other"};
    static const std::vector<std::string> charges{"battery", "theft", "drug_possession", "driving", "burglary",
                                                  "other"};
    Rng rng(seed);
    std::vector<csv::Row> rows{compas_header()};
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t race = detail::pick(rng, std::vector<double>{0.51, 0.34, 0.09, 0.06});
        const bool female = rng.bernoulli(0.19);
        const double age = std::clamp(std::round(std::exp(std::log(31.0) + 0.3 * rng.normal())), 18.0, 80.0);
        const bool young = age < 25.0, old = age >= 45.0;

        const double juv_rate = (young ? 3.0 : 1.0) * (race == 0 ? 1.5 : 1.0);
        const int juv_fel = detail::poisson(rng, 0.05 * juv_rate);
        const int juv_misd = detail::poisson(rng, 0.07 * juv_rate);
        const int juv_other = detail::poisson(rng, 0.08 * juv_rate);
        const double race_rate[] = {1.4, 0.9, 0.8, 0.7};
        const double prior_mean = 2.6 * std::pow(age / 30.0, 0.7) * race_rate[race] * (female ? 0.6 : 1.15);
        const int priors = std::min(38, detail::poisson(rng, prior_mean));
        const bool felony = rng.bernoulli(female ? 0.55 : 0.67);

        std::vector<double> cw{0.22, 0.2, 0.2, 0.14, 0.1, 0.14};
        if (female) cw[1] += 0.15;
        if (race == 2 || race == 3) cw[3] += 0.2;
        if (young) cw[2] += 0.1;
        const std::size_t charge = detail::pick(rng, cw);
        const double days = std::round(1.5 * rng.normal());

        // Majority rule: priors, juvenile record and felony charges raise risk, age lowers it.
        const double pr = std::min<double>(priors, 15);
        double logit = -0.9 + 0.22 * pr + 0.45 * juv_fel + 0.3 * juv_misd + 0.2 * juv_other + 0.35 * felony -
                       0.035 * (age - 31.0);
        const double charge_effect[] = {0.2, 0.3, 0.1, -0.4, 0.5, 0.0};
        logit += charge_effect[charge];
        // Subgroup rules.
        if (female) logit = -0.2 + 0.05 * pr - 0.9 * felony + (charge == 1 ? 1.0 : -0.3) - 0.02 * (age - 31.0);
        if (young && race != 1) logit += 0.9 - 0.15 * pr + (charge == 2 ? 0.8 : 0.0);
        if (old && race == 1) logit = 0.6 - 0.25 * pr + (charge == 3 ? 1.2 : 0.0);
        if (race == 2 || race == 3) logit += (charge == 3 ? 1.4 : -0.5) - 0.1 * pr * felony;

        int label = rng.bernoulli(sigmoid(2.0 * logit)) ? 1 : 0;
        if (rng.bernoulli(spec.label_noise)) label = 1 - label;

        const bool missing = rng.bernoulli(spec.missing_rate);
        rows.push_back({std::to_string(i + 1), female ? "Female" : "Male", std::to_string(static_cast<int>(age)),
                        races[race], std::to_string(juv_fel), std::to_string(juv_misd), std::to_string(juv_other),
                        std::to_string(priors), felony ? "F" : "M", charges[charge],
                        missing ? "" : std::to_string(static_cast<int>(days)), std::to_string(label)});
    }
    return rows;
}

inline void write_compas_csv(std::ostream& csv_out, std::ostream& schema_out, const CompasSpec& spec,
                             std::uint64_t seed) {
    for (const auto& r : gen_compas_rows(spec, seed)) csv::write_row(csv_out, r);
    compas_schema().write(schema_out);
}

}  // namespace gog
