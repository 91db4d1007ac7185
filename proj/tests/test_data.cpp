#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gog/compas.hpp"
#include "gog/csv.hpp"
#include "gog/data.hpp"

using namespace gog;

namespace {

Schema schema_of(const std::string& text) {
    std::istringstream in(text);
    return Schema::parse(in);
}

Dataset encode(const std::string& csv_text, const Schema& s) {
    std::istringstream in(csv_text);
    return read_encoded_csv(in, s);
}

const char* kSchema =
    "label = y\n"
    "column.age = continuous\n"
    "column.color = categorical\n"
    "column.sex = categorical sensitive\n";

}  // namespace

TEST(Csv, QuotedFieldsAndLineEndings) {
    std::istringstream in("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\n\n\"multi\nline\",2\n");
    const auto rows = csv::read(in);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][0], "x, y");
    EXPECT_EQ(rows[1][1], "he said \"hi\"");
    EXPECT_EQ(rows[2][0], "multi\nline");
}

TEST(Csv, UnterminatedQuoteRejected) {
    std::istringstream in("a,b\n\"open,1\n");
    EXPECT_THROW(csv::read(in), ParseError);
}

TEST(Csv, WriteQuotesOnlyWhenNeeded) {
    std::ostringstream os;
    csv::write_row(os, {"plain", "a,b", "q\"t"});
    EXPECT_EQ(os.str(), "plain,\"a,b\",\"q\"\"t\"\n");
}

TEST(Schema, ParseAndWriteRoundTrip) {
    const Schema s = schema_of("label = y\nclasses = no, yes\ncolumn.age = continuous sensitive bins=25,45\n"
                               "column.id = ignore  # row id\ncolumn.c = categorical\n");
    EXPECT_EQ(s.classes, (std::vector<std::string>{"no", "yes"}));
    ASSERT_NE(s.find("age"), nullptr);
    EXPECT_EQ(s.find("age")->bins, (std::vector<double>{25.0, 45.0}));
    std::ostringstream os;
    s.write(os);
    const Schema t = schema_of(os.str());
    EXPECT_EQ(t.columns.size(), 3u);
    EXPECT_TRUE(t.find("age")->sensitive);
}

TEST(Schema, Errors) {
    EXPECT_THROW(schema_of("column.a = continuous sensitive\n"), ParseError);  // no label
    EXPECT_THROW(schema_of("label = y\ncolumn.a = continuous\n"), ParseError);  // nothing sensitive
    EXPECT_THROW(schema_of("label = y\ncolumn.a = fancy sensitive\n"), ParseError);
    EXPECT_THROW(schema_of("label = y\ncolumn.a = categorical sensitive\ncolumn.a = continuous\n"), ParseError);
    EXPECT_THROW(schema_of("label = y\ncolumn.a = continuous sensitive bins=45,25\n"), ParseError);
    EXPECT_THROW(schema_of("label = y\nlabels = y\ncolumn.a = categorical sensitive\n"), ParseError);
}

TEST(ReadCsv, ThreeRowFixtureEncodesExactly) {
    const Dataset ds = encode("age,color,sex,y\n30,red,F,1\n40,blue,M,0\n50,red,M,1\n", schema_of(kSchema));
    EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"age", "color=blue", "color=red"}));
    EXPECT_EQ(ds.features, (Matrix{{30, 0, 1}, {40, 1, 0}, {50, 0, 1}}));
    EXPECT_EQ(ds.labels, (std::vector<int>{1, 0, 1}));
    EXPECT_EQ(ds.class_names, (std::vector<std::string>{"0", "1"}));
    EXPECT_EQ(ds.sensitive_names, (std::vector<std::string>{"sex"}));
    EXPECT_EQ(ds.sensitive[0], (std::vector<std::string>{"F"}));
}

TEST(ReadCsv, SensitiveColumnNeverAFeature) {
    const Dataset ds = encode("age,color,sex,y\n30,red,F,1\n40,blue,M,0\n", schema_of(kSchema));
    for (const auto& f : ds.feature_names) EXPECT_EQ(f.find("sex"), std::string::npos);
    EXPECT_EQ(ds.num_features(), 3u);
}

TEST(ReadCsv, MissingLabelDroppedAndMissingFeatureImputed) {
    const Dataset ds = encode("age,color,sex,y\n30,red,F,1\n,blue,M,0\n50,red,M,\n20,blue,,0\n", schema_of(kSchema));
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_TRUE(std::isnan(ds.features(1, 0)));
    EXPECT_EQ(ds.sensitive[2][0], kUnknownCategory);
    Matrix x = ds.features;
    const std::vector<std::size_t> rows{0, 1, 2};
    FeatureScaler::fit(x, rows).apply(x);
    EXPECT_TRUE(x.all_finite());
    EXPECT_EQ(x(1, 0), 0.0);  // imputed with the mean, which standardizes to 0
}

TEST(ReadCsv, DistinctErrorsWithPositions) {
    const Schema s = schema_of(kSchema);
    try {
        encode("age,color,sex,y,extra\n1,red,F,1,2\n", s);
        FAIL();
    } catch (const UnknownColumnError& e) {
        EXPECT_EQ(e.row(), 1u);
        EXPECT_EQ(e.col(), 5u);
    }
    try {
        encode("age,color,sex,y\n30,red,F,1\nabc,red,M,0\n", s);
        FAIL();
    } catch (const CellParseError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_EQ(e.col(), 1u);
    }
    EXPECT_THROW(encode("", s), EmptyInputError);
    EXPECT_THROW(encode("age,color,sex,y\n", s), EmptyInputError);
    EXPECT_THROW(encode("age,sex,y\n1,F,0\n", s), UnknownColumnError);
}

TEST(ReadCsv, ContinuousSensitiveColumnIsBinned) {
    const Schema s = schema_of("label = y\ncolumn.x = continuous\ncolumn.age = continuous sensitive bins=25,45\n");
    const Dataset ds = encode("x,age,y\n1,20,0\n2,25,1\n3,44,0\n4,45,1\n", s);
    EXPECT_EQ(ds.sensitive[0][0], "<25");
    EXPECT_EQ(ds.sensitive[1][0], "[25,45)");
    EXPECT_EQ(ds.sensitive[2][0], "[25,45)");
    EXPECT_EQ(ds.sensitive[3][0], ">=45");
    EXPECT_EQ(ds.num_features(), 1u);
}

TEST(Scaler, ConstantColumnMapsToZero) {
    Matrix x{{3.0, 1.0}, {3.0, 2.0}, {3.0, 6.0}};
    const std::vector<std::size_t> rows{0, 1, 2};
    FeatureScaler::fit(x, rows).apply(x);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(x(i, 0), 0.0);
}

TEST(Split, SizesForOneHundred) {
    const auto s = split_indices(100, 1);
    EXPECT_EQ(s.train.size(), 75u);
    EXPECT_EQ(s.validation.size(), 10u);
    EXPECT_EQ(s.test.size(), 15u);
}

TEST(Split, DeterministicDisjointExhaustive) {
    for (std::size_t n : {20u, 57u, 1000u}) {
        const auto a = split_indices(n, 7), b = split_indices(n, 7), c = split_indices(n, 8);
        EXPECT_EQ(a.train, b.train);
        EXPECT_EQ(a.test, b.test);
        EXPECT_NE(a.train, c.train);
        std::set<std::size_t> all(a.train.begin(), a.train.end());
        all.insert(a.validation.begin(), a.validation.end());
        all.insert(a.test.begin(), a.test.end());
        EXPECT_EQ(all.size(), n);
        EXPECT_EQ(a.train.size() + a.validation.size() + a.test.size(), n);
        EXPECT_EQ(a.train.size(), n * 3 / 4);
        EXPECT_EQ(a.validation.size(), n / 10);
    }
    EXPECT_THROW(split_indices(19, 1), InvalidArgument);
}

TEST(Split, TrainSplitIsStandardized) {
    SyntheticSpec spec;
    spec.n = 600;
    Dataset ds = gen_synthetic(spec, 3).data;
    for (double& v : ds.features.data()) v = 5.0 + 3.0 * v;
    const auto sp = make_splits(ds, 4);
    for (std::size_t j = 0; j < sp.train.num_features(); ++j) {
        double m = 0.0, v = 0.0;
        const double n = static_cast<double>(sp.train.size());
        for (std::size_t i = 0; i < sp.train.size(); ++i) m += sp.train.features(i, j);
        m /= n;
        for (std::size_t i = 0; i < sp.train.size(); ++i) v += std::pow(sp.train.features(i, j) - m, 2);
        EXPECT_LE(std::abs(m), 1e-9);
        EXPECT_NEAR(v / n, 1.0, 1e-6);
    }
}

TEST(LabelNoise, ZeroFractionIsIdentity) {
    SyntheticSpec spec;
    spec.n = 100;
    const Dataset ds = gen_synthetic(spec, 1).data;
    const Dataset out = inject_label_noise(ds, 0.0, 5);
    EXPECT_EQ(out.labels, ds.labels);
    EXPECT_TRUE(out.flipped.empty());
}

TEST(LabelNoise, TenPercentOfOneHundred) {
    SyntheticSpec spec;
    spec.n = 100;
    const Dataset ds = gen_synthetic(spec, 1).data;
    const Dataset out = inject_label_noise(ds, 0.1, 5);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < 100; ++i) changed += out.labels[i] != ds.labels[i] ? 1 : 0;
    EXPECT_EQ(changed, 10u);
    EXPECT_EQ(out.flipped.size(), 10u);
    for (std::size_t i : out.flipped) EXPECT_NE(out.labels[i], ds.labels[i]);
    EXPECT_EQ(inject_label_noise(ds, 0.1, 5).labels, out.labels);
}

TEST(LabelNoise, MultiClassFlipsToADifferentClass) {
    Dataset ds;
    ds.num_classes = 4;
    ds.features = Matrix(40, 1);
    ds.labels.assign(40, 2);
    ds.sensitive.assign(40, {"a"});
    const Dataset out = inject_label_noise(ds, 0.5, 2);
    std::size_t changed = 0;
    for (int y : out.labels) {
        EXPECT_GE(y, 0);
        EXPECT_LT(y, 4);
        changed += y != 2 ? 1 : 0;
    }
    EXPECT_EQ(changed, 20u);
}

TEST(LabelNoise, Errors) {
    Dataset ds;
    ds.num_classes = 1;
    ds.labels = {0, 0};
    EXPECT_THROW(inject_label_noise(ds, 0.1, 1), InvalidArgument);
    ds.num_classes = 2;
    EXPECT_THROW(inject_label_noise(ds, 1.5, 1), InvalidArgument);
}

TEST(Synthetic, DeterministicNoiseFreeSensitiveIsExactlyLinear) {
    SyntheticSpec spec;
    spec.var_a = 0.0;
    spec.n = 500;
    const auto a = gen_synthetic(spec, 2), b = gen_synthetic(spec, 2);
    EXPECT_EQ(a.data.labels, b.data.labels);
    std::vector<double> x0(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) x0[i] = a.data.features(i, 0);
    EXPECT_NEAR(pearson(x0, a.data.s_cont), 1.0, 1e-12);
}

TEST(Synthetic, IndependentWhenSlopeZero) {
    SyntheticSpec spec;
    spec.a = 0.0;
    spec.n = 20000;
    const auto d = gen_synthetic(spec, 3);
    std::vector<double> x0(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) x0[i] = d.data.features(i, 0);
    EXPECT_LE(std::abs(pearson(x0, d.data.s_cont)), 3.0 / std::sqrt(static_cast<double>(spec.n)));
}

TEST(Synthetic, CorrelationMatchesClosedFormAtOneMillion) {
    SyntheticSpec spec;
    spec.n = 1000000;
    spec.num_features = 2;
    const auto d = gen_synthetic(spec, 4);
    std::vector<double> x0(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) x0[i] = d.data.features(i, 0);
    EXPECT_NEAR(pearson(x0, d.data.s_cont), 1.0 / std::sqrt(2.0), 0.01);
}

TEST(Synthetic, NoiseMomentsMatchSpec) {
    SyntheticSpec spec;
    spec.mu_a = 1.5;
    spec.var_a = 2.0;
    spec.mu_b = -0.5;
    spec.var_b = 0.5;
    spec.n = 40000;
    const auto d = gen_synthetic(spec, 5);
    const double tol = 5.0 / std::sqrt(static_cast<double>(spec.n));
    EXPECT_NEAR(mean(d.eps_a), 1.5, tol);
    EXPECT_NEAR(mean(d.eps_b), -0.5, tol);
    EXPECT_NEAR(std::pow(sample_stddev(d.eps_a), 2), 2.0, 5.0 * 2.0 * std::sqrt(2.0 / spec.n));
    EXPECT_NEAR(std::pow(sample_stddev(d.eps_b), 2), 0.5, 5.0 * 0.5 * std::sqrt(2.0 / spec.n));
}

TEST(Synthetic, FlipProbabilityRule) {
    SyntheticSpec spec;
    EXPECT_NEAR(spec.flip_probability(0.0), 0.1 + 0.3 * 0.5, 1e-15);
    EXPECT_NEAR(spec.flip_probability(50.0), 0.4, 1e-12);
    spec.flip_base = 0.4;
    EXPECT_EQ(spec.flip_probability(10.0), 0.5);
}

TEST(Synthetic, GroupsBySignOrQuantile) {
    SyntheticSpec spec;
    spec.n = 1000;
    const auto d = gen_synthetic(spec, 6);
    for (std::size_t i = 0; i < spec.n; ++i)
        EXPECT_EQ(d.data.sensitive[i][0], d.data.s_cont[i] > 0.0 ? "g1" : "g0");
    spec.quantile_groups = 4;
    const auto q = gen_synthetic(spec, 6);
    for (std::size_t c : q.data.groups().counts()) EXPECT_EQ(c, 250u);
}

TEST(Synthetic, InvalidSpecRejected) {
    SyntheticSpec spec;
    spec.var_b = -1.0;
    EXPECT_THROW(spec.validate(), InvalidArgument);
    spec = {};
    spec.b = 0.0;
    EXPECT_THROW(spec.validate(), InvalidArgument);
}

TEST(Synthetic, CsvRoundTrip) {
    SyntheticSpec spec;
    spec.n = 50;
    const auto d = gen_synthetic(spec, 7);
    std::ostringstream csv_out, schema_out;
    write_dataset_csv(csv_out, schema_out, d.data);
    const Dataset back = encode(csv_out.str(), schema_of(schema_out.str()));
    EXPECT_EQ(back.labels, d.data.labels);
    EXPECT_EQ(back.sensitive, d.data.sensitive);
    EXPECT_EQ(back.features, d.data.features);
}

TEST(Compas, SchemaMatchesGeneratedTable) {
    CompasSpec spec;
    spec.n = 400;
    std::ostringstream csv_out, schema_out;
    write_compas_csv(csv_out, schema_out, spec, 1);
    const Dataset ds = encode(csv_out.str(), schema_of(schema_out.str()));
    EXPECT_EQ(ds.size(), 400u);
    EXPECT_EQ(ds.sensitive_names, (std::vector<std::string>{"sex", "age", "race"}));
    for (const auto& f : ds.feature_names) {
        EXPECT_NE(f.rfind("sex", 0), 0u);
        EXPECT_NE(f.rfind("race", 0), 0u);
        EXPECT_NE(f, "age");
    }
    EXPECT_GT(ds.groups().num_groups(), 6u);
}
