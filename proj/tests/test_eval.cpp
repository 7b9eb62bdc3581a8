#include "cbir/eval.hpp"

#include "support/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace cbir {
namespace {

using Labels = std::vector<std::string>;

TEST(Precision, Examples) {
    EXPECT_EQ(precision_at_k(Labels(20, "dino"), "dino", 20), 100.0);
    EXPECT_EQ(precision_at_k(Labels{"A", "A", "B", "A"}, "A", 4), 75.0);
    EXPECT_EQ(precision_at_k(Labels{"B", "C"}, "A", 2), 0.0);
    // Short lists still divide by k.
    EXPECT_EQ(precision_at_k(Labels{"A"}, "A", 4), 25.0);
    EXPECT_THROW(precision_at_k(Labels{"A"}, "A", 0), std::invalid_argument);
}

TEST(Recall, Examples) {
    EXPECT_EQ(recall_at_k(Labels(20, "dino"), "dino", 20, 100), 20.0);
    EXPECT_EQ(recall_at_k(Labels{"A", "B"}, "A", 2, 4), 25.0);
    EXPECT_EQ(recall_at_k(Labels{"B"}, "A", 1, 3), 0.0);
    EXPECT_THROW(recall_at_k(Labels{"A"}, "A", 1, 0), std::invalid_argument);
}

TEST(Recall, IdentityWithPrecision) {
    std::mt19937 rng(1);
    std::uniform_int_distribution<int> label(0, 3);
    std::uniform_int_distribution<std::size_t> length(1, 60);
    for (int i = 0; i < 2000; ++i) {
        Labels ranked(length(rng));
        for (auto& l : ranked) l = std::string(1, static_cast<char>('A' + label(rng)));
        std::uniform_int_distribution<std::size_t> kd(1, ranked.size());
        const std::size_t k = kd(rng);
        const std::size_t class_size = 1 + length(rng);
        const double p = precision_at_k(ranked, "A", k);
        const double r = recall_at_k(ranked, "A", k, class_size);
        ASSERT_NEAR(r, p * static_cast<double>(k) / static_cast<double>(class_size), 1e-9);
        ASSERT_LE(r, 100.0 * static_cast<double>(k) / static_cast<double>(class_size) + 1e-9);
    }
}

Descriptor one_dim(double v) {
    Descriptor d;
    d[0] = v;
    return d;
}

// Class a sits near 0, class b near 10; each image's nearest neighbor is its
// class-mate.
RetrievalIndex toy_index() {
    return RetrievalIndex({{0, "a", "a0", one_dim(0.0)},
                           {1, "a", "a1", one_dim(1.0)},
                           {2, "b", "b0", one_dim(10.0)},
                           {3, "b", "b1", one_dim(11.5)}},
                          ScalingMode::Raw);
}

TEST(Evaluate, ToyCorpusIsPerfectAtTwo) {
    EvalOptions opts;
    opts.k = 2;
    const auto report = evaluate(toy_index(), opts);
    ASSERT_EQ(report.rows.size(), 2u);
    EXPECT_EQ(report.rows[0].name, "a");
    EXPECT_EQ(report.rows[0].precision, 100.0);
    EXPECT_EQ(report.rows[1].precision, 100.0);
    EXPECT_EQ(report.rows[0].recall, 100.0);
    EXPECT_EQ(report.mean_precision, 100.0);
    EXPECT_EQ(report.rows[0].queries, 2u);
}

TEST(Evaluate, ToyCorpusAtThree) {
    // Third neighbor is always from the other class: 2 of 3 relevant.
    EvalOptions opts;
    opts.k = 3;
    const auto report = evaluate(toy_index(), opts);
    for (const auto& row : report.rows) {
        EXPECT_NEAR(row.precision, 200.0 / 3.0, 1e-12);
        EXPECT_EQ(row.recall, 100.0);
    }
}

TEST(Evaluate, ExcludingSelfShrinksClassSize) {
    EvalOptions opts;
    opts.k = 1;
    opts.include_self = false;
    const auto report = evaluate(toy_index(), opts);
    EXPECT_EQ(report.mean_precision, 100.0);
    EXPECT_EQ(report.mean_recall, 100.0);
    EXPECT_FALSE(report.include_self);
}

RetrievalIndex random_index(std::mt19937& rng, std::size_t n, std::size_t classes) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<IndexRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
        Descriptor d;
        for (std::size_t j = 0; j < kDescriptorSize; ++j) d[j] = unit(rng);
        records.push_back({static_cast<ImageId>(i), "class" + std::to_string(i % classes), "p", d});
    }
    return RetrievalIndex(std::move(records), ScalingMode::MinMax);
}

TEST(Evaluate, KOneWithSelfIsAlwaysPerfect) {
    std::mt19937 rng(2);
    for (int t = 0; t < 5; ++t) {
        const auto index = random_index(rng, 30, 4);
        EvalOptions opts;
        opts.k = 1;
        for (auto f : {FeatureSelection::Histogram, FeatureSelection::Moments, FeatureSelection::Hu,
                       FeatureSelection::Fused}) {
            opts.feature = f;
            EXPECT_EQ(evaluate(index, opts).mean_precision, 100.0);
        }
    }
}

TEST(Evaluate, MeansRecomputeFromRowsAndStayInRange) {
    std::mt19937 rng(3);
    const auto index = random_index(rng, 40, 5);
    EvalOptions opts;
    opts.k = 7;
    const auto report = evaluate(index, opts);
    double p = 0.0, r = 0.0;
    for (const auto& row : report.rows) {
        EXPECT_GE(row.precision, 0.0);
        EXPECT_LE(row.precision, 100.0);
        EXPECT_LE(row.recall, 100.0 * 7 / 8 + 1e-9);
        p += row.precision;
        r += row.recall;
    }
    EXPECT_NEAR(report.mean_precision, p / report.rows.size(), 1e-9);
    EXPECT_NEAR(report.mean_recall, r / report.rows.size(), 1e-9);
}

TEST(Evaluate, ParallelMatchesSerial) {
    std::mt19937 rng(4);
    const auto index = random_index(rng, 50, 5);
    EvalOptions opts;
    opts.k = 5;
    const auto serial = evaluate(index, opts);
    opts.workers = 4;
    const auto parallel = evaluate(index, opts);
    std::ostringstream a, b;
    write_report(serial, ReportFormat::Csv, a);
    write_report(parallel, ReportFormat::Csv, b);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Evaluate, FusedRankingUsesSummedSegments) {
    std::mt19937 rng(5);
    const auto index = random_index(rng, 25, 3);
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto result = search_topk(index, index.records()[i].descriptor, 10);
        for (const auto& e : result.entries) {
            ASSERT_NEAR(e.distance, e.segments.total(), 1e-12);
            const auto* rec = index.find(e.id);
            const Descriptor q = index.prepare_query(index.records()[i].descriptor);
            const Descriptor v = index.prepare_query(rec->descriptor);
            double sum = 0.0;
            for (auto f : {FeatureSelection::Histogram, FeatureSelection::Moments, FeatureSelection::Hu}) {
                sum += segment_distances(q, v, f).total();
            }
            ASSERT_NEAR(e.distance, sum, 1e-12);
        }
    }
}

TEST(Evaluate, OnePerClassUsesLowestId) {
    EvalOptions opts;
    opts.k = 2;
    opts.queries = QuerySet::OnePerClass;
    const auto report = evaluate(toy_index(), opts);
    ASSERT_EQ(report.rows.size(), 2u);
    EXPECT_EQ(report.rows[0].queries, 1u);
    EXPECT_EQ(report.rows[1].queries, 1u);
}

TEST(Evaluate, ModeOverrideRescales) {
    // Under RAW the large dimension dominates; MINMAX equalizes it.
    Descriptor a, b, c;
    a[0] = 0.0;
    a[1] = 0.0;
    b[0] = 100.0;
    b[1] = 0.0;
    c[0] = 0.0;
    c[1] = 1.0;
    const RetrievalIndex index({{0, "x", "a", a}, {1, "x", "b", b}, {2, "y", "c", c}}, ScalingMode::Raw);
    EvalOptions opts;
    opts.k = 2;
    const auto raw = evaluate(index, opts);
    opts.mode = ScalingMode::MinMax;
    const auto scaled = evaluate(index, opts);
    EXPECT_EQ(raw.mode, ScalingMode::Raw);
    EXPECT_EQ(scaled.mode, ScalingMode::MinMax);
    EXPECT_NE(raw.mean_precision, scaled.mean_precision);
}

TEST(Evaluate, UnlabeledRecordIsRejected) {
    const RetrievalIndex index({{0, "", "a", one_dim(0)}, {1, "b", "b", one_dim(1)}}, ScalingMode::Raw);
    EXPECT_THROW(evaluate(index, EvalOptions{}), UnlabeledRecord);
}

TEST(Ablation, ReportsAllFourFeatures) {
    std::mt19937 rng(6);
    const auto index = random_index(rng, 20, 2);
    EvalOptions opts;
    opts.k = 4;
    const auto ablation = evaluate_ablation(index, opts);
    for (auto f : {FeatureSelection::Histogram, FeatureSelection::Moments, FeatureSelection::Hu,
                   FeatureSelection::Fused}) {
        EXPECT_EQ(ablation[f].feature, f);
        opts.feature = f;
        EXPECT_EQ(ablation[f].mean_precision, evaluate(index, opts).mean_precision);
    }
}

// ---- reports --------------------------------------------------------------

TEST(Report, EmptyCsvIsHeaderOnly) {
    std::ostringstream out;
    write_report(EvalReport{}, ReportFormat::Csv, out);
    EXPECT_EQ(out.str(), "class,precision,recall\n");
}

TEST(Report, TwoClassCsv) {
    EvalReport report;
    report.k = 20;
    report.rows = {{"a", 100.0, 20.0, 1}, {"b", 50.0, 10.0, 1}};
    report.mean_precision = 75.0;
    report.mean_recall = 15.0;
    std::ostringstream out;
    write_report(report, ReportFormat::Csv, out);
    EXPECT_EQ(out.str(),
              "class,precision,recall\n"
              "a,100.0000,20.0000\n"
              "b,50.0000,10.0000\n"
              "mean,75.0000,15.0000\n");

    std::ostringstream again;
    write_report(report, ReportFormat::Csv, again);
    EXPECT_EQ(again.str(), out.str());
}

TEST(Report, MarkdownTable) {
    EvalReport report;
    report.k = 20;
    report.rows = {{"a", 100.0, 20.0, 1}};
    report.mean_precision = 100.0;
    report.mean_recall = 20.0;
    std::ostringstream out;
    write_report(report, ReportFormat::Markdown, out);
    EXPECT_NE(out.str().find("| class | precision | recall |"), std::string::npos);
    EXPECT_NE(out.str().find("| a | 100.00 | 20.00 |"), std::string::npos);
    EXPECT_NE(out.str().find("| **mean** | 100.00 | 20.00 |"), std::string::npos);
}

TEST(Report, FileDestinationAndIoError) {
    const auto path = (std::filesystem::temp_directory_path() / "cbir_report_test.csv").string();
    write_report(EvalReport{}, ReportFormat::Csv, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "class,precision,recall");
    std::filesystem::remove(path);
    EXPECT_THROW(write_report(EvalReport{}, ReportFormat::Csv, "/nonexistent/dir/report.csv"), IoError);
}

// ---- timing ---------------------------------------------------------------

TEST(Timing, SummaryStatistics) {
    const auto s = summarize_timings({5, 1, 4, 2, 3});
    EXPECT_EQ(s.count, 5u);
    EXPECT_DOUBLE_EQ(s.mean, 3.0);
    EXPECT_EQ(s.median, 3.0);
    EXPECT_EQ(s.p95, 5.0);

    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i);
    const auto h = summarize_timings(hundred);
    EXPECT_EQ(h.median, 50.5);
    EXPECT_EQ(h.p95, 95.0);
}

std::vector<EncodedImage> encoded(const std::vector<RgbImage>& images) {
    std::vector<EncodedImage> out;
    for (std::size_t i = 0; i < images.size(); ++i) out.push_back({"img" + std::to_string(i), encode_png(images[i])});
    return out;
}

TEST(Timing, CountsEverySample) {
    std::mt19937 rng(7);
    std::vector<RgbImage> images;
    for (int i = 0; i < 10; ++i) images.push_back(synth::random_noise(rng, 40, 30));
    const auto report = benchmark_extraction(encoded(images), 3);
    EXPECT_EQ(report.inclusive.count, 30u);
    EXPECT_EQ(report.exclusive.count, 30u);
    EXPECT_EQ(report.images, 10u);
    for (const auto* s : {&report.inclusive, &report.exclusive}) {
        EXPECT_GT(s->mean, 0.0);
        EXPECT_GT(s->median, 0.0);
        EXPECT_LE(s->median, s->p95);
    }
    EXPECT_GE(report.inclusive.mean, report.exclusive.mean);

    std::ostringstream out;
    write_timing(report, out);
    EXPECT_EQ(out.str().rfind("variant,mean,median,p95,count\ninclusive,", 0), 0u);
    EXPECT_NE(out.str().find("\nexclusive,"), std::string::npos);
}

TEST(Timing, CostIsDataIndependent) {
    std::mt19937 rng(8);
    const auto constant = benchmark_extraction(
        encoded({RgbImage(kCanonicalWidth, kCanonicalHeight, Rgb{90, 90, 90})}), 15);
    const auto photo = benchmark_extraction(
        encoded({synth::random_blobs(rng, kCanonicalWidth, kCanonicalHeight)}), 15);
    const double ratio = constant.exclusive.median / photo.exclusive.median;
    EXPECT_GT(ratio, 0.2);
    EXPECT_LT(ratio, 5.0);
}

TEST(Timing, RejectsEmptyInputs) {
    EXPECT_THROW(benchmark_extraction({}, 1), std::invalid_argument);
    std::vector<EncodedImage> one = encoded({RgbImage(4, 4, Rgb{})});
    EXPECT_THROW(benchmark_extraction(one, 0), std::invalid_argument);
}

}  // namespace
}  // namespace cbir
