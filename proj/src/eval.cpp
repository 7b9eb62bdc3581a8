#include "cbir/eval.hpp"

#include "worker_pool.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

namespace cbir {

namespace {

std::size_t count_relevant(std::span<const std::string> ranked, std::string_view label, std::size_t k) {
    const std::size_t n = std::min(k, ranked.size());
    return static_cast<std::size_t>(std::count(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), label));
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

double precision_at_k(std::span<const std::string> ranked_labels, std::string_view query_label, std::size_t k) {
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    return 100.0 * static_cast<double>(count_relevant(ranked_labels, query_label, k)) / static_cast<double>(k);
}

double recall_at_k(std::span<const std::string> ranked_labels, std::string_view query_label, std::size_t k,
                   std::size_t class_size) {
    if (class_size == 0) throw std::invalid_argument("class size must be at least 1");
    return 100.0 * static_cast<double>(count_relevant(ranked_labels, query_label, k)) /
           static_cast<double>(class_size);
}

std::string_view to_string(QuerySet queries) {
    return queries == QuerySet::All ? "all" : "one-per-class";
}

std::optional<QuerySet> parse_query_set(std::string_view text) {
    if (text == "all") return QuerySet::All;
    if (text == "one-per-class") return QuerySet::OnePerClass;
    return std::nullopt;
}

EvalReport evaluate(const RetrievalIndex& index, const EvalOptions& options) {
    if (options.k == 0) throw std::invalid_argument("k must be at least 1");
    for (const auto& rec : index.records()) {
        if (rec.label.empty()) throw UnlabeledRecord(rec.id);
    }

    std::optional<RetrievalIndex> rescaled;
    if (options.mode && *options.mode != index.mode()) rescaled.emplace(index.with_mode(*options.mode));
    const RetrievalIndex& idx = rescaled ? *rescaled : index;

    std::map<std::string, std::size_t> class_sizes;
    for (const auto& rec : idx.records()) ++class_sizes[rec.label];

    std::vector<std::size_t> queries;
    if (options.queries == QuerySet::All) {
        queries.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) queries[i] = i;
    } else {
        std::map<std::string, std::size_t> first;
        for (std::size_t i = 0; i < idx.size(); ++i) first.try_emplace(idx.records()[i].label, i);
        for (const auto& [label, pos] : first) queries.push_back(pos);
    }

    struct Score {
        double precision;
        double recall;
    };
    std::vector<Score> scores(queries.size());
    detail::parallel_for(queries.size(), options.workers, [&](std::size_t qi) {
        const auto& rec = idx.records()[queries[qi]];
        std::vector<std::string> ranked;
        ranked.reserve(options.k);
        std::size_t depth = options.k;
        if (options.include_self) {
            ranked.push_back(rec.label);
            --depth;
        }
        if (depth > 0) {
            const auto result = search_topk(idx, rec.descriptor, depth, rec.id, options.feature);
            for (const auto& e : result.entries) ranked.push_back(e.label);
        }
        std::size_t relevant_total = class_sizes.at(rec.label);
        if (!options.include_self) relevant_total = std::max<std::size_t>(1, relevant_total - 1);
        scores[qi] = {precision_at_k(ranked, rec.label, options.k),
                      recall_at_k(ranked, rec.label, options.k, relevant_total)};
    });

    std::map<std::string, ClassRow> rows;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto& label = idx.records()[queries[qi]].label;
        auto& row = rows[label];
        row.name = label;
        row.precision += scores[qi].precision;
        row.recall += scores[qi].recall;
        ++row.queries;
    }

    EvalReport report;
    report.k = options.k;
    report.feature = options.feature;
    report.mode = idx.mode();
    report.include_self = options.include_self;
    report.queries = options.queries;
    for (auto& [label, row] : rows) {
        row.precision /= static_cast<double>(row.queries);
        row.recall /= static_cast<double>(row.queries);
        report.mean_precision += row.precision;
        report.mean_recall += row.recall;
        report.rows.push_back(row);
    }
    if (!report.rows.empty()) {
        report.mean_precision /= static_cast<double>(report.rows.size());
        report.mean_recall /= static_cast<double>(report.rows.size());
    }
    return report;
}

AblationReport evaluate_ablation(const RetrievalIndex& index, EvalOptions options) {
    std::optional<RetrievalIndex> rescaled;
    if (options.mode && *options.mode != index.mode()) rescaled.emplace(index.with_mode(*options.mode));
    const RetrievalIndex& idx = rescaled ? *rescaled : index;
    options.mode.reset();

    AblationReport out;
    for (auto f : {FeatureSelection::Histogram, FeatureSelection::Moments, FeatureSelection::Hu,
                   FeatureSelection::Fused}) {
        options.feature = f;
        out.reports[static_cast<std::size_t>(f)] = evaluate(idx, options);
    }
    return out;
}

TimingStats summarize_timings(std::vector<double> seconds) {
    TimingStats stats;
    stats.count = seconds.size();
    if (seconds.empty()) return stats;
    std::sort(seconds.begin(), seconds.end());
    double sum = 0.0;
    for (double s : seconds) sum += s;
    stats.mean = sum / static_cast<double>(seconds.size());
    const std::size_t n = seconds.size();
    stats.median = n % 2 ? seconds[n / 2] : 0.5 * (seconds[n / 2 - 1] + seconds[n / 2]);
    // Nearest-rank percentile.
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    stats.p95 = seconds[std::max<std::size_t>(rank, 1) - 1];
    return stats;
}

TimingReport benchmark_extraction(std::span<const EncodedImage> corpus, std::size_t repeats) {
    if (corpus.empty()) throw std::invalid_argument("benchmark corpus is empty");
    if (repeats == 0) throw std::invalid_argument("repeats must be at least 1");

    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::duration d) { return std::chrono::duration<double>(d).count(); };

    std::vector<double> inclusive;
    std::vector<double> exclusive;
    inclusive.reserve(corpus.size() * repeats);
    exclusive.reserve(corpus.size() * repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        for (const auto& item : corpus) {
            const auto t0 = clock::now();
            const RgbImage canonical = resize_canonical(decode_image(item.bytes));
            const auto t1 = clock::now();
            const Descriptor d = extract_features(canonical);
            const auto t2 = clock::now();
            // Keeps the extraction observable.
            if (d.size() != kDescriptorSize) throw std::logic_error("bad descriptor");
            inclusive.push_back(seconds(t2 - t0));
            exclusive.push_back(seconds(t2 - t1));
        }
    }

    TimingReport report;
    report.inclusive = summarize_timings(std::move(inclusive));
    report.exclusive = summarize_timings(std::move(exclusive));
    report.images = corpus.size();
    report.repeats = repeats;
    return report;
}

void write_report(const EvalReport& report, ReportFormat format, std::ostream& out) {
    if (format == ReportFormat::Csv) {
        out << "class,precision,recall\n";
        for (const auto& row : report.rows) {
            out << row.name << ',' << fixed(row.precision) << ',' << fixed(row.recall) << '\n';
        }
        if (!report.rows.empty()) {
            out << "mean," << fixed(report.mean_precision) << ',' << fixed(report.mean_recall) << '\n';
        }
    } else {
        out << "Feature: " << to_string(report.feature) << ", k = " << report.k
            << ", scaling: " << to_string(report.mode) << ", self-match: "
            << (report.include_self ? "included" : "excluded") << ", queries: " << to_string(report.queries)
            << "\n\n";
        out << "| class | precision | recall |\n|---|---:|---:|\n";
        for (const auto& row : report.rows) {
            out << "| " << row.name << " | " << fixed(row.precision, 2) << " | " << fixed(row.recall, 2) << " |\n";
        }
        if (!report.rows.empty()) {
            out << "| **mean** | " << fixed(report.mean_precision, 2) << " | " << fixed(report.mean_recall, 2)
                << " |\n";
        }
    }
    if (!out) throw IoError("failed writing report");
}

void write_report(const EvalReport& report, ReportFormat format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_report(report, format, out);
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

void write_timing(const TimingReport& report, std::ostream& out) {
    out << "variant,mean,median,p95,count\n";
    auto row = [&](const char* name, const TimingStats& s) {
        out << name << ',' << fixed(s.mean, 6) << ',' << fixed(s.median, 6) << ',' << fixed(s.p95, 6) << ','
            << s.count << '\n';
    };
    row("inclusive", report.inclusive);
    row("exclusive", report.exclusive);
}

}  // namespace cbir
