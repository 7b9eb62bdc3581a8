#pragma once

#include "cbir/index.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cbir {

class UnlabeledRecord : public std::invalid_argument {
public:
    explicit UnlabeledRecord(ImageId id)
        : std::invalid_argument("record " + std::to_string(id) + " has no label") {}
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 100 * (relevant among the first min(k, n)) / k.
double precision_at_k(std::span<const std::string> ranked_labels, std::string_view query_label, std::size_t k);

/// 100 * (relevant among the first min(k, n)) / class_size.
double recall_at_k(std::span<const std::string> ranked_labels, std::string_view query_label, std::size_t k,
                   std::size_t class_size);

enum class QuerySet { All, OnePerClass };

std::string_view to_string(QuerySet queries);
std::optional<QuerySet> parse_query_set(std::string_view text);

struct EvalOptions {
    std::size_t k = 20;
    FeatureSelection feature = FeatureSelection::Fused;
    /// Scaling to rank under; defaults to the index's own mode.
    std::optional<ScalingMode> mode;
    /// The query itself is ranked first when included.
    bool include_self = true;
    QuerySet queries = QuerySet::All;
    unsigned workers = 1;
};

struct ClassRow {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t queries = 0;
};

struct EvalReport {
    std::size_t k = 0;
    FeatureSelection feature = FeatureSelection::Fused;
    ScalingMode mode = ScalingMode::MinMax;
    bool include_self = true;
    QuerySet queries = QuerySet::All;
    std::vector<ClassRow> rows;  // sorted by class name
    double mean_precision = 0.0;
    double mean_recall = 0.0;
};

/// Every selected record queries the index once; rows average per class and
/// means average over classes.
EvalReport evaluate(const RetrievalIndex& index, const EvalOptions& options);

/// Histogram-only, moments-only, Hu-only and fused reports under one setting.
struct AblationReport {
    std::array<EvalReport, 4> reports;

    const EvalReport& operator[](FeatureSelection f) const { return reports[static_cast<std::size_t>(f)]; }
};

AblationReport evaluate_ablation(const RetrievalIndex& index, EvalOptions options);

struct TimingStats {
    double mean = 0.0;
    double median = 0.0;
    double p95 = 0.0;
    std::size_t count = 0;
};

TimingStats summarize_timings(std::vector<double> seconds);

/// Inclusive covers decode + resize + extraction; exclusive covers extraction only.
struct TimingReport {
    TimingStats inclusive;
    TimingStats exclusive;
    std::size_t images = 0;
    std::size_t repeats = 0;
};

struct EncodedImage {
    std::string path;
    std::vector<std::uint8_t> bytes;
};

TimingReport benchmark_extraction(std::span<const EncodedImage> corpus, std::size_t repeats);

enum class ReportFormat { Csv, Markdown };

void write_report(const EvalReport& report, ReportFormat format, std::ostream& out);
void write_report(const EvalReport& report, ReportFormat format, const std::string& path);
void write_timing(const TimingReport& report, std::ostream& out);

}  // namespace cbir
