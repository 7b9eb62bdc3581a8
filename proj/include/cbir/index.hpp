#pragma once

#include "cbir/descriptors.hpp"
#include "cbir/imaging.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cbir {

using ImageId = std::int64_t;

enum class ScalingMode { Raw, MinMax };

std::string_view to_string(ScalingMode mode);
std::optional<ScalingMode> parse_scaling_mode(std::string_view text);

/// Which part of the descriptor takes part in a distance.
enum class FeatureSelection { Histogram, Moments, Hu, Fused };

std::string_view to_string(FeatureSelection feature);
std::optional<FeatureSelection> parse_feature(std::string_view text);

class DuplicateId : public std::invalid_argument {
public:
    explicit DuplicateId(ImageId id) : std::invalid_argument("duplicate image id " + std::to_string(id)), id_(id) {}
    ImageId id() const { return id_; }

private:
    ImageId id_;
};

class EmptyCorpus : public std::invalid_argument {
public:
    EmptyCorpus() : std::invalid_argument("corpus is empty") {}
};

class EmptyIndex : public std::invalid_argument {
public:
    EmptyIndex() : std::invalid_argument("index is empty") {}
};

class LengthMismatch : public std::invalid_argument {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : std::invalid_argument("vector lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

/// Malformed index file. line() is 1-based.
class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IndexRecord {
    ImageId id = 0;
    std::string label;
    std::string path;
    Descriptor descriptor;
};

/// Per-dimension extremes over an indexed corpus.
struct NormalizationStats {
    Descriptor min;
    Descriptor max;

    static NormalizationStats compute(std::span<const IndexRecord> records);
    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

/// Linear per-dimension map to [0, 1] over the indexed range. Constant
/// dimensions map to 0; values outside the range are not clamped.
Descriptor normalize(const Descriptor& desc, const NormalizationStats& stats);

/// L1 distance. Throws LengthMismatch.
double manhattan(std::span<const double> a, std::span<const double> b);

/// Immutable set of records ordered by ascending id.
class RetrievalIndex {
public:
    /// Throws EmptyCorpus or DuplicateId.
    RetrievalIndex(std::vector<IndexRecord> records, ScalingMode mode);

    std::span<const IndexRecord> records() const { return records_; }
    const NormalizationStats& stats() const { return stats_; }
    ScalingMode mode() const { return mode_; }
    std::size_t size() const { return records_.size(); }

    /// Descriptor of record i in the space distances are taken in.
    const Descriptor& search_vector(std::size_t i) const { return search_space_[i]; }
    /// Maps a raw query into the same space.
    Descriptor prepare_query(const Descriptor& raw) const;

    const IndexRecord* find(ImageId id) const;
    std::optional<std::size_t> position(ImageId id) const;

    RetrievalIndex with_mode(ScalingMode mode) const;

private:
    std::vector<IndexRecord> records_;
    NormalizationStats stats_;
    ScalingMode mode_;
    std::vector<Descriptor> search_space_;
};

struct CorpusImage {
    ImageId id = 0;
    std::string label;
    std::string path;
    RgbImage image;
};

/// Extracts one descriptor per image. workers = 0 uses hardware concurrency.
RetrievalIndex build_index(std::span<const CorpusImage> corpus, ScalingMode mode, unsigned workers = 0);

struct SegmentDistances {
    double histogram = 0.0;
    double moments = 0.0;
    double hu = 0.0;

    double total() const { return histogram + moments + hu; }
};

/// Per-segment L1 distances restricted to the selected feature; unselected
/// segments are reported as 0.
SegmentDistances segment_distances(const Descriptor& a, const Descriptor& b,
                                   FeatureSelection feature = FeatureSelection::Fused);

struct RankedEntry {
    ImageId id = 0;
    std::string label;
    std::string path;
    double distance = 0.0;
    SegmentDistances segments;
};

struct RankedResult {
    std::size_t k = 0;
    std::vector<RankedEntry> entries;
};

/// Exhaustive L1 ranking, ascending distance then ascending id.
RankedResult search_topk(const RetrievalIndex& index, const Descriptor& query, std::size_t k,
                         std::optional<ImageId> exclude_id = std::nullopt,
                         FeatureSelection feature = FeatureSelection::Fused);

void save_index(const RetrievalIndex& index, std::ostream& out);
void save_index(const RetrievalIndex& index, const std::string& path);
RetrievalIndex load_index(std::istream& in);
RetrievalIndex load_index(const std::string& path);

}  // namespace cbir
