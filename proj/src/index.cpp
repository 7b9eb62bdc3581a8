#include "cbir/index.hpp"

#include "worker_pool.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace cbir {

namespace {

constexpr std::string_view kMagic = "CBIRIDX";
constexpr int kFormatVersion = 1;

bool valid_field(std::string_view s) {
    return s.find_first_of("\t\r\n") == std::string_view::npos;
}

void write_values(std::ostream& out, std::span<const double> values) {
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ',';
        const int n = std::snprintf(buf, sizeof buf, "%.9g", values[i]);
        out.write(buf, n);
    }
}

Descriptor parse_values(std::string_view text, std::size_t line) {
    Descriptor out;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = text.find(',', pos);
        const std::string_view token = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
        if (count == kDescriptorSize) {
            throw FormatError(line, "expected " + std::to_string(kDescriptorSize) + " values, found more");
        }
        double v = 0.0;
        const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (token.empty() || ec != std::errc{} || end != token.data() + token.size() || !std::isfinite(v)) {
            throw FormatError(line, "bad number '" + std::string(token) + "'");
        }
        out[count++] = v;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    if (count != kDescriptorSize) {
        throw FormatError(line, "expected " + std::to_string(kDescriptorSize) + " values, found " +
                                    std::to_string(count));
    }
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            parts.push_back(s.substr(pos));
            return parts;
        }
        parts.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

}  // namespace

std::string_view to_string(ScalingMode mode) {
    return mode == ScalingMode::Raw ? "RAW" : "MINMAX";
}

std::optional<ScalingMode> parse_scaling_mode(std::string_view text) {
    if (text == "RAW" || text == "raw") return ScalingMode::Raw;
    if (text == "MINMAX" || text == "minmax") return ScalingMode::MinMax;
    return std::nullopt;
}

std::string_view to_string(FeatureSelection feature) {
    switch (feature) {
        case FeatureSelection::Histogram: return "hist";
        case FeatureSelection::Moments: return "moments";
        case FeatureSelection::Hu: return "hu";
        case FeatureSelection::Fused: return "fused";
    }
    return "fused";
}

std::optional<FeatureSelection> parse_feature(std::string_view text) {
    if (text == "hist") return FeatureSelection::Histogram;
    if (text == "moments") return FeatureSelection::Moments;
    if (text == "hu") return FeatureSelection::Hu;
    if (text == "fused") return FeatureSelection::Fused;
    return std::nullopt;
}

NormalizationStats NormalizationStats::compute(std::span<const IndexRecord> records) {
    if (records.empty()) throw EmptyCorpus();
    NormalizationStats stats{records.front().descriptor, records.front().descriptor};
    for (const auto& rec : records.subspan(1)) {
        for (std::size_t d = 0; d < kDescriptorSize; ++d) {
            stats.min[d] = std::min(stats.min[d], rec.descriptor[d]);
            stats.max[d] = std::max(stats.max[d], rec.descriptor[d]);
        }
    }
    return stats;
}

Descriptor normalize(const Descriptor& desc, const NormalizationStats& stats) {
    Descriptor out;
    for (std::size_t d = 0; d < kDescriptorSize; ++d) {
        const double range = stats.max[d] - stats.min[d];
        out[d] = range > 0.0 ? (desc[d] - stats.min[d]) / range : 0.0;
    }
    return out;
}

double manhattan(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::fabs(a[i] - b[i]);
    return sum;
}

RetrievalIndex::RetrievalIndex(std::vector<IndexRecord> records, ScalingMode mode)
    : records_(std::move(records)), mode_(mode) {
    if (records_.empty()) throw EmptyCorpus();
    std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].id < 0) throw std::invalid_argument("image ids must be non-negative");
        if (i > 0 && records_[i].id == records_[i - 1].id) throw DuplicateId(records_[i].id);
        if (!valid_field(records_[i].label) || !valid_field(records_[i].path)) {
            throw std::invalid_argument("label and path may not contain tabs or line breaks (id " +
                                        std::to_string(records_[i].id) + ")");
        }
    }
    stats_ = NormalizationStats::compute(records_);
    search_space_.reserve(records_.size());
    for (const auto& rec : records_) search_space_.push_back(prepare_query(rec.descriptor));
}

Descriptor RetrievalIndex::prepare_query(const Descriptor& raw) const {
    return mode_ == ScalingMode::MinMax ? normalize(raw, stats_) : raw;
}

std::optional<std::size_t> RetrievalIndex::position(ImageId id) const {
    const auto it = std::lower_bound(records_.begin(), records_.end(), id,
                                     [](const IndexRecord& r, ImageId v) { return r.id < v; });
    if (it == records_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - records_.begin());
}

const IndexRecord* RetrievalIndex::find(ImageId id) const {
    const auto pos = position(id);
    return pos ? &records_[*pos] : nullptr;
}

RetrievalIndex RetrievalIndex::with_mode(ScalingMode mode) const {
    return RetrievalIndex(records_, mode);
}

RetrievalIndex build_index(std::span<const CorpusImage> corpus, ScalingMode mode, unsigned workers) {
    if (corpus.empty()) throw EmptyCorpus();
    std::unordered_set<ImageId> seen;
    for (const auto& item : corpus) {
        if (!seen.insert(item.id).second) throw DuplicateId(item.id);
    }

    std::vector<IndexRecord> records(corpus.size());
    detail::parallel_for(corpus.size(), workers, [&](std::size_t i) {
        const auto& item = corpus[i];
        records[i] = IndexRecord{item.id, item.label, item.path, extract_descriptor(item.image)};
    });
    return RetrievalIndex(std::move(records), mode);
}

SegmentDistances segment_distances(const Descriptor& a, const Descriptor& b, FeatureSelection feature) {
    auto seg = [&](Segment s) { return manhattan(a.segment(s), b.segment(s)); };
    SegmentDistances out;
    if (feature == FeatureSelection::Fused || feature == FeatureSelection::Histogram) {
        out.histogram = seg(Segment::Histogram);
    }
    if (feature == FeatureSelection::Fused || feature == FeatureSelection::Moments) {
        out.moments = seg(Segment::Moments);
    }
    if (feature == FeatureSelection::Fused || feature == FeatureSelection::Hu) {
        out.hu = seg(Segment::Hu);
    }
    return out;
}

RankedResult search_topk(const RetrievalIndex& index, const Descriptor& query, std::size_t k,
                         std::optional<ImageId> exclude_id, FeatureSelection feature) {
    if (index.size() == 0) throw EmptyIndex();
    if (k == 0) throw std::invalid_argument("k must be at least 1");

    const Descriptor q = index.prepare_query(query);
    struct Scored {
        std::size_t pos;
        SegmentDistances seg;
        double total;
    };
    std::vector<Scored> scored;
    scored.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (exclude_id && index.records()[i].id == *exclude_id) continue;
        const Descriptor& v = index.search_vector(i);
        const auto seg = segment_distances(q, v, feature);
        // One pass over the whole vector so ranking follows the plain L1 sum.
        scored.push_back({i, seg, feature == FeatureSelection::Fused ? manhattan(q.values(), v.values()) : seg.total()});
    }

    const std::size_t n = std::min(k, scored.size());
    // Records are stored by ascending id, so position order is id order.
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [](const Scored& a, const Scored& b) {
                          return a.total != b.total ? a.total < b.total : a.pos < b.pos;
                      });

    RankedResult result;
    result.k = k;
    result.entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = index.records()[scored[i].pos];
        result.entries.push_back({rec.id, rec.label, rec.path, scored[i].total, scored[i].seg});
    }
    return result;
}

void save_index(const RetrievalIndex& index, std::ostream& out) {
    out << kMagic << ' ' << kFormatVersion << ' ' << kDescriptorSize << ' ' << to_string(index.mode()) << '\n';
    out << "MIN ";
    write_values(out, index.stats().min.values());
    out << "\nMAX ";
    write_values(out, index.stats().max.values());
    out << '\n';
    for (const auto& rec : index.records()) {
        out << rec.id << '\t' << rec.label << '\t' << rec.path << '\t';
        write_values(out, rec.descriptor.values());
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing index");
}

void save_index(const RetrievalIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_index(index, out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path);
}

RetrievalIndex load_index(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next_line()) throw FormatError(1, "missing header");
    std::istringstream header(line);
    std::string magic, mode_text, extra;
    int version = 0;
    std::size_t dims = 0;
    if (!(header >> magic) || magic != kMagic) throw FormatError(1, "not an index file");
    if (!(header >> version)) throw FormatError(1, "missing version");
    if (version != kFormatVersion) {
        throw VersionError("unsupported index version " + std::to_string(version));
    }
    if (!(header >> dims >> mode_text) || (header >> extra)) throw FormatError(1, "malformed header");
    if (dims != kDescriptorSize) throw FormatError(1, "unsupported dimension " + std::to_string(dims));
    const auto mode = parse_scaling_mode(mode_text);
    if (!mode || (mode_text != "RAW" && mode_text != "MINMAX")) {
        throw FormatError(1, "unknown mode '" + mode_text + "'");
    }

    NormalizationStats stored;
    for (const char* tag : {"MIN ", "MAX "}) {
        if (!next_line()) throw FormatError(lineno + 1, std::string("missing ") + tag + "line");
        if (line.rfind(tag, 0) != 0) throw FormatError(lineno, std::string("expected ") + tag + "line");
        (tag[1] == 'I' ? stored.min : stored.max) = parse_values(std::string_view(line).substr(4), lineno);
    }

    std::vector<IndexRecord> records;
    std::unordered_set<ImageId> seen;
    while (next_line()) {
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 4) {
            throw FormatError(lineno, "expected 4 tab-separated fields, found " + std::to_string(fields.size()));
        }
        ImageId id = -1;
        const auto [end, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
        if (ec != std::errc{} || end != fields[0].data() + fields[0].size() || id < 0) {
            throw FormatError(lineno, "bad id '" + std::string(fields[0]) + "'");
        }
        if (!seen.insert(id).second) throw FormatError(lineno, "duplicate id " + std::to_string(id));
        records.push_back({id, std::string(fields[1]), std::string(fields[2]), parse_values(fields[3], lineno)});
    }
    if (records.empty()) throw FormatError(lineno + 1, "index has no records");

    RetrievalIndex index(std::move(records), *mode);
    if (index.stats().min != stored.min) throw FormatError(2, "MIN line does not match records");
    if (index.stats().max != stored.max) throw FormatError(3, "MAX line does not match records");
    return index;
}

RetrievalIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_index(in);
}

}  // namespace cbir
