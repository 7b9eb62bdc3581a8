#include "cbir/json.hpp"

namespace cbir {

using nlohmann::json;

json to_json(const SegmentDistances& segments) {
    return json{{"histogram", segments.histogram}, {"moments", segments.moments}, {"hu", segments.hu}};
}

json to_json(const RankedResult& result) {
    json entries = json::array();
    for (const auto& e : result.entries) {
        entries.push_back({{"id", e.id},
                           {"label", e.label},
                           {"path", e.path},
                           {"distance", e.distance},
                           {"segments", to_json(e.segments)}});
    }
    return json{{"k", result.k}, {"entries", std::move(entries)}};
}

json to_json(const EvalReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"class", row.name},
                        {"precision", row.precision},
                        {"recall", row.recall},
                        {"queries", row.queries}});
    }
    return json{{"k", report.k},
                {"feature", to_string(report.feature)},
                {"mode", to_string(report.mode)},
                {"include_self", report.include_self},
                {"queries", to_string(report.queries)},
                {"rows", std::move(rows)},
                {"mean_precision", report.mean_precision},
                {"mean_recall", report.mean_recall}};
}

json to_json(const AblationReport& report) {
    const auto& fused = report[FeatureSelection::Fused];
    json features = json::object();
    for (const auto& r : report.reports) features[std::string(to_string(r.feature))] = to_json(r);
    return json{{"k", fused.k},
                {"mode", to_string(fused.mode)},
                {"include_self", fused.include_self},
                {"queries", to_string(fused.queries)},
                {"features", std::move(features)}};
}

}  // namespace cbir
