#pragma once

#include "cbir/eval.hpp"
#include "cbir/index.hpp"

#include <json.hpp>

namespace cbir {

nlohmann::json to_json(const SegmentDistances& segments);
nlohmann::json to_json(const RankedResult& result);
nlohmann::json to_json(const EvalReport& report);
/// Per-feature reports keyed hist / moments / hu / fused.
nlohmann::json to_json(const AblationReport& report);

}  // namespace cbir
