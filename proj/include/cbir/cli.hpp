#pragma once

#include "cbir/index.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cbir {

/// FOLDERS: label = immediate parent directory name.
/// COREL: flat numbered files, label = floor(number / 100), id = number.
enum class LabelRule { Folders, Corel };

std::optional<LabelRule> parse_label_rule(std::string_view text);

struct DiscoveredImage {
    ImageId id = 0;
    std::string label;
    std::string relative_path;  // relative to the corpus root, '/'-separated
    std::string full_path;
};

struct CorpusListing {
    std::vector<DiscoveredImage> images;  // sorted by relative path
    std::vector<std::string> rejected;    // files the labeling rule cannot label
};

/// Recursively finds .png/.jpg/.jpeg files under root.
CorpusListing discover_corpus(const std::string& root, LabelRule rule);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int data_format = 2;
inline constexpr int usage = 64;
}  // namespace exit_code

/// Entry point for the `cbir` tool: index, query, eval, bench, serve, describe.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cbir
