#include "cbir/cli.hpp"

#include "cbir/eval.hpp"
#include "cbir/json.hpp"
#include "cbir/service.hpp"
#include "worker_pool.hpp"

#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace cbir {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::optional<ImageId> parse_id(const std::string& text) {
    ImageId v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size() || v < 0) return std::nullopt;
    return v;
}

unsigned worker_count(unsigned flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("CBIR_WORKERS")) {
        const auto v = parse_id(env);
        if (v && *v > 0) return static_cast<unsigned>(*v);
    }
    return detail::resolve_workers(0);
}

std::string format_values(std::span<const double> values) {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out.append(buf, static_cast<std::size_t>(std::snprintf(buf, sizeof buf, "%.9g", values[i])));
    }
    return out;
}

// Component-wise suffix test: "3/300.jpg" matches "/data/corel/3/300.jpg".
bool path_suffix_matches(const fs::path& stored, const fs::path& query) {
    std::vector<fs::path> a(stored.begin(), stored.end());
    std::vector<fs::path> b(query.begin(), query.end());
    if (a.empty() || a.size() > b.size()) return false;
    return std::equal(a.rbegin(), a.rend(), b.rbegin());
}

struct LoadedIndex {
    std::optional<RetrievalIndex> index;
    int code = exit_code::ok;
};

LoadedIndex open_index(const std::string& path, std::ostream& err) {
    if (!fs::is_regular_file(path)) {
        err << "error: index file not found: " << path << '\n';
        return {std::nullopt, exit_code::failure};
    }
    try {
        return {load_index(path), exit_code::ok};
    } catch (const FormatError& e) {
        err << "error: " << path << ": " << e.what() << '\n';
    } catch (const VersionError& e) {
        err << "error: " << path << ": " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return {std::nullopt, exit_code::failure};
    }
    return {std::nullopt, exit_code::data_format};
}

struct IndexArgs {
    std::string data;
    std::string out;
    std::string layout = "folders";
    std::string mode = "minmax";
    unsigned workers = 0;
};

int cmd_index(const IndexArgs& args, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(args.data)) {
        err << "error: data directory not found: " << args.data << '\n';
        return exit_code::failure;
    }
    const CorpusListing listing = discover_corpus(args.data, *parse_label_rule(args.layout));
    for (const auto& path : listing.rejected) err << "warning: cannot label " << path << ", skipped\n";
    if (listing.images.empty()) {
        err << "error: no images found in " << args.data << '\n';
        return exit_code::failure;
    }

    struct Slot {
        std::optional<IndexRecord> record;
        std::string failure;
        double seconds = 0.0;
    };
    std::vector<Slot> slots(listing.images.size());
    detail::parallel_for(listing.images.size(), worker_count(args.workers), [&](std::size_t i) {
        const auto& img = listing.images[i];
        try {
            const RgbImage decoded = read_image(img.full_path);
            const auto t0 = std::chrono::steady_clock::now();
            Descriptor d = extract_descriptor(decoded);
            slots[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            slots[i].record = IndexRecord{img.id, img.label, img.relative_path, d};
        } catch (const std::exception& e) {
            slots[i].failure = e.what();
        }
    });

    std::vector<IndexRecord> records;
    std::size_t skipped = 0;
    double total_seconds = 0.0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].record) {
            records.push_back(std::move(*slots[i].record));
            total_seconds += slots[i].seconds;
        } else {
            ++skipped;
            err << "warning: skipping " << listing.images[i].full_path << ": " << slots[i].failure << '\n';
        }
    }
    if (records.empty()) {
        err << "error: no images found that could be decoded\n";
        return exit_code::failure;
    }

    try {
        const RetrievalIndex index(std::move(records), *parse_scaling_mode(args.mode));
        save_index(index, args.out);
        out << "indexed " << index.size() << " images";
        if (skipped) out << " (" << skipped << " skipped)";
        out << "\nmean extraction time: " << std::fixed << std::setprecision(4)
            << total_seconds / static_cast<double>(index.size()) << " s/image\n";
        out << "wrote " << args.out << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    return exit_code::ok;
}

struct QueryArgs {
    std::string index;
    std::string image;
    std::size_t top = 20;
    std::string format = "table";
    bool exclude_self = false;
};

int cmd_query(const QueryArgs& args, std::ostream& out, std::ostream& err) {
    auto loaded = open_index(args.index, err);
    if (!loaded.index) return loaded.code;
    const RetrievalIndex& index = *loaded.index;

    if (!fs::is_regular_file(args.image)) {
        err << "error: image not found: " << args.image << '\n';
        return exit_code::failure;
    }
    Descriptor query;
    try {
        query = extract_descriptor(read_image(args.image));
    } catch (const DecodeError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::data_format;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }

    std::optional<ImageId> exclude;
    if (args.exclude_self) {
        const fs::path query_path = fs::weakly_canonical(args.image);
        for (const auto& rec : index.records()) {
            if (path_suffix_matches(fs::path(rec.path), query_path)) {
                exclude = rec.id;
                break;
            }
        }
    }

    const RankedResult result = search_topk(index, query, args.top, exclude);
    if (args.format == "json") {
        out << to_json(result).dump(2) << '\n';
        return exit_code::ok;
    }
    out << std::left << std::setw(5) << "rank" << std::setw(8) << "id" << std::setw(14) << "label" << std::right
        << std::setw(12) << "distance" << std::setw(12) << "histogram" << std::setw(12) << "moments"
        << std::setw(12) << "hu" << "  path\n";
    out << std::fixed << std::setprecision(6);
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const auto& e = result.entries[i];
        out << std::left << std::setw(5) << i + 1 << std::setw(8) << e.id << std::setw(14) << e.label
            << std::right << std::setw(12) << e.distance << std::setw(12) << e.segments.histogram << std::setw(12)
            << e.segments.moments << std::setw(12) << e.segments.hu << "  " << e.path << '\n';
    }
    return exit_code::ok;
}

struct EvalArgs {
    std::string index;
    std::size_t top = 20;
    std::string feature = "fused";
    std::string out;
    std::string queries = "all";
    std::string mode;
    std::string format = "csv";
    bool exclude_self = false;
    unsigned workers = 0;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    auto loaded = open_index(args.index, err);
    if (!loaded.index) return loaded.code;

    EvalOptions options;
    options.k = args.top;
    options.feature = *parse_feature(args.feature);
    options.queries = *parse_query_set(args.queries);
    options.include_self = !args.exclude_self;
    options.workers = worker_count(args.workers);
    if (!args.mode.empty()) options.mode = parse_scaling_mode(args.mode);
    const ReportFormat format = args.format == "markdown" ? ReportFormat::Markdown : ReportFormat::Csv;

    try {
        const EvalReport report = evaluate(*loaded.index, options);
        if (args.out.empty()) {
            write_report(report, format, out);
        } else {
            write_report(report, format, args.out);
        }
        out << std::fixed << std::setprecision(2) << "mean precision@" << report.k << ": " << report.mean_precision
            << "\nmean recall@" << report.k << ": " << report.mean_recall << '\n';
    } catch (const UnlabeledRecord& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::data_format;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    return exit_code::ok;
}

struct BenchArgs {
    std::string data;
    std::size_t repeat = 1;
};

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(args.data)) {
        err << "error: data directory not found: " << args.data << '\n';
        return exit_code::failure;
    }
    std::vector<EncodedImage> corpus;
    for (const auto& img : discover_corpus(args.data, LabelRule::Folders).images) {
        std::ifstream in(img.full_path, std::ios::binary);
        EncodedImage item{img.full_path, {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}};
        try {
            decode_image(item.bytes);
        } catch (const std::exception& e) {
            err << "warning: skipping " << img.full_path << ": " << e.what() << '\n';
            continue;
        }
        corpus.push_back(std::move(item));
    }
    if (corpus.empty()) {
        err << "error: no images found in " << args.data << '\n';
        return exit_code::failure;
    }
    write_timing(benchmark_extraction(corpus, args.repeat), out);
    return exit_code::ok;
}

struct ServeArgs {
    std::string index;
    std::string images = ".";
    std::string static_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    unsigned workers = 0;
};

int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err) {
    auto loaded = open_index(args.index, err);
    if (!loaded.index) return loaded.code;

    ServiceConfig config;
    config.images_dir = args.images;
    config.static_dir = args.static_dir;
    config.eval_workers = worker_count(args.workers);

    // Signals are taken synchronously by a watcher thread; every other thread
    // (including the server pool) inherits the blocked mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGUSR1);
    sigset_t previous;
    pthread_sigmask(SIG_BLOCK, &signals, &previous);

    int code = exit_code::ok;
    {
        Service service(std::move(*loaded.index), config);
        const int port = service.bind(args.host, args.port);
        if (port < 0) {
            err << "error: cannot bind " << args.host << ':' << args.port << '\n';
            pthread_sigmask(SIG_SETMASK, &previous, nullptr);
            return exit_code::failure;
        }
        out << "listening on http://" << args.host << ':' << port << std::endl;

        std::thread watcher([&] {
            int sig = 0;
            sigwait(&signals, &sig);
            service.stop();
        });
        if (!service.run()) code = exit_code::failure;
        pthread_kill(watcher.native_handle(), SIGUSR1);
        watcher.join();
    }
    // Drain anything still pending before unblocking.
    timespec zero{0, 0};
    while (sigtimedwait(&signals, nullptr, &zero) > 0) {
    }
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    out << "stopped" << std::endl;
    return code;
}

int cmd_describe(const std::string& image, std::ostream& out, std::ostream& err) {
    try {
        out << format_values(extract_descriptor(read_image(image)).values()) << '\n';
    } catch (const DecodeError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::data_format;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    return exit_code::ok;
}

}  // namespace

std::optional<LabelRule> parse_label_rule(std::string_view text) {
    if (text == "folders") return LabelRule::Folders;
    if (text == "corel") return LabelRule::Corel;
    return std::nullopt;
}

CorpusListing discover_corpus(const std::string& root, LabelRule rule) {
    CorpusListing listing;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::vector<std::pair<std::string, fs::path>> sorted;
    sorted.reserve(files.size());
    for (const auto& f : files) sorted.emplace_back(fs::relative(f, root).generic_string(), f);
    std::sort(sorted.begin(), sorted.end());

    const std::string root_name = fs::weakly_canonical(root).filename().string();
    ImageId next_id = 0;
    for (const auto& [rel, full] : sorted) {
        DiscoveredImage img;
        img.relative_path = rel;
        img.full_path = full.string();
        if (rule == LabelRule::Folders) {
            const fs::path parent = fs::path(rel).parent_path();
            img.label = parent.empty() ? root_name : parent.filename().string();
            img.id = next_id++;
        } else {
            const auto number = parse_id(full.stem().string());
            if (!number) {
                listing.rejected.push_back(img.full_path);
                continue;
            }
            img.id = *number;
            img.label = std::to_string(*number / 100);
        }
        listing.images.push_back(std::move(img));
    }
    if (rule == LabelRule::Corel) {
        // Duplicate numbers (e.g. 12.jpg and 12.png) keep the first in sorted order.
        std::vector<DiscoveredImage> unique;
        std::unordered_set<ImageId> seen;
        for (auto& img : listing.images) {
            if (seen.insert(img.id).second) {
                unique.push_back(std::move(img));
            } else {
                listing.rejected.push_back(img.full_path);
            }
        }
        listing.images = std::move(unique);
    }
    return listing;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Content-based image retrieval: color histogram, color moments and Hu moments", "cbir"};
    app.require_subcommand(1);

    IndexArgs index_args;
    auto* index_cmd = app.add_subcommand("index", "Extract descriptors for a labeled corpus and write an index");
    index_cmd->add_option("--data", index_args.data, "Corpus root directory")->required();
    index_cmd->add_option("--out", index_args.out, "Index file to write")->required();
    index_cmd->add_option("--layout", index_args.layout, "Labeling rule")
        ->check(CLI::IsMember({"folders", "corel"}));
    index_cmd->add_option("--mode", index_args.mode, "Feature scaling")->check(CLI::IsMember({"raw", "minmax"}));
    index_cmd->add_option("--workers", index_args.workers, "Extraction threads (default: CBIR_WORKERS or cores)");

    QueryArgs query_args;
    auto* query_cmd = app.add_subcommand("query", "Rank indexed images against a query image");
    query_cmd->add_option("--index", query_args.index, "Index file")->required();
    query_cmd->add_option("--image", query_args.image, "Query image")->required();
    query_cmd->add_option("--top", query_args.top, "Number of results")->check(CLI::PositiveNumber);
    query_cmd->add_option("--format", query_args.format, "Output format")->check(CLI::IsMember({"table", "json"}));
    query_cmd->add_flag("--exclude-self", query_args.exclude_self, "Drop the indexed copy of the query image");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Precision/recall at k with every indexed image as a query");
    eval_cmd->add_option("--index", eval_args.index, "Index file")->required();
    eval_cmd->add_option("--top", eval_args.top, "Retrieval depth k")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--feature", eval_args.feature, "Descriptor segment(s) to rank by")
        ->check(CLI::IsMember({"hist", "moments", "hu", "fused"}));
    eval_cmd->add_option("--out", eval_args.out, "Report file (default: stdout)");
    eval_cmd->add_option("--queries", eval_args.queries, "Query sampling")
        ->check(CLI::IsMember({"all", "one-per-class"}));
    eval_cmd->add_option("--mode", eval_args.mode, "Override the index scaling mode")
        ->check(CLI::IsMember({"raw", "minmax"}));
    eval_cmd->add_option("--format", eval_args.format, "Report format")->check(CLI::IsMember({"csv", "markdown"}));
    eval_cmd->add_flag("--exclude-self", eval_args.exclude_self, "Do not count the query as its own match");
    eval_cmd->add_option("--workers", eval_args.workers, "Query threads");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Time feature extraction per image");
    bench_cmd->add_option("--data", bench_args.data, "Directory of images")->required();
    bench_cmd->add_option("--repeat", bench_args.repeat, "Passes over the corpus")->check(CLI::PositiveNumber);

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API over an index");
    serve_cmd->add_option("--index", serve_args.index, "Index file")->required();
    serve_cmd->add_option("--images", serve_args.images, "Root that record paths resolve against");
    serve_cmd->add_option("--port", serve_args.port, "Listen port (0 picks a free port)")
        ->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", serve_args.host, "Listen address");
    serve_cmd->add_option("--static", serve_args.static_dir, "Directory of UI assets served at /");
    serve_cmd->add_option("--workers", serve_args.workers, "Evaluation threads");

    std::string describe_image;
    auto* describe_cmd = app.add_subcommand("describe", "Print the 141-value descriptor of an image");
    describe_cmd->add_option("--image", describe_image, "Image file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_code::ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_code::ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_code::usage;
    }

    if (index_cmd->parsed()) return cmd_index(index_args, out, err);
    if (query_cmd->parsed()) return cmd_query(query_args, out, err);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, out, err);
    if (bench_cmd->parsed()) return cmd_bench(bench_args, out, err);
    if (serve_cmd->parsed()) return cmd_serve(serve_args, out, err);
    if (describe_cmd->parsed()) return cmd_describe(describe_image, out, err);
    return exit_code::usage;
}

}  // namespace cbir
