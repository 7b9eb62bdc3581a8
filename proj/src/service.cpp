#include "cbir/service.hpp"

#include "cbir/eval.hpp"
#include "cbir/json.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <future>
#include <iterator>
#include <map>
#include <mutex>

namespace cbir {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kThumbnailSide = 256;

std::optional<long long> parse_int(std::string_view text) {
    long long v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size()) return std::nullopt;
    return v;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, json{{"error", message}});
}

RgbImage thumbnail(const RgbImage& img) {
    const int longest = std::max(img.width(), img.height());
    if (longest <= kThumbnailSide) return img;
    const double scale = static_cast<double>(kThumbnailSide) / longest;
    const int w = std::max(1, static_cast<int>(img.width() * scale));
    const int h = std::max(1, static_cast<int>(img.height() * scale));
    return resize_bilinear(img, w, h);
}

bool within(const fs::path& root, const fs::path& p) {
    const auto [root_end, _] = std::mismatch(root.begin(), root.end(), p.begin(), p.end());
    return root_end == root.end();
}

}  // namespace

struct Service::Impl {
    RetrievalIndex index;
    ServiceConfig config;
    httplib::Server server;
    bool bound = false;

    std::mutex cache_mutex;
    std::map<std::size_t, std::shared_future<std::string>> eval_cache;

    Impl(RetrievalIndex idx, ServiceConfig cfg) : index(std::move(idx)), config(std::move(cfg)) { routes(); }

    void routes() {
        // The library default also sets SO_REUSEPORT, which lets a second
        // server share an occupied port silently.
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        });
        server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin}});
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string message = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                message = e.what();
            } catch (...) {
            }
            send_error(res, 500, message);
        });

        auto not_allowed = [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Allow", "GET");
            send_error(res, 405, "method not allowed");
        };
        server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("ok", "text/plain");
        });
        server.Post("/api/health", not_allowed);
        server.Put("/api/health", not_allowed);
        server.Patch("/api/health", not_allowed);
        server.Delete("/api/health", not_allowed);
        server.Options("/api/health", not_allowed);

        server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        server.Get("/api/classes", [this](const httplib::Request&, httplib::Response& res) { classes(res); });
        server.Get("/api/images", [this](const httplib::Request& req, httplib::Response& res) { images(req, res); });
        server.Get(R"(/api/images/([^/]+)/thumbnail)",
                   [this](const httplib::Request& req, httplib::Response& res) { thumb(req, res); });
        server.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) { query(req, res); });
        server.Get("/api/eval/summary",
                   [this](const httplib::Request& req, httplib::Response& res) { eval_summary(req, res); });

        if (!config.static_dir.empty()) server.set_mount_point("/", config.static_dir);
    }

    void classes(httplib::Response& res) const {
        std::map<std::string, std::size_t> counts;
        for (const auto& rec : index.records()) ++counts[rec.label];
        json out = json::array();
        for (const auto& [name, count] : counts) out.push_back({{"name", name}, {"count", count}});
        send_json(res, 200, out);
    }

    void images(const httplib::Request& req, httplib::Response& res) const {
        long long page = 0;
        long long per = 20;
        if (req.has_param("page")) {
            const auto v = parse_int(req.get_param_value("page"));
            if (!v || *v < 0) return send_error(res, 400, "page must be a non-negative integer");
            page = *v;
        }
        if (req.has_param("per")) {
            const auto v = parse_int(req.get_param_value("per"));
            if (!v || *v < 1 || *v > static_cast<long long>(config.max_k)) {
                return send_error(res, 400, "per must be an integer in [1, " + std::to_string(config.max_k) + "]");
            }
            per = *v;
        }
        const bool filter = req.has_param("class");
        const std::string cls = filter ? req.get_param_value("class") : std::string();

        std::vector<const IndexRecord*> matched;
        for (const auto& rec : index.records()) {
            if (!filter || rec.label == cls) matched.push_back(&rec);
        }
        const auto total = static_cast<long long>(matched.size());
        json items = json::array();
        const long long begin = page * per;
        for (long long i = begin; i < std::min(total, begin + per); ++i) {
            items.push_back({{"id", matched[i]->id}, {"label", matched[i]->label}});
        }
        json out{{"page", page}, {"per", per}, {"total", total}, {"pages", (total + per - 1) / per},
                 {"items", std::move(items)}};
        if (filter) out["class"] = cls;
        send_json(res, 200, out);
    }

    void thumb(const httplib::Request& req, httplib::Response& res) const {
        const auto id = parse_int(req.matches[1].str());
        const IndexRecord* rec = id ? index.find(*id) : nullptr;
        if (!rec) return send_error(res, 404, "unknown image id " + req.matches[1].str());

        std::error_code ec;
        const fs::path root = fs::weakly_canonical(config.images_dir, ec);
        fs::path full = fs::path(rec->path);
        if (full.is_relative()) full = root / full;
        full = fs::weakly_canonical(full, ec);
        if (!within(root, full)) return send_error(res, 404, "image path outside image root: " + rec->path);
        if (!fs::is_regular_file(full, ec)) return send_error(res, 404, "image file not found: " + rec->path);

        RgbImage img;
        try {
            img = read_image(full.string());
        } catch (const std::exception& e) {
            return send_error(res, 404, std::string("image unreadable: ") + e.what());
        }
        const auto bytes = encode_jpeg(thumbnail(img), 85);
        res.set_content(std::string(bytes.begin(), bytes.end()), "image/jpeg");
    }

    void query(const httplib::Request& req, httplib::Response& res) const {
        std::optional<std::string> payload;
        std::optional<std::string> id_text;
        std::optional<std::string> k_text;
        bool exclude_self = false;

        auto parse_bool = [](const std::string& s) { return s == "true" || s == "1" || s == "on"; };
        if (req.is_multipart_form_data()) {
            if (req.has_file("image")) payload = req.get_file_value("image").content;
            if (req.has_file("id")) id_text = req.get_file_value("id").content;
            if (req.has_file("k")) k_text = req.get_file_value("k").content;
            if (req.has_file("exclude_self")) exclude_self = parse_bool(req.get_file_value("exclude_self").content);
        } else {
            const json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
            if (body.contains("image")) return send_error(res, 400, "uploads must use multipart field 'image'");
            if (body.contains("id")) {
                if (!body["id"].is_number_integer()) return send_error(res, 400, "id must be an integer");
                id_text = std::to_string(body["id"].get<long long>());
            }
            if (body.contains("k")) {
                if (!body["k"].is_number_integer()) return send_error(res, 422, "k must be an integer");
                k_text = std::to_string(body["k"].get<long long>());
            }
            if (body.contains("exclude_self")) {
                if (!body["exclude_self"].is_boolean()) return send_error(res, 400, "exclude_self must be boolean");
                exclude_self = body["exclude_self"].get<bool>();
            }
        }

        if (payload.has_value() == id_text.has_value()) {
            return send_error(res, 400, "provide exactly one of 'image' or 'id'");
        }
        long long k = static_cast<long long>(config.default_k);
        if (k_text) {
            const auto v = parse_int(*k_text);
            if (!v || *v < 1 || *v > static_cast<long long>(config.max_k)) {
                return send_error(res, 422, "k must be in [1, " + std::to_string(config.max_k) + "]");
            }
            k = *v;
        }

        Descriptor descriptor;
        std::optional<ImageId> exclude;
        json query_info;
        if (id_text) {
            const auto id = parse_int(*id_text);
            const IndexRecord* rec = id ? index.find(*id) : nullptr;
            if (!rec) return send_error(res, 404, "unknown image id " + *id_text);
            descriptor = rec->descriptor;
            if (exclude_self) exclude = rec->id;
            query_info = {{"id", rec->id}};
        } else {
            if (payload->empty()) return send_error(res, 400, "uploaded image is empty");
            RgbImage img;
            try {
                const auto* data = reinterpret_cast<const std::uint8_t*>(payload->data());
                img = decode_image(std::span<const std::uint8_t>(data, payload->size()));
            } catch (const DecodeError& e) {
                return send_error(res, 400, e.what());
            }
            descriptor = extract_descriptor(img);
            if (exclude_self) {
                for (const auto& rec : index.records()) {
                    if (rec.descriptor == descriptor) {
                        exclude = rec.id;
                        break;
                    }
                }
            }
            query_info = {{"upload", true}};
        }

        json out = to_json(search_topk(index, descriptor, static_cast<std::size_t>(k), exclude));
        out["query"] = std::move(query_info);
        out["exclude_self"] = exclude_self;
        send_json(res, 200, out);
    }

    void eval_summary(const httplib::Request& req, httplib::Response& res) {
        std::size_t k = config.default_k;
        if (req.has_param("k")) {
            const auto v = parse_int(req.get_param_value("k"));
            if (!v) return send_error(res, 400, "k must be an integer");
            if (*v < 1 || *v > static_cast<long long>(config.max_k)) {
                return send_error(res, 422, "k must be in [1, " + std::to_string(config.max_k) + "]");
            }
            k = static_cast<std::size_t>(*v);
        }

        std::shared_future<std::string> body;
        std::promise<std::string> producer;
        bool owner = false;
        {
            std::lock_guard lock(cache_mutex);
            auto it = eval_cache.find(k);
            if (it == eval_cache.end()) {
                body = producer.get_future().share();
                eval_cache.emplace(k, body);
                owner = true;
            } else {
                body = it->second;
            }
        }
        if (owner) {
            try {
                EvalOptions options;
                options.k = k;
                options.workers = config.eval_workers;
                producer.set_value(to_json(evaluate_ablation(index, options)).dump());
            } catch (...) {
                {
                    std::lock_guard lock(cache_mutex);
                    eval_cache.erase(k);
                }
                producer.set_exception(std::current_exception());
            }
        }
        res.set_content(body.get(), "application/json");
    }
};

Service::Service(RetrievalIndex index, ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(index), std::move(config))) {}

Service::~Service() {
    stop();
}

int Service::bind(const std::string& host, int port) {
    int bound = -1;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (impl_->server.bind_to_port(host, port)) {
        bound = port;
    }
    impl_->bound = bound > 0;
    return bound;
}

bool Service::run() {
    if (!impl_->bound) return false;
    return impl_->server.listen_after_bind();
}

void Service::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const {
    impl_->server.wait_until_ready();
}

const RetrievalIndex& Service::index() const {
    return impl_->index;
}

}  // namespace cbir
