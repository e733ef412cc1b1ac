#include "patchcue/service.hpp"

#include <charconv>
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "patchcue/version.hpp"

namespace patchcue {
namespace {

using nlohmann::json;

int parse_int_env(const char* name, const char* value, int min_value) {
    int parsed = 0;
    const char* end = value + std::char_traits<char>::length(value);
    auto [ptr, ec] = std::from_chars(value, end, parsed);
    if (ec != std::errc() || ptr != end || parsed < min_value)
        throw std::invalid_argument(std::string(name) + " is invalid: " +
                                    value);
    return parsed;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json error_body(const std::string& message) {
    return json{{"error", message}};
}

// One batch item, never throws: per-item failures become inline error
// objects so the rest of the batch still scores.
json score_item(const json& item, const ScoringDefaults& defaults) {
    std::string id;
    if (item.is_object() && item.contains("id") && item.at("id").is_string())
        id = item.at("id").get<std::string>();
    try {
        return score_response_to_json(
            score_one(score_request_from_json(item), defaults));
    } catch (const std::exception& e) {
        return json{{"id", id}, {"error", e.what()}};
    }
}

}  // namespace

ServiceConfig service_config_from_env() {
    ServiceConfig config;
    if (const char* bind = std::getenv("PATCHCUE_BIND")) {
        const std::string s = bind;
        const std::size_t colon = s.rfind(':');
        if (colon == std::string::npos || colon == 0 ||
            colon + 1 == s.size())
            throw std::invalid_argument(
                "PATCHCUE_BIND must look like host:port");
        config.bind_host = s.substr(0, colon);
        config.bind_port =
            parse_int_env("PATCHCUE_BIND port", s.c_str() + colon + 1, 0);
    }
    if (const char* tau = std::getenv("PATCHCUE_TAU")) {
        char* end = nullptr;
        const double parsed = std::strtod(tau, &end);
        if (end == tau || *end != '\0' || !(parsed > 0.0) || parsed > 1.0)
            throw std::invalid_argument(std::string("PATCHCUE_TAU is invalid: ") +
                                        tau);
        config.defaults.tau = parsed;
    }
    if (const char* patch = std::getenv("PATCHCUE_PATCH_SIZE")) {
        const int size = parse_int_env("PATCHCUE_PATCH_SIZE", patch, 1);
        config.defaults.patch_height = size;
        config.defaults.patch_width = size;
    }
    if (const char* batch = std::getenv("PATCHCUE_MAX_BATCH"))
        config.max_batch = static_cast<std::size_t>(
            parse_int_env("PATCHCUE_MAX_BATCH", batch, 1));
    return config;
}

RewardService::RewardService(ServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
    route();
}

RewardService::~RewardService() { stop(); }

void RewardService::route() {
    server_->set_pre_routing_handler(
        [this](const httplib::Request&, httplib::Response&) {
            requests_.fetch_add(1, std::memory_order_relaxed);
            return httplib::Server::HandlerResponse::Unhandled;
        });

    server_->Get("/v1/health",
                 [](const httplib::Request&, httplib::Response& res) {
                     reply(res, 200,
                           json{{"status", "ok"}, {"version", kVersion}});
                 });

    server_->Get("/v1/config", [this](const httplib::Request&,
                                      httplib::Response& res) {
        const ScoringDefaults& d = config_.defaults;
        json body;
        body["tau"] = d.tau;
        body["patch_h"] = d.patch_height;
        body["patch_w"] = d.patch_width;
        body["default_image"] = {{"height", d.image_height},
                                 {"width", d.image_width}};
        body["max_batch"] = config_.max_batch;
        body["requests"] = requests_.load(std::memory_order_relaxed);
        reply(res, 200, body);
    });

    server_->Post("/v1/score", [this](const httplib::Request& req,
                                      httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            reply(res, 400, error_body("request body is not valid JSON"));
            return;
        }
        ScoreRequest request;
        try {
            request = score_request_from_json(body);
        } catch (const ParseError& e) {
            reply(res, 400, error_body(e.what()));
            return;
        }
        try {
            reply(res, 200,
                  score_response_to_json(score_one(request, config_.defaults)));
        } catch (const std::invalid_argument& e) {
            reply(res, 422, error_body(e.what()));
        }
    });

    server_->Post("/v1/score/batch", [this](const httplib::Request& req,
                                            httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_array()) {
            reply(res, 400, error_body("request body must be a JSON array"));
            return;
        }
        if (body.size() > config_.max_batch) {
            reply(res, 413,
                  error_body("batch of " + std::to_string(body.size()) +
                             " exceeds the limit of " +
                             std::to_string(config_.max_batch)));
            return;
        }

        std::vector<json> scored(body.size());
        const std::size_t workers = std::min<std::size_t>(
            {body.size(), std::thread::hardware_concurrency(), 8});
        if (workers > 1) {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (std::size_t i; (i = next.fetch_add(1)) < body.size();)
                        scored[i] = score_item(body[i], config_.defaults);
                });
            for (auto& t : pool) t.join();
        } else {
            for (std::size_t i = 0; i < body.size(); ++i)
                scored[i] = score_item(body[i], config_.defaults);
        }

        json out = json::array();
        for (auto& item : scored) out.push_back(std::move(item));
        reply(res, 200, out);
    });

    server_->Post("/v1/grpo/advantages", [](const httplib::Request& req,
                                            httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() ||
            !body.contains("rewards") || !body.at("rewards").is_array()) {
            reply(res, 400,
                  error_body("request body must carry a 'rewards' array"));
            return;
        }
        std::vector<double> rewards;
        for (const auto& v : body.at("rewards")) {
            if (!v.is_number()) {
                reply(res, 400, error_body("'rewards' must hold numbers"));
                return;
            }
            rewards.push_back(v.get<double>());
        }
        double std_floor = kDefaultStdFloor;
        if (body.contains("std_floor")) {
            if (!body.at("std_floor").is_number()) {
                reply(res, 400, error_body("'std_floor' must be a number"));
                return;
            }
            std_floor = body.at("std_floor").get<double>();
        }
        try {
            json advantages = json::array();
            for (double a : group_advantages(rewards, std_floor))
                advantages.push_back(round6(a));
            reply(res, 200, json{{"advantages", std::move(advantages)}});
        } catch (const std::invalid_argument& e) {
            reply(res, 400, error_body(e.what()));
        }
    });
}

bool RewardService::run() {
    if (!server_->bind_to_port(config_.bind_host, config_.bind_port))
        return false;
    return server_->listen_after_bind();
}

int RewardService::start_async() {
    int port = config_.bind_port;
    if (port == 0) {
        port = server_->bind_to_any_port(config_.bind_host);
        if (port <= 0) return -1;
    } else if (!server_->bind_to_port(config_.bind_host, port)) {
        return -1;
    }
    worker_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void RewardService::stop() {
    if (server_ && server_->is_running()) server_->stop();
    if (worker_.joinable()) worker_.join();
}

}  // namespace patchcue
