#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "patchcue/records.hpp"

namespace httplib {
class Server;
}

// Stateless HTTP/JSON scoring service:
//   POST /v1/score            one ScoreRequest -> ScoreResponse
//   POST /v1/score/batch      array in, array out, order preserved
//   POST /v1/grpo/advantages  {"rewards", "std_floor"?} -> {"advantages"}
//   GET  /v1/health, /v1/config
//
// Malformed trace text is a domain outcome (200 with r_format=0), never a
// transport error. 400 = unparseable body, 422 = valid JSON violating a
// domain invariant, 413 = over-long batch.

namespace patchcue {

struct ServiceConfig {
    std::string bind_host = "127.0.0.1";
    int bind_port = 8787;
    ScoringDefaults defaults;
    std::size_t max_batch = 1024;
};

/// Reads PATCHCUE_BIND (host:port), PATCHCUE_TAU, PATCHCUE_PATCH_SIZE and
/// PATCHCUE_MAX_BATCH over the built-in defaults. Throws
/// std::invalid_argument on unparseable values.
ServiceConfig service_config_from_env();

class RewardService {
  public:
    explicit RewardService(ServiceConfig config);
    ~RewardService();

    RewardService(const RewardService&) = delete;
    RewardService& operator=(const RewardService&) = delete;

    /// Binds and serves on the calling thread until stop(). Returns false
    /// when the bind fails. In-flight requests finish before stop()
    /// returns control.
    bool run();

    /// Binds and serves on a background thread. A configured port of 0
    /// picks an ephemeral one. Returns the bound port, or -1 on failure.
    int start_async();

    /// Stops accepting, drains in-flight requests, joins the background
    /// thread when one exists. Idempotent.
    void stop();

    const ServiceConfig& config() const { return config_; }
    std::uint64_t request_count() const { return requests_.load(); }

  private:
    void route();

    ServiceConfig config_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<std::uint64_t> requests_{0};
    std::thread worker_;
};

}  // namespace patchcue
