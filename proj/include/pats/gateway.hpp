#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pats/errors.hpp"

namespace pats::gateway {

enum class Role { System, User, Assistant };

std::string role_name(Role r);

/// Content-addressed media reference; replay works without provider upload ids.
struct MediaRef {
    std::string digest; // sha256 of the bytes
    std::string mime;
    std::string path; // local file, used by live providers to re-read bytes
};

MediaRef media_from_file(const std::filesystem::path& p, std::string mime = "image/png");

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::vector<MediaRef> attachments;
};

struct Sampling {
    std::optional<double> temperature;
    std::optional<int> max_output_tokens;
};

enum class Mode { Completion, ChatSession };

struct GenerationRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    Sampling sampling;
    Mode mode = Mode::Completion;
    std::optional<std::string> session_id;
};

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

struct GenerationResult {
    std::string text;
    Usage usage;
    double latency_seconds = 0.0;
    nlohmann::json provider_meta = nlohmann::json::object();
};

/// Stable hash of model id, sampling, and the flattened message list
/// (attachments by digest). Mode and session id are deliberately excluded so
/// an emulated chat session and the equivalent flattened completion collide.
std::string fingerprint(const GenerationRequest& flattened);

class ProviderError : public Error {
  public:
    ProviderError(std::string msg, int status, bool transient)
        : Error(std::move(msg)), status(status), transient(transient) {}
    int status;
    bool transient;
};

class ReplayMissError : public Error {
  public:
    explicit ReplayMissError(const std::string& fp)
        : Error("replay fixture missing for fingerprint " + fp), fingerprint(fp) {}
    std::string fingerprint;
};

class Provider {
  public:
    virtual ~Provider() = default;
    virtual GenerationResult complete(const GenerationRequest& req) = 0;
    virtual std::string name() const = 0;
};

/// One JSON file per fingerprint under a fixtures directory.
class ReplayStore {
  public:
    explicit ReplayStore(std::filesystem::path dir);

    std::optional<GenerationResult> lookup(const std::string& fp) const;
    void put(const std::string& fp, const GenerationResult& result);
    size_t size() const;
    const std::filesystem::path& dir() const { return dir_; }

  private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
};

/// Sliding-window limiter: delays, never rejects.
class RateLimiter {
  public:
    RateLimiter(int max_per_window, std::chrono::milliseconds window);
    void acquire();

  private:
    int max_per_window_;
    std::chrono::milliseconds window_;
    std::mutex mu_;
    std::deque<std::chrono::steady_clock::time_point> starts_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
};

enum class GatewayMode { Replay, Record, Live };

struct GatewayConfig {
    GatewayMode mode = GatewayMode::Replay;
    std::filesystem::path fixtures_dir;
    int rate_limit = 60;
    std::chrono::milliseconds rate_window{60000};
    RetryPolicy retry;
    std::vector<std::string> known_models; // empty = accept any
};

class Gateway {
  public:
    Gateway(GatewayConfig config, std::shared_ptr<Provider> provider = nullptr);

    GenerationResult generate(const GenerationRequest& req);

    std::string open_session(std::string system_prompt, std::string model_id);
    /// Appends the user message (if any), generates, appends the reply.
    GenerationResult chat(const std::string& session_id, std::optional<ChatMessage> user_msg,
                          Sampling sampling = {});
    /// The student model keeps only the selected candidate in its history.
    void rewrite_last_assistant(const std::string& session_id, std::string text);
    std::vector<ChatMessage> session_context(const std::string& session_id) const;

    std::int64_t live_calls() const { return live_calls_; }
    const std::map<std::string, Usage>& usage_ledger() const { return ledger_; }

    /// Totals and cost per model; models without prices are reported unpriced.
    nlohmann::json usage_report(
        const std::map<std::string, std::pair<double, double>>& price_per_mtok) const;

    GatewayMode mode() const { return config_.mode; }

  private:
    struct Session {
        std::string model_id;
        std::vector<ChatMessage> messages; // system first
    };

    GenerationRequest flatten(const GenerationRequest& req) const;
    GenerationResult call_provider(const GenerationRequest& req);

    GatewayConfig config_;
    std::shared_ptr<Provider> provider_;
    ReplayStore store_;
    RateLimiter limiter_;
    mutable std::mutex mu_; // sessions + ledger
    std::map<std::string, Session> sessions_;
    std::map<std::string, Usage> ledger_;
    std::int64_t next_session_ = 1;
    std::int64_t live_calls_ = 0;
};

nlohmann::json result_to_json(const GenerationResult& r);
GenerationResult result_from_json(const nlohmann::json& j);

/// OpenAI-compatible chat-completions provider over HTTPS.
struct HttpProviderConfig {
    std::string base_url;              // e.g. https://api.openai.com
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "PATS_API_KEY";
    int timeout_seconds = 120;
};

std::shared_ptr<Provider> make_http_provider(HttpProviderConfig config);

} // namespace pats::gateway
