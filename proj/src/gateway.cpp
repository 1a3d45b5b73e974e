#include "pats/gateway.hpp"

#include <fstream>
#include <thread>

#include "pats/hash.hpp"
#include "pats/util.hpp"

namespace pats::gateway {

std::string role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

MediaRef media_from_file(const std::filesystem::path& p, std::string mime) {
    MediaRef ref;
    ref.digest = sha256_hex(util::read_file(p));
    ref.mime = std::move(mime);
    ref.path = p.string();
    return ref;
}

std::string fingerprint(const GenerationRequest& req) {
    nlohmann::json canon;
    canon["model_id"] = req.model_id;
    canon["temperature"] = req.sampling.temperature ? nlohmann::json(*req.sampling.temperature)
                                                    : nlohmann::json(nullptr);
    canon["max_output_tokens"] = req.sampling.max_output_tokens
                                     ? nlohmann::json(*req.sampling.max_output_tokens)
                                     : nlohmann::json(nullptr);
    canon["messages"] = nlohmann::json::array();
    for (const auto& m : req.messages) {
        nlohmann::json jm = {{"role", role_name(m.role)}, {"content", m.content}};
        jm["attachments"] = nlohmann::json::array();
        for (const auto& a : m.attachments) jm["attachments"].push_back(a.digest);
        canon["messages"].push_back(std::move(jm));
    }
    return sha256_hex(canon.dump());
}

nlohmann::json result_to_json(const GenerationResult& r) {
    return {{"text", r.text},
            {"usage", {{"input_tokens", r.usage.input_tokens}, {"output_tokens", r.usage.output_tokens}}},
            {"meta", r.provider_meta}};
}

GenerationResult result_from_json(const nlohmann::json& j) {
    GenerationResult r;
    r.text = j.at("text").get<std::string>();
    r.usage.input_tokens = j.at("usage").at("input_tokens").get<std::int64_t>();
    r.usage.output_tokens = j.at("usage").at("output_tokens").get<std::int64_t>();
    r.provider_meta = j.value("meta", nlohmann::json::object());
    return r;
}

ReplayStore::ReplayStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<GenerationResult> ReplayStore::lookup(const std::string& fp) const {
    std::lock_guard lock(mu_);
    const auto file = dir_ / (fp + ".json");
    std::ifstream in(file);
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw SchemaError("corrupt replay fixture: " + file.string());
    return result_from_json(j);
}

void ReplayStore::put(const std::string& fp, const GenerationResult& result) {
    std::lock_guard lock(mu_);
    nlohmann::json j = result_to_json(result);
    j["request_fingerprint"] = fp;
    util::write_file_atomic(dir_ / (fp + ".json"), j.dump(2) + "\n");
}

size_t ReplayStore::size() const {
    std::lock_guard lock(mu_);
    size_t n = 0;
    if (std::filesystem::exists(dir_))
        for (const auto& e : std::filesystem::directory_iterator(dir_))
            if (e.path().extension() == ".json") ++n;
    return n;
}

RateLimiter::RateLimiter(int max_per_window, std::chrono::milliseconds window)
    : max_per_window_(max_per_window), window_(window) {}

void RateLimiter::acquire() {
    using clock = std::chrono::steady_clock;
    std::unique_lock lock(mu_);
    for (;;) {
        const auto now = clock::now();
        while (!starts_.empty() && now - starts_.front() >= window_) starts_.pop_front();
        if (static_cast<int>(starts_.size()) < max_per_window_) {
            starts_.push_back(now);
            return;
        }
        const auto wake = starts_.front() + window_;
        lock.unlock();
        std::this_thread::sleep_until(wake);
        lock.lock();
    }
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Provider> provider)
    : config_(std::move(config)),
      provider_(std::move(provider)),
      store_(config_.fixtures_dir),
      limiter_(config_.rate_limit, config_.rate_window) {}

GenerationRequest Gateway::flatten(const GenerationRequest& req) const {
    if (req.mode == Mode::Completion) {
        if (req.session_id)
            throw ConfigError("completion request must not carry a session id");
        return req;
    }
    if (!req.session_id) throw ConfigError("chat_session request requires a session id");
    std::lock_guard lock(mu_);
    auto it = sessions_.find(*req.session_id);
    if (it == sessions_.end()) throw ConfigError("unknown session id: " + *req.session_id);
    GenerationRequest flat;
    flat.model_id = req.model_id.empty() ? it->second.model_id : req.model_id;
    flat.sampling = req.sampling;
    flat.messages = it->second.messages;
    flat.messages.insert(flat.messages.end(), req.messages.begin(), req.messages.end());
    return flat;
}

GenerationResult Gateway::call_provider(const GenerationRequest& req) {
    if (!provider_) throw ConfigError("no provider configured for live/record mode");
    int attempt = 0;
    auto delay = config_.retry.base_delay;
    for (;;) {
        limiter_.acquire();
        ++live_calls_;
        try {
            GenerationResult r = provider_->complete(req);
            r.provider_meta["retry_count"] = attempt;
            return r;
        } catch (const ProviderError& e) {
            ++attempt;
            if (!e.transient || attempt >= config_.retry.max_attempts)
                throw ProviderError("provider failed after " + std::to_string(attempt) +
                                        " attempt(s): " + e.what(),
                                    e.status, e.transient);
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(
                static_cast<long>(static_cast<double>(delay.count()) * config_.retry.factor));
        }
    }
}

GenerationResult Gateway::generate(const GenerationRequest& req) {
    GenerationRequest flat = flatten(req);
    const std::string fp = fingerprint(flat);

    GenerationResult result;
    if (config_.mode == GatewayMode::Replay) {
        auto hit = store_.lookup(fp);
        if (!hit) throw ReplayMissError(fp);
        result = *hit;
    } else {
        result = call_provider(flat);
        if (config_.mode == GatewayMode::Record) store_.put(fp, result);
    }

    {
        std::lock_guard lock(mu_);
        auto& u = ledger_[flat.model_id];
        u.input_tokens += result.usage.input_tokens;
        u.output_tokens += result.usage.output_tokens;
        if (req.mode == Mode::ChatSession) {
            auto& session = sessions_.at(*req.session_id);
            session.messages.insert(session.messages.end(), req.messages.begin(),
                                    req.messages.end());
            session.messages.push_back({Role::Assistant, result.text, {}});
        }
    }
    return result;
}

std::string Gateway::open_session(std::string system_prompt, std::string model_id) {
    if (!config_.known_models.empty()) {
        bool ok = false;
        for (const auto& m : config_.known_models) ok = ok || m == model_id;
        if (!ok) throw ConfigError("unknown model_id: " + model_id);
    }
    std::lock_guard lock(mu_);
    std::string id = "s-" + std::to_string(next_session_++);
    Session s;
    s.model_id = std::move(model_id);
    s.messages.push_back({Role::System, std::move(system_prompt), {}});
    sessions_[id] = std::move(s);
    return id;
}

GenerationResult Gateway::chat(const std::string& session_id, std::optional<ChatMessage> user_msg,
                               Sampling sampling) {
    GenerationRequest req;
    req.mode = Mode::ChatSession;
    req.session_id = session_id;
    req.sampling = sampling;
    if (user_msg) req.messages.push_back(std::move(*user_msg));
    return generate(req);
}

void Gateway::rewrite_last_assistant(const std::string& session_id, std::string text) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw ConfigError("unknown session id: " + session_id);
    auto& msgs = it->second.messages;
    for (auto rit = msgs.rbegin(); rit != msgs.rend(); ++rit) {
        if (rit->role == Role::Assistant) {
            rit->content = std::move(text);
            return;
        }
    }
    throw ConfigError("session has no assistant message to rewrite");
}

std::vector<ChatMessage> Gateway::session_context(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw ConfigError("unknown session id: " + session_id);
    return it->second.messages;
}

nlohmann::json Gateway::usage_report(
    const std::map<std::string, std::pair<double, double>>& price_per_mtok) const {
    std::lock_guard lock(mu_);
    nlohmann::json rows = nlohmann::json::array();
    double total_cost = 0.0;
    for (const auto& [model, usage] : ledger_) {
        nlohmann::json row = {{"model", model},
                              {"input_tokens", usage.input_tokens},
                              {"output_tokens", usage.output_tokens}};
        auto it = price_per_mtok.find(model);
        if (it != price_per_mtok.end()) {
            const double cost = static_cast<double>(usage.input_tokens) / 1e6 * it->second.first +
                                static_cast<double>(usage.output_tokens) / 1e6 * it->second.second;
            row["cost"] = cost;
            total_cost += cost;
        } else {
            row["unpriced"] = true;
        }
        rows.push_back(std::move(row));
    }
    return {{"models", rows}, {"total_cost", total_cost}};
}

} // namespace pats::gateway
