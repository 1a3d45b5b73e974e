#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "pats/gateway.hpp"
#include "pats/util.hpp"

namespace pats::gateway {

namespace {

class HttpProvider final : public Provider {
  public:
    explicit HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}

    std::string name() const override { return "openai_compat"; }

    GenerationResult complete(const GenerationRequest& req) override {
        nlohmann::json body;
        body["model"] = req.model_id;
        if (req.sampling.temperature) body["temperature"] = *req.sampling.temperature;
        if (req.sampling.max_output_tokens) body["max_tokens"] = *req.sampling.max_output_tokens;
        body["messages"] = nlohmann::json::array();
        for (const auto& m : req.messages) {
            nlohmann::json jm;
            jm["role"] = role_name(m.role);
            if (m.attachments.empty()) {
                jm["content"] = m.content;
            } else {
                auto parts = nlohmann::json::array();
                parts.push_back({{"type", "text"}, {"text", m.content}});
                for (const auto& a : m.attachments) {
                    const std::string bytes = util::read_file(a.path);
                    parts.push_back(
                        {{"type", "image_url"},
                         {"image_url",
                          {{"url", "data:" + a.mime + ";base64," + util::base64_encode(bytes)}}}});
                }
                jm["content"] = std::move(parts);
            }
            body["messages"].push_back(std::move(jm));
        }

        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key)
            throw ConfigError("provider credential env var not set: " + config_.api_key_env);

        httplib::Client client(config_.base_url);
        client.set_read_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(config_.path, headers, body.dump(), "application/json");
        const double latency =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (!res)
            throw ProviderError("transport error: " + httplib::to_string(res.error()), 0, true);
        if (res->status == 429 || res->status >= 500)
            throw ProviderError("provider status " + std::to_string(res->status), res->status,
                                true);
        if (res->status >= 400)
            throw ProviderError("provider status " + std::to_string(res->status) + ": " + res->body,
                                res->status, false);

        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded())
            throw ProviderError("provider returned non-JSON body", res->status, false);

        GenerationResult out;
        try {
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("unexpected provider response shape: ") + e.what(),
                                res->status, false);
        }
        if (j.contains("usage")) {
            out.usage.input_tokens = j["usage"].value("prompt_tokens", 0);
            out.usage.output_tokens = j["usage"].value("completion_tokens", 0);
        }
        out.latency_seconds = latency;
        out.provider_meta["provider"] = name();
        if (j.contains("model")) out.provider_meta["model"] = j["model"];
        return out;
    }

  private:
    HttpProviderConfig config_;
};

} // namespace

std::shared_ptr<Provider> make_http_provider(HttpProviderConfig config) {
    return std::make_shared<HttpProvider>(std::move(config));
}

} // namespace pats::gateway
