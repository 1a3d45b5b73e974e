#include <doctest.h>

#include <chrono>
#include <thread>

#include "pats/gateway.hpp"
#include "pats/util.hpp"
#include "support/providers.hpp"

using namespace pats;
using namespace pats::gateway;
using namespace pats::testing;

namespace {

GenerationRequest completion_request(const std::string& model, const std::string& text) {
    GenerationRequest req;
    req.model_id = model;
    req.messages.push_back({Role::System, "system prompt", {}});
    req.messages.push_back({Role::User, text, {}});
    return req;
}

} // namespace

TEST_CASE("fingerprint is stable and content-sensitive") {
    GenerationRequest a = completion_request("m", "hello");
    CHECK(fingerprint(a) == fingerprint(a));

    GenerationRequest b = a;
    b.messages[1].content = "hello!";
    CHECK(fingerprint(a) != fingerprint(b));

    GenerationRequest c = a;
    c.model_id = "other";
    CHECK(fingerprint(a) != fingerprint(c));

    GenerationRequest d = a;
    d.sampling.temperature = 0.7;
    CHECK(fingerprint(a) != fingerprint(d));

    GenerationRequest e = a;
    e.messages[1].attachments.push_back({"digest-1", "image/png", ""});
    CHECK(fingerprint(a) != fingerprint(e));
    GenerationRequest f = e;
    f.messages[1].attachments[0].path = "somewhere/else.png"; // path is not content
    CHECK(fingerprint(e) == fingerprint(f));
}

TEST_CASE("an emulated chat session collides with its flattened completion") {
    TempDir tmp;
    Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
               std::make_shared<ScriptedProvider>());

    const std::string sid = gw.open_session("sys prompt", "m");
    gw.chat(sid, ChatMessage{Role::User, "first question", {}});

    GenerationRequest flat;
    flat.model_id = "m";
    flat.messages.push_back({Role::System, "sys prompt", {}});
    flat.messages.push_back({Role::User, "first question", {}});

    // identical flattened content means one fixture serves both shapes
    CHECK(ReplayStore(tmp.path() / "fx").lookup(fingerprint(flat)).has_value());
}

TEST_CASE("chat sessions accumulate history and support rewriting") {
    TempDir tmp;
    Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
               std::make_shared<QueueProvider>(
                   std::vector<std::string>{"reply one", "reply two"}));

    const std::string sid = gw.open_session("sys", "m");
    CHECK(gw.chat(sid, ChatMessage{Role::User, "a", {}}).text == "reply one");
    gw.rewrite_last_assistant(sid, "edited reply");
    CHECK(gw.chat(sid, ChatMessage{Role::User, "b", {}}).text == "reply two");

    auto ctx = gw.session_context(sid);
    REQUIRE(ctx.size() == 5);
    CHECK(ctx[0].role == Role::System);
    CHECK(ctx[2].content == "edited reply");
    CHECK(ctx[4].content == "reply two");

    CHECK_THROWS_AS(gw.chat("s-999", std::nullopt), ConfigError);
    CHECK_THROWS_AS(gw.rewrite_last_assistant("s-999", "x"), ConfigError);
    CHECK_THROWS_AS(gw.session_context("s-999"), ConfigError);
}

TEST_CASE("completion requests must not carry a session id") {
    TempDir tmp;
    Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
               std::make_shared<ScriptedProvider>());
    GenerationRequest req = completion_request("m", "x");
    req.session_id = "s-1";
    CHECK_THROWS_AS(gw.generate(req), ConfigError);

    GenerationRequest chat_req;
    chat_req.mode = Mode::ChatSession; // no session id
    CHECK_THROWS_AS(gw.generate(chat_req), ConfigError);
}

TEST_CASE("replay mode serves recorded fixtures and misses loudly") {
    TempDir tmp;
    const auto fixtures = tmp.path() / "fx";
    GenerationRequest req = completion_request("m", "record me");

    std::string recorded_text;
    {
        Gateway rec(fast_config(GatewayMode::Record, fixtures),
                    std::make_shared<ScriptedProvider>());
        recorded_text = rec.generate(req).text;
        CHECK(rec.live_calls() == 1);
    }
    {
        Gateway rep(fast_config(GatewayMode::Replay, fixtures)); // no provider at all
        CHECK(rep.generate(req).text == recorded_text);
        CHECK(rep.generate(req).text == recorded_text);
        CHECK(rep.live_calls() == 0);

        GenerationRequest other = completion_request("m", "never recorded");
        CHECK_THROWS_AS(rep.generate(other), ReplayMissError);
    }
}

TEST_CASE("live mode without a provider is a configuration error") {
    TempDir tmp;
    Gateway gw(fast_config(GatewayMode::Live, tmp.path() / "fx")); // provider missing
    CHECK_THROWS_AS(gw.generate(completion_request("m", "x")), ConfigError);
}

TEST_CASE("transient provider errors are retried with backoff, fatal ones are not") {
    TempDir tmp;

    SUBCASE("flaky provider succeeds within the retry budget") {
        auto flaky = std::make_shared<FlakyProvider>(std::make_shared<ScriptedProvider>(), 2);
        Gateway gw(fast_config(GatewayMode::Live, tmp.path() / "fx"), flaky);
        auto r = gw.generate(completion_request("m", "x"));
        CHECK(r.provider_meta.at("retry_count") == 2);
        CHECK(gw.live_calls() == 3);
    }

    SUBCASE("persistent transient failure exhausts max_attempts") {
        auto flaky = std::make_shared<FlakyProvider>(std::make_shared<ScriptedProvider>(), 99);
        Gateway gw(fast_config(GatewayMode::Live, tmp.path() / "fx"), flaky);
        CHECK_THROWS_AS(gw.generate(completion_request("m", "x")), ProviderError);
        CHECK(gw.live_calls() == 3); // default max_attempts
    }

    SUBCASE("non-transient errors fail immediately") {
        auto queue = std::make_shared<QueueProvider>(std::vector<std::string>{});
        Gateway gw(fast_config(GatewayMode::Live, tmp.path() / "fx"), queue);
        CHECK_THROWS_AS(gw.generate(completion_request("m", "x")), ProviderError);
        CHECK(gw.live_calls() == 1);
    }
}

TEST_CASE("rate limiter delays once the window budget is spent") {
    RateLimiter limiter(3, std::chrono::milliseconds(150));
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 3; ++i) limiter.acquire();
    const auto after_three = std::chrono::steady_clock::now();
    CHECK(after_three - start < std::chrono::milliseconds(100));

    limiter.acquire(); // fourth call must wait for the window to roll
    const auto after_four = std::chrono::steady_clock::now();
    CHECK(after_four - start >= std::chrono::milliseconds(140));
}

TEST_CASE("usage ledger aggregates per model and prices the report") {
    TempDir tmp;
    Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
               std::make_shared<ScriptedProvider>()); // 100 in / 20 out per call
    gw.generate(completion_request("model-a", "one"));
    gw.generate(completion_request("model-a", "two"));
    gw.generate(completion_request("model-b", "three"));

    const auto& ledger = gw.usage_ledger();
    CHECK(ledger.at("model-a").input_tokens == 200);
    CHECK(ledger.at("model-a").output_tokens == 40);
    CHECK(ledger.at("model-b").input_tokens == 100);

    auto report = gw.usage_report({{"model-a", {10.0, 30.0}}});
    CHECK(report["total_cost"].get<double>() ==
          doctest::Approx(200.0 / 1e6 * 10.0 + 40.0 / 1e6 * 30.0));
    bool unpriced_b = false;
    for (const auto& row : report["models"])
        if (row["model"] == "model-b") unpriced_b = row.value("unpriced", false);
    CHECK(unpriced_b);
}

TEST_CASE("known model allow-list is enforced on session open") {
    TempDir tmp;
    auto cfg = fast_config(GatewayMode::Record, tmp.path() / "fx");
    cfg.known_models = {"allowed-model"};
    Gateway gw(cfg, std::make_shared<ScriptedProvider>());
    CHECK_NOTHROW(gw.open_session("sys", "allowed-model"));
    CHECK_THROWS_AS(gw.open_session("sys", "surprise-model"), ConfigError);
}

TEST_CASE("replay store rejects corrupt fixtures") {
    TempDir tmp;
    ReplayStore store(tmp.path() / "fx");
    GenerationResult r;
    r.text = "ok";
    store.put("abc", r);
    CHECK(store.size() == 1);
    CHECK(store.lookup("abc")->text == "ok");
    CHECK_FALSE(store.lookup("missing").has_value());

    pats::util::write_file_atomic(tmp.path() / "fx" / "bad.json", "{broken");
    CHECK_THROWS_AS(store.lookup("bad"), SchemaError);
}
