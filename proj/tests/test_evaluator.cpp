#include <doctest.h>

#include <array>

#include "pats/errors.hpp"
#include "pats/evaluator.hpp"
#include "pats/util.hpp"
#include "support/providers.hpp"

using namespace pats;
using namespace pats::gateway;
using namespace pats::testing;

namespace {

const Taxonomy& taxonomy() {
    static const Taxonomy t = load_taxonomy(default_data_dir() / "taxonomy.json");
    return t;
}

const PromptLibrary& prompts() {
    static const PromptLibrary p(default_data_dir() / "prompts", "v1");
    return p;
}

DialogueTranscript mini_transcript(const std::string& id, PolicyKind system,
                                   const std::string& profile = "HHHHH",
                                   const std::string& subject = "img-1") {
    DialogueTranscript t;
    t.dialog_id = id;
    t.task_kind = TaskKind::Image;
    t.subject_id = subject;
    t.profile_code = profile;
    t.system = system;
    t.utterances = {{"teacher", "What do you see, " + id + "?", {}, false},
                    {"student", "A tree.", {}, false}};
    return t;
}

} // namespace

TEST_CASE("flip resolution over all nine verdict combinations") {
    using V = Verdict;
    using R = Resolved;
    // forward shows a as System 1; reversed shows b as System 1
    const std::array<std::tuple<V, V, R>, 9> table = {{
        {V::System1, V::System1, R::Tie},  // orders disagree
        {V::System1, V::System2, R::WinA}, // both prefer a
        {V::System1, V::Equal, R::WinA},
        {V::System2, V::System1, R::WinB}, // both prefer b
        {V::System2, V::System2, R::Tie},  // orders disagree
        {V::System2, V::Equal, R::WinB},
        {V::Equal, V::System1, R::WinB},
        {V::Equal, V::System2, R::WinA},
        {V::Equal, V::Equal, R::Tie},
    }};
    for (const auto& [fwd, rev, want] : table) {
        CAPTURE(verdict_name(fwd));
        CAPTURE(verdict_name(rev));
        CHECK(resolve_flip(fwd, rev) == want);
    }
}

TEST_CASE("dimension questions link the documented strategies") {
    const auto& qs = default_dimension_questions();
    REQUIRE(qs.size() == 5);
    CHECK(qs[0].strategy_ids ==
          std::vector<std::string>{"motivational_encouragement", "progress_tracking"});
    CHECK(qs[4].strategy_ids == std::vector<std::string>{"friendly_tone"});
    for (const auto& q : qs) {
        CHECK_FALSE(q.question.empty());
        for (const auto& id : q.strategy_ids) CHECK(taxonomy().find_descriptor(id) != nullptr);
    }
}

TEST_CASE("judge runs both orders and resolves the pair") {
    TempDir tmp;
    DialogueTranscript a = mini_transcript("aaaa", PolicyKind::Pats);
    DialogueTranscript b = mini_transcript("bbbb", PolicyKind::Simple);

    SUBCASE("consistent preference for the first transcript") {
        // forward: rationale + "1" (prefers a); reversed: rationale + "2" (prefers a)
        Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
                   std::make_shared<QueueProvider>(
                       std::vector<std::string>{"rationale fwd", "1", "rationale rev", "2"}));
        Judge judge(gw, prompts(), JudgeConfig{});
        PairedEvaluation p = judge.judge_pair(a, b);
        REQUIRE(p.valid());
        CHECK(p.forward->choice == Verdict::System1);
        CHECK(p.reversed->choice == Verdict::System2);
        CHECK(p.resolved == Resolved::WinA);
        CHECK_FALSE(p.question_id.has_value());
    }

    SUBCASE("position-biased judge collapses to a tie") {
        Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
                   std::make_shared<QueueProvider>(
                       std::vector<std::string>{"r1", "1", "r2", "1"}));
        Judge judge(gw, prompts(), JudgeConfig{});
        CHECK(judge.judge_pair(a, b).resolved == Resolved::Tie);
    }

    SUBCASE("choice token repair succeeds") {
        Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
                   std::make_shared<QueueProvider>(std::vector<std::string>{
                       "r1", "I pick the first", "1", "r2", "2"}));
        Judge judge(gw, prompts(), JudgeConfig{});
        PairedEvaluation p = judge.judge_pair(a, b);
        REQUIRE(p.valid());
        CHECK(p.resolved == Resolved::WinA);
        CHECK(judge.exclusions().empty());
    }

    SUBCASE("unparseable choice after repair excludes the pair") {
        Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
                   std::make_shared<QueueProvider>(std::vector<std::string>{
                       "r1", "first", "the first one", "r2", "2"}));
        Judge judge(gw, prompts(), JudgeConfig{});
        PairedEvaluation p = judge.judge_pair(a, b);
        CHECK_FALSE(p.valid());
        CHECK_FALSE(p.forward.has_value());
        REQUIRE(p.reversed.has_value()); // the other order still parsed
        REQUIRE(judge.exclusions().size() == 1);
        CHECK(contains(judge.exclusions()[0], "aaaa"));
    }

    SUBCASE("dimension questions flow into the prompts") {
        auto queue = std::make_shared<QueueProvider>(
            std::vector<std::string>{"r1", "3", "r2", "3"});
        Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"), queue);
        Judge judge(gw, prompts(), JudgeConfig{});
        PairedEvaluation p = judge.judge_pair(a, b, default_dimension_questions()[0]);
        CHECK(p.question_id == 1);
        CHECK(p.resolved == Resolved::Tie);
        bool question_seen = false;
        for (const auto& req : queue->requests)
            question_seen = question_seen ||
                            contains(req.messages.back().content, "better motivates or supports");
        CHECK(question_seen);
    }

    SUBCASE("mismatched pairs are rejected") {
        Gateway gw(fast_config(GatewayMode::Record, tmp.path() / "fx"),
                   std::make_shared<ScriptedProvider>());
        Judge judge(gw, prompts(), JudgeConfig{});
        DialogueTranscript other_profile = mini_transcript("cccc", PolicyKind::Simple, "LLLLL");
        CHECK_THROWS_AS(judge.judge_pair(a, other_profile), ValidationError);
        DialogueTranscript other_subject =
            mini_transcript("dddd", PolicyKind::Simple, "HHHHH", "img-2");
        CHECK_THROWS_AS(judge.judge_pair(a, other_subject), ValidationError);
    }
}

TEST_CASE("preference report aggregates overall, by task, and by profile") {
    std::vector<PairOutcome> outcomes;
    for (int i = 0; i < 6; ++i) outcomes.push_back({Resolved::WinA, TaskKind::Image, "HHHHH"});
    for (int i = 0; i < 2; ++i) outcomes.push_back({Resolved::Tie, TaskKind::Image, "HHHHH"});
    for (int i = 0; i < 2; ++i) outcomes.push_back({Resolved::WinB, TaskKind::Story, "LLLLL"});

    PreferenceReport r = preference_report(outcomes, 3);
    CHECK(r.overall.n == 10);
    CHECK(r.overall.win_rate == doctest::Approx(0.7));
    CHECK(r.excluded == 3);
    CHECK(r.by_task.at("image").wins == 6);
    CHECK(r.by_task.at("story").losses == 2);
    CHECK(r.by_profile.at("HHHHH").n == 8);

    auto j = r.to_json();
    CHECK(j["overall"]["win_rate"].get<double>() == doctest::Approx(0.7));
    CHECK(contains(r.to_csv(), "task:image,"));
    CHECK(contains(r.to_csv(), "profile:LLLLL,"));

    CHECK_THROWS_AS(preference_report({}), ValidationError);
}

TEST_CASE("agreement report builds fleiss counts and pairwise cohen") {
    AgreementReport r = agreement_report(
        {"forward", "reversed"},
        {{"win", "win", "tie", "loss"}, {"win", "tie", "tie", "loss"}});
    CHECK_FALSE(r.fleiss.degenerate);
    REQUIRE(r.cohen.size() == 2);
    CHECK(r.cohen[0][0] == 1.0);
    CHECK(r.cohen[0][1] == r.cohen[1][0]);
    CHECK(r.cohen[0][1] ==
          stats::cohen_kappa({"win", "win", "tie", "loss"}, {"win", "tie", "tie", "loss"}).value);
    CHECK(contains(r.to_csv(), "fleiss,"));

    // unanimous single-category ratings are degenerate, pinned to 1
    AgreementReport unanimous =
        agreement_report({"a", "b"}, {{"win", "win"}, {"win", "win"}});
    CHECK(unanimous.fleiss.degenerate);
    CHECK(unanimous.fleiss.value == 1.0);

    CHECK_THROWS_AS(agreement_report({"solo"}, {{"win"}}), ValidationError);
    CHECK_THROWS_AS(agreement_report({"a", "b"}, {{"win"}, {"win", "tie"}}), ValidationError);
}

TEST_CASE("strategy usage counts every pick across episodes") {
    DialogueTranscript t1 = mini_transcript("t1", PolicyKind::Pats);
    StrategyEpisode e1;
    e1.chosen_trait = {TraitId::Neuroticism, TraitLevel::High};
    e1.chosen_strategies = {"motivational_encouragement", "normalize_errors"};
    StrategyEpisode e2;
    e2.chosen_trait = {TraitId::Extraversion, TraitLevel::High};
    e2.chosen_strategies = {"friendly_tone"};
    t1.episodes = {e1, e2};

    DialogueTranscript t2 = mini_transcript("t2", PolicyKind::Pats);
    StrategyEpisode e3;
    e3.chosen_trait = {TraitId::Neuroticism, TraitLevel::High};
    e3.chosen_strategies = {"motivational_encouragement"};
    t2.episodes = {e3};

    DialogueTranscript baseline = mini_transcript("t3", PolicyKind::Simple);

    StrategyUsageReport r = strategy_usage({t1, t2, baseline}, taxonomy());
    CHECK(r.total == 4);
    REQUIRE_FALSE(r.counts.empty());
    CHECK(r.counts[0].first == "motivational_encouragement");
    CHECK(r.counts[0].second == 2);
    CHECK(r.percentages.at("motivational_encouragement") == doctest::Approx(50.0));
    CHECK(r.percentages.at("friendly_tone") == doctest::Approx(25.0));
    CHECK(r.by_trait.at(TraitKey{TraitId::Neuroticism, TraitLevel::High})
              .at("motivational_encouragement") == 2);

    DialogueTranscript bad = mini_transcript("t4", PolicyKind::Pats);
    StrategyEpisode eb;
    eb.chosen_strategies = {"ghost_strategy"};
    bad.episodes = {eb};
    CHECK_THROWS_AS(strategy_usage({bad}, taxonomy()), ValidationError);
}

TEST_CASE("judged level CSV parsing") {
    TempDir tmp;
    const auto csv = tmp.path() / "judged.csv";
    util::write_file_atomic(csv, "dialog_id,O,C,E,A,N\nd1,H,L,h,low,High\n");
    JudgedLevels j = load_judged_levels(csv);
    REQUIRE(j.count("d1"));
    CHECK(j["d1"] == std::array<TraitLevel, 5>{TraitLevel::High, TraitLevel::Low, TraitLevel::High,
                                               TraitLevel::Low, TraitLevel::High});

    util::write_file_atomic(csv, "dialog_id,O,C,E,A,N\nd1,H,L\n");
    CHECK_THROWS_AS(load_judged_levels(csv), SchemaError);
    util::write_file_atomic(csv, "dialog_id,O,C,E,A,N\nd1,H,L,X,L,H\n");
    CHECK_THROWS_AS(load_judged_levels(csv), SchemaError);
}

TEST_CASE("persona fidelity computes per-trait F1 against assigned profiles") {
    std::vector<DialogueTranscript> corpus = {
        mini_transcript("d1", PolicyKind::Pats, "HHHHH"),
        mini_transcript("d2", PolicyKind::Pats, "HLLLL"),
        mini_transcript("d3", PolicyKind::Pats, "LHLHL"),
    };
    JudgedLevels judged;
    // d1 judged perfectly, d2 misses Openness, d3 judged perfectly
    judged["d1"] = {TraitLevel::High, TraitLevel::High, TraitLevel::High, TraitLevel::High,
                    TraitLevel::High};
    judged["d2"] = {TraitLevel::Low, TraitLevel::Low, TraitLevel::Low, TraitLevel::Low,
                    TraitLevel::Low};
    judged["d3"] = {TraitLevel::Low, TraitLevel::High, TraitLevel::Low, TraitLevel::High,
                    TraitLevel::Low};

    FidelityReport r = persona_fidelity(corpus, judged);
    // Openness: truth {H,H,L}, pred {H,L,L} -> tp=1 fp=0 fn=1 -> F1 = 2/3
    CHECK(r.f1[0] == doctest::Approx(2.0 / 3.0));
    for (size_t i = 1; i < 5; ++i) CHECK(r.f1[i] == doctest::Approx(1.0));
    CHECK(r.macro == doctest::Approx((2.0 / 3.0 + 4.0) / 5.0));
    CHECK(contains(r.to_csv(), "Openness,"));

    JudgedLevels incomplete = judged;
    incomplete.erase("d2");
    CHECK_THROWS_WITH_AS(persona_fidelity(corpus, incomplete),
                         "persona_fidelity: missing judgments for d2", CoverageError);
}

TEST_CASE("vacuous traits pin F1 to 1") {
    // everyone Low on every trait and judged Low: no positives anywhere
    std::vector<DialogueTranscript> corpus = {mini_transcript("d1", PolicyKind::Pats, "LLLLL")};
    JudgedLevels judged;
    judged["d1"] = {TraitLevel::Low, TraitLevel::Low, TraitLevel::Low, TraitLevel::Low,
                    TraitLevel::Low};
    FidelityReport r = persona_fidelity(corpus, judged);
    for (double f : r.f1) CHECK(f == 1.0);
    CHECK(r.macro == doctest::Approx(1.0));
}
