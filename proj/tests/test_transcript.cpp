#include <doctest.h>

#include <set>

#include "pats/errors.hpp"
#include "pats/prompts.hpp"
#include "pats/student.hpp"
#include "pats/taxonomy.hpp"
#include "pats/transcript.hpp"
#include "pats/util.hpp"
#include "support/providers.hpp"

using namespace pats;
using namespace pats::testing;

TEST_CASE("body cue extraction captures parenthesized spans verbatim") {
    CHECK(extract_body_cues("Hello! (waves) Look here (points at the tree).") ==
          std::vector<std::string>{"(waves)", "(points at the tree)"});
    CHECK(extract_body_cues("no cues at all").empty());
    CHECK(extract_body_cues("unbalanced (oops").empty());
}

TEST_CASE("utterance sanitizer strips role prefixes") {
    CHECK(sanitize_utterance("Teacher:  Hello there ") == "Hello there");
    CHECK(sanitize_utterance("student: I see a cat") == "I see a cat");
    CHECK(sanitize_utterance("Plain text") == "Plain text");
}

TEST_CASE("numbered candidate parsing accepts common list shapes") {
    const std::string five = "1. one\n2) two\n3: three\n 4. four \n5. five (grins)\n";
    auto parsed = parse_numbered_candidates(five, 5);
    REQUIRE(parsed.size() == 5);
    CHECK(parsed[1] == "two");
    CHECK(parsed[4] == "five (grins)");

    CHECK(parse_numbered_candidates("1. only\n2. two", 5).empty());       // too few
    CHECK(parse_numbered_candidates("freeform text with no list", 5).empty());
    CHECK(parse_numbered_candidates("1. a\n2. b\n3. c\n4. d\n5. e\n6. f", 5).empty());
}

TEST_CASE("conversation rendering uses the Teacher:/Student: format") {
    std::vector<Utterance> utts = {{"teacher", "Hi", {}, false}, {"student", "Hello", {}, false}};
    CHECK(render_conversation(utts) == "Teacher: Hi\nStudent: Hello");
    CHECK(render_conversation({}).empty());
}

TEST_CASE("dialog ids are stable and distinct across the experiment axes") {
    TaskSpec img = synthetic_image_task("img-1");
    TaskSpec story = synthetic_story_task("story-1");

    const std::string base = make_dialog_id(img, "HHHHH", PolicyKind::Pats, 0, "v1");
    CHECK(base.size() == 16);
    CHECK(base == make_dialog_id(img, "HHHHH", PolicyKind::Pats, 0, "v1"));

    std::set<std::string> ids;
    for (const TaskSpec& task : {img, story})
        for (const std::string code : {"HHHHH", "LLLLL"})
            for (PolicyKind sys : {PolicyKind::Simple, PolicyKind::Personality, PolicyKind::Pats})
                for (int run : {0, 1})
                    for (const std::string ver : {"v1", "v2"})
                        ids.insert(make_dialog_id(task, code, sys, run, ver));
    CHECK(ids.size() == 2u * 2 * 3 * 2 * 2);
}

TEST_CASE("transcripts round-trip through JSON and disk") {
    DialogueTranscript t;
    t.dialog_id = "abc123";
    t.task_kind = TaskKind::Story;
    t.subject_id = "story-1";
    t.profile_code = "HLHLH";
    t.system = PolicyKind::Pats;
    t.metadata = {{"seed", 7}, {"cap_forced", false}};
    t.utterances = {{"teacher", "Hi (smiles)", {"(smiles)"}, false},
                    {"student", "(remains silent)", {"(remains silent)"}, true}};
    StrategyEpisode e;
    e.chosen_trait = {TraitId::Neuroticism, TraitLevel::High};
    e.chosen_strategies = {"motivational_encouragement", "normalize_errors"};
    e.plan = "Keep it gentle. This should take 2 utterances.";
    e.estimated_utterances = 2;
    e.start_teacher_turn = 2;
    e.end_teacher_turn = 4;
    t.episodes.push_back(e);
    t.usage["teacher-model"] = {123, 45};

    DialogueTranscript back = DialogueTranscript::from_json(t.to_json());
    CHECK(back.dialog_id == t.dialog_id);
    CHECK(back.task_kind == t.task_kind);
    CHECK(back.profile_code == t.profile_code);
    CHECK(back.system == t.system);
    CHECK(back.metadata == t.metadata);
    REQUIRE(back.utterances.size() == 2);
    CHECK(back.utterances[1].flagged);
    REQUIRE(back.episodes.size() == 1);
    CHECK(back.episodes[0].chosen_trait == e.chosen_trait);
    CHECK(back.episodes[0].chosen_strategies == e.chosen_strategies);
    CHECK(back.episodes[0].end_teacher_turn == 4);
    CHECK(back.usage.at("teacher-model").input_tokens == 123);
    CHECK(back.teacher_turns() == 1);

    TempDir tmp;
    store_transcripts(tmp.path() / "corpus", {t});
    auto loaded = load_transcripts(tmp.path() / "corpus");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].to_json() == t.to_json());
    // single-file load works too
    auto single = load_transcripts(tmp.path() / "corpus" / "abc123.jsonl");
    REQUIRE(single.size() == 1);
}

TEST_CASE("corpus loader reports file and line on malformed input") {
    TempDir tmp;
    const auto file = tmp.path() / "bad.jsonl";
    const std::string good_line =
        R"({"dialog_id":"x","task":{"kind":"image","subject_id":"s"},)"
        R"("profile_code":"HHHHH","system":"simple","utterances":[]})";
    util::write_file_atomic(file, good_line + "\nnot json\n");
    try {
        load_transcripts(file);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(contains(e.what(), "bad.jsonl:2"));
    }
    CHECK_THROWS_AS(load_transcripts(tmp.path() / "nowhere"), ConfigError);
}

TEST_CASE("prompt templates substitute slots and leave unknown braces alone") {
    CHECK(PromptLibrary::render_text("Hi {name}, {name}!", {{"name", "Ada"}}) == "Hi Ada, Ada!");
    CHECK(PromptLibrary::render_text("{missing} stays", {}) == "{missing} stays");
    CHECK(PromptLibrary::render_text("{a}{b}", {{"a", "1"}, {"b", "2"}}) == "12");
    // substituted content is not re-scanned
    CHECK(PromptLibrary::render_text("{a}", {{"a", "{b}"}, {"b", "x"}}) == "{b}");

    PromptLibrary prompts(default_data_dir() / "prompts", "v1");
    CHECK_FALSE(prompts.raw("responder_first_user").empty());
    CHECK(prompts.raw("responder_first_user").back() != '\n');
    CHECK_THROWS_AS(prompts.raw("no_such_template"), ConfigError);
    CHECK_THROWS_AS(PromptLibrary(default_data_dir() / "prompts", "v999"), ConfigError);
}
