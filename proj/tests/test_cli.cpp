#include <doctest.h>

#include <fstream>
#include <sstream>

#include "pats/cli.hpp"
#include "pats/evaluator.hpp"
#include "pats/orchestrator.hpp"
#include "pats/persona.hpp"
#include "pats/prompts.hpp"
#include "pats/taxonomy.hpp"
#include "pats/transcript.hpp"
#include "pats/util.hpp"
#include "support/providers.hpp"

using namespace pats;
using namespace pats::testing;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out, err;
};

CliResult run_cli(const std::vector<std::string>& args, const std::string& stdin_text = {}) {
    std::ostringstream out, err;
    std::istringstream in(stdin_text);
    CliResult r;
    r.code = pats::cli::run(args, out, err, in);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Workspace with a subject manifest (one image, one story), an experiment
/// config pointing at a local fixtures directory, and helpers to pre-record
/// scripted fixtures so the CLI can run in replay mode.
struct Workspace {
    TempDir tmp;
    fs::path config_path, fixtures, manifest;

    Workspace() {
        fixtures = tmp.path() / "fixtures";
        manifest = tmp.path() / "subjects.json";
        util::write_file_atomic(tmp.path() / "picture.png", "not really a png, just bytes");
        util::write_file_atomic(manifest, R"({
  "images": [{"subject_id": "img-1", "path": "picture.png"}],
  "stories": [{"subject_id": "story-1", "title": "The Cloud",
               "body": "A cloud let its rain go to the flowers.",
               "moral": "Share what you carry."}]
})");
        config_path = tmp.path() / "experiment.json";
        util::write_file_atomic(config_path, R"({
  "subjects": "subjects.json",
  "fixtures_dir": "fixtures",
  "systems": ["simple", "personality", "pats"],
  "runs_per_cell": 1
})");
    }

    ExperimentPlan image_top10_plan() const {
        auto tasks = load_subjects(manifest);
        std::erase_if(tasks, [](const TaskSpec& t) { return t.kind != TaskKind::Image; });
        std::vector<PersonalityProfile> profiles;
        for (const auto& code :
             top_profiles(ProfilePopularity::from_csv(default_data_dir() / "profile_popularity.csv"),
                          10))
            profiles.push_back(parse_profile_code(code));
        return plan_matrix(tasks, profiles,
                           {PolicyKind::Simple, PolicyKind::Personality, PolicyKind::Pats}, 1);
    }

    /// Records every gateway exchange the matrix needs into `fixtures` using
    /// the deterministic scripted provider.
    void record_matrix_fixtures() const {
        Taxonomy taxonomy = load_taxonomy(default_data_dir() / "taxonomy.json");
        PromptLibrary prompts(default_data_dir() / "prompts", "v1");
        gateway::Gateway gw(fast_config(gateway::GatewayMode::Record, fixtures),
                            std::make_shared<ScriptedProvider>());
        TempDir scratch;
        run_matrix(gw, prompts, taxonomy, image_top10_plan(), RunConfig{}, scratch.path(), 4);
    }

    void record_judge_fixtures(const fs::path& corpus_dir) const {
        PromptLibrary prompts(default_data_dir() / "prompts", "v1");
        gateway::Gateway gw(fast_config(gateway::GatewayMode::Record, fixtures),
                            std::make_shared<ScriptedProvider>());
        Judge judge(gw, prompts, JudgeConfig{});
        auto corpus = load_transcripts(corpus_dir);
        for (const auto& a : corpus) {
            if (a.system != PolicyKind::Pats) continue;
            for (const auto& b : corpus)
                if (b.system != PolicyKind::Pats && b.task_kind == a.task_kind &&
                    b.subject_id == a.subject_id && b.profile_code == a.profile_code)
                    judge.judge_pair(a, b);
        }
    }
};

} // namespace

TEST_CASE("validate reports the bundled taxonomy and an optional config") {
    CliResult r = run_cli({"validate"});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "taxonomy OK (17 strategies, 10 trait mappings)"));

    Workspace ws;
    r = run_cli({"validate", "--config", ws.config_path.string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "config OK (2 subjects)"));
}

TEST_CASE("help and argument errors use the documented exit codes") {
    CliResult help = run_cli({"--help"});
    CHECK(help.code == cli::kExitOk);
    CHECK(contains(help.out, "judge"));

    CliResult bogus = run_cli({"frobnicate"});
    CHECK(bogus.code == cli::kExitConfig);
    CHECK(contains(bogus.err, "error:"));

    CliResult missing = run_cli({"run"}); // --config is required
    CHECK(missing.code == cli::kExitConfig);

    TempDir tmp;
    util::write_file_atomic(tmp.path() / "broken.json", "{not json");
    CliResult bad = run_cli({"validate", "--config", (tmp.path() / "broken.json").string()});
    CHECK(bad.code == cli::kExitConfig);
    CHECK(contains(bad.err, "error:"));
}

TEST_CASE("run, judge, and report form a replayable pipeline") {
    Workspace ws;
    ws.record_matrix_fixtures();
    const fs::path run_out = ws.tmp.path() / "run_out";

    // full matrix from recorded fixtures
    CliResult r = run_cli({"run", "--config", ws.config_path.string(), "--out", run_out.string(),
                           "--task", "image", "--profiles", "top10", "--parallelism", "4"});
    CAPTURE(r.err);
    REQUIRE(r.code == cli::kExitOk);
    CHECK(contains(r.out, "planned 30, executed 30, skipped 0, done 30, failed 0"));
    CHECK(fs::exists(run_out / "ledger.jsonl"));
    CHECK(fs::exists(run_out / "usage.json"));
    CHECK(load_transcripts(run_out / "transcripts").size() == 30);

    // a second invocation resumes off the ledger and executes nothing
    r = run_cli({"run", "--config", ws.config_path.string(), "--out", run_out.string(), "--task",
                 "image", "--profiles", "top10"});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "planned 30, executed 0, skipped 30, done 30, failed 0"));

    // judge the corpus: every tutoring dialog against both baselines
    ws.record_judge_fixtures(run_out / "transcripts");
    const fs::path judge_out = ws.tmp.path() / "judge_out";
    r = run_cli({"judge", "--config", ws.config_path.string(), "--corpus",
                 (run_out / "transcripts").string(), "--out", judge_out.string(), "--seed", "7"});
    CAPTURE(r.err);
    REQUIRE(r.code == cli::kExitOk);
    CHECK(contains(r.out, "judged 20 pairs (20 valid, 0 excluded)"));
    CHECK(fs::exists(judge_out / "outcomes.jsonl"));
    std::istringstream lines(util::read_file(judge_out / "outcomes.jsonl"));
    size_t n = 0;
    for (std::string line; std::getline(lines, line);)
        if (!util::trim(line).empty()) ++n;
    CHECK(n == 20);

    // judged trait levels that match every assigned profile exactly
    const fs::path judged_csv = ws.tmp.path() / "judged.csv";
    {
        std::ostringstream csv;
        csv << "dialog_id,O,C,E,A,N\n";
        for (const auto& t : load_transcripts(run_out / "transcripts")) {
            csv << t.dialog_id;
            for (char c : t.profile_code) csv << "," << c;
            csv << "\n";
        }
        util::write_file_atomic(judged_csv, csv.str());
    }

    const fs::path report_out = ws.tmp.path() / "report_out";
    r = run_cli({"report", "--corpus", (run_out / "transcripts").string(), "--out",
                 report_out.string(), "--outcomes", (judge_out / "outcomes.jsonl").string(),
                 "--judged", judged_csv.string()});
    CAPTURE(r.err);
    REQUIRE(r.code == cli::kExitOk);
    for (const char* name : {"strategy_usage.json", "strategy_usage.csv", "preference.json",
                             "preference.csv", "agreement.json", "agreement.csv", "fidelity.json",
                             "fidelity.csv"})
        CHECK(fs::exists(report_out / name));
    // the scripted judge always answers "1", so the flip rule resolves every pair to a tie
    CHECK(contains(r.out, "win_rate 0.5"));
    CHECK(contains(r.out, "persona fidelity macro F1 1"));
}

TEST_CASE("replay against missing fixtures fails the run with exit code 2") {
    Workspace ws; // fixtures directory left empty
    CliResult r = run_cli({"run", "--config", ws.config_path.string(), "--out",
                           (ws.tmp.path() / "out").string(), "--task", "image", "--profiles",
                           "top10"});
    CHECK(r.code == cli::kExitRuntime);
    CHECK(contains(r.out, "failed 30"));
}

TEST_CASE("chat drives a dialog from standard input and stores the transcript") {
    Workspace ws;
    const std::vector<std::string> lines = {"I see a tree (points)", "It is green",
                                            "A big sun too"};

    // pre-record the exchange with a student stand-in that types the same lines
    {
        Taxonomy taxonomy = load_taxonomy(default_data_dir() / "taxonomy.json");
        PromptLibrary prompts(default_data_dir() / "prompts", "v1");
        gateway::Gateway gw(fast_config(gateway::GatewayMode::Record, ws.fixtures),
                            std::make_shared<ScriptedProvider>());
        auto tasks = load_subjects(ws.manifest);
        std::erase_if(tasks, [](const TaskSpec& t) { return t.kind != TaskKind::Image; });
        Cell cell;
        cell.task = tasks.front();
        cell.profile = parse_profile_code("HHHHH");
        cell.system = PolicyKind::Simple;
        size_t next = 0;
        run_dialogue(gw, prompts, taxonomy, cell, RunConfig{}, [&](const std::string&) {
            const std::string line = next < lines.size() ? lines[next++] : "";
            Utterance u{"student", util::trim(line), extract_body_cues(line), false};
            if (u.text.empty()) u.text = "(remains silent)";
            return u;
        });
    }

    std::string stdin_text;
    for (const auto& l : lines) stdin_text += l + "\n";
    const fs::path chat_out = ws.tmp.path() / "chat_out";
    CliResult r = run_cli({"chat", "--config", ws.config_path.string(), "--out", chat_out.string(),
                           "--system", "simple"},
                          stdin_text);
    CAPTURE(r.err);
    REQUIRE(r.code == cli::kExitOk);
    CHECK(contains(r.out, "Student> "));
    CHECK(contains(r.out, "stored "));

    auto stored = load_transcripts(chat_out / "transcripts");
    REQUIRE(stored.size() == 1);
    CHECK(stored[0].system == PolicyKind::Simple);
    CHECK(stored[0].utterances.size() >= 5);
    CHECK(stored[0].utterances[1].text == "I see a tree (points)");
}
