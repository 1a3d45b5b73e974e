#include "pats/cli.hpp"

#include <algorithm>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pats/errors.hpp"
#include "pats/evaluator.hpp"
#include "pats/gateway.hpp"
#include "pats/orchestrator.hpp"
#include "pats/persona.hpp"
#include "pats/prompts.hpp"
#include "pats/taxonomy.hpp"
#include "pats/util.hpp"

namespace pats::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Experiment {
    json doc;
    fs::path base; // config file's directory; relative paths resolve against it

    fs::path resolve(const std::string& key, const fs::path& fallback) const {
        if (!doc.contains(key)) return fallback;
        fs::path p = doc.at(key).get<std::string>();
        return p.is_absolute() ? p : base / p;
    }
};

Experiment load_experiment(const fs::path& config_path) {
    Experiment e;
    e.doc = json::parse(util::read_file(config_path), nullptr, false);
    if (e.doc.is_discarded())
        throw ConfigError("experiment config is not valid JSON: " + config_path.string());
    e.base = config_path.parent_path();
    return e;
}

struct ProviderSetup {
    std::shared_ptr<gateway::Provider> provider;
    int rate_limit = 60;
    std::chrono::milliseconds rate_window{60000};
    std::vector<std::string> known_models;
    std::map<std::string, std::pair<double, double>> prices;
};

ProviderSetup load_providers(const std::optional<fs::path>& path) {
    ProviderSetup s;
    if (!path) return s;
    json doc = json::parse(util::read_file(*path), nullptr, false);
    if (doc.is_discarded())
        throw ConfigError("provider config is not valid JSON: " + path->string());
    s.rate_limit = doc.value("rate_limit", 60);
    s.rate_window = std::chrono::milliseconds(doc.value("rate_window_ms", 60000));
    s.known_models = doc.value("known_models", std::vector<std::string>{});
    // keep the object alive: items() holds a reference to its range
    const json prices = doc.value("prices", json::object());
    for (const auto& [model, jp] : prices.items())
        s.prices[model] = {jp.value("input", 0.0), jp.value("output", 0.0)};
    const std::string type = doc.value("type", "none");
    if (type == "http") {
        gateway::HttpProviderConfig h;
        h.base_url = doc.at("base_url").get<std::string>();
        h.path = doc.value("path", h.path);
        h.api_key_env = doc.value("api_key_env", h.api_key_env);
        h.timeout_seconds = doc.value("timeout_seconds", h.timeout_seconds);
        s.provider = gateway::make_http_provider(h);
    } else if (type != "none") {
        throw ConfigError("unknown provider type: " + type);
    }
    return s;
}

gateway::GatewayMode parse_mode(const std::string& mode) {
    if (mode == "replay") return gateway::GatewayMode::Replay;
    if (mode == "record") return gateway::GatewayMode::Record;
    if (mode == "live") return gateway::GatewayMode::Live;
    throw ConfigError("unknown mode: " + mode);
}

struct Stack {
    Taxonomy taxonomy;
    PromptLibrary prompts;
    gateway::Gateway gw;
    ProviderSetup providers;
};

Stack build_stack(const Experiment& e, const std::optional<fs::path>& providers_path,
                  const std::string& mode, const fs::path& out_dir) {
    auto setup = load_providers(providers_path);
    gateway::GatewayConfig gcfg;
    gcfg.mode = parse_mode(mode);
    gcfg.fixtures_dir = e.resolve("fixtures_dir", out_dir / "fixtures");
    gcfg.rate_limit = setup.rate_limit;
    gcfg.rate_window = setup.rate_window;
    gcfg.known_models = setup.known_models;
    if (gcfg.mode != gateway::GatewayMode::Replay && !setup.provider)
        throw ConfigError("mode '" + mode + "' needs a provider config with type \"http\"");

    const fs::path data = default_data_dir();
    Taxonomy taxonomy = load_taxonomy(e.resolve("taxonomy", data / "taxonomy.json"));
    PromptLibrary prompts(e.resolve("prompts_dir", data / "prompts"),
                          e.doc.value("prompt_version", "v1"));
    return Stack{std::move(taxonomy), std::move(prompts),
                 gateway::Gateway(std::move(gcfg), setup.provider), std::move(setup)};
}

gateway::Sampling sampling_from(const json& j) {
    gateway::Sampling s;
    if (j.contains("temperature")) s.temperature = j["temperature"].get<double>();
    if (j.contains("max_output_tokens")) s.max_output_tokens = j["max_output_tokens"].get<int>();
    return s;
}

RunConfig run_config_from(const Experiment& e, std::uint64_t seed) {
    RunConfig rc;
    rc.student.model_id = e.doc.value("student_model", rc.student.model_id);
    rc.teacher_model_id = e.doc.value("teacher_model", rc.teacher_model_id);
    rc.teacher_turn_cap = e.doc.value("teacher_turn_cap", rc.teacher_turn_cap);
    rc.template_version = e.doc.value("prompt_version", rc.template_version);
    const auto sampling = sampling_from(e.doc.value("sampling", json::object()));
    rc.teacher_sampling = sampling;
    rc.student.sampling = sampling;
    rc.seed = seed;
    return rc;
}

std::vector<TaskSpec> select_tasks(const Experiment& e, const std::string& task_filter) {
    auto tasks = load_subjects(e.resolve("subjects", {}));
    if (task_filter == "both") return tasks;
    const TaskKind kind = task_kind_from_name(task_filter);
    std::erase_if(tasks, [&](const TaskSpec& t) { return t.kind != kind; });
    return tasks;
}

std::vector<PersonalityProfile> select_profiles(const Experiment& e,
                                                const std::string& profile_filter) {
    if (profile_filter == "all") return enumerate_profiles();
    if (profile_filter == "top10") {
        const fs::path file = e.resolve("popularity", default_data_dir() / "profile_popularity.csv");
        auto codes = top_profiles(ProfilePopularity::from_csv(file), 10);
        std::vector<PersonalityProfile> out;
        for (const auto& c : codes) out.push_back(parse_profile_code(c));
        return out;
    }
    throw ConfigError("unknown profile selection: " + profile_filter);
}

std::vector<PolicyKind> select_systems(const Experiment& e) {
    std::vector<PolicyKind> out;
    for (const auto& s : e.doc.value("systems", std::vector<std::string>{"pats"}))
        out.push_back(policy_kind_from_name(s));
    return out;
}

int cmd_run(const fs::path& config_path, const std::optional<fs::path>& providers_path,
            const fs::path& out_dir, const std::string& mode, int parallelism, std::uint64_t seed,
            const std::string& task_filter, const std::string& profile_filter, std::ostream& out) {
    Experiment e = load_experiment(config_path);
    Stack stack = build_stack(e, providers_path, mode, out_dir);

    ExperimentPlan plan = plan_matrix(select_tasks(e, task_filter), select_profiles(e, profile_filter),
                                      select_systems(e), e.doc.value("runs_per_cell", 1));
    RunConfig rc = run_config_from(e, seed);

    MatrixSummary s =
        run_matrix(stack.gw, stack.prompts, stack.taxonomy, plan, rc, out_dir, parallelism);
    out << "planned " << s.planned << ", executed " << s.executed << ", skipped " << s.skipped
        << ", done " << s.done << ", failed " << s.failed << "\n";

    json usage = stack.gw.usage_report(stack.providers.prices);
    usage["seed"] = seed;
    util::write_file_atomic(out_dir / "usage.json", usage.dump(2) + "\n");
    return s.failed == 0 ? kExitOk : kExitRuntime;
}

int cmd_validate(const std::optional<fs::path>& config_path, std::ostream& out,
                 std::ostream& err) {
    fs::path taxonomy_path = default_data_dir() / "taxonomy.json";
    std::optional<Experiment> e;
    if (config_path) {
        e = load_experiment(*config_path);
        taxonomy_path = e->resolve("taxonomy", taxonomy_path);
    }
    Taxonomy t = load_taxonomy(taxonomy_path); // throws on schema/validation problems
    ValidationReport report = validate_taxonomy(t);
    for (const auto& f : report.findings) err << f.subject << ": " << f.reason << "\n";
    if (!report.ok()) return kExitConfig;
    out << "taxonomy OK (" << t.descriptors.size() << " strategies, " << t.mapping.size()
        << " trait mappings)\n";

    if (e) {
        const auto subjects = load_subjects(e->resolve("subjects", {}));
        PromptLibrary prompts(e->resolve("prompts_dir", default_data_dir() / "prompts"),
                              e->doc.value("prompt_version", "v1"));
        prompts.raw("responder_first_user"); // proves the version directory exists
        select_systems(*e);
        out << "config OK (" << subjects.size() << " subjects)\n";
    }
    return kExitOk;
}

json paired_to_json(const PairedEvaluation& p, TaskKind task, const std::string& profile_code) {
    json j = {{"dialog_a", p.dialog_a},
              {"dialog_b", p.dialog_b},
              {"task", task_kind_name(task)},
              {"profile_code", profile_code}};
    if (p.question_id) j["question_id"] = *p.question_id;
    if (p.forward) j["forward"] = verdict_name(p.forward->choice);
    if (p.reversed) j["reversed"] = verdict_name(p.reversed->choice);
    if (p.resolved) j["resolved"] = resolved_name(*p.resolved);
    return j;
}

int cmd_judge(const fs::path& config_path, const std::optional<fs::path>& providers_path,
              const fs::path& corpus_path, const fs::path& out_dir, const std::string& mode,
              std::uint64_t seed, int question_id, const std::string& baseline,
              std::ostream& out) {
    Experiment e = load_experiment(config_path);
    Stack stack = build_stack(e, providers_path, mode, out_dir);

    auto corpus = load_transcripts(corpus_path);
    if (corpus.empty()) throw ConfigError("empty corpus: " + corpus_path.string());

    std::optional<DimensionQuestion> question;
    if (question_id != 0) {
        const auto& qs = default_dimension_questions();
        auto it = std::find_if(qs.begin(), qs.end(),
                               [&](const auto& q) { return q.id == question_id; });
        if (it == qs.end()) throw ConfigError("question id must be 1-5 (or 0 for overall)");
        question = *it;
    }

    // Pair every PATS transcript against each baseline sharing task subject and profile.
    auto wanted = [&](PolicyKind k) {
        if (baseline == "both") return k != PolicyKind::Pats;
        return k == policy_kind_from_name(baseline);
    };
    std::vector<std::pair<const DialogueTranscript*, const DialogueTranscript*>> pairs;
    for (const auto& a : corpus) {
        if (a.system != PolicyKind::Pats) continue;
        for (const auto& b : corpus)
            if (wanted(b.system) && b.task_kind == a.task_kind && b.subject_id == a.subject_id &&
                b.profile_code == a.profile_code)
                pairs.emplace_back(&a, &b);
    }
    if (pairs.empty()) throw ConfigError("no judgeable pairs in corpus " + corpus_path.string());
    std::shuffle(pairs.begin(), pairs.end(), std::mt19937_64(seed));

    JudgeConfig jcfg;
    jcfg.model_id = e.doc.value("judge_model", jcfg.model_id);
    jcfg.sampling = sampling_from(e.doc.value("sampling", json::object()));
    Judge judge(stack.gw, stack.prompts, jcfg);

    fs::create_directories(out_dir);
    std::ostringstream lines;
    size_t valid = 0;
    for (const auto& [a, b] : pairs) {
        PairedEvaluation p = judge.judge_pair(*a, *b, question);
        if (p.valid()) ++valid;
        lines << paired_to_json(p, a->task_kind, a->profile_code).dump() << "\n";
    }
    util::write_file_atomic(out_dir / "outcomes.jsonl", lines.str());
    json meta = {{"seed", seed},
                 {"pairs", pairs.size()},
                 {"valid", valid},
                 {"excluded", pairs.size() - valid},
                 {"exclusions", judge.exclusions()}};
    if (question) meta["question_id"] = question->id;
    util::write_file_atomic(out_dir / "judge_meta.json", meta.dump(2) + "\n");
    out << "judged " << pairs.size() << " pairs (" << valid << " valid, "
        << pairs.size() - valid << " excluded)\n";
    return kExitOk;
}

int cmd_report(const std::optional<fs::path>& config_path, const fs::path& corpus_path,
               const fs::path& out_dir, const std::optional<fs::path>& outcomes_path,
               const std::optional<fs::path>& judged_path, std::ostream& out) {
    fs::path taxonomy_path = default_data_dir() / "taxonomy.json";
    if (config_path) taxonomy_path = load_experiment(*config_path).resolve("taxonomy", taxonomy_path);
    Taxonomy taxonomy = load_taxonomy(taxonomy_path);

    auto corpus = load_transcripts(corpus_path);
    if (corpus.empty()) throw ConfigError("empty corpus: " + corpus_path.string());
    fs::create_directories(out_dir);

    StrategyUsageReport usage = strategy_usage(corpus, taxonomy);
    util::write_file_atomic(out_dir / "strategy_usage.json", usage.to_json().dump(2) + "\n");
    util::write_file_atomic(out_dir / "strategy_usage.csv", usage.to_csv());
    out << "strategy usage over " << usage.total << " strategy picks\n";

    if (outcomes_path) {
        std::istringstream in(util::read_file(*outcomes_path));
        std::string line;
        std::vector<PairOutcome> outcomes;
        std::vector<std::string> forward, reversed;
        size_t excluded = 0;
        while (std::getline(in, line)) {
            if (util::trim(line).empty()) continue;
            json j = json::parse(line);
            if (!j.contains("resolved")) {
                ++excluded;
                continue;
            }
            PairOutcome o;
            const std::string r = j["resolved"].get<std::string>();
            o.resolved = r == "win_a" ? Resolved::WinA : r == "win_b" ? Resolved::WinB : Resolved::Tie;
            o.task = task_kind_from_name(j.value("task", "image"));
            o.profile_code = j.value("profile_code", "");
            outcomes.push_back(o);
            forward.push_back(j.value("forward", "?"));
            reversed.push_back(j.value("reversed", "?"));
        }
        PreferenceReport pref = preference_report(outcomes, excluded);
        util::write_file_atomic(out_dir / "preference.json", pref.to_json().dump(2) + "\n");
        util::write_file_atomic(out_dir / "preference.csv", pref.to_csv());
        // flipped evaluations treated as separate raters for agreement
        AgreementReport agree = agreement_report({"forward", "reversed"}, {forward, reversed});
        util::write_file_atomic(out_dir / "agreement.json", agree.to_json().dump(2) + "\n");
        util::write_file_atomic(out_dir / "agreement.csv", agree.to_csv());
        out << "preference: win_rate " << pref.overall.win_rate << " (n=" << pref.overall.n
            << ", p=" << pref.overall.p << ", excluded=" << excluded << ")\n";
    }

    if (judged_path) {
        FidelityReport fid = persona_fidelity(corpus, load_judged_levels(*judged_path));
        util::write_file_atomic(out_dir / "fidelity.json", fid.to_json().dump(2) + "\n");
        util::write_file_atomic(out_dir / "fidelity.csv", fid.to_csv());
        out << "persona fidelity macro F1 " << fid.macro << "\n";
    }
    return kExitOk;
}

int cmd_chat(const fs::path& config_path, const std::optional<fs::path>& providers_path,
             const fs::path& out_dir, const std::string& mode, std::uint64_t seed,
             const std::string& task_filter, const std::string& system_name,
             const std::string& profile_code, const std::string& subject_id, std::ostream& out,
             std::istream& in) {
    Experiment e = load_experiment(config_path);
    Stack stack = build_stack(e, providers_path, mode, out_dir);

    const std::string task_one = task_filter == "both" ? "image" : task_filter;
    auto tasks = select_tasks(e, task_one);
    if (tasks.empty()) throw ConfigError("no subjects for task " + task_one);
    auto it = subject_id.empty()
                  ? tasks.begin()
                  : std::find_if(tasks.begin(), tasks.end(),
                                 [&](const TaskSpec& t) { return t.subject_id == subject_id; });
    if (it == tasks.end()) throw ConfigError("unknown subject: " + subject_id);

    Cell cell;
    cell.task = *it;
    cell.profile = parse_profile_code(profile_code);
    cell.system = policy_kind_from_name(system_name);
    RunConfig rc = run_config_from(e, seed);

    auto human = [&](const std::string& teacher) {
        out << "Teacher: " << teacher << "\nStudent> " << std::flush;
        std::string line;
        if (!std::getline(in, line)) line = "(remains silent)";
        Utterance u{"student", util::trim(line), extract_body_cues(line), false};
        if (u.text.empty()) u.text = "(remains silent)";
        return u;
    };
    DialogueTranscript t = run_dialogue(stack.gw, stack.prompts, stack.taxonomy, cell, rc, human);
    // echo the closing teacher utterances that arrived after the last student turn
    for (auto rit = t.utterances.rbegin(); rit != t.utterances.rend(); ++rit) {
        if (rit->role != "teacher") break;
        out << "Teacher: " << rit->text << "\n";
    }
    store_transcripts(out_dir / "transcripts", {t});
    out << "stored " << (out_dir / "transcripts" / (t.dialog_id + ".jsonl")).string() << "\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::istream& in) {
    CLI::App app{"personality-aware tutoring simulations: run, judge, and report"};
    app.require_subcommand(1);

    std::string config, providers, out_dir = "out", mode = "replay";
    std::string task = "both", profiles = "all", baseline = "both";
    std::string corpus, outcomes, judged, system_name = "pats", profile_code = "HHHHH";
    std::string subject;
    int parallelism = 1, question = 0;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config, "experiment config JSON");
        if (needs_config) c->required();
        sub->add_option("--providers", providers, "provider config JSON");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--mode", mode)->check(CLI::IsMember({"replay", "record", "live"}));
        sub->add_option("--seed", seed, "rng seed, recorded in outputs");
    };

    auto* s_run = app.add_subcommand("run", "execute the experiment matrix (resumable)");
    add_common(s_run, true);
    s_run->add_option("--parallelism", parallelism)->check(CLI::PositiveNumber);
    s_run->add_option("--task", task)->check(CLI::IsMember({"image", "story", "both"}));
    s_run->add_option("--profiles", profiles)->check(CLI::IsMember({"all", "top10"}));

    auto* s_report = app.add_subcommand("report", "emit usage/preference/agreement/fidelity reports");
    add_common(s_report, false);
    s_report->add_option("--corpus", corpus, "transcript corpus dir or JSONL")->required();
    s_report->add_option("--outcomes", outcomes, "outcomes.jsonl from the judge subcommand");
    s_report->add_option("--judged", judged, "judged trait levels CSV");

    auto* s_judge = app.add_subcommand("judge", "pairwise-judge a corpus with order flipping");
    add_common(s_judge, true);
    s_judge->add_option("--corpus", corpus)->required();
    s_judge->add_option("--question", question, "dimension question 1-5, 0 = overall preference");
    s_judge->add_option("--baseline", baseline)
        ->check(CLI::IsMember({"simple", "personality", "both"}));

    auto* s_validate = app.add_subcommand("validate", "check taxonomy and config");
    add_common(s_validate, false);

    auto* s_chat = app.add_subcommand("chat", "type the student turns yourself (debugging)");
    add_common(s_chat, true);
    s_chat->add_option("--task", task)->check(CLI::IsMember({"image", "story", "both"}));
    s_chat->add_option("--system", system_name)
        ->check(CLI::IsMember({"simple", "personality", "pats"}));
    s_chat->add_option("--profile", profile_code, "five-letter profile code");
    s_chat->add_option("--subject", subject, "subject id (default: first of the task)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    auto opt_path = [](const std::string& s) {
        return s.empty() ? std::nullopt : std::optional<fs::path>(s);
    };

    try {
        if (*s_run)
            return cmd_run(config, opt_path(providers), out_dir, mode, parallelism, seed, task,
                           profiles, out);
        if (*s_report)
            return cmd_report(opt_path(config), corpus, out_dir, opt_path(outcomes),
                              opt_path(judged), out);
        if (*s_judge)
            return cmd_judge(config, opt_path(providers), corpus, out_dir, mode, seed, question,
                             baseline, out);
        if (*s_validate) return cmd_validate(opt_path(config), out, err);
        if (*s_chat)
            return cmd_chat(config, opt_path(providers), out_dir, mode, seed, task, system_name,
                            profile_code, subject, out, in);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const RangeError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

int run(const std::vector<std::string>& args) {
    return run(args, std::cout, std::cerr, std::cin);
}

} // namespace pats::cli
