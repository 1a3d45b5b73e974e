#include "pats/orchestrator.hpp"

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "pats/errors.hpp"
#include "pats/util.hpp"

namespace pats {

std::vector<TaskSpec> load_subjects(const std::filesystem::path& manifest) {
    nlohmann::json doc = nlohmann::json::parse(util::read_file(manifest), nullptr, false);
    if (doc.is_discarded()) throw SchemaError("subject manifest is not valid JSON: " +
                                              manifest.string());
    const auto base = manifest.parent_path();
    std::vector<TaskSpec> out;
    std::set<std::string> story_ids, image_ids;
    try {
        for (const auto& js : doc.value("stories", nlohmann::json::array())) {
            TaskSpec t;
            t.kind = TaskKind::Story;
            t.subject_id = js.at("subject_id").get<std::string>();
            t.title = js.at("title").get<std::string>();
            t.body = js.at("body").get<std::string>();
            t.moral = js.at("moral").get<std::string>();
            if (!story_ids.insert(t.subject_id).second)
                throw ValidationError("duplicate story subject_id: " + t.subject_id);
            out.push_back(std::move(t));
        }
        for (const auto& ji : doc.value("images", nlohmann::json::array())) {
            TaskSpec t;
            t.kind = TaskKind::Image;
            t.subject_id = ji.at("subject_id").get<std::string>();
            t.image = gateway::media_from_file(base / ji.at("path").get<std::string>());
            if (!image_ids.insert(t.subject_id).second)
                throw ValidationError("duplicate image subject_id: " + t.subject_id);
            out.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("subject manifest " + manifest.string() + ": " + e.what());
    }
    return out;
}

ExperimentPlan plan_matrix(std::vector<TaskSpec> tasks, std::vector<PersonalityProfile> profiles,
                           std::vector<PolicyKind> systems, int runs_per_cell) {
    if (tasks.empty()) throw ConfigError("empty dimension: tasks");
    if (profiles.empty()) throw ConfigError("empty dimension: profiles");
    if (systems.empty()) throw ConfigError("empty dimension: systems");
    if (runs_per_cell < 1) throw ConfigError("empty dimension: runs_per_cell");
    return ExperimentPlan{std::move(tasks), std::move(profiles), std::move(systems),
                          runs_per_cell};
}

std::vector<Cell> enumerate_cells(const ExperimentPlan& plan,
                                  const std::string& template_version) {
    std::vector<Cell> cells;
    cells.reserve(plan.dialog_count());
    for (const auto& task : plan.tasks)
        for (const auto& profile : plan.profiles)
            for (const auto& system : plan.systems)
                for (int run = 0; run < plan.runs_per_cell; ++run) {
                    Cell c{task, profile, system, run, {}};
                    c.dialog_id = make_dialog_id(task, render_profile_code(profile), system, run,
                                                 template_version);
                    cells.push_back(std::move(c));
                }
    return cells;
}

RunLedger::RunLedger(std::filesystem::path file) : file_(std::move(file)) {
    if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
    std::ifstream in(file_);
    if (!in) return;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw SchemaError("malformed ledger line " + std::to_string(lineno) + " in " +
                              file_.string());
        const std::string status = j.value("status", "");
        const CellStatus s = status == "done" ? CellStatus::Done : CellStatus::Failed;
        entries_[j.at("dialog_id").get<std::string>()] = {s, j.value("reason", std::string{})};
    }
}

void RunLedger::append(const std::string& dialog_id, CellStatus s, const std::string& reason) {
    std::lock_guard lock(mu_);
    entries_[dialog_id] = {s, reason};
    std::ofstream out(file_, std::ios::app);
    nlohmann::json j = {{"dialog_id", dialog_id},
                        {"status", s == CellStatus::Done ? "done" : "failed"}};
    if (!reason.empty()) j["reason"] = reason;
    out << j.dump() << "\n" << std::flush;
}

void RunLedger::mark_done(const std::string& dialog_id) {
    append(dialog_id, CellStatus::Done, {});
}

void RunLedger::mark_failed(const std::string& dialog_id, const std::string& reason) {
    append(dialog_id, CellStatus::Failed, reason);
}

CellStatus RunLedger::status(const std::string& dialog_id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(dialog_id);
    return it == entries_.end() ? CellStatus::Pending : it->second.first;
}

bool RunLedger::is_done(const std::string& dialog_id) const {
    return status(dialog_id) == CellStatus::Done;
}

size_t RunLedger::done_count() const {
    std::lock_guard lock(mu_);
    size_t n = 0;
    for (const auto& [_, e] : entries_)
        if (e.first == CellStatus::Done) ++n;
    return n;
}

size_t RunLedger::failed_count() const {
    std::lock_guard lock(mu_);
    size_t n = 0;
    for (const auto& [_, e] : entries_)
        if (e.first == CellStatus::Failed) ++n;
    return n;
}

std::map<std::string, std::string> RunLedger::failures() const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::string> out;
    for (const auto& [id, e] : entries_)
        if (e.first == CellStatus::Failed) out[id] = e.second;
    return out;
}

namespace {

nlohmann::json sampling_to_json(const gateway::Sampling& s) {
    nlohmann::json j = nlohmann::json::object();
    if (s.temperature) j["temperature"] = *s.temperature;
    if (s.max_output_tokens) j["max_output_tokens"] = *s.max_output_tokens;
    return j;
}

DialogueTranscript run_baseline(gateway::Gateway& gw, const PromptLibrary& prompts,
                                const Cell& cell, const RunConfig& config,
                                const StudentTurnFn& student_turn, DialogueTranscript t) {
    TutorConfig tcfg{cell.system, config.teacher_model_id, config.teacher_sampling,
                     config.teacher_turn_cap};
    std::optional<PersonalityProfile> profile;
    if (cell.system == PolicyKind::Personality) profile = cell.profile;
    BaselineTutor tutor(gw, prompts, tcfg, cell.task, profile);

    TeacherTurn turn = tutor.turn(std::nullopt);
    t.utterances.push_back({"teacher", turn.text, extract_body_cues(turn.text), false});
    while (!turn.finished && tutor.teacher_turns() < config.teacher_turn_cap) {
        Utterance u = student_turn(turn.text);
        t.utterances.push_back(u);
        turn = tutor.turn(u.text);
        t.utterances.push_back({"teacher", turn.text, extract_body_cues(turn.text), false});
    }
    t.metadata["finished"] = turn.finished;
    t.metadata["cap_forced"] = !turn.finished;
    t.usage[config.teacher_model_id].input_tokens += tutor.usage().input_tokens;
    t.usage[config.teacher_model_id].output_tokens += tutor.usage().output_tokens;
    return t;
}

DialogueTranscript run_pats(gateway::Gateway& gw, const PromptLibrary& prompts,
                            const Taxonomy& taxonomy, const Cell& cell, const RunConfig& config,
                            const StudentTurnFn& student_turn, DialogueTranscript t) {
    TutorConfig tcfg{PolicyKind::Pats, config.teacher_model_id, config.teacher_sampling,
                     config.teacher_turn_cap};
    PatsTutor tutor(gw, prompts, tcfg, taxonomy, cell.profile, cell.task);

    std::string teacher_text = tutor.first_turn();
    tutor.observe_student(student_turn(teacher_text));

    while (tutor.plan_next() == PlanAction::Respond) {
        teacher_text = tutor.respond();
        tutor.observe_student(student_turn(teacher_text));
    }

    teacher_text = tutor.closing_summary_request();
    tutor.observe_student(student_turn(teacher_text));
    tutor.closing_farewell();

    t.utterances = tutor.history();
    t.episodes = tutor.episodes();
    t.metadata["cap_forced"] = tutor.cap_forced();
    if (!tutor.warnings().empty()) t.metadata["warnings"] = tutor.warnings();
    t.usage[config.teacher_model_id].input_tokens += tutor.usage().input_tokens;
    t.usage[config.teacher_model_id].output_tokens += tutor.usage().output_tokens;
    return t;
}

} // namespace

DialogueTranscript run_dialogue(gateway::Gateway& gw, const PromptLibrary& prompts,
                                const Taxonomy& taxonomy, const Cell& cell,
                                const RunConfig& config, StudentTurnFn student_override) {
    DialogueTranscript t;
    t.dialog_id = cell.dialog_id.empty()
                      ? make_dialog_id(cell.task, render_profile_code(cell.profile), cell.system,
                                       cell.run_index, config.template_version)
                      : cell.dialog_id;
    t.task_kind = cell.task.kind;
    t.subject_id = cell.task.subject_id;
    t.profile_code = render_profile_code(cell.profile);
    t.system = cell.system;
    t.metadata = {{"teacher_model", config.teacher_model_id},
                  {"student_model", config.student.model_id},
                  {"teacher_sampling", sampling_to_json(config.teacher_sampling)},
                  {"student_sampling", sampling_to_json(config.student.sampling)},
                  {"template_version", config.template_version},
                  {"seed", config.seed},
                  {"run_index", cell.run_index}};

    std::optional<StudentSim> student;
    StudentTurnFn student_turn = std::move(student_override);
    if (!student_turn) {
        student.emplace(gw, prompts, config.student, cell.profile, cell.task);
        student_turn = [&s = *student](const std::string& teacher) { return s.turn(teacher); };
    }

    t = cell.system == PolicyKind::Pats
            ? run_pats(gw, prompts, taxonomy, cell, config, student_turn, std::move(t))
            : run_baseline(gw, prompts, cell, config, student_turn, std::move(t));

    if (student) {
        t.usage[config.student.model_id].input_tokens += student->usage().input_tokens;
        t.usage[config.student.model_id].output_tokens += student->usage().output_tokens;
    }
    return t;
}

MatrixSummary run_matrix(gateway::Gateway& gw, const PromptLibrary& prompts,
                         const Taxonomy& taxonomy, const ExperimentPlan& plan,
                         const RunConfig& config, const std::filesystem::path& out_dir,
                         int parallelism, size_t max_cells) {
    std::filesystem::create_directories(out_dir);
    RunLedger ledger(out_dir / "ledger.jsonl");
    const auto transcripts_dir = out_dir / "transcripts";

    std::vector<Cell> todo;
    MatrixSummary summary;
    for (auto& cell : enumerate_cells(plan, config.template_version)) {
        ++summary.planned;
        if (ledger.is_done(cell.dialog_id))
            ++summary.skipped;
        else
            todo.push_back(std::move(cell));
    }
    if (todo.size() > max_cells) todo.resize(max_cells);
    summary.executed = todo.size();

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            const Cell& cell = todo[i];
            try {
                DialogueTranscript t = run_dialogue(gw, prompts, taxonomy, cell, config);
                store_transcripts(transcripts_dir, {t});
                ledger.mark_done(cell.dialog_id);
            } catch (const std::exception& e) {
                ledger.mark_failed(cell.dialog_id, e.what());
            }
        }
    };

    const size_t n_threads =
        std::min<size_t>(std::max(parallelism, 1), std::max<size_t>(todo.size(), 1));
    std::vector<std::thread> pool;
    for (size_t i = 0; i + 1 < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    summary.done = ledger.done_count();
    summary.failed = ledger.failed_count();
    return summary;
}

} // namespace pats
