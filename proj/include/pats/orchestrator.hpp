#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pats/gateway.hpp"
#include "pats/persona.hpp"
#include "pats/prompts.hpp"
#include "pats/student.hpp"
#include "pats/taxonomy.hpp"
#include "pats/transcript.hpp"
#include "pats/tutor.hpp"

namespace pats {

/// Loads a subject manifest: JSON with "stories" (title/body/moral) and
/// "images" (paths relative to the manifest's directory).
std::vector<TaskSpec> load_subjects(const std::filesystem::path& manifest);

struct ExperimentPlan {
    std::vector<TaskSpec> tasks;
    std::vector<PersonalityProfile> profiles;
    std::vector<PolicyKind> systems;
    int runs_per_cell = 1;

    size_t dialog_count() const {
        return tasks.size() * profiles.size() * systems.size() *
               static_cast<size_t>(runs_per_cell);
    }
};

/// Validates dimensions; throws ConfigError on any empty one.
ExperimentPlan plan_matrix(std::vector<TaskSpec> tasks, std::vector<PersonalityProfile> profiles,
                           std::vector<PolicyKind> systems, int runs_per_cell);

struct Cell {
    TaskSpec task;
    PersonalityProfile profile;
    PolicyKind system = PolicyKind::Simple;
    int run_index = 0;
    std::string dialog_id;
};

/// Deterministic task-major, profile, system, run ordering.
std::vector<Cell> enumerate_cells(const ExperimentPlan& plan, const std::string& template_version);

enum class CellStatus { Pending, Done, Failed };

/// Append-only JSONL checkpoint file; last line per dialog_id wins on load.
class RunLedger {
  public:
    explicit RunLedger(std::filesystem::path file);

    void mark_done(const std::string& dialog_id);
    void mark_failed(const std::string& dialog_id, const std::string& reason);

    CellStatus status(const std::string& dialog_id) const;
    bool is_done(const std::string& dialog_id) const;
    size_t done_count() const;
    size_t failed_count() const;
    std::map<std::string, std::string> failures() const; // dialog_id -> reason

  private:
    void append(const std::string& dialog_id, CellStatus s, const std::string& reason);

    std::filesystem::path file_;
    mutable std::mutex mu_;
    std::map<std::string, std::pair<CellStatus, std::string>> entries_;
};

/// Replaces the simulated student, e.g. with console input for manual runs.
using StudentTurnFn = std::function<Utterance(const std::string& teacher_utterance)>;

struct RunConfig {
    StudentConfig student;
    std::string teacher_model_id = "teacher-model";
    gateway::Sampling teacher_sampling;
    int teacher_turn_cap = 20;
    std::string template_version = "v1";
    std::uint64_t seed = 0;
};

DialogueTranscript run_dialogue(gateway::Gateway& gw, const PromptLibrary& prompts,
                                const Taxonomy& taxonomy, const Cell& cell, const RunConfig& config,
                                StudentTurnFn student_override = nullptr);

struct MatrixSummary {
    size_t planned = 0;
    size_t executed = 0;
    size_t skipped = 0; // already done in a previous invocation
    size_t done = 0;    // cumulative, from the ledger
    size_t failed = 0;
};

/// Runs every not-yet-done cell with at most `parallelism` dialogs in flight.
/// The ledger at <out_dir>/ledger.jsonl is checkpointed after every cell, so a
/// killed run resumes by skipping done cells. `max_cells` bounds how many cells
/// this invocation executes (tests use it to simulate an interrupt).
MatrixSummary run_matrix(gateway::Gateway& gw, const PromptLibrary& prompts,
                         const Taxonomy& taxonomy, const ExperimentPlan& plan,
                         const RunConfig& config, const std::filesystem::path& out_dir,
                         int parallelism, size_t max_cells = static_cast<size_t>(-1));

} // namespace pats
