#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pats/gateway.hpp"
#include "pats/taxonomy.hpp"

namespace pats {

enum class TaskKind { Image, Story };

std::string task_kind_name(TaskKind k);
TaskKind task_kind_from_name(std::string_view name);

struct TaskSpec {
    TaskKind kind = TaskKind::Image;
    std::string subject_id;
    // Story fields
    std::string title;
    std::string body;
    std::string moral;
    // Image field
    gateway::MediaRef image;
};

enum class PolicyKind { Simple, Personality, Pats };

std::string policy_kind_name(PolicyKind k);
PolicyKind policy_kind_from_name(std::string_view name);

struct Utterance {
    std::string role; // "teacher" | "student"
    std::string text;
    std::vector<std::string> cues;
    bool flagged = false;
};

/// Parenthesized body-language cues, verbatim substrings of the utterance.
std::vector<std::string> extract_body_cues(const std::string& text);

struct StrategyEpisode {
    TraitKey chosen_trait{TraitId::Openness, TraitLevel::Low};
    std::vector<std::string> chosen_strategies;
    std::string plan;
    int estimated_utterances = 1; // in [1,3]
    int start_teacher_turn = 0;   // 1-based teacher-turn index
    std::optional<int> end_teacher_turn;
};

struct DialogueTranscript {
    std::string dialog_id;
    TaskKind task_kind = TaskKind::Image;
    std::string subject_id;
    std::string profile_code;
    PolicyKind system = PolicyKind::Simple;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<Utterance> utterances;
    std::vector<StrategyEpisode> episodes;
    std::map<std::string, gateway::Usage> usage; // per model

    int teacher_turns() const;
    nlohmann::json to_json() const;
    static DialogueTranscript from_json(const nlohmann::json& j);
};

std::string make_dialog_id(const TaskSpec& task, const std::string& profile_code,
                           PolicyKind system, int run_index, const std::string& template_version);

/// One JSONL file per transcript, named <dialog_id>.jsonl.
void store_transcripts(const std::filesystem::path& dir,
                       const std::vector<DialogueTranscript>& corpus);

/// Loads a directory of per-transcript files or a single multi-line JSONL file.
std::vector<DialogueTranscript> load_transcripts(const std::filesystem::path& path);

/// "Teacher: ...\nStudent: ..." rendering used in prompt slots.
std::string render_conversation(const std::vector<Utterance>& utterances);

} // namespace pats
