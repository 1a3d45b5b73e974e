#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pats/gateway.hpp"
#include "pats/persona.hpp"
#include "pats/prompts.hpp"
#include "pats/taxonomy.hpp"
#include "pats/transcript.hpp"

namespace pats {

struct TutorConfig {
    PolicyKind kind = PolicyKind::Pats;
    std::string model_id = "teacher-model";
    gateway::Sampling sampling;
    int teacher_turn_cap = 20;
};

struct TeacherTurn {
    std::string text;
    bool finished = false;
};

/// Simple / Personality baselines: one chat session, "<finish>" sentinel.
class BaselineTutor {
  public:
    BaselineTutor(gateway::Gateway& gw, const PromptLibrary& prompts, TutorConfig config,
                  TaskSpec task, std::optional<PersonalityProfile> profile);

    /// No student utterance on the opening turn.
    TeacherTurn turn(const std::optional<std::string>& student_utterance);

    const std::string& session_id() const { return session_id_; }
    int teacher_turns() const { return teacher_turns_; }
    const gateway::Usage& usage() const { return usage_; }

  private:
    gateway::Gateway& gw_;
    const PromptLibrary& prompts_;
    TutorConfig config_;
    TaskSpec task_;
    std::string session_id_;
    int teacher_turns_ = 0;
    gateway::Usage usage_;
};

struct DialogueContext {
    std::vector<Utterance> window;      // at most 4 most recent utterances
    std::optional<std::string> summary; // present iff more than 4 utterances
    std::string turn_count_sentence;
};

enum class PlanAction { Respond, Close };
enum class ContinueDecision { Continue, New };

class PatsTutor {
  public:
    PatsTutor(gateway::Gateway& gw, const PromptLibrary& prompts, TutorConfig config,
              const Taxonomy& taxonomy, PersonalityProfile profile, TaskSpec task);

    std::string first_turn();
    void observe_student(const Utterance& u);

    /// Strategy lifecycle ahead of each teacher turn after the first:
    /// continuation check, finish check, re-strategising, cap enforcement.
    PlanAction plan_next();
    std::string respond();

    std::string closing_summary_request();
    std::string closing_farewell();

    // Individual protocol steps, exposed for direct testing.
    StrategyEpisode strategise();
    ContinueDecision should_continue_strategy();
    bool is_conversation_finished();
    std::string summarise();
    DialogueContext make_context() const;

    const std::vector<Utterance>& history() const { return history_; }
    const std::vector<StrategyEpisode>& episodes() const { return episodes_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    int teacher_turns() const { return teacher_turns_; }
    bool cap_forced() const { return cap_forced_; }
    const gateway::Usage& usage() const { return usage_; }
    bool has_active_episode() const { return active_episode_.has_value(); }
    const StrategyEpisode& active_episode() const;

  private:
    std::string variant(const std::string& base) const;
    std::string persona_label() const; // "Low Extraversion" for the active episode
    std::string strategy_names() const;
    std::string strategy_descriptions() const;
    std::string summary_or_fallback() const;
    std::string responder_call(const std::string& user_prompt, bool attach_media);
    gateway::GenerationResult completion(std::vector<gateway::ChatMessage> messages);
    void close_active_episode();

    gateway::Gateway& gw_;
    const PromptLibrary& prompts_;
    TutorConfig config_;
    const Taxonomy& taxonomy_;
    PersonalityProfile profile_;
    TaskSpec task_;

    std::vector<Utterance> history_;
    std::vector<StrategyEpisode> episodes_;
    std::optional<size_t> active_episode_; // index into episodes_
    size_t active_start_history_index_ = 0;
    std::string summary_;
    std::vector<std::string> warnings_;
    int teacher_turns_ = 0;
    bool cap_forced_ = false;
    gateway::Usage usage_;
};

/// Parses a Strategiser trait reply ("E", "'O'", "Neuroticism").
std::optional<TraitId> parse_trait_reply(const std::string& text);

} // namespace pats
