#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pats/gateway.hpp"
#include "pats/prompts.hpp"
#include "pats/stats.hpp"
#include "pats/taxonomy.hpp"
#include "pats/transcript.hpp"

namespace pats {

enum class Verdict { System1, System2, Equal };
enum class Resolved { WinA, WinB, Tie };

std::string verdict_name(Verdict v);
std::string resolved_name(Resolved r);

/// Flip rule over the two presentation orders ("reversed" shows b as System 1):
/// agreeing preferences -> that system wins; disagreeing -> tie; one Equal plus
/// a preference -> the preference; both Equal -> tie.
Resolved resolve_flip(Verdict forward, Verdict reversed);

struct JudgeVerdict {
    Verdict choice = Verdict::Equal;
    std::string rationale;
};

struct DimensionQuestion {
    int id = 0;
    std::string question;
    std::vector<std::string> strategy_ids;
};

/// The five evaluation dimensions with their linked strategies.
const std::vector<DimensionQuestion>& default_dimension_questions();

struct PairedEvaluation {
    std::string dialog_a, dialog_b;
    std::optional<int> question_id;
    std::optional<JudgeVerdict> forward;  // a shown as System 1
    std::optional<JudgeVerdict> reversed; // b shown as System 1
    std::optional<Resolved> resolved;     // nullopt when either order was invalid
    bool valid() const { return resolved.has_value(); }
};

struct JudgeConfig {
    std::string model_id = "judge-model";
    gateway::Sampling sampling;
};

/// Two-call pairwise judge: a rationale completion, then a bare choice token
/// ("1"/"2"/"3"). Unparseable choices get one repair retry, then the
/// evaluation is dropped with a log entry.
class Judge {
  public:
    Judge(gateway::Gateway& gw, const PromptLibrary& prompts, JudgeConfig config);

    std::optional<JudgeVerdict> evaluate(const DialogueTranscript& system1,
                                         const DialogueTranscript& system2,
                                         const std::optional<DimensionQuestion>& question);

    /// Both presentation orders plus resolution. Inputs must share task
    /// subject and profile (ValidationError otherwise).
    PairedEvaluation judge_pair(const DialogueTranscript& a, const DialogueTranscript& b,
                                std::optional<DimensionQuestion> question = std::nullopt);

    const std::vector<std::string>& exclusions() const { return exclusions_; }

  private:
    gateway::Gateway& gw_;
    const PromptLibrary& prompts_;
    JudgeConfig config_;
    std::vector<std::string> exclusions_;
};

struct PairOutcome {
    Resolved resolved = Resolved::Tie;
    TaskKind task = TaskKind::Image;
    std::string profile_code;
};

struct PreferenceReport {
    stats::WinTest overall;                      // WinA counted as the win
    std::map<std::string, stats::WinTest> by_task;
    std::map<std::string, stats::WinTest> by_profile;
    size_t excluded = 0;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Throws ValidationError on zero outcomes.
PreferenceReport preference_report(const std::vector<PairOutcome>& outcomes, size_t excluded = 0);

struct AgreementReport {
    std::vector<std::string> rater_names;
    stats::KappaResult fleiss;
    std::vector<std::vector<double>> cohen; // pairwise, 1.0 on the diagonal

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// ratings[rater][item]; all raters must cover the same items.
AgreementReport agreement_report(const std::vector<std::string>& rater_names,
                                 const std::vector<std::vector<std::string>>& ratings);

struct StrategyUsageReport {
    size_t total = 0;                                      // summed strategy picks
    std::vector<std::pair<std::string, size_t>> counts;    // descending, id-tiebreak
    std::map<std::string, double> percentages;             // of total
    std::map<TraitKey, std::map<std::string, size_t>> by_trait;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Counts every chosen strategy across all episodes; baseline transcripts
/// contribute nothing. Unknown strategy ids raise ValidationError.
StrategyUsageReport strategy_usage(const std::vector<DialogueTranscript>& corpus,
                                   const Taxonomy& taxonomy);

using JudgedLevels = std::map<std::string, std::array<TraitLevel, 5>>;

/// CSV "dialog_id,O,C,E,A,N" with H/L cells.
JudgedLevels load_judged_levels(const std::filesystem::path& csv);

struct FidelityReport {
    std::array<double, 5> f1{}; // O, C, E, A, N; positive class = High
    double macro = 0.0;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Throws CoverageError naming transcripts without judgments.
FidelityReport persona_fidelity(const std::vector<DialogueTranscript>& corpus,
                                const JudgedLevels& judged);

} // namespace pats
