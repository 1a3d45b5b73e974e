#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pats/gateway.hpp"
#include "pats/persona.hpp"
#include "pats/prompts.hpp"
#include "pats/transcript.hpp"

namespace pats {

struct StudentConfig {
    std::string model_id = "student-model";
    gateway::Sampling sampling;
};

struct CandidateSet {
    std::vector<std::string> candidates; // exactly 5 when valid
    std::string source_fingerprint;
};

/// Two-stage persona-conditioned student: a chat session proposes five
/// candidate utterances, a completion pair picks the most persona-consistent.
class StudentSim {
  public:
    StudentSim(gateway::Gateway& gw, const PromptLibrary& prompts, StudentConfig config,
               PersonalityProfile profile, TaskSpec task);

    /// Runs both stages and appends to the session and local history.
    Utterance turn(const std::string& teacher_utterance);

    CandidateSet generate_candidates(const std::string& teacher_utterance);
    std::pair<int, std::string> select_candidate(const CandidateSet& cs) const;

    const std::vector<Utterance>& history() const { return history_; }
    const std::string& session_id() const { return session_id_; }
    const gateway::Usage& usage() const { return usage_; }

  private:
    std::string variant(const std::string& base) const;
    std::map<std::string, std::string> base_slots() const;

    gateway::Gateway& gw_;
    const PromptLibrary& prompts_;
    StudentConfig config_;
    PersonalityProfile profile_;
    TaskSpec task_;
    std::string session_id_;
    std::vector<Utterance> history_;
    mutable gateway::Usage usage_;
};

/// Parses "1. ...\n2. ..." shaped output; returns empty vector on shape mismatch.
std::vector<std::string> parse_numbered_candidates(const std::string& text, size_t expected);

/// Strips a leading "Teacher:" / "Student:" role prefix, trims whitespace.
std::string sanitize_utterance(std::string text);

} // namespace pats
