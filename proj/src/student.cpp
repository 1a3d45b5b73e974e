#include "pats/student.hpp"

#include <cctype>

#include "pats/errors.hpp"
#include "pats/hash.hpp"
#include "pats/util.hpp"

namespace pats {

std::vector<std::string> parse_numbered_candidates(const std::string& text, size_t expected) {
    std::vector<std::string> out;
    for (const auto& raw : util::split(text, '\n')) {
        std::string line = util::trim(raw);
        if (line.empty()) continue;
        size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == 0 || i >= line.size()) continue;
        if (line[i] != '.' && line[i] != ')' && line[i] != ':') continue;
        std::string body = util::trim(line.substr(i + 1));
        if (body.empty()) continue;
        out.push_back(sanitize_utterance(std::move(body)));
    }
    if (out.size() != expected) return {};
    return out;
}

std::string sanitize_utterance(std::string text) {
    std::string t = util::trim(text);
    for (std::string_view prefix : {"Teacher:", "Student:"}) {
        if (util::starts_with_ci(t, prefix)) {
            t = util::trim(t.substr(prefix.size()));
            break;
        }
    }
    return t;
}

StudentSim::StudentSim(gateway::Gateway& gw, const PromptLibrary& prompts, StudentConfig config,
                       PersonalityProfile profile, TaskSpec task)
    : gw_(gw),
      prompts_(prompts),
      config_(std::move(config)),
      profile_(profile),
      task_(std::move(task)) {
    const std::string system = prompts_.render(variant("student_system"), base_slots());
    session_id_ = gw_.open_session(system, config_.model_id);
}

std::string StudentSim::variant(const std::string& base) const {
    return base + (task_.kind == TaskKind::Image ? "_image" : "_story");
}

std::map<std::string, std::string> StudentSim::base_slots() const {
    std::map<std::string, std::string> slots;
    slots["personality"] = render_persona_text(profile_, PersonaAudience::StudentPrompt);
    if (task_.kind == TaskKind::Story) {
        slots["story"] =
            task_.title + "\n\n" + task_.body + "\n\nMoral: " + task_.moral;
    }
    return slots;
}

CandidateSet StudentSim::generate_candidates(const std::string& teacher_utterance) {
    gateway::ChatMessage msg{gateway::Role::User, teacher_utterance, {}};
    if (task_.kind == TaskKind::Image) msg.attachments.push_back(task_.image);

    auto result = gw_.chat(session_id_, msg, config_.sampling);
    usage_.input_tokens += result.usage.input_tokens;
    usage_.output_tokens += result.usage.output_tokens;
    auto candidates = parse_numbered_candidates(result.text, 5);
    if (candidates.empty()) {
        gateway::ChatMessage repair{gateway::Role::User,
                                    prompts_.raw("student_candidates_repair_user"), {}};
        result = gw_.chat(session_id_, repair, config_.sampling);
        usage_.input_tokens += result.usage.input_tokens;
        usage_.output_tokens += result.usage.output_tokens;
        candidates = parse_numbered_candidates(result.text, 5);
        if (candidates.empty())
            throw ParseRepairError("student candidate generation did not yield 5 candidates "
                                   "after one corrective retry");
    }
    CandidateSet cs;
    cs.candidates = std::move(candidates);
    cs.source_fingerprint = sha256_hex(result.text);
    return cs;
}

namespace {

std::optional<int> parse_choice_1_to_5(const std::string& text) {
    std::string t = util::trim(text);
    // strip surrounding punctuation
    while (!t.empty() && !std::isdigit(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
    while (!t.empty() && !std::isdigit(static_cast<unsigned char>(t.back()))) t.pop_back();
    if (t.size() != 1) return std::nullopt;
    int v = t[0] - '0';
    if (v < 1 || v > 5) return std::nullopt;
    return v;
}

} // namespace

std::pair<int, std::string> StudentSim::select_candidate(const CandidateSet& cs) const {
    auto slots = base_slots();
    slots["history"] = render_conversation(history_);
    std::string numbered;
    for (size_t i = 0; i < cs.candidates.size(); ++i)
        numbered += std::to_string(i + 1) + ". " + cs.candidates[i] + "\n";
    slots["utterances"] = numbered;

    auto ask = [&](const gateway::GenerationRequest& r) {
        auto result = gw_.generate(r);
        usage_.input_tokens += result.usage.input_tokens;
        usage_.output_tokens += result.usage.output_tokens;
        return result.text;
    };

    // The selection stage deliberately carries no task media.
    gateway::GenerationRequest req;
    req.model_id = config_.model_id;
    req.sampling = config_.sampling;
    req.messages.push_back(
        {gateway::Role::System, prompts_.render(variant("student_select_system"), slots), {}});
    req.messages.push_back({gateway::Role::User, prompts_.raw("student_select_reason_user"), {}});
    const std::string rationale = ask(req);

    req.messages.push_back({gateway::Role::Assistant, rationale, {}});
    req.messages.push_back(
        {gateway::Role::User,
         prompts_.render("student_select_pick_user", {{"chain-of-thought", rationale}}), {}});
    std::string reply = ask(req);
    auto choice = parse_choice_1_to_5(reply);
    if (!choice) {
        req.messages.push_back({gateway::Role::Assistant, reply, {}});
        req.messages.push_back({gateway::Role::User, prompts_.raw("student_select_repair_user"), {}});
        reply = ask(req);
        choice = parse_choice_1_to_5(reply);
        if (!choice)
            throw ParseRepairError("student selection reply not parseable as 1-5 after repair");
    }
    return {*choice, rationale};
}

Utterance StudentSim::turn(const std::string& teacher_utterance) {
    history_.push_back({"teacher", teacher_utterance, extract_body_cues(teacher_utterance), false});

    CandidateSet cs = generate_candidates(teacher_utterance);
    auto [index, rationale] = select_candidate(cs);
    (void)rationale;

    Utterance u;
    u.role = "student";
    u.text = sanitize_utterance(cs.candidates[static_cast<size_t>(index - 1)]);
    if (u.text.empty()) {
        u.text = "(remains silent)";
        u.flagged = true;
    }
    u.cues = extract_body_cues(u.text);

    gw_.rewrite_last_assistant(session_id_, u.text);
    history_.push_back(u);
    return u;
}

} // namespace pats
