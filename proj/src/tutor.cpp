#include "pats/tutor.hpp"

#include <algorithm>
#include <cctype>

#include "pats/errors.hpp"
#include "pats/student.hpp"
#include "pats/util.hpp"

namespace pats {

namespace {

std::string story_slot(const TaskSpec& task) {
    return task.title + "\n\n" + task.body + "\n\nMoral: " + task.moral;
}

constexpr std::string_view kFinishToken = "<finish>";
constexpr std::string_view kNoSummaryFallback =
    "There is no summary, this given conversation is all of it";

} // namespace

BaselineTutor::BaselineTutor(gateway::Gateway& gw, const PromptLibrary& prompts,
                             TutorConfig config, TaskSpec task,
                             std::optional<PersonalityProfile> profile)
    : gw_(gw), prompts_(prompts), config_(std::move(config)), task_(std::move(task)) {
    if (config_.kind == PolicyKind::Pats)
        throw ConfigError("BaselineTutor requires the simple or personality policy");
    if (config_.kind == PolicyKind::Personality && !profile)
        throw ConfigError("personality policy requires a student profile");
    if (config_.kind == PolicyKind::Simple && profile)
        throw ConfigError("simple policy must not carry a student profile");

    const std::string suffix = task_.kind == TaskKind::Image ? "_image" : "_story";
    std::map<std::string, std::string> slots;
    if (task_.kind == TaskKind::Story) slots["story"] = story_slot(task_);
    std::string name;
    if (config_.kind == PolicyKind::Simple) {
        name = "baseline_simple_system" + suffix;
    } else {
        name = "baseline_personality_system" + suffix;
        slots["personality"] = render_persona_text(*profile, PersonaAudience::TeacherPrompt);
    }
    session_id_ = gw_.open_session(prompts_.render(name, slots), config_.model_id);
}

TeacherTurn BaselineTutor::turn(const std::optional<std::string>& student_utterance) {
    std::optional<gateway::ChatMessage> msg;
    if (student_utterance) {
        msg = gateway::ChatMessage{gateway::Role::User, *student_utterance, {}};
        if (task_.kind == TaskKind::Image) msg->attachments.push_back(task_.image);
    }
    auto result = gw_.chat(session_id_, msg, config_.sampling);
    usage_.input_tokens += result.usage.input_tokens;
    usage_.output_tokens += result.usage.output_tokens;

    TeacherTurn out;
    std::string text = result.text;
    if (auto pos = text.find(kFinishToken); pos != std::string::npos) {
        text.erase(pos, kFinishToken.size());
        out.finished = true;
    }
    out.text = sanitize_utterance(std::move(text));
    if (out.finished) gw_.rewrite_last_assistant(session_id_, out.text);
    ++teacher_turns_;
    return out;
}

std::optional<TraitId> parse_trait_reply(const std::string& text) {
    const std::string n = util::normalize_token(text);
    if (n.size() == 1) return trait_from_letter(n[0]);
    if (auto t = trait_from_name(n)) return t;
    return std::nullopt;
}

PatsTutor::PatsTutor(gateway::Gateway& gw, const PromptLibrary& prompts, TutorConfig config,
                     const Taxonomy& taxonomy, PersonalityProfile profile, TaskSpec task)
    : gw_(gw),
      prompts_(prompts),
      config_(std::move(config)),
      taxonomy_(taxonomy),
      profile_(profile),
      task_(std::move(task)) {
    if (config_.kind != PolicyKind::Pats) throw ConfigError("PatsTutor requires the pats policy");
}

std::string PatsTutor::variant(const std::string& base) const {
    return base + (task_.kind == TaskKind::Image ? "_image" : "_story");
}

const StrategyEpisode& PatsTutor::active_episode() const {
    if (!active_episode_) throw Error("no active strategy episode");
    return episodes_[*active_episode_];
}

std::string PatsTutor::persona_label() const {
    return trait_key_label(active_episode().chosen_trait);
}

std::string PatsTutor::strategy_names() const {
    std::vector<std::string> names;
    for (const auto& id : active_episode().chosen_strategies)
        names.push_back(taxonomy_.descriptor(id).name);
    return util::join(names, ", ");
}

std::string PatsTutor::strategy_descriptions() const {
    std::vector<std::string> descs;
    for (const auto& id : active_episode().chosen_strategies) {
        const auto& d = taxonomy_.descriptor(id);
        descs.push_back(d.name + ": " + d.description);
    }
    return util::join(descs, "\n");
}

std::string PatsTutor::summary_or_fallback() const {
    return summary_.empty() ? std::string(kNoSummaryFallback) : summary_;
}

gateway::GenerationResult PatsTutor::completion(std::vector<gateway::ChatMessage> messages) {
    gateway::GenerationRequest req;
    req.model_id = config_.model_id;
    req.sampling = config_.sampling;
    req.messages = std::move(messages);
    auto result = gw_.generate(req);
    usage_.input_tokens += result.usage.input_tokens;
    usage_.output_tokens += result.usage.output_tokens;
    return result;
}

DialogueContext PatsTutor::make_context() const {
    DialogueContext ctx;
    const size_t n = history_.size();
    const size_t take = std::min<size_t>(4, n);
    ctx.window.assign(history_.end() - static_cast<long>(take), history_.end());
    if (n > 4) ctx.summary = summary_or_fallback();
    if (active_episode_) {
        const int x = teacher_turns_ + 1 - active_episode().start_teacher_turn;
        ctx.turn_count_sentence =
            x <= 0 ? "This is the first turn of the current strategy."
                   : "The current strategy is being worked on since last " + std::to_string(x) +
                         " teacher turns";
    }
    return ctx;
}

std::string PatsTutor::responder_call(const std::string& user_prompt, bool attach_media) {
    std::map<std::string, std::string> slots;
    slots["personality"] = render_persona_text(profile_, PersonaAudience::TeacherPrompt);
    if (task_.kind == TaskKind::Story) slots["story"] = story_slot(task_);

    std::vector<gateway::ChatMessage> messages;
    messages.push_back(
        {gateway::Role::System, prompts_.render(variant("responder_system"), slots), {}});
    gateway::ChatMessage user{gateway::Role::User, user_prompt, {}};
    if (attach_media && task_.kind == TaskKind::Image) user.attachments.push_back(task_.image);
    messages.push_back(std::move(user));

    std::string text = sanitize_utterance(completion(std::move(messages)).text);
    history_.push_back({"teacher", text, extract_body_cues(text), false});
    ++teacher_turns_;
    return text;
}

std::string PatsTutor::first_turn() {
    if (teacher_turns_ != 0) throw Error("first_turn called mid-dialog");
    return responder_call(prompts_.raw("responder_first_user"), true);
}

void PatsTutor::observe_student(const Utterance& u) { history_.push_back(u); }

StrategyEpisode PatsTutor::strategise() {
    DialogueContext ctx = make_context();
    const std::string context = render_conversation(ctx.window);

    std::vector<gateway::ChatMessage> messages;
    messages.push_back({gateway::Role::System, prompts_.raw(variant("strategiser_system")), {}});
    messages.push_back(
        {gateway::Role::User,
         prompts_.render("strategiser_trait_user",
                         {{"persona_choices",
                           render_persona_text(profile_, PersonaAudience::TraitChoices)},
                          {"context", context}}),
         {}});
    std::string reply = completion(messages).text;
    auto trait = parse_trait_reply(reply);
    if (!trait) {
        messages.push_back({gateway::Role::Assistant, reply, {}});
        messages.push_back({gateway::Role::User, prompts_.raw("strategiser_trait_repair_user"), {}});
        reply = completion(messages).text;
        trait = parse_trait_reply(reply);
        if (!trait)
            throw ParseRepairError("strategiser trait reply not parseable after repair: " + reply);
    }

    StrategyEpisode episode;
    episode.chosen_trait = TraitKey{*trait, profile_.level(*trait)};
    const std::string persona = trait_key_label(episode.chosen_trait);

    std::string options;
    for (const auto& d : taxonomy_.strategies_for(episode.chosen_trait))
        options += "- " + d.name + ": " + d.description + "\n";

    messages.push_back({gateway::Role::Assistant, reply, {}});
    messages.push_back({gateway::Role::User,
                        prompts_.render("strategiser_strategy_user", {{"context", context},
                                                                      {"persona", persona},
                                                                      {"strategies", options}}),
                        {}});
    std::string strategy_reply = completion(messages).text;

    auto match_names = [&](const std::string& text) {
        std::vector<std::string> ids;
        for (const auto& part : util::split(text, ',')) {
            auto id = taxonomy_.match_strategy_name(episode.chosen_trait, part);
            if (id) {
                if (std::find(ids.begin(), ids.end(), *id) == ids.end()) ids.push_back(*id);
            } else if (!util::normalize_token(part).empty()) {
                warnings_.push_back("dropped invalid strategy name '" + util::trim(part) +
                                    "' for " + persona);
            }
        }
        return ids;
    };
    episode.chosen_strategies = match_names(strategy_reply);
    if (episode.chosen_strategies.empty()) {
        messages.push_back({gateway::Role::Assistant, strategy_reply, {}});
        messages.push_back(
            {gateway::Role::User,
             prompts_.render("strategiser_strategy_repair_user", {{"strategies", options}}), {}});
        strategy_reply = completion(messages).text;
        episode.chosen_strategies = match_names(strategy_reply);
        if (episode.chosen_strategies.empty())
            throw ParseRepairError("no valid strategy names for " + persona + " after repair: " +
                                   strategy_reply);
    }

    std::vector<std::string> chosen_names;
    for (const auto& id : episode.chosen_strategies)
        chosen_names.push_back(taxonomy_.descriptor(id).name);

    messages.push_back({gateway::Role::Assistant, strategy_reply, {}});
    messages.push_back(
        {gateway::Role::User,
         prompts_.render(variant("strategiser_plan_user"),
                         {{"context", context},
                          {"persona", persona},
                          {"strategy", util::join(chosen_names, ", ")}}),
         {}});
    episode.plan = completion(messages).text;

    // utterance estimate: last integer mentioned in the plan, clamped to [1,3]
    int estimate = 0;
    for (size_t i = 0; i < episode.plan.size(); ++i)
        if (std::isdigit(static_cast<unsigned char>(episode.plan[i])))
            estimate = episode.plan[i] - '0';
    if (estimate == 0) {
        estimate = 1;
        warnings_.push_back("plan carries no utterance estimate; defaulting to 1");
    } else if (estimate < 1 || estimate > 3) {
        warnings_.push_back("utterance estimate " + std::to_string(estimate) + " clamped to [1,3]");
        estimate = std::clamp(estimate, 1, 3);
    }
    episode.estimated_utterances = estimate;
    episode.start_teacher_turn = teacher_turns_ + 1;
    return episode;
}

ContinueDecision PatsTutor::should_continue_strategy() {
    if (!active_episode_ || teacher_turns_ + 1 <= active_episode().start_teacher_turn)
        throw Error("continuation check requires an episode with a completed teacher turn");

    std::vector<Utterance> since(history_.begin() + static_cast<long>(active_start_history_index_),
                                 history_.end());
    std::vector<gateway::ChatMessage> messages;
    messages.push_back({gateway::Role::System, prompts_.raw(variant("continue_system")), {}});
    messages.push_back({gateway::Role::User,
                        prompts_.render("continue_user",
                                        {{"summary", summary_or_fallback()},
                                         {"persona", persona_label()},
                                         {"strategy", strategy_names()},
                                         {"strat_desc", strategy_descriptions()},
                                         {"context", render_conversation(since)}}),
                        {}});
    auto parse = [](const std::string& text) -> std::optional<ContinueDecision> {
        const std::string n = util::normalize_token(text);
        if (n == "continue") return ContinueDecision::Continue;
        if (n == "new") return ContinueDecision::New;
        return std::nullopt;
    };
    std::string reply = completion(messages).text;
    auto decision = parse(reply);
    if (!decision) {
        messages.push_back({gateway::Role::Assistant, reply, {}});
        messages.push_back({gateway::Role::User, prompts_.raw("continue_repair_user"), {}});
        reply = completion(messages).text;
        decision = parse(reply);
        if (!decision) {
            warnings_.push_back("continuation reply unparseable ('" + util::trim(reply) +
                                "'); defaulting to continue");
            return ContinueDecision::Continue;
        }
    }
    return *decision;
}

bool PatsTutor::is_conversation_finished() {
    std::vector<gateway::ChatMessage> messages;
    messages.push_back({gateway::Role::System, prompts_.raw(variant("finish_system")), {}});
    messages.push_back({gateway::Role::User, render_conversation(history_), {}});
    auto parse = [](const std::string& text) -> std::optional<bool> {
        const std::string n = util::normalize_token(text);
        if (n == "yes") return true;
        if (n == "no") return false;
        return std::nullopt;
    };
    std::string reply = completion(messages).text;
    auto decision = parse(reply);
    if (!decision) {
        messages.push_back({gateway::Role::Assistant, reply, {}});
        messages.push_back({gateway::Role::User, prompts_.raw("finish_repair_user"), {}});
        reply = completion(messages).text;
        decision = parse(reply);
        if (!decision) {
            warnings_.push_back("finish reply unparseable ('" + util::trim(reply) +
                                "'); erring towards finished");
            return true;
        }
    }
    return *decision;
}

std::string PatsTutor::summarise() {
    std::vector<gateway::ChatMessage> messages;
    messages.push_back({gateway::Role::System, prompts_.raw(variant("summary_system")), {}});
    messages.push_back({gateway::Role::User, render_conversation(history_), {}});
    summary_ = completion(std::move(messages)).text;
    return summary_;
}

void PatsTutor::close_active_episode() {
    if (!active_episode_) return;
    episodes_[*active_episode_].end_teacher_turn = teacher_turns_;
    active_episode_.reset();
}

PlanAction PatsTutor::plan_next() {
    if (teacher_turns_ == 0) throw Error("plan_next called before the opening turn");

    if (teacher_turns_ >= config_.teacher_turn_cap - 2) {
        cap_forced_ = true;
        close_active_episode();
        return PlanAction::Close;
    }

    if (!active_episode_) {
        StrategyEpisode episode = strategise();
        episodes_.push_back(std::move(episode));
        active_episode_ = episodes_.size() - 1;
        active_start_history_index_ = history_.size();
        return PlanAction::Respond;
    }

    if (should_continue_strategy() == ContinueDecision::Continue) return PlanAction::Respond;

    close_active_episode();
    if (is_conversation_finished()) return PlanAction::Close;

    StrategyEpisode episode = strategise();
    episodes_.push_back(std::move(episode));
    active_episode_ = episodes_.size() - 1;
    active_start_history_index_ = history_.size();
    return PlanAction::Respond;
}

std::string PatsTutor::respond() {
    if (!active_episode_) throw Error("respond requires an active episode");
    if (history_.size() > 4) summarise();
    DialogueContext ctx = make_context();

    std::map<std::string, std::string> slots = {{"persona", persona_label()},
                                                {"strategy", strategy_names()},
                                                {"strat_desc", strategy_descriptions()},
                                                {"turn_count", ctx.turn_count_sentence}};
    std::string user;
    if (teacher_turns_ + 1 <= 3) {
        slots["context"] = render_conversation(history_);
        user = prompts_.render("responder_early_user", slots);
    } else {
        slots["summary"] = summary_or_fallback();
        slots["context"] = render_conversation(ctx.window);
        user = prompts_.render("responder_windowed_user", slots);
    }
    return responder_call(user, true);
}

std::string PatsTutor::closing_summary_request() {
    close_active_episode();
    if (history_.size() > 4) summarise();
    DialogueContext ctx = make_context();
    const std::string user =
        prompts_.render(variant("closing_penultimate_user"),
                        {{"summary", summary_or_fallback()},
                         {"conversation", render_conversation(ctx.window)}});
    return responder_call(user, true);
}

std::string PatsTutor::closing_farewell() {
    if (history_.size() > 4) summarise();
    DialogueContext ctx = make_context();
    const std::string user =
        prompts_.render("closing_final_user", {{"summary", summary_or_fallback()},
                                               {"conversation", render_conversation(ctx.window)}});
    return responder_call(user, true);
}

} // namespace pats
