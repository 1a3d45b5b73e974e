#include "pats/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "pats/errors.hpp"
#include "pats/persona.hpp"
#include "pats/util.hpp"

namespace pats {

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::System1: return "system1";
        case Verdict::System2: return "system2";
        case Verdict::Equal: return "equal";
    }
    return "?";
}

std::string resolved_name(Resolved r) {
    switch (r) {
        case Resolved::WinA: return "win_a";
        case Resolved::WinB: return "win_b";
        case Resolved::Tie: return "tie";
    }
    return "?";
}

Resolved resolve_flip(Verdict forward, Verdict reversed) {
    // In the reversed order, System1 labels b, so System2 is a preference for a.
    const bool fwd_a = forward == Verdict::System1;
    const bool fwd_b = forward == Verdict::System2;
    const bool rev_a = reversed == Verdict::System2;
    const bool rev_b = reversed == Verdict::System1;

    if (forward == Verdict::Equal && reversed == Verdict::Equal) return Resolved::Tie;
    if (forward == Verdict::Equal) return rev_a ? Resolved::WinA : Resolved::WinB;
    if (reversed == Verdict::Equal) return fwd_a ? Resolved::WinA : Resolved::WinB;
    if (fwd_a && rev_a) return Resolved::WinA;
    if (fwd_b && rev_b) return Resolved::WinB;
    return Resolved::Tie; // orders disagree
}

const std::vector<DimensionQuestion>& default_dimension_questions() {
    static const std::vector<DimensionQuestion> questions = {
        {1,
         "Which tutor better motivates or supports the student?",
         {"motivational_encouragement", "progress_tracking"}},
        {2,
         "Which tutor provides teaching strategies better suited to the student's personality "
         "needs?",
         {"solo_first_then_support", "structured_direct_instruction", "choice_based_dialog",
          "task_variety", "real_world_relevance"}},
        {3,
         "Which tutor is more proactive in responding to students' queries?",
         {"step_by_step_scaffolding", "efficient_communication"}},
        {4,
         "Which tutor provides better engagement with the student?",
         {"playful_role_play", "gamified_learning_items"}},
        {5, "Which tutor is more empathetic to the students' needs?", {"friendly_tone"}},
    };
    return questions;
}

namespace {

std::optional<Verdict> parse_choice_token(const std::string& text) {
    std::string t = util::trim(text);
    while (!t.empty() && !std::isdigit(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
    while (!t.empty() && !std::isdigit(static_cast<unsigned char>(t.back()))) t.pop_back();
    if (t == "1") return Verdict::System1;
    if (t == "2") return Verdict::System2;
    if (t == "3") return Verdict::Equal;
    return std::nullopt;
}

} // namespace

Judge::Judge(gateway::Gateway& gw, const PromptLibrary& prompts, JudgeConfig config)
    : gw_(gw), prompts_(prompts), config_(std::move(config)) {}

std::optional<JudgeVerdict> Judge::evaluate(const DialogueTranscript& system1,
                                            const DialogueTranscript& system2,
                                            const std::optional<DimensionQuestion>& question) {
    const std::string system_prompt =
        prompts_.raw(question ? "judge_dimension_system" : "judge_system");
    const std::string body =
        prompts_.render("judge_conversations_user",
                        {{"conversation_1", render_conversation(system1.utterances)},
                         {"conversation_2", render_conversation(system2.utterances)}});

    gateway::GenerationRequest req;
    req.model_id = config_.model_id;
    req.sampling = config_.sampling;
    req.messages.push_back({gateway::Role::System, system_prompt, {}});
    req.messages.push_back({gateway::Role::User, body, {}});
    const std::string rationale = gw_.generate(req).text;

    req.messages.push_back({gateway::Role::Assistant, rationale, {}});
    const std::string choice_prompt =
        question ? prompts_.render("judge_choice_question_user", {{"question", question->question}})
                 : prompts_.raw("judge_choice_user");
    req.messages.push_back({gateway::Role::User, choice_prompt, {}});
    std::string reply = gw_.generate(req).text;
    auto choice = parse_choice_token(reply);
    if (!choice) {
        req.messages.push_back({gateway::Role::Assistant, reply, {}});
        req.messages.push_back({gateway::Role::User, prompts_.raw("judge_choice_repair_user"), {}});
        reply = gw_.generate(req).text;
        choice = parse_choice_token(reply);
        if (!choice) {
            exclusions_.push_back("choice token unparseable for pair " + system1.dialog_id + "/" +
                                  system2.dialog_id + ": '" + util::trim(reply) + "'");
            return std::nullopt;
        }
    }
    return JudgeVerdict{*choice, rationale};
}

PairedEvaluation Judge::judge_pair(const DialogueTranscript& a, const DialogueTranscript& b,
                                   std::optional<DimensionQuestion> question) {
    if (a.task_kind != b.task_kind || a.subject_id != b.subject_id ||
        a.profile_code != b.profile_code)
        throw ValidationError("judge_pair: transcripts differ in task subject or profile (" +
                              a.dialog_id + " vs " + b.dialog_id + ")");

    PairedEvaluation e;
    e.dialog_a = a.dialog_id;
    e.dialog_b = b.dialog_id;
    if (question) e.question_id = question->id;
    e.forward = evaluate(a, b, question);
    e.reversed = evaluate(b, a, question);
    if (e.forward && e.reversed) e.resolved = resolve_flip(e.forward->choice, e.reversed->choice);
    return e;
}

namespace {

nlohmann::json win_test_to_json(const stats::WinTest& w) {
    return {{"n", w.n},     {"wins", w.wins},         {"ties", w.ties}, {"losses", w.losses},
            {"win_rate", w.win_rate}, {"t", w.t},     {"p", w.p}};
}

stats::WinTest tally(const std::vector<const PairOutcome*>& outcomes) {
    size_t w = 0, t = 0, l = 0;
    for (const auto* o : outcomes) {
        if (o->resolved == Resolved::WinA) ++w;
        else if (o->resolved == Resolved::Tie) ++t;
        else ++l;
    }
    return stats::win_rate_test(w, t, l);
}

void csv_win_row(std::ostringstream& out, const std::string& label, const stats::WinTest& w) {
    out << label << "," << w.n << "," << w.wins << "," << w.ties << "," << w.losses << ","
        << w.win_rate << "," << w.t << "," << w.p << "\n";
}

} // namespace

PreferenceReport preference_report(const std::vector<PairOutcome>& outcomes, size_t excluded) {
    if (outcomes.empty()) throw ValidationError("preference_report: no outcomes");
    PreferenceReport r;
    r.excluded = excluded;

    std::vector<const PairOutcome*> all;
    std::map<std::string, std::vector<const PairOutcome*>> by_task, by_profile;
    for (const auto& o : outcomes) {
        all.push_back(&o);
        by_task[task_kind_name(o.task)].push_back(&o);
        if (!o.profile_code.empty()) by_profile[o.profile_code].push_back(&o);
    }
    r.overall = tally(all);
    for (const auto& [k, v] : by_task) r.by_task[k] = tally(v);
    for (const auto& [k, v] : by_profile) r.by_profile[k] = tally(v);
    return r;
}

nlohmann::json PreferenceReport::to_json() const {
    nlohmann::json j;
    j["overall"] = win_test_to_json(overall);
    j["excluded"] = excluded;
    for (const auto& [k, v] : by_task) j["by_task"][k] = win_test_to_json(v);
    for (const auto& [k, v] : by_profile) j["by_profile"][k] = win_test_to_json(v);
    return j;
}

std::string PreferenceReport::to_csv() const {
    std::ostringstream out;
    out << "group,n,wins,ties,losses,win_rate,t,p\n";
    csv_win_row(out, "overall", overall);
    for (const auto& [k, v] : by_task) csv_win_row(out, "task:" + k, v);
    for (const auto& [k, v] : by_profile) csv_win_row(out, "profile:" + k, v);
    return out.str();
}

AgreementReport agreement_report(const std::vector<std::string>& rater_names,
                                 const std::vector<std::vector<std::string>>& ratings) {
    if (ratings.size() < 2) throw ValidationError("agreement_report: need at least 2 raters");
    const size_t items = ratings.front().size();
    for (const auto& r : ratings)
        if (r.size() != items) throw ValidationError("agreement_report: raters cover different items");

    std::set<std::string> category_set;
    for (const auto& r : ratings) category_set.insert(r.begin(), r.end());
    std::vector<std::string> categories(category_set.begin(), category_set.end());
    if (categories.size() < 2) categories.push_back(categories.empty() ? "" : categories[0] + "_");

    std::vector<std::vector<int>> counts(items, std::vector<int>(categories.size(), 0));
    for (const auto& r : ratings)
        for (size_t i = 0; i < items; ++i) {
            const size_t j = static_cast<size_t>(
                std::find(categories.begin(), categories.end(), r[i]) - categories.begin());
            ++counts[i][j];
        }

    AgreementReport report;
    report.rater_names = rater_names;
    report.fleiss = stats::fleiss_kappa(counts);
    report.cohen.assign(ratings.size(), std::vector<double>(ratings.size(), 1.0));
    for (size_t i = 0; i < ratings.size(); ++i)
        for (size_t j = i + 1; j < ratings.size(); ++j) {
            const double k = stats::cohen_kappa(ratings[i], ratings[j]).value;
            report.cohen[i][j] = report.cohen[j][i] = k;
        }
    return report;
}

nlohmann::json AgreementReport::to_json() const {
    return {{"raters", rater_names},
            {"fleiss_kappa", fleiss.value},
            {"fleiss_degenerate", fleiss.degenerate},
            {"cohen_kappa", cohen}};
}

std::string AgreementReport::to_csv() const {
    std::ostringstream out;
    out << "rater";
    for (const auto& n : rater_names) out << "," << n;
    out << "\n";
    for (size_t i = 0; i < cohen.size(); ++i) {
        out << (i < rater_names.size() ? rater_names[i] : std::to_string(i));
        for (double v : cohen[i]) out << "," << v;
        out << "\n";
    }
    out << "fleiss," << fleiss.value << (fleiss.degenerate ? ",degenerate" : "") << "\n";
    return out.str();
}

StrategyUsageReport strategy_usage(const std::vector<DialogueTranscript>& corpus,
                                   const Taxonomy& taxonomy) {
    StrategyUsageReport r;
    std::map<std::string, size_t> counts;
    for (const auto& t : corpus)
        for (const auto& e : t.episodes)
            for (const auto& id : e.chosen_strategies) {
                if (!taxonomy.find_descriptor(id))
                    throw ValidationError("strategy_usage: unknown strategy id " + id +
                                          " in dialog " + t.dialog_id);
                ++counts[id];
                ++r.by_trait[e.chosen_trait][id];
                ++r.total;
            }

    r.counts.assign(counts.begin(), counts.end());
    std::sort(r.counts.begin(), r.counts.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (const auto& [id, c] : r.counts)
        r.percentages[id] = 100.0 * static_cast<double>(c) / static_cast<double>(r.total);
    return r;
}

nlohmann::json StrategyUsageReport::to_json() const {
    nlohmann::json j;
    j["total"] = total;
    j["strategies"] = nlohmann::json::array();
    for (const auto& [id, c] : counts)
        j["strategies"].push_back(
            {{"id", id}, {"count", c}, {"percentage", percentages.at(id)}});
    j["by_trait"] = nlohmann::json::object();
    for (const auto& [key, dist] : by_trait) j["by_trait"][trait_key_label(key)] = dist;
    return j;
}

std::string StrategyUsageReport::to_csv() const {
    std::ostringstream out;
    out << "strategy,count,percentage\n";
    for (const auto& [id, c] : counts) out << id << "," << c << "," << percentages.at(id) << "\n";
    return out.str();
}

JudgedLevels load_judged_levels(const std::filesystem::path& csv) {
    JudgedLevels out;
    std::istringstream in(util::read_file(csv));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty() || (lineno == 1 && line.find("dialog_id") != std::string::npos))
            continue;
        auto cols = util::split(line, ',');
        if (cols.size() != 6)
            throw SchemaError("judged levels " + csv.string() + ":" + std::to_string(lineno) +
                              ": expected dialog_id plus 5 trait cells");
        std::array<TraitLevel, 5> levels{};
        for (size_t i = 0; i < 5; ++i) {
            const std::string cell = util::to_lower(util::trim(cols[i + 1]));
            if (cell == "h" || cell == "high") levels[i] = TraitLevel::High;
            else if (cell == "l" || cell == "low") levels[i] = TraitLevel::Low;
            else
                throw SchemaError("judged levels " + csv.string() + ":" + std::to_string(lineno) +
                                  ": bad level '" + cols[i + 1] + "'");
        }
        out[util::trim(cols[0])] = levels;
    }
    return out;
}

FidelityReport persona_fidelity(const std::vector<DialogueTranscript>& corpus,
                                const JudgedLevels& judged) {
    std::vector<std::string> missing;
    for (const auto& t : corpus)
        if (!judged.count(t.dialog_id)) missing.push_back(t.dialog_id);
    if (!missing.empty())
        throw CoverageError("persona_fidelity: missing judgments for " +
                            util::join(missing, ", "));

    FidelityReport r;
    for (size_t ti = 0; ti < 5; ++ti) {
        size_t tp = 0, fp = 0, fn = 0;
        for (const auto& t : corpus) {
            const PersonalityProfile assigned = parse_profile_code(t.profile_code);
            const bool truth = assigned.levels[ti] == TraitLevel::High;
            const bool pred = judged.at(t.dialog_id)[ti] == TraitLevel::High;
            if (pred && truth) ++tp;
            else if (pred && !truth) ++fp;
            else if (!pred && truth) ++fn;
        }
        r.f1[ti] = (2 * tp + fp + fn) == 0
                       ? 1.0
                       : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        r.macro += r.f1[ti] / 5.0;
    }
    return r;
}

nlohmann::json FidelityReport::to_json() const {
    nlohmann::json j;
    for (size_t i = 0; i < 5; ++i) j["f1"][trait_name(kAllTraits[i])] = f1[i];
    j["macro_f1"] = macro;
    return j;
}

std::string FidelityReport::to_csv() const {
    std::ostringstream out;
    out << "trait,f1\n";
    for (size_t i = 0; i < 5; ++i) out << trait_name(kAllTraits[i]) << "," << f1[i] << "\n";
    out << "macro," << macro << "\n";
    return out.str();
}

} // namespace pats
