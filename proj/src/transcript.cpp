#include "pats/transcript.hpp"

#include <algorithm>
#include <fstream>

#include "pats/errors.hpp"
#include "pats/hash.hpp"
#include "pats/util.hpp"

namespace pats {

std::string task_kind_name(TaskKind k) { return k == TaskKind::Image ? "image" : "story"; }

TaskKind task_kind_from_name(std::string_view name) {
    const std::string n = util::to_lower(std::string(name));
    if (n == "image") return TaskKind::Image;
    if (n == "story") return TaskKind::Story;
    throw FormatError("unknown task kind: " + std::string(name));
}

std::string policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::Simple: return "simple";
        case PolicyKind::Personality: return "personality";
        case PolicyKind::Pats: return "pats";
    }
    return "?";
}

PolicyKind policy_kind_from_name(std::string_view name) {
    const std::string n = util::to_lower(std::string(name));
    if (n == "simple") return PolicyKind::Simple;
    if (n == "personality") return PolicyKind::Personality;
    if (n == "pats") return PolicyKind::Pats;
    throw FormatError("unknown system: " + std::string(name));
}

std::vector<std::string> extract_body_cues(const std::string& text) {
    std::vector<std::string> cues;
    size_t i = 0;
    while ((i = text.find('(', i)) != std::string::npos) {
        size_t close = text.find(')', i + 1);
        if (close == std::string::npos) break;
        cues.push_back(text.substr(i, close - i + 1));
        i = close + 1;
    }
    return cues;
}

int DialogueTranscript::teacher_turns() const {
    return static_cast<int>(
        std::count_if(utterances.begin(), utterances.end(),
                      [](const Utterance& u) { return u.role == "teacher"; }));
}

namespace {

nlohmann::json episode_to_json(const StrategyEpisode& e) {
    nlohmann::json j = {{"trait", trait_name(e.chosen_trait.trait)},
                        {"level", level_name(e.chosen_trait.level)},
                        {"strategies", e.chosen_strategies},
                        {"plan", e.plan},
                        {"estimated_utterances", e.estimated_utterances},
                        {"start_teacher_turn", e.start_teacher_turn}};
    if (e.end_teacher_turn) j["end_teacher_turn"] = *e.end_teacher_turn;
    return j;
}

StrategyEpisode episode_from_json(const nlohmann::json& j) {
    StrategyEpisode e;
    auto trait = trait_from_name(j.at("trait").get<std::string>());
    auto level = level_from_name(j.at("level").get<std::string>());
    if (!trait || !level) throw SchemaError("episode: bad trait/level");
    e.chosen_trait = TraitKey{*trait, *level};
    e.chosen_strategies = j.at("strategies").get<std::vector<std::string>>();
    e.plan = j.value("plan", std::string{});
    e.estimated_utterances = j.value("estimated_utterances", 1);
    e.start_teacher_turn = j.value("start_teacher_turn", 0);
    if (j.contains("end_teacher_turn")) e.end_teacher_turn = j["end_teacher_turn"].get<int>();
    return e;
}

} // namespace

nlohmann::json DialogueTranscript::to_json() const {
    nlohmann::json j;
    j["dialog_id"] = dialog_id;
    j["task"] = {{"kind", task_kind_name(task_kind)}, {"subject_id", subject_id}};
    j["profile_code"] = profile_code;
    j["system"] = policy_kind_name(system);
    j["metadata"] = metadata;
    j["utterances"] = nlohmann::json::array();
    for (const auto& u : utterances) {
        nlohmann::json ju = {{"role", u.role}, {"text", u.text}, {"cues", u.cues}};
        if (u.flagged) ju["flagged"] = true;
        j["utterances"].push_back(std::move(ju));
    }
    j["episodes"] = nlohmann::json::array();
    for (const auto& e : episodes) j["episodes"].push_back(episode_to_json(e));
    j["usage"] = nlohmann::json::object();
    for (const auto& [model, u] : usage)
        j["usage"][model] = {{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
    return j;
}

DialogueTranscript DialogueTranscript::from_json(const nlohmann::json& j) {
    DialogueTranscript t;
    try {
        t.dialog_id = j.at("dialog_id").get<std::string>();
        t.task_kind = task_kind_from_name(j.at("task").at("kind").get<std::string>());
        t.subject_id = j.at("task").at("subject_id").get<std::string>();
        t.profile_code = j.at("profile_code").get<std::string>();
        t.system = policy_kind_from_name(j.at("system").get<std::string>());
        t.metadata = j.value("metadata", nlohmann::json::object());
        for (const auto& ju : j.at("utterances")) {
            Utterance u;
            u.role = ju.at("role").get<std::string>();
            u.text = ju.at("text").get<std::string>();
            u.cues = ju.value("cues", std::vector<std::string>{});
            u.flagged = ju.value("flagged", false);
            t.utterances.push_back(std::move(u));
        }
        for (const auto& je : j.value("episodes", nlohmann::json::array()))
            t.episodes.push_back(episode_from_json(je));
        // keep the object alive: items() holds a reference to its range
        const nlohmann::json usage_obj = j.value("usage", nlohmann::json::object());
        for (const auto& [model, ju] : usage_obj.items()) {
            gateway::Usage u;
            u.input_tokens = ju.value("input_tokens", 0);
            u.output_tokens = ju.value("output_tokens", 0);
            t.usage[model] = u;
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("transcript: ") + e.what());
    }
    return t;
}

std::string make_dialog_id(const TaskSpec& task, const std::string& profile_code,
                           PolicyKind system, int run_index,
                           const std::string& template_version) {
    const std::string material = task_kind_name(task.kind) + "|" + task.subject_id + "|" +
                                 profile_code + "|" + policy_kind_name(system) + "|" +
                                 std::to_string(run_index) + "|" + template_version;
    return sha256_hex(material).substr(0, 16);
}

void store_transcripts(const std::filesystem::path& dir,
                       const std::vector<DialogueTranscript>& corpus) {
    std::filesystem::create_directories(dir);
    for (const auto& t : corpus)
        util::write_file_atomic(dir / (t.dialog_id + ".jsonl"), t.to_json().dump() + "\n");
}

namespace {

void load_jsonl_file(const std::filesystem::path& file, std::vector<DialogueTranscript>& out) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open corpus file: " + file.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw SchemaError("malformed transcript at " + file.string() + ":" +
                              std::to_string(lineno));
        out.push_back(DialogueTranscript::from_json(j));
    }
}

} // namespace

std::vector<DialogueTranscript> load_transcripts(const std::filesystem::path& path) {
    std::vector<DialogueTranscript> out;
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(path))
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) load_jsonl_file(f, out);
    } else if (std::filesystem::exists(path)) {
        load_jsonl_file(path, out);
    } else {
        throw ConfigError("corpus path does not exist: " + path.string());
    }
    return out;
}

std::string render_conversation(const std::vector<Utterance>& utterances) {
    std::string out;
    for (const auto& u : utterances) {
        if (!out.empty()) out += "\n";
        out += (u.role == "teacher" ? "Teacher: " : "Student: ") + u.text;
    }
    return out;
}

} // namespace pats
