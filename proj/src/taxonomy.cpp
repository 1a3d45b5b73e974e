#include "pats/taxonomy.hpp"

#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>

#include "pats/errors.hpp"
#include "pats/util.hpp"

namespace pats {

char trait_letter(TraitId t) {
    switch (t) {
        case TraitId::Openness: return 'O';
        case TraitId::Conscientiousness: return 'C';
        case TraitId::Extraversion: return 'E';
        case TraitId::Agreeableness: return 'A';
        case TraitId::Neuroticism: return 'N';
    }
    return '?';
}

std::string trait_name(TraitId t) {
    switch (t) {
        case TraitId::Openness: return "Openness";
        case TraitId::Conscientiousness: return "Conscientiousness";
        case TraitId::Extraversion: return "Extraversion";
        case TraitId::Agreeableness: return "Agreeableness";
        case TraitId::Neuroticism: return "Neuroticism";
    }
    return "?";
}

std::optional<TraitId> trait_from_letter(char c) {
    switch (std::toupper(static_cast<unsigned char>(c))) {
        case 'O': return TraitId::Openness;
        case 'C': return TraitId::Conscientiousness;
        case 'E': return TraitId::Extraversion;
        case 'A': return TraitId::Agreeableness;
        case 'N': return TraitId::Neuroticism;
        default: return std::nullopt;
    }
}

std::optional<TraitId> trait_from_name(std::string_view name) {
    const std::string n = util::normalize_token(name);
    for (TraitId t : kAllTraits)
        if (n == util::normalize_token(trait_name(t))) return t;
    return std::nullopt;
}

std::string trait_definition(TraitId t) {
    switch (t) {
        case TraitId::Openness:
            return "the tendency to be curious, imaginative, and open to new experiences";
        case TraitId::Conscientiousness:
            return "being organized, responsible, and goal-directed";
        case TraitId::Extraversion:
            return "being outgoing, energetic, and sociable";
        case TraitId::Agreeableness:
            return "being compassionate, cooperative, and trusting";
        case TraitId::Neuroticism:
            return "the tendency to experience emotional instability, anxiety, and moodiness";
    }
    return "";
}

std::string level_name(TraitLevel l) { return l == TraitLevel::High ? "High" : "Low"; }

std::optional<TraitLevel> level_from_name(std::string_view name) {
    const std::string n = util::normalize_token(name);
    if (n == "high" || n == "h") return TraitLevel::High;
    if (n == "low" || n == "l") return TraitLevel::Low;
    return std::nullopt;
}

std::string trait_key_label(TraitKey key) {
    return level_name(key.level) + " " + trait_name(key.trait);
}

const StrategyDescriptor* Taxonomy::find_descriptor(std::string_view id) const {
    for (const auto& d : descriptors)
        if (d.id == id) return &d;
    return nullptr;
}

const StrategyDescriptor& Taxonomy::descriptor(std::string_view id) const {
    const StrategyDescriptor* d = find_descriptor(id);
    if (!d) throw RangeError("unknown strategy id: " + std::string(id));
    return *d;
}

std::vector<StrategyDescriptor> Taxonomy::strategies_for(TraitKey key) const {
    std::vector<StrategyDescriptor> out;
    for (const auto& id : strategy_ids_for(key)) out.push_back(descriptor(id));
    return out;
}

const std::vector<std::string>& Taxonomy::strategy_ids_for(TraitKey key) const {
    auto it = mapping.find(key);
    if (it == mapping.end()) throw RangeError("no mapping for " + trait_key_label(key));
    return it->second;
}

const std::vector<std::string>& Taxonomy::characteristics_for(TraitKey key) const {
    static const std::vector<std::string> kEmpty;
    auto it = characteristics.find(key);
    return it == characteristics.end() ? kEmpty : it->second;
}

std::optional<std::string> Taxonomy::match_strategy_name(TraitKey key,
                                                         std::string_view raw) const {
    const std::string n = util::normalize_token(raw);
    if (n.empty()) return std::nullopt;
    for (const auto& id : strategy_ids_for(key)) {
        const StrategyDescriptor& d = descriptor(id);
        if (n == util::normalize_token(d.name) || n == util::normalize_token(d.abbreviation) ||
            n == util::normalize_token(d.id))
            return id;
    }
    return std::nullopt;
}

namespace {

TraitKey key_from_json(const nlohmann::json& entry, const std::string& path) {
    auto trait = trait_from_name(entry.at("trait").get<std::string>());
    if (!trait) throw SchemaError(path + ".trait: unknown trait");
    auto level = level_from_name(entry.at("level").get<std::string>());
    if (!level) throw SchemaError(path + ".level: expected High or Low");
    return TraitKey{*trait, *level};
}

} // namespace

Taxonomy Taxonomy::from_json(const nlohmann::json& doc) {
    Taxonomy t;
    try {
        if (!doc.is_object()) throw SchemaError("$: expected object");
        if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
            throw SchemaError("$.schema_version: required integer");
        t.schema_version = doc["schema_version"].get<int>();

        if (!doc.contains("descriptors") || !doc["descriptors"].is_array())
            throw SchemaError("$.descriptors: required array");
        size_t i = 0;
        for (const auto& d : doc["descriptors"]) {
            const std::string path = "$.descriptors[" + std::to_string(i++) + "]";
            StrategyDescriptor sd;
            sd.id = d.at("id").get<std::string>();
            sd.name = d.at("name").get<std::string>();
            sd.abbreviation = d.at("abbreviation").get<std::string>();
            sd.description = d.at("description").get<std::string>();
            sd.example = d.value("example", std::string{});
            if (d.contains("references"))
                sd.references = d["references"].get<std::vector<std::string>>();
            if (sd.id.empty()) throw SchemaError(path + ".id: empty");
            t.descriptors.push_back(std::move(sd));
        }

        if (!doc.contains("mapping") || !doc["mapping"].is_array())
            throw SchemaError("$.mapping: required array");
        i = 0;
        for (const auto& m : doc["mapping"]) {
            const std::string path = "$.mapping[" + std::to_string(i++) + "]";
            TraitKey key = key_from_json(m, path);
            if (t.mapping.count(key)) throw SchemaError(path + ": duplicate trait/level entry");
            t.mapping[key] = m.at("strategy_ids").get<std::vector<std::string>>();
            if (m.contains("characteristics"))
                t.characteristics[key] = m["characteristics"].get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("taxonomy document: ") + e.what());
    }

    ValidationReport report = validate_taxonomy(t);
    if (!report.ok()) {
        std::string msg = "taxonomy failed validation:";
        for (const auto& f : report.findings) msg += "\n  " + f.subject + ": " + f.reason;
        throw ValidationError(msg);
    }
    return t;
}

nlohmann::json Taxonomy::to_json() const {
    nlohmann::json doc;
    doc["schema_version"] = schema_version;
    doc["descriptors"] = nlohmann::json::array();
    for (const auto& d : descriptors) {
        doc["descriptors"].push_back({{"id", d.id},
                                      {"name", d.name},
                                      {"abbreviation", d.abbreviation},
                                      {"description", d.description},
                                      {"example", d.example},
                                      {"references", d.references}});
    }
    doc["mapping"] = nlohmann::json::array();
    for (const auto& [key, ids] : mapping) {
        nlohmann::json m = {{"trait", trait_name(key.trait)},
                            {"level", level_name(key.level)},
                            {"strategy_ids", ids}};
        auto it = characteristics.find(key);
        if (it != characteristics.end()) m["characteristics"] = it->second;
        doc["mapping"].push_back(std::move(m));
    }
    return doc;
}

Taxonomy parse_taxonomy(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw SchemaError("taxonomy document: not valid JSON");
    return Taxonomy::from_json(doc);
}

Taxonomy load_taxonomy(const std::filesystem::path& file) {
    return parse_taxonomy(util::read_file(file));
}

ValidationReport validate_taxonomy(const Taxonomy& t) {
    ValidationReport r;
    if (t.schema_version != 1)
        r.findings.push_back({"schema_version", "unsupported version"});

    std::set<std::string> ids, abbrs, names;
    for (const auto& d : t.descriptors) {
        if (!ids.insert(d.id).second) r.findings.push_back({d.id, "duplicate id"});
        if (!d.abbreviation.empty() && !abbrs.insert(d.abbreviation).second)
            r.findings.push_back({d.id, "duplicate abbreviation '" + d.abbreviation + "'"});
        if (d.name.empty()) r.findings.push_back({d.id, "empty name"});
        if (d.description.empty()) r.findings.push_back({d.id, "empty description"});
    }
    if (t.descriptors.size() != 17)
        r.findings.push_back(
            {"descriptors", "expected 17 descriptors, got " + std::to_string(t.descriptors.size())});

    for (TraitId trait : kAllTraits) {
        for (TraitLevel level : {TraitLevel::Low, TraitLevel::High}) {
            TraitKey key{trait, level};
            auto it = t.mapping.find(key);
            if (it == t.mapping.end()) {
                r.findings.push_back({trait_key_label(key), "missing mapping entry"});
                continue;
            }
            if (it->second.empty())
                r.findings.push_back({trait_key_label(key), "no strategies mapped"});
            for (const auto& id : it->second)
                if (!ids.count(id))
                    r.findings.push_back({trait_key_label(key), "unknown strategy id '" + id + "'"});
        }
    }
    if (t.mapping.size() != 10)
        r.findings.push_back(
            {"mapping", "expected 10 trait/level entries, got " + std::to_string(t.mapping.size())});
    return r;
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("PATS_DATA_DIR"); env && *env) return env;
    return PATS_DEFAULT_DATA_DIR;
}

} // namespace pats
