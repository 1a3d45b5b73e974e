#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace pats {

enum class TraitId { Openness, Conscientiousness, Extraversion, Agreeableness, Neuroticism };

inline constexpr std::array<TraitId, 5> kAllTraits = {
    TraitId::Openness, TraitId::Conscientiousness, TraitId::Extraversion,
    TraitId::Agreeableness, TraitId::Neuroticism};

char trait_letter(TraitId t);
std::string trait_name(TraitId t);
std::optional<TraitId> trait_from_letter(char c);
std::optional<TraitId> trait_from_name(std::string_view name);
std::string trait_definition(TraitId t);

enum class TraitLevel { Low, High };

std::string level_name(TraitLevel l);
std::optional<TraitLevel> level_from_name(std::string_view name);

struct TraitKey {
    TraitId trait;
    TraitLevel level;
    auto operator<=>(const TraitKey&) const = default;
};

/// "High Extraversion", "Low Openness" — the form the prompts use.
std::string trait_key_label(TraitKey key);

struct StrategyDescriptor {
    std::string id;
    std::string name;
    std::string abbreviation;
    std::string description;
    std::string example;
    std::vector<std::string> references;
};

struct ValidationFinding {
    std::string subject; // id or trait-key label
    std::string reason;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;
    bool ok() const { return findings.empty(); }
};

class Taxonomy {
  public:
    int schema_version = 1;
    std::vector<StrategyDescriptor> descriptors; // file order
    std::map<TraitKey, std::vector<std::string>> mapping;
    std::map<TraitKey, std::vector<std::string>> characteristics;

    const StrategyDescriptor* find_descriptor(std::string_view id) const;
    const StrategyDescriptor& descriptor(std::string_view id) const; // throws RangeError

    /// Descriptors mapped to the key, in file order.
    std::vector<StrategyDescriptor> strategies_for(TraitKey key) const;
    const std::vector<std::string>& strategy_ids_for(TraitKey key) const;
    const std::vector<std::string>& characteristics_for(TraitKey key) const;

    /// Case-insensitive, punctuation-tolerant match of a model-emitted strategy
    /// name (or abbreviation) against the strategies allowed for `key`.
    std::optional<std::string> match_strategy_name(TraitKey key, std::string_view raw) const;

    nlohmann::json to_json() const;
    static Taxonomy from_json(const nlohmann::json& doc);
};

/// Parses and validates; throws SchemaError / ValidationError on bad input.
Taxonomy load_taxonomy(const std::filesystem::path& file);
Taxonomy parse_taxonomy(const std::string& text);

ValidationReport validate_taxonomy(const Taxonomy& t);

/// Location of the bundled default taxonomy / fixtures. Honors $PATS_DATA_DIR.
std::filesystem::path default_data_dir();

} // namespace pats
