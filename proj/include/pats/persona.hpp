#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pats/taxonomy.hpp"

namespace pats {

/// One Low/High level per OCEAN trait, indexed in O, C, E, A, N order.
struct PersonalityProfile {
    std::array<TraitLevel, 5> levels{};

    TraitLevel level(TraitId t) const { return levels[static_cast<size_t>(t)]; }
    void set_level(TraitId t, TraitLevel l) { levels[static_cast<size_t>(t)] = l; }
    TraitKey key(TraitId t) const { return TraitKey{t, level(t)}; }

    auto operator<=>(const PersonalityProfile&) const = default;
};

/// Five characters over {H, L} in O, C, E, A, N order, e.g. "HHLHH".
std::string render_profile_code(const PersonalityProfile& p);
PersonalityProfile parse_profile_code(std::string_view code); // throws FormatError

/// All 32 profiles in lexicographic code order (H < L).
std::vector<PersonalityProfile> enumerate_profiles();

inline constexpr size_t kBftItemCount = 44;

/// Item -> trait assignment for a 44-item Big Five instrument. The concrete
/// instrument is configuration; a balanced placeholder ships with the data dir.
struct BftItemMap {
    std::array<TraitId, kBftItemCount> item_trait{};
    static BftItemMap from_csv(const std::filesystem::path& file);
    static BftItemMap from_csv_text(const std::string& text);
};

struct BftResponse {
    std::array<double, kBftItemCount> items{}; // each in [1, 5]
};

enum class ThresholdPolicy {
    StrictGreater,  // mean > 3 -> High (main-text rule)
    GreaterEqual,   // mean >= 3 -> High
    SplitBorderline // mean == 3 alternates High/Low across calls, else strict
};

class BftAggregator {
  public:
    BftAggregator(BftItemMap map, ThresholdPolicy policy = ThresholdPolicy::StrictGreater)
        : map_(std::move(map)), policy_(policy) {}

    PersonalityProfile aggregate(const BftResponse& r); // throws ValidationError on bad ratings
    double trait_mean(const BftResponse& r, TraitId t) const;

  private:
    BftItemMap map_;
    ThresholdPolicy policy_;
    size_t borderline_counter_ = 0;
};

struct ProfilePopularity {
    std::vector<std::pair<std::string, double>> entries; // (code, percentage), non-increasing

    static ProfilePopularity from_csv(const std::filesystem::path& file);
    static ProfilePopularity from_csv_text(const std::string& text);
};

std::vector<std::string> top_profiles(const ProfilePopularity& p, size_t k); // throws RangeError

enum class PersonaAudience { StudentPrompt, TeacherPrompt, TraitChoices };

/// Deterministic persona text for prompt slots. TraitChoices yields the five
/// "High/Low <Trait>" lines; the prompt variants add per-trait definitions.
std::string render_persona_text(const PersonalityProfile& p, PersonaAudience audience);

} // namespace pats
