#include "pats/persona.hpp"

#include <algorithm>
#include <sstream>

#include "pats/errors.hpp"
#include "pats/util.hpp"

namespace pats {

std::string render_profile_code(const PersonalityProfile& p) {
    std::string code;
    code.reserve(5);
    for (TraitId t : kAllTraits)
        code.push_back(p.level(t) == TraitLevel::High ? 'H' : 'L');
    return code;
}

PersonalityProfile parse_profile_code(std::string_view code) {
    if (code.size() != 5)
        throw FormatError("profile code must have length 5, got '" + std::string(code) + "'");
    PersonalityProfile p;
    for (size_t i = 0; i < 5; ++i) {
        if (code[i] == 'H')
            p.levels[i] = TraitLevel::High;
        else if (code[i] == 'L')
            p.levels[i] = TraitLevel::Low;
        else
            throw FormatError("profile code may contain only H or L, got '" + std::string(code) +
                              "'");
    }
    return p;
}

std::vector<PersonalityProfile> enumerate_profiles() {
    std::vector<PersonalityProfile> out;
    out.reserve(32);
    // bit 0 -> H, bit 1 -> L, most significant bit is Openness: this is
    // exactly lexicographic order of the codes since 'H' < 'L'.
    for (int i = 0; i < 32; ++i) {
        PersonalityProfile p;
        for (int t = 0; t < 5; ++t)
            p.levels[static_cast<size_t>(t)] =
                ((i >> (4 - t)) & 1) ? TraitLevel::Low : TraitLevel::High;
        out.push_back(p);
    }
    return out;
}

BftItemMap BftItemMap::from_csv_text(const std::string& text) {
    BftItemMap map;
    std::array<bool, kBftItemCount> seen{};
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        line = util::trim(line);
        if (line.empty()) continue;
        if (header) { // "item,trait"
            header = false;
            if (util::starts_with_ci(line, "item")) continue;
        }
        auto parts = util::split(line, ',');
        if (parts.size() != 2) throw SchemaError("bft item map: expected 'item,trait' rows");
        int idx = std::stoi(parts[0]);
        if (idx < 1 || idx > static_cast<int>(kBftItemCount))
            throw SchemaError("bft item map: item index out of range: " + parts[0]);
        auto trait = trait_from_name(parts[1]);
        if (!trait) trait = trait_from_letter(util::trim(parts[1]).empty() ? '?' : util::trim(parts[1])[0]);
        if (!trait) throw SchemaError("bft item map: unknown trait: " + parts[1]);
        map.item_trait[static_cast<size_t>(idx - 1)] = *trait;
        seen[static_cast<size_t>(idx - 1)] = true;
    }
    for (size_t i = 0; i < kBftItemCount; ++i)
        if (!seen[i])
            throw ConfigError("bft item map does not cover item " + std::to_string(i + 1));
    return map;
}

BftItemMap BftItemMap::from_csv(const std::filesystem::path& file) {
    return from_csv_text(util::read_file(file));
}

double BftAggregator::trait_mean(const BftResponse& r, TraitId t) const {
    double sum = 0;
    size_t n = 0;
    for (size_t i = 0; i < kBftItemCount; ++i) {
        if (map_.item_trait[i] == t) {
            sum += r.items[i];
            ++n;
        }
    }
    if (n == 0) throw ConfigError("bft item map assigns no items to " + trait_name(t));
    return sum / static_cast<double>(n);
}

PersonalityProfile BftAggregator::aggregate(const BftResponse& r) {
    for (double v : r.items)
        if (v < 1.0 || v > 5.0)
            throw ValidationError("bft rating outside [1,5]: " + std::to_string(v));
    PersonalityProfile p;
    for (TraitId t : kAllTraits) {
        const double mean = trait_mean(r, t);
        TraitLevel level;
        switch (policy_) {
            case ThresholdPolicy::StrictGreater:
                level = mean > 3.0 ? TraitLevel::High : TraitLevel::Low;
                break;
            case ThresholdPolicy::GreaterEqual:
                level = mean >= 3.0 ? TraitLevel::High : TraitLevel::Low;
                break;
            case ThresholdPolicy::SplitBorderline:
                if (mean == 3.0)
                    level = (borderline_counter_++ % 2 == 0) ? TraitLevel::High : TraitLevel::Low;
                else
                    level = mean > 3.0 ? TraitLevel::High : TraitLevel::Low;
                break;
            default:
                level = TraitLevel::Low;
        }
        p.set_level(t, level);
    }
    return p;
}

ProfilePopularity ProfilePopularity::from_csv_text(const std::string& text) {
    ProfilePopularity p;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        line = util::trim(line);
        if (line.empty()) continue;
        if (header && util::starts_with_ci(line, "code")) {
            header = false;
            continue;
        }
        header = false;
        auto parts = util::split(line, ',');
        if (parts.size() != 2) throw SchemaError("popularity csv: expected 'code,percentage'");
        parse_profile_code(util::trim(parts[0])); // shape check
        p.entries.emplace_back(util::trim(parts[0]), std::stod(parts[1]));
    }
    for (size_t i = 0; i < p.entries.size(); ++i) {
        for (size_t j = i + 1; j < p.entries.size(); ++j)
            if (p.entries[i].first == p.entries[j].first)
                throw ValidationError("popularity csv: duplicate code " + p.entries[i].first);
        if (i && p.entries[i].second > p.entries[i - 1].second + 1e-9)
            throw ValidationError("popularity csv: percentages must be non-increasing");
    }
    return p;
}

ProfilePopularity ProfilePopularity::from_csv(const std::filesystem::path& file) {
    return from_csv_text(util::read_file(file));
}

std::vector<std::string> top_profiles(const ProfilePopularity& p, size_t k) {
    if (k > p.entries.size())
        throw RangeError("top_profiles: k=" + std::to_string(k) + " exceeds table size " +
                         std::to_string(p.entries.size()));
    std::vector<std::string> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) out.push_back(p.entries[i].first);
    return out;
}

std::string render_persona_text(const PersonalityProfile& p, PersonaAudience audience) {
    std::ostringstream out;
    if (audience == PersonaAudience::TraitChoices) {
        bool first = true;
        for (TraitId t : kAllTraits) {
            if (!first) out << "\n";
            first = false;
            out << trait_key_label(p.key(t));
        }
        return out.str();
    }
    bool first = true;
    for (TraitId t : kAllTraits) {
        if (!first) out << "\n";
        first = false;
        out << trait_name(t) << ": " << level_name(p.level(t)) << " (" << trait_definition(t)
            << ")";
    }
    return out.str();
}

} // namespace pats
