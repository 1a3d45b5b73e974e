#include "pats/prompts.hpp"

#include "pats/errors.hpp"
#include "pats/util.hpp"

namespace pats {

PromptLibrary::PromptLibrary(std::filesystem::path dir, std::string version)
    : dir_(std::move(dir)), version_(std::move(version)) {
    if (!std::filesystem::is_directory(dir_ / version_))
        throw ConfigError("prompt template directory not found: " + (dir_ / version_).string());
}

std::string PromptLibrary::raw(const std::string& name) const {
    auto file = dir_ / version_ / (name + ".txt");
    std::string text = util::read_file(file);
    // strip a single trailing newline left by editors
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

std::string PromptLibrary::render_text(const std::string& templ,
                                       const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(templ.size());
    size_t i = 0;
    while (i < templ.size()) {
        if (templ[i] == '{') {
            size_t close = templ.find('}', i + 1);
            if (close != std::string::npos) {
                const std::string key = templ.substr(i + 1, close - i - 1);
                auto it = slots.find(key);
                if (it != slots.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(templ[i++]);
    }
    return out;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& slots) const {
    return render_text(raw(name), slots);
}

} // namespace pats
