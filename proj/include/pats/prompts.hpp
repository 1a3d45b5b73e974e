#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace pats {

/// Versioned prompt templates on disk: <dir>/<version>/<name>.txt with
/// {slot} placeholders. Substituted content is inserted verbatim.
class PromptLibrary {
  public:
    explicit PromptLibrary(std::filesystem::path dir, std::string version = "v1");

    std::string raw(const std::string& name) const;
    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& slots) const;

    const std::string& version() const { return version_; }

    static std::string render_text(const std::string& templ,
                                   const std::map<std::string, std::string>& slots);

  private:
    std::filesystem::path dir_;
    std::string version_;
};

} // namespace pats
