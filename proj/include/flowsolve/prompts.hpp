#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace flowsolve {

// Loads prompt templates from a directory of .txt files and fills named
// {{placeholder}} slots. Templates are cached on first use; a missing file
// or an unfilled placeholder raises ConfigError.
class PromptLibrary {
 public:
  explicit PromptLibrary(std::filesystem::path dir);

  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::map<std::string, std::string> cache_;
};

}  // namespace flowsolve
