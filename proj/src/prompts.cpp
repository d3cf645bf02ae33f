#include "flowsolve/prompts.hpp"

#include <fstream>
#include <sstream>

#include "flowsolve/errors.hpp"

namespace flowsolve {

PromptLibrary::PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& values) const {
  auto it = cache_.find(name);
  if (it == cache_.end()) {
    const std::filesystem::path path = dir_ / (name + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("prompt template not found: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    it = cache_.emplace(name, buffer.str()).first;
  }

  const std::string& text = it->second;
  std::string out;
  out.reserve(text.size());
  size_t pos = 0;
  while (true) {
    const size_t open = text.find("{{", pos);
    if (open == std::string::npos) {
      out += text.substr(pos);
      break;
    }
    const size_t close = text.find("}}", open);
    if (close == std::string::npos) {
      throw ConfigError("prompt template '" + name + "' has an unterminated placeholder");
    }
    const std::string key = text.substr(open + 2, close - open - 2);
    auto value = values.find(key);
    if (value == values.end()) {
      throw ConfigError("prompt template '" + name + "' needs a value for '" + key + "'");
    }
    out += text.substr(pos, open - pos);
    out += value->second;
    pos = close + 2;
  }
  return out;
}

}  // namespace flowsolve
