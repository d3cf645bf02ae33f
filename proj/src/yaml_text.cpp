#include "flowsolve/yaml_text.hpp"

#include <cstdio>
#include <vector>

namespace flowsolve {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

bool block_scalar_safe(std::string_view text) {
  if (text.empty()) return false;
  if (text.find('\r') != std::string_view::npos) return false;
  if (text.front() == ' ' || text.front() == '\t') return false;
  // At most one trailing newline (| keeps exactly one, |- keeps none).
  if (text.size() >= 2 && text[text.size() - 1] == '\n' && text[text.size() - 2] == '\n') {
    return false;
  }
  std::string_view body = text;
  if (body.back() == '\n') body.remove_suffix(1);
  for (std::string_view line : split_lines(body)) {
    if (!line.empty() && (line.back() == ' ' || line.back() == '\t')) return false;
    for (char c : line) {
      if (static_cast<unsigned char>(c) < 0x20 && c != '\t') return false;
    }
  }
  return true;
}

std::string yaml_quote(std::string_view text) {
  std::string out = "\"";
  for (unsigned char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\x%02x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
  return out;
}

void emit_text_field(std::ostream& out, int indent, std::string_view key, std::string_view text) {
  std::string pad(indent, ' ');
  if (!block_scalar_safe(text)) {
    out << pad << key << ": " << yaml_quote(text) << "\n";
    return;
  }
  const bool keep_newline = text.back() == '\n';
  std::string_view body = text;
  if (keep_newline) body.remove_suffix(1);
  out << pad << key << ": " << (keep_newline ? "|" : "|-") << "\n";
  std::string inner(indent + 2, ' ');
  for (std::string_view line : split_lines(body)) {
    if (line.empty()) {
      out << "\n";
    } else {
      out << inner << line << "\n";
    }
  }
}

}  // namespace flowsolve
