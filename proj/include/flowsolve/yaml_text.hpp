#pragma once

#include <ostream>
#include <string>
#include <string_view>

namespace flowsolve {

// True when `text` can be written as a YAML literal block scalar (| or |-)
// and parse back byte-identical: no carriage returns, no line with trailing
// whitespace, first line not indented, at most one trailing newline.
bool block_scalar_safe(std::string_view text);

// Double-quoted YAML scalar with full escaping; round-trips any text.
std::string yaml_quote(std::string_view text);

// Writes `key: <text>` at the given indent, preferring a literal block
// scalar and falling back to a double-quoted scalar.
void emit_text_field(std::ostream& out, int indent, std::string_view key, std::string_view text);

}  // namespace flowsolve
