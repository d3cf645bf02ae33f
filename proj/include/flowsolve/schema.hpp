#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "flowsolve/errors.hpp"

namespace flowsolve {

enum class FieldKind { text, integer, number, boolean, list, record };

// One field of a structured-output schema. Lists keep their element spec in
// children[0]; records keep their named fields there.
struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::text;
  std::string description;
  std::optional<int> min_items;  // list kinds only
  std::optional<int> max_items;
  std::string type_name;  // record kinds: class name used in rendering
  std::vector<FieldSpec> children;

  const FieldSpec& list_element() const { return children.front(); }
};

FieldSpec text_field(std::string name, std::string description);
FieldSpec integer_field(std::string name, std::string description);
FieldSpec number_field(std::string name, std::string description);
FieldSpec boolean_field(std::string name, std::string description);
FieldSpec list_field(std::string name, std::string description, FieldSpec element,
                     std::optional<int> min_items = std::nullopt,
                     std::optional<int> max_items = std::nullopt);
FieldSpec record_field(std::string name, std::string type_name, std::string description,
                       std::vector<FieldSpec> fields);

struct Schema {
  std::string name;
  FieldSpec root;  // kind record; root.type_name falls back to name

  // Throws SchemaError when field names are not identifiers, collide within
  // a record level, or min_items exceeds max_items.
  void validate() const;
};

// Dynamically typed value mirroring FieldSpec kinds.
class ValueTree {
 public:
  using List = std::vector<ValueTree>;
  using Record = std::vector<std::pair<std::string, ValueTree>>;

  ValueTree() : value_(std::string()) {}
  ValueTree(std::string text) : value_(std::move(text)) {}
  ValueTree(const char* text) : value_(std::string(text)) {}
  ValueTree(long long integer) : value_(integer) {}
  ValueTree(double number) : value_(number) {}
  ValueTree(bool boolean) : value_(boolean) {}
  ValueTree(List list) : value_(std::move(list)) {}
  ValueTree(Record record) : value_(std::move(record)) {}

  bool is_text() const { return std::holds_alternative<std::string>(value_); }
  bool is_integer() const { return std::holds_alternative<long long>(value_); }
  bool is_list() const { return std::holds_alternative<List>(value_); }
  bool is_record() const { return std::holds_alternative<Record>(value_); }

  const std::string& as_text() const;
  long long as_integer() const;
  double as_number() const;  // integers promote
  bool as_boolean() const;
  const List& as_list() const;
  const Record& as_record() const;

  bool has(std::string_view key) const;
  const ValueTree& at(std::string_view key) const;  // throws SchemaError when absent

 private:
  std::variant<std::string, long long, double, bool, List, Record> value_;
};

// Renders schema instructions in the typed, code-like notation the prompts
// carry: one class per record, fields with constraints and descriptions.
// Deterministic for a given schema.
std::string render_schema_prompt(const Schema& schema);

// Best-effort extraction of the YAML payload from a raw model reply: the
// largest yaml-labeled fenced block, else the first fenced block, else the
// trimmed text. Idempotent.
std::string extract_yaml(const std::string& raw);

// Parses and validates a YAML payload against a schema. Unknown fields are
// skipped (reported through `warnings` when given); violations throw
// SchemaError with the field path.
ValueTree parse_validated(const std::string& payload, const Schema& schema,
                          std::vector<std::string>* warnings = nullptr);

}  // namespace flowsolve
