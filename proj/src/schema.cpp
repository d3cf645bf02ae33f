#include "flowsolve/schema.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace flowsolve {

namespace {

bool is_identifier(const std::string& name) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_') return false;
  return std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

void validate_field(const FieldSpec& field, const std::string& path) {
  const std::string here = path.empty() ? field.name : path + "." + field.name;
  if (!is_identifier(field.name)) {
    throw SchemaError(here, "field name is not a valid identifier");
  }
  if (field.min_items && field.max_items && *field.min_items > *field.max_items) {
    throw SchemaError(here, "min_items exceeds max_items");
  }
  if (field.kind == FieldKind::list) {
    if (field.children.size() != 1) {
      throw SchemaError(here, "list field needs exactly one element spec");
    }
    validate_field(field.children.front(), here);
  } else if (field.kind == FieldKind::record) {
    std::set<std::string> seen;
    for (const FieldSpec& child : field.children) {
      if (!seen.insert(child.name).second) {
        throw SchemaError(here, "duplicate field name '" + child.name + "'");
      }
      validate_field(child, here);
    }
  }
}

std::string python_type(const FieldSpec& field);

std::string element_type(const FieldSpec& field) { return python_type(field.list_element()); }

std::string python_type(const FieldSpec& field) {
  switch (field.kind) {
    case FieldKind::text: return "str";
    case FieldKind::integer: return "int";
    case FieldKind::number: return "float";
    case FieldKind::boolean: return "bool";
    case FieldKind::list: return "List[" + element_type(field) + "]";
    case FieldKind::record: return field.type_name;
  }
  return "str";
}

std::string escape_description(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '"') {
      out += "\\\"";
    } else if (c == '\n') {
      out += ' ';  // descriptions render as single logical lines
    } else {
      out += c;
    }
  }
  return out;
}

// Depth-first collection so nested record classes render before their users.
void collect_records(const FieldSpec& field, std::vector<const FieldSpec*>& records) {
  if (field.kind == FieldKind::list) {
    collect_records(field.list_element(), records);
  } else if (field.kind == FieldKind::record) {
    for (const FieldSpec& child : field.children) collect_records(child, records);
    records.push_back(&field);
  }
}

void render_class(const FieldSpec& record, std::ostream& out) {
  out << "class " << record.type_name << "(BaseModel):\n";
  for (const FieldSpec& field : record.children) {
    out << "    " << field.name << ": " << python_type(field) << " = Field(";
    if (field.min_items) out << "min_items=" << *field.min_items << ", ";
    if (field.max_items) out << "max_items=" << *field.max_items << ", ";
    out << "description=\"" << escape_description(field.description) << "\")\n";
  }
}

struct FencedBlock {
  std::string label;
  std::string body;
};

bool is_fence_line(std::string_view line, std::string* label) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (line.size() - i < 3 || line.compare(i, 3, "```") != 0) return false;
  std::string rest(line.substr(i + 3));
  while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t' || rest.back() == '\r')) {
    rest.pop_back();
  }
  if (label) *label = rest;
  return true;
}

std::vector<FencedBlock> find_fenced_blocks(const std::string& raw) {
  std::vector<FencedBlock> blocks;
  std::istringstream in(raw);
  std::string line;
  bool inside = false;
  FencedBlock current;
  std::string body;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string label;
    if (is_fence_line(line, &label)) {
      if (!inside) {
        inside = true;
        current.label = label;
        body.clear();
      } else {
        current.body = body;
        blocks.push_back(current);
        inside = false;
      }
      continue;
    }
    if (inside) {
      body += line;
      body += '\n';
    }
  }
  if (inside) {  // unterminated fence runs to end of text
    current.body = body;
    blocks.push_back(current);
  }
  return blocks;
}

std::string trim(const std::string& text) {
  size_t begin = 0;
  size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

bool yaml_label(const std::string& label) {
  std::string lowered;
  for (char c : label) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lowered == "yaml" || lowered == "yml";
}

std::string json_pointer(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

ValueTree convert_node(const YAML::Node& node, const FieldSpec& spec, const std::string& path,
                       std::vector<std::string>* warnings);

ValueTree convert_record(const YAML::Node& node, const FieldSpec& spec, const std::string& path,
                         std::vector<std::string>* warnings) {
  if (node && !node.IsMap() && !node.IsNull()) {
    throw SchemaError(path, "expected a mapping");
  }
  ValueTree::Record record;
  std::set<std::string> known;
  for (const FieldSpec& field : spec.children) {
    known.insert(field.name);
    const std::string field_path = json_pointer(path, field.name);
    YAML::Node child = (node && node.IsMap()) ? node[field.name]
                                              : YAML::Node(YAML::NodeType::Undefined);
    if (!child || child.IsNull()) {
      throw SchemaError(field_path, "missing required field");
    }
    record.emplace_back(field.name, convert_node(child, field, field_path, warnings));
  }
  if (node && node.IsMap() && warnings) {
    for (const auto& item : node) {
      const std::string key = item.first.as<std::string>("");
      if (!known.count(key)) {
        warnings->push_back("ignoring unknown field '" + json_pointer(path, key) + "'");
      }
    }
  }
  return ValueTree(std::move(record));
}

ValueTree convert_node(const YAML::Node& node, const FieldSpec& spec, const std::string& path,
                       std::vector<std::string>* warnings) {
  switch (spec.kind) {
    case FieldKind::text: {
      if (!node.IsScalar()) throw SchemaError(path, "expected a text scalar");
      return ValueTree(node.Scalar());
    }
    case FieldKind::integer: {
      if (!node.IsScalar()) throw SchemaError(path, "expected an integer");
      const std::string& s = node.Scalar();
      long long value = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw SchemaError(path, "expected an integer, got '" + s + "'");
      }
      return ValueTree(value);
    }
    case FieldKind::number: {
      if (!node.IsScalar()) throw SchemaError(path, "expected a number");
      try {
        return ValueTree(node.as<double>());
      } catch (const YAML::Exception&) {
        throw SchemaError(path, "expected a number, got '" + node.Scalar() + "'");
      }
    }
    case FieldKind::boolean: {
      if (!node.IsScalar()) throw SchemaError(path, "expected a boolean");
      try {
        return ValueTree(node.as<bool>());
      } catch (const YAML::Exception&) {
        throw SchemaError(path, "expected a boolean, got '" + node.Scalar() + "'");
      }
    }
    case FieldKind::list: {
      if (!node.IsSequence()) throw SchemaError(path, "expected a list");
      const int count = static_cast<int>(node.size());
      if (spec.min_items && count < *spec.min_items) {
        throw SchemaError(path, "list has " + std::to_string(count) + " items, fewer than min_items=" +
                                    std::to_string(*spec.min_items));
      }
      if (spec.max_items && count > *spec.max_items) {
        throw SchemaError(path, "list has " + std::to_string(count) + " items, more than max_items=" +
                                    std::to_string(*spec.max_items));
      }
      ValueTree::List list;
      list.reserve(node.size());
      for (size_t i = 0; i < node.size(); ++i) {
        list.push_back(convert_node(node[i], spec.list_element(),
                                    path + "[" + std::to_string(i) + "]", warnings));
      }
      return ValueTree(std::move(list));
    }
    case FieldKind::record:
      return convert_record(node, spec, path, warnings);
  }
  throw SchemaError(path, "unknown field kind");
}

}  // namespace

FieldSpec text_field(std::string name, std::string description) {
  FieldSpec f;
  f.name = std::move(name);
  f.kind = FieldKind::text;
  f.description = std::move(description);
  return f;
}

FieldSpec integer_field(std::string name, std::string description) {
  FieldSpec f = text_field(std::move(name), std::move(description));
  f.kind = FieldKind::integer;
  return f;
}

FieldSpec number_field(std::string name, std::string description) {
  FieldSpec f = text_field(std::move(name), std::move(description));
  f.kind = FieldKind::number;
  return f;
}

FieldSpec boolean_field(std::string name, std::string description) {
  FieldSpec f = text_field(std::move(name), std::move(description));
  f.kind = FieldKind::boolean;
  return f;
}

FieldSpec list_field(std::string name, std::string description, FieldSpec element,
                     std::optional<int> min_items, std::optional<int> max_items) {
  FieldSpec f = text_field(std::move(name), std::move(description));
  f.kind = FieldKind::list;
  f.min_items = min_items;
  f.max_items = max_items;
  f.children.push_back(std::move(element));
  return f;
}

FieldSpec record_field(std::string name, std::string type_name, std::string description,
                       std::vector<FieldSpec> fields) {
  FieldSpec f = text_field(std::move(name), std::move(description));
  f.kind = FieldKind::record;
  f.type_name = std::move(type_name);
  f.children = std::move(fields);
  return f;
}

void Schema::validate() const {
  if (!is_identifier(name)) throw SchemaError(name, "schema name is not a valid identifier");
  if (root.kind != FieldKind::record) throw SchemaError(name, "schema root must be a record");
  validate_field(root, "");
}

const std::string& ValueTree::as_text() const {
  if (!is_text()) throw SchemaError("", "value is not text");
  return std::get<std::string>(value_);
}

long long ValueTree::as_integer() const {
  if (!is_integer()) throw SchemaError("", "value is not an integer");
  return std::get<long long>(value_);
}

double ValueTree::as_number() const {
  if (is_integer()) return static_cast<double>(std::get<long long>(value_));
  if (!std::holds_alternative<double>(value_)) throw SchemaError("", "value is not a number");
  return std::get<double>(value_);
}

bool ValueTree::as_boolean() const {
  if (!std::holds_alternative<bool>(value_)) throw SchemaError("", "value is not a boolean");
  return std::get<bool>(value_);
}

const ValueTree::List& ValueTree::as_list() const {
  if (!is_list()) throw SchemaError("", "value is not a list");
  return std::get<List>(value_);
}

const ValueTree::Record& ValueTree::as_record() const {
  if (!is_record()) throw SchemaError("", "value is not a record");
  return std::get<Record>(value_);
}

bool ValueTree::has(std::string_view key) const {
  if (!is_record()) return false;
  for (const auto& [name, value] : as_record()) {
    if (name == key) return true;
  }
  return false;
}

const ValueTree& ValueTree::at(std::string_view key) const {
  for (const auto& [name, value] : as_record()) {
    if (name == key) return value;
  }
  throw SchemaError(std::string(key), "missing record field");
}

std::string render_schema_prompt(const Schema& schema) {
  schema.validate();
  FieldSpec root = schema.root;
  if (root.type_name.empty()) root.type_name = schema.name;

  std::vector<const FieldSpec*> records;
  collect_records(root, records);

  std::ostringstream out;
  out << "The output must be a YAML object equivalent to type $" << root.type_name
      << ", according to the following Pydantic definitions:\n";
  for (const FieldSpec* record : records) {
    out << "\n";
    render_class(*record, out);
  }
  out << "\nUse a YAML block scalar (|-) for every string field whose value spans multiple "
         "lines, and plain indentation inside it.\n"
         "Answer with the YAML object only.\n";
  return out.str();
}

std::string extract_yaml(const std::string& raw) {
  const std::vector<FencedBlock> blocks = find_fenced_blocks(raw);
  const FencedBlock* best_yaml = nullptr;
  for (const FencedBlock& block : blocks) {
    if (yaml_label(block.label)) {
      if (!best_yaml || block.body.size() > best_yaml->body.size()) best_yaml = &block;
    }
  }
  if (best_yaml) return trim(best_yaml->body);
  if (!blocks.empty()) return trim(blocks.front().body);
  return trim(raw);
}

ValueTree parse_validated(const std::string& payload, const Schema& schema,
                          std::vector<std::string>* warnings) {
  schema.validate();
  YAML::Node root;
  try {
    root = YAML::Load(payload);
  } catch (const YAML::ParserException& ex) {
    throw SchemaError("", "YAML syntax error at line " + std::to_string(ex.mark.line + 1) +
                              ", column " + std::to_string(ex.mark.column + 1) + ": " + ex.msg);
  }
  FieldSpec root_spec = schema.root;
  if (root_spec.type_name.empty()) root_spec.type_name = schema.name;
  return convert_record(root, root_spec, "", warnings);
}

}  // namespace flowsolve
