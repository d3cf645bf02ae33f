#include "flowsolve/verdict.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace flowsolve {

namespace {

bool parse_number(const std::string& token, double& value) {
  if (token.empty()) return false;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (*first == '+') ++first;  // from_chars rejects a leading plus
  if (first == last) return false;
  double parsed = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, parsed);
  if (ec != std::errc() || ptr != last) return false;
  if (!std::isfinite(parsed)) return false;  // "inf"/"nan" stay strings
  value = parsed;
  return true;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

std::string shorten(const std::string& s, size_t limit = 40) {
  if (s.size() <= limit) return s;
  return s.substr(0, limit) + "...";
}

}  // namespace

std::string normalize_output(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  std::string line;
  auto flush_line = [&] {
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) {
      line.pop_back();
    }
    out += line;
    out += '\n';
    line.clear();
  };
  for (char c : raw) {
    if (c == '\n') {
      flush_line();
    } else {
      line += c;
    }
  }
  if (!line.empty()) flush_line();
  // Trailing blank lines became trailing newlines; interior ones survive.
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

ParsedOutput parse_output(const std::string& raw) {
  ParsedOutput parsed;
  parsed.tokens = tokenize(normalize_output(raw));
  std::vector<double> numbers;
  numbers.reserve(parsed.tokens.size());
  bool all_numeric = !parsed.tokens.empty();
  for (const std::string& token : parsed.tokens) {
    double value = 0.0;
    if (parse_number(token, value)) {
      numbers.push_back(value);
    } else {
      all_numeric = false;
      break;
    }
  }
  if (parsed.tokens.size() == 1 && all_numeric) {
    parsed.shape = OutputShape::number;
    parsed.numbers = std::move(numbers);
  } else if (parsed.tokens.size() >= 2 && all_numeric) {
    parsed.shape = OutputShape::number_array;
    parsed.numbers = std::move(numbers);
  } else if (parsed.tokens.size() >= 2) {
    parsed.shape = OutputShape::string_array;
  } else {
    parsed.shape = OutputShape::opaque_text;
  }
  return parsed;
}

MatchResult compare(const std::string& actual, const std::string& expected, JudgeMode mode,
                    double epsilon) {
  MatchResult result;
  const std::string norm_actual = normalize_output(actual);
  const std::string norm_expected = normalize_output(expected);

  if (mode == JudgeMode::exact) {
    if (norm_actual == norm_expected) {
      result.passed = true;
      result.distance = 0.0;
      return result;
    }
    result.passed = false;
    result.distance = output_distance(actual, expected);
    // Point at the first differing line.
    std::istringstream a(norm_actual), e(norm_expected);
    std::string la, le;
    int line = 1;
    while (true) {
      const bool ga = static_cast<bool>(std::getline(a, la));
      const bool ge = static_cast<bool>(std::getline(e, le));
      if (!ga && !ge) break;
      if (!ga || !ge || la != le) {
        result.detail = "line " + std::to_string(line) + ": expected '" +
                        shorten(ge ? le : "<end>") + "' got '" + shorten(ga ? la : "<end>") + "'";
        break;
      }
      ++line;
    }
    if (result.detail.empty()) result.detail = "outputs differ";
    return result;
  }

  const std::vector<std::string> ta = tokenize(norm_actual);
  const std::vector<std::string> te = tokenize(norm_expected);
  if (ta.size() != te.size()) {
    result.passed = false;
    result.distance = output_distance(actual, expected);
    result.detail = "token count mismatch: expected " + std::to_string(te.size()) + " got " +
                    std::to_string(ta.size());
    return result;
  }
  for (size_t i = 0; i < ta.size(); ++i) {
    double va = 0.0, ve = 0.0;
    const bool na = parse_number(ta[i], va);
    const bool ne = parse_number(te[i], ve);
    bool ok;
    if (na && ne) {
      ok = std::fabs(va - ve) <= epsilon;
    } else {
      ok = ta[i] == te[i];
    }
    if (!ok) {
      result.passed = false;
      result.distance = output_distance(actual, expected);
      result.detail = "token " + std::to_string(i) + ": expected '" + shorten(te[i]) + "' got '" +
                      shorten(ta[i]) + "'";
      return result;
    }
  }
  result.passed = true;
  result.distance = 0.0;
  return result;
}

double output_distance(const std::string& actual, const std::string& expected) {
  const std::string norm_actual = normalize_output(actual);
  const std::string norm_expected = normalize_output(expected);
  // Identical outputs are distance zero no matter how they classify; keeps
  // the distance consistent with an exact-mode pass.
  if (norm_actual == norm_expected) return 0.0;

  const ParsedOutput pa = parse_output(norm_actual);
  const ParsedOutput pe = parse_output(norm_expected);
  if (pa.shape != pe.shape) return kMismatchDistance;

  switch (pa.shape) {
    case OutputShape::number:
      return std::fabs(pa.numbers[0] - pe.numbers[0]);
    case OutputShape::number_array: {
      if (pa.numbers.size() != pe.numbers.size()) return kMismatchDistance;
      double sum = 0.0;
      for (size_t i = 0; i < pa.numbers.size(); ++i) {
        sum += std::fabs(pa.numbers[i] - pe.numbers[i]);
      }
      return sum;
    }
    case OutputShape::string_array: {
      if (pa.tokens.size() != pe.tokens.size()) return kMismatchDistance;
      double differing = 0.0;
      for (size_t i = 0; i < pa.tokens.size(); ++i) {
        if (pa.tokens[i] != pe.tokens[i]) differing += 1.0;
      }
      return differing;
    }
    case OutputShape::opaque_text:
      return kMismatchDistance;
  }
  return kMismatchDistance;
}

}  // namespace flowsolve
