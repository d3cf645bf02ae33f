#pragma once

#include <optional>
#include <string>
#include <vector>

namespace flowsolve {

enum class JudgeMode { exact, float_tolerant };

enum class OutputShape { number, number_array, string_array, opaque_text };

struct ParsedOutput {
  OutputShape shape = OutputShape::opaque_text;
  std::vector<std::string> tokens;  // whitespace-split tokens, all shapes
  std::vector<double> numbers;      // filled for number / number_array
};

struct MatchResult {
  bool passed = false;
  std::optional<double> distance;
  std::string detail;  // first mismatch, empty on pass
};

// Distance reported when outputs cannot be compared cell by cell (shape or
// length mismatch, or unclassifiable text). Strictly larger than any
// comparable distance a run produces.
inline constexpr double kMismatchDistance = 1e300;

inline constexpr double kDefaultEpsilon = 1e-6;

// Strips trailing whitespace per line, drops trailing blank lines, folds
// CRLF to LF. Idempotent.
std::string normalize_output(const std::string& raw);

// Classifies a normalized output: a single numeric token is a number, two
// or more all-numeric tokens a number array, two or more tokens otherwise a
// string array; anything else is opaque text.
ParsedOutput parse_output(const std::string& raw);

// exact: normalized texts must be equal. float_tolerant: same token count,
// numeric pairs within epsilon (absolute), non-numeric tokens equal.
MatchResult compare(const std::string& actual, const std::string& expected, JudgeMode mode,
                    double epsilon = kDefaultEpsilon);

// Scalar distance between outputs: |a-b| for numbers, per-cell |a-b| summed
// for numeric arrays of equal length, count of differing cells for string
// arrays of equal length. Equal normalized texts are always distance zero;
// every incomparable pair gets kMismatchDistance.
double output_distance(const std::string& actual, const std::string& expected);

}  // namespace flowsolve
