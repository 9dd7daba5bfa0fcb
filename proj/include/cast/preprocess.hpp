#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cast/lexer.hpp"
#include "cast/splitter.hpp"
#include "cast/tree.hpp"

namespace cast {

inline constexpr const char* kNumToken = "<NUM>";
inline constexpr const char* kStringToken = "<STRING>";

// camelCase / snake_case / letter-digit boundaries, lowercased.
// "getFirstItemIndex" -> get first item index, "HTMLParser" -> html parser,
// "utf8String" -> utf 8 string.
std::vector<std::string> split_identifier(std::string_view ident);

std::vector<std::string> normalize_code_tokens(const std::vector<Token>& tokens);

class EmptySummary : public std::runtime_error {
 public:
  EmptySummary() : std::runtime_error("javadoc has no summary sentence") {}
};

// First sentence of a Javadoc block (or of plain text), lowercased and split
// into alphanumeric words. Throws EmptySummary when nothing remains.
std::vector<std::string> extract_summary(std::string_view javadoc);

// Lowercases, drops punctuation, keeps alphanumeric runs.
std::vector<std::string> summary_words(std::string_view text);

// AST-channel label normalization: literals become <NUM>/<STRING>, identifier
// and type-text terminals become a chain of subtoken nodes (each the single
// child of the previous one). Non-terminal labels are kept whole.
MethodAst normalize_ast(const MethodAst& ast);

// One parsed, normalized training pair.
struct Example {
  std::string id;
  std::vector<std::string> code_tokens;
  SplitResult split;
  std::vector<std::string> summary_tokens;
};

// Parses `code` (which may carry a leading Javadoc) into an Example. The
// summary comes from `summary_text` when given, else from the Javadoc.
// Throws LexError, ParseError or (when `require_summary`) EmptySummary;
// otherwise a missing summary leaves summary_tokens empty.
Example make_example(const std::string& id, const std::string& code,
                     const std::optional<std::string>& summary_text = std::nullopt, bool require_summary = true);

}  // namespace cast
