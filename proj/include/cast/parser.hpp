#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cast/lexer.hpp"
#include "cast/tree.hpp"

namespace cast {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, std::string expected, std::string found);
  std::size_t offset() const { return offset_; }
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::size_t offset_;
  std::string expected_;
  std::string found_;
};

// Parses exactly one method (or constructor) declaration from the supported
// Java subset. See docs/grammar.md for the node-label inventory.
MethodAst parse_method(const std::vector<Token>& tokens);

// Lex + parse convenience.
MethodAst parse_method_source(std::string_view source);

}  // namespace cast
