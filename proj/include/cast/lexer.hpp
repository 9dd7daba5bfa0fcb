#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cast {

enum class TokenKind {
  Identifier,
  Keyword,
  IntLiteral,
  FloatLiteral,
  StringLiteral,
  CharLiteral,
  Operator,
  Punctuation,
};

const char* to_string(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::Punctuation;
  std::string text;
  std::size_t offset = 0;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool is_literal() const {
    return kind == TokenKind::IntLiteral || kind == TokenKind::FloatLiteral ||
           kind == TokenKind::StringLiteral || kind == TokenKind::CharLiteral;
  }
};

struct Comment {
  std::string text;
  std::size_t offset = 0;
  bool javadoc = false;
};

class LexError : public std::runtime_error {
 public:
  LexError(std::size_t offset, std::string message);
  std::size_t offset() const { return offset_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t offset_;
  std::string message_;
};

struct LexResult {
  std::vector<Token> tokens;
  std::vector<Comment> comments;
};

// Maximal-munch Java lexer. Whitespace and comments are dropped from the token
// stream; comments are reported separately.
LexResult lex(std::string_view source);
std::vector<Token> tokenize(std::string_view source);

// The Javadoc block that immediately precedes the first token, or "" if none.
std::string leading_javadoc(std::string_view source);
std::string leading_javadoc(const LexResult& lexed);

bool is_java_keyword(std::string_view word);
bool is_primitive_type(std::string_view word);

}  // namespace cast
