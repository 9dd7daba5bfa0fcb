#include "cast/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace cast {

namespace {

constexpr std::array<std::string_view, 53> kKeywords = {
    "abstract", "assert",     "boolean",   "break",     "byte",      "case",      "catch",
    "char",     "class",      "const",     "continue",  "default",   "do",        "double",
    "else",     "enum",       "extends",   "final",     "finally",   "float",     "for",
    "goto",     "if",         "implements", "import",   "instanceof", "int",      "interface",
    "long",     "native",     "new",       "package",   "private",   "protected", "public",
    "return",   "short",      "static",    "strictfp",  "super",     "switch",    "synchronized",
    "this",     "throw",      "throws",    "transient", "try",       "void",      "volatile",
    "while",    "true",       "false",     "null",
};

constexpr std::array<std::string_view, 8> kPrimitives = {"boolean", "byte", "char",  "short",
                                                         "int",     "long", "float", "double"};

// Longest first so a linear scan implements maximal munch.
constexpr std::array<std::string_view, 38> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=",
    "<=",   ">=",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "<<", ">>", "=",
    ">",    "<",   "!",   "~",   "?",   ":",  "+",  "-",  "*",  "/",  "&",  "|",
};

constexpr std::string_view kSingleOps = "^%";
constexpr std::string_view kPunct = "(){}[];,.@";

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80; }
bool ident_part(unsigned char c) { return ident_start(c) || std::isdigit(c); }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  LexResult run() {
    LexResult out;
    while (pos_ < src_.size()) {
      unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (std::isspace(c)) {
        ++pos_;
      } else if (starts_with("//")) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        out.comments.push_back({std::string(src_.substr(start, pos_ - start)), start, false});
      } else if (starts_with("/*")) {
        std::size_t start = pos_;
        std::size_t end = src_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) throw LexError(start, "unterminated block comment");
        pos_ = end + 2;
        std::string text(src_.substr(start, pos_ - start));
        bool doc = text.size() > 4 && text.compare(0, 3, "/**") == 0;
        out.comments.push_back({std::move(text), start, doc});
      } else if (ident_start(c)) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && ident_part(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        std::string word(src_.substr(start, pos_ - start));
        TokenKind kind = is_java_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier;
        out.tokens.push_back({kind, std::move(word), start});
      } else if (std::isdigit(c) || (c == '.' && pos_ + 1 < src_.size() &&
                                     std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        out.tokens.push_back(number());
      } else if (c == '"') {
        out.tokens.push_back(quoted('"', TokenKind::StringLiteral));
      } else if (c == '\'') {
        out.tokens.push_back(quoted('\'', TokenKind::CharLiteral));
      } else {
        out.tokens.push_back(symbol());
      }
    }
    return out;
  }

 private:
  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  Token number() {
    std::size_t start = pos_;
    bool is_float = false;
    auto digits = [&](auto pred) {
      while (pos_ < src_.size() && (pred(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    };
    auto dec = [](unsigned char ch) { return std::isdigit(ch) != 0; };
    if (starts_with("0x") || starts_with("0X")) {
      pos_ += 2;
      digits([](unsigned char ch) { return std::isxdigit(ch) != 0; });
    } else if (starts_with("0b") || starts_with("0B")) {
      pos_ += 2;
      digits([](unsigned char ch) { return ch == '0' || ch == '1'; });
    } else {
      digits(dec);
      if (pos_ < src_.size() && src_[pos_] == '.' &&
          !(pos_ + 1 < src_.size() && src_[pos_ + 1] == '.')) {
        is_float = true;
        ++pos_;
        digits(dec);
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        is_float = true;
        ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
        std::size_t exp_start = pos_;
        digits(dec);
        if (pos_ == exp_start) throw LexError(start, "malformed exponent in numeric literal");
      }
    }
    if (pos_ < src_.size()) {
      char s = src_[pos_];
      if (s == 'l' || s == 'L') {
        ++pos_;
      } else if (s == 'f' || s == 'F' || s == 'd' || s == 'D') {
        is_float = true;
        ++pos_;
      }
    }
    if (pos_ < src_.size() && ident_part(static_cast<unsigned char>(src_[pos_])))
      throw LexError(pos_, "illegal character in numeric literal");
    return {is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral,
            std::string(src_.substr(start, pos_ - start)), start};
  }

  Token quoted(char quote, TokenKind kind) {
    std::size_t start = pos_++;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        throw LexError(start, kind == TokenKind::StringLiteral ? "unterminated string literal"
                                                               : "unterminated char literal");
      }
      char ch = src_[pos_++];
      if (ch == '\\') {
        if (pos_ >= src_.size()) throw LexError(start, "unterminated escape sequence");
        ++pos_;
      } else if (ch == quote) {
        break;
      }
    }
    return {kind, std::string(src_.substr(start, pos_ - start)), start};
  }

  Token symbol() {
    for (auto op : kOperators) {
      if (starts_with(op)) {
        std::size_t start = pos_;
        pos_ += op.size();
        TokenKind kind = op == "..." ? TokenKind::Punctuation : TokenKind::Operator;
        return {kind, std::string(op), start};
      }
    }
    char c = src_[pos_];
    if (kSingleOps.find(c) != std::string_view::npos) return {TokenKind::Operator, std::string(1, c), pos_++};
    if (kPunct.find(c) != std::string_view::npos) return {TokenKind::Punctuation, std::string(1, c), pos_++};
    throw LexError(pos_, std::string("illegal character '") + c + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Keyword: return "keyword";
    case TokenKind::IntLiteral: return "int-literal";
    case TokenKind::FloatLiteral: return "float-literal";
    case TokenKind::StringLiteral: return "string-literal";
    case TokenKind::CharLiteral: return "char-literal";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punctuation: return "punctuation";
  }
  return "?";
}

LexError::LexError(std::size_t offset, std::string message)
    : std::runtime_error("lex error at offset " + std::to_string(offset) + ": " + message),
      offset_(offset),
      message_(std::move(message)) {}

LexResult lex(std::string_view source) { return Lexer(source).run(); }

std::vector<Token> tokenize(std::string_view source) { return lex(source).tokens; }

std::string leading_javadoc(const LexResult& lexed) {
  std::size_t first = lexed.tokens.empty() ? std::string::npos : lexed.tokens.front().offset;
  const Comment* best = nullptr;
  for (const auto& c : lexed.comments) {
    if (c.offset >= first) break;
    best = &c;
  }
  // Only the comment directly before the declaration counts.
  if (best != nullptr && best->javadoc) return best->text;
  return {};
}

std::string leading_javadoc(std::string_view source) { return leading_javadoc(lex(source)); }

bool is_java_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

bool is_primitive_type(std::string_view word) {
  return std::find(kPrimitives.begin(), kPrimitives.end(), word) != kPrimitives.end();
}

}  // namespace cast
