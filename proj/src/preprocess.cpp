#include "cast/preprocess.hpp"

#include <cctype>

#include "cast/parser.hpp"

namespace cast {

namespace {

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || static_cast<unsigned char>(c) >= 0x80; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> split_identifier(std::string_view ident) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(lower(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < ident.size(); ++i) {
    char c = ident[i];
    if (c == '_' || c == '$') {
      flush();
      continue;
    }
    if (!cur.empty()) {
      char p = cur.back();
      bool boundary = (is_lower(p) && is_upper(c)) || (is_digit(p) != is_digit(c)) ||
                      // HTMLParser: split before the last capital of an acronym
                      (is_upper(p) && is_upper(c) && i + 1 < ident.size() && is_lower(ident[i + 1]));
      if (boundary) flush();
    }
    cur += c;
  }
  flush();
  return out;
}

std::vector<std::string> normalize_code_tokens(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    switch (t.kind) {
      case TokenKind::Identifier:
        for (auto& s : split_identifier(t.text)) out.push_back(std::move(s));
        break;
      case TokenKind::IntLiteral:
      case TokenKind::FloatLiteral: out.push_back(kNumToken); break;
      case TokenKind::StringLiteral:
      case TokenKind::CharLiteral: out.push_back(kStringToken); break;
      default: out.push_back(t.text); break;
    }
  }
  return out;
}

std::vector<std::string> summary_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_word_char(c)) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> extract_summary(std::string_view javadoc) {
  std::string_view body = javadoc;
  auto trim_front = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    return s;
  };
  body = trim_front(body);
  if (body.substr(0, 3) == "/**") body.remove_prefix(3);
  if (auto end = body.rfind("*/"); end != std::string_view::npos) body = body.substr(0, end);

  // strip leading '*' per line, stop at the first block tag line
  std::string text;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t nl = body.find('\n', start);
    std::string_view line = body.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    line = trim_front(line);
    while (!line.empty() && line.front() == '*') line.remove_prefix(1);
    line = trim_front(line);
    if (!line.empty() && line.front() == '@') break;
    text.append(line);
    text += ' ';
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }

  // {@tag argument text} -> argument text; <html> tags dropped
  std::string flat;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 2, "{@") == 0) {
      std::size_t close = text.find('}', i);
      if (close == std::string::npos) close = text.size();
      std::size_t sp = text.find_first_of(" \t", i);
      if (sp != std::string::npos && sp < close) flat.append(text, sp + 1, close - sp - 1);
      i = close;
      continue;
    }
    if (text[i] == '<' && i + 1 < text.size() && (std::isalpha(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '/')) {
      std::size_t close = text.find('>', i);
      if (close != std::string::npos) {
        flat += ' ';
        i = close;
        continue;
      }
    }
    flat += text[i];
  }

  // first sentence: up to . ? ! followed by whitespace or end
  std::size_t cut = flat.size();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    char c = flat[i];
    if ((c == '.' || c == '?' || c == '!') &&
        (i + 1 == flat.size() || std::isspace(static_cast<unsigned char>(flat[i + 1])))) {
      cut = i;
      break;
    }
  }
  auto words = summary_words(std::string_view(flat).substr(0, cut));
  if (words.empty()) throw EmptySummary();
  return words;
}

namespace {

// Subtoken labels for one terminal; empty means "keep the label as is".
std::vector<std::string> terminal_subtokens(const std::string& label) {
  std::vector<Token> toks;
  try {
    toks = tokenize(label);
  } catch (const LexError&) {
    return {};
  }
  if (toks.size() == 1) {
    if (toks[0].kind == TokenKind::IntLiteral || toks[0].kind == TokenKind::FloatLiteral) return {kNumToken};
    if (toks[0].kind == TokenKind::StringLiteral || toks[0].kind == TokenKind::CharLiteral) return {kStringToken};
  }
  std::vector<std::string> out;
  for (const auto& t : toks) {
    if (t.kind == TokenKind::Identifier) {
      for (auto& s : split_identifier(t.text)) out.push_back(std::move(s));
    } else if (t.kind == TokenKind::Keyword) {
      out.push_back(t.text);
    } else if (t.is_literal()) {
      out.push_back(t.kind == TokenKind::StringLiteral || t.kind == TokenKind::CharLiteral ? kStringToken : kNumToken);
    }
  }
  return out;
}

NodeId copy_normalized(const MethodAst& ast, NodeId src, MethodAst& out) {
  const auto& n = ast.node(src);
  if (n.node_class == NodeClass::Terminal && n.children.empty()) {
    auto subs = terminal_subtokens(n.label);
    if (subs.empty()) subs.push_back(n.label);
    NodeId head = out.add_node(subs[0], subs.size() == 1 ? NodeClass::Terminal : NodeClass::ExpressionPart);
    NodeId prev = head;
    for (std::size_t i = 1; i < subs.size(); ++i) {
      NodeId next = out.add_node(subs[i], i + 1 == subs.size() ? NodeClass::Terminal : NodeClass::ExpressionPart);
      out.add_child(prev, next);
      prev = next;
    }
    return head;
  }
  NodeId id = out.add_node(n.label, n.node_class);
  for (NodeId c : n.children) {
    NodeId k = copy_normalized(ast, c, out);
    out.add_child(id, k);
  }
  return id;
}

}  // namespace

MethodAst normalize_ast(const MethodAst& ast) {
  MethodAst out;
  if (ast.empty()) return out;
  out.set_root(copy_normalized(ast, ast.root(), out));
  return out;
}

Example make_example(const std::string& id, const std::string& code, const std::optional<std::string>& summary_text,
                     bool require_summary) {
  LexResult lexed = lex(code);
  Example ex;
  ex.id = id;
  try {
    ex.summary_tokens = extract_summary(summary_text && !summary_text->empty() ? std::string_view(*summary_text)
                                                                              : std::string_view(leading_javadoc(lexed)));
  } catch (const EmptySummary&) {
    if (require_summary) throw;
  }
  MethodAst ast = parse_method(lexed.tokens);
  ex.split = split(normalize_ast(ast));
  ex.code_tokens = normalize_code_tokens(lexed.tokens);
  return ex;
}

}  // namespace cast
