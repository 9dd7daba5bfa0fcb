#include "cast/parser.hpp"

#include <array>
#include <optional>

namespace cast {

ParseError::ParseError(std::size_t offset, std::string expected, std::string found)
    : std::runtime_error("parse error at offset " + std::to_string(offset) + ": expected " + expected +
                         ", found " + found),
      offset_(offset),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

namespace {

constexpr std::array<std::string_view, 12> kModifiers = {
    "public", "private",  "protected", "static", "final",  "abstract",
    "native", "strictfp", "default",   "synchronized", "transient", "volatile"};

constexpr std::array<std::string_view, 12> kAssignOps = {"=",  "+=", "-=", "*=",  "/=",   "%=",
                                                         "&=", "|=", "^=", "<<=", ">>=", ">>>="};

bool is_modifier(std::string_view w) {
  for (auto m : kModifiers)
    if (m == w) return true;
  return false;
}

bool is_assign_op(std::string_view w) {
  for (auto m : kAssignOps)
    if (m == w) return true;
  return false;
}

int binary_precedence(std::string_view op) {
  if (op == "||") return 0;
  if (op == "&&") return 1;
  if (op == "|") return 2;
  if (op == "^") return 3;
  if (op == "&") return 4;
  if (op == "==" || op == "!=") return 5;
  if (op == "<" || op == ">" || op == "<=" || op == ">=" || op == "instanceof") return 6;
  if (op == "<<" || op == ">>" || op == ">>>") return 7;
  if (op == "+" || op == "-") return 8;
  if (op == "*" || op == "/" || op == "%") return 9;
  return -1;
}

constexpr auto kSig = NodeClass::SignaturePart;
constexpr auto kComp = NodeClass::CompositeStmt;
constexpr auto kSimple = NodeClass::SimpleStmt;
constexpr auto kExpr = NodeClass::ExpressionPart;
constexpr auto kTerm = NodeClass::Terminal;

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

  MethodAst run() {
    NodeId root = make("Root", kSig);
    tree_.set_root(root);
    NodeId sig = make("MethSig", kSig);
    NodeId body = make("MethBody", kSig);
    tree_.add_child(root, sig);
    tree_.add_child(root, body);

    parse_signature(sig);
    expect_sym("{", "method body");
    while (!is_sym("}")) tree_.add_child(body, statement());
    expect_sym("}", "'}'");
    if (!at_end()) fail("end of method");
    return std::move(tree_);
  }

 private:
  struct State {
    std::size_t pos;
    std::size_t split;
  };

  // --- token access -------------------------------------------------------

  bool at_end() const { return pos_ >= toks_.size(); }

  // Text of the k-th token ahead; honours a partially consumed '>>' token.
  std::string_view text(std::size_t k = 0) const {
    if (pos_ + k >= toks_.size()) return {};
    std::string_view t = toks_[pos_ + k].text;
    if (k == 0) t.remove_prefix(split_);
    return t;
  }

  TokenKind kind(std::size_t k = 0) const {
    return pos_ + k < toks_.size() ? toks_[pos_ + k].kind : TokenKind::Punctuation;
  }

  std::size_t offset() const {
    if (at_end()) return toks_.empty() ? 0 : toks_.back().offset + toks_.back().text.size();
    return toks_[pos_].offset + split_;
  }

  bool is_sym(std::string_view s, std::size_t k = 0) const {
    if (pos_ + k >= toks_.size()) return false;
    TokenKind kd = kind(k);
    return (kd == TokenKind::Operator || kd == TokenKind::Punctuation) && text(k) == s;
  }

  bool is_kw(std::string_view s, std::size_t k = 0) const {
    return pos_ + k < toks_.size() && kind(k) == TokenKind::Keyword && text(k) == s;
  }

  bool is_ident(std::size_t k = 0) const { return pos_ + k < toks_.size() && kind(k) == TokenKind::Identifier; }

  void advance() {
    ++pos_;
    split_ = 0;
  }

  std::string take() {
    std::string t(text());
    advance();
    return t;
  }

  State save() const { return {pos_, split_}; }
  void restore(State s) {
    pos_ = s.pos;
    split_ = s.split;
  }

  [[noreturn]] void fail(std::string expected) const {
    throw ParseError(offset(), std::move(expected), at_end() ? "<eof>" : "'" + std::string(text()) + "'");
  }

  void expect_sym(std::string_view s, const char* what) {
    if (!is_sym(s)) fail(what);
    advance();
  }

  void expect_kw(std::string_view s) {
    if (!is_kw(s)) fail("'" + std::string(s) + "'");
    advance();
  }

  std::string expect_ident(const char* what) {
    if (!is_ident()) fail(what);
    return take();
  }

  // Consumes one '>' even when it is the prefix of '>>' or '>>>'.
  bool accept_close_angle() {
    if (at_end()) return false;
    auto t = text();
    if (t.empty() || t.front() != '>') return false;
    if (t.size() == 1) {
      advance();
    } else {
      ++split_;
    }
    return true;
  }

  // --- tree helpers -------------------------------------------------------

  NodeId make(std::string label, NodeClass cls) { return tree_.add_node(std::move(label), cls); }

  NodeId leaf(std::string label) { return make(std::move(label), kTerm); }

  NodeId wrap(std::string label, NodeClass cls, std::initializer_list<NodeId> kids) {
    NodeId n = make(std::move(label), cls);
    for (NodeId k : kids) tree_.add_child(n, k);
    return n;
  }

  // --- types ---------------------------------------------------------------

  std::optional<std::string> try_type() {
    State s = save();
    try {
      return type_text(true);
    } catch (const ParseError&) {
      restore(s);
      return std::nullopt;
    }
  }

  std::string type_text(bool with_dims) {
    std::string out;
    if (!at_end() && kind() == TokenKind::Keyword && is_primitive_type(text())) {
      out = take();
    } else {
      out = expect_ident("type name");
      if (is_sym("<")) out += type_args();
      while (is_sym(".") && is_ident(1)) {
        advance();
        out += "." + take();
        if (is_sym("<")) out += type_args();
      }
    }
    if (with_dims) {
      while (is_sym("[") && is_sym("]", 1)) {
        advance();
        advance();
        out += "[]";
      }
    }
    return out;
  }

  std::string type_args() {
    expect_sym("<", "'<'");
    std::string out = "<";
    if (accept_close_angle()) return out + ">";
    for (bool first = true;; first = false) {
      if (!first) out += ", ";
      if (is_sym("?")) {
        advance();
        out += "?";
        if (is_kw("extends") || is_kw("super")) {
          out += " " + take() + " ";
          out += type_text(true);
        }
      } else {
        out += type_text(true);
      }
      if (is_sym(",")) {
        advance();
        continue;
      }
      if (!accept_close_angle()) fail("'>' closing type arguments");
      return out + ">";
    }
  }

  // <T extends Comparable<T>, U> flattened to one terminal
  std::string type_params() {
    expect_sym("<", "'<'");
    std::string out = "<";
    for (bool first = true;; first = false) {
      if (!first) out += ", ";
      out += expect_ident("type parameter");
      if (is_kw("extends")) {
        advance();
        out += " extends " + type_text(true);
        while (is_sym("&")) {
          advance();
          out += " & " + type_text(true);
        }
      }
      if (is_sym(",")) {
        advance();
        continue;
      }
      if (!accept_close_angle()) fail("'>' closing type parameters");
      return out + ">";
    }
  }

  // --- signature ----------------------------------------------------------

  NodeId annotation() {
    expect_sym("@", "'@'");
    std::string name = "@" + expect_ident("annotation name");
    while (is_sym(".") && is_ident(1)) {
      advance();
      name += "." + take();
    }
    if (!is_sym("(")) return leaf(std::move(name));
    NodeId ann = wrap("Annotation", kSig, {leaf(std::move(name))});
    advance();
    if (!is_sym(")")) {
      do {
        tree_.add_child(ann, is_sym("{") ? array_init() : expression());
      } while (accept_sym(","));
    }
    expect_sym(")", "')'");
    return ann;
  }

  bool accept_sym(std::string_view s) {
    if (!is_sym(s)) return false;
    advance();
    return true;
  }

  void modifiers_into(NodeId parent) {
    while (true) {
      if (is_sym("@") && !is_kw("interface", 1)) {
        tree_.add_child(parent, annotation());
      } else if (!at_end() && kind() == TokenKind::Keyword && is_modifier(text())) {
        tree_.add_child(parent, leaf(take()));
      } else {
        return;
      }
    }
  }

  void parse_signature(NodeId sig) {
    modifiers_into(sig);
    if (is_sym("<")) tree_.add_child(sig, leaf(type_params()));
    if (is_ident() && is_sym("(", 1)) {
      tree_.add_child(sig, leaf(take()));  // constructor
    } else {
      if (is_kw("void")) {
        tree_.add_child(sig, leaf(take()));
      } else {
        tree_.add_child(sig, leaf(type_text(true)));
      }
      tree_.add_child(sig, leaf(expect_ident("method name")));
    }
    expect_sym("(", "'(' opening parameter list");
    if (!is_sym(")")) {
      do {
        tree_.add_child(sig, parameter());
      } while (accept_sym(","));
    }
    expect_sym(")", "')' closing parameter list");
    if (is_kw("throws")) {
      advance();
      NodeId th = make("Throws", kSig);
      do {
        tree_.add_child(th, leaf(type_text(true)));
      } while (accept_sym(","));
      tree_.add_child(sig, th);
    }
  }

  NodeId parameter() {
    NodeId p = make("Param", kSig);
    modifiers_into(p);
    std::string type = type_text(true);
    if (accept_sym("...")) type += "...";
    NodeId type_node = leaf(type);
    tree_.add_child(p, type_node);
    tree_.add_child(p, leaf(expect_ident("parameter name")));
    c_style_dims(type_node);
    return p;
  }

  // `int a[]` — fold trailing dims into the type terminal.
  void c_style_dims(NodeId type_node) {
    while (is_sym("[") && is_sym("]", 1)) {
      advance();
      advance();
      tree_.node(type_node).label += "[]";
    }
  }

  // --- statements ---------------------------------------------------------

  // Appends the statements of a body to `parent`: a braced block contributes its
  // statements, anything else contributes itself.
  void body_into(NodeId parent) {
    if (is_sym("{")) {
      advance();
      while (!is_sym("}")) {
        if (at_end()) fail("'}'");
        tree_.add_child(parent, statement());
      }
      advance();
    } else {
      tree_.add_child(parent, statement());
    }
  }

  NodeId block_body(const char* label) {
    NodeId n = make(label, kExpr);
    if (!is_sym("{")) fail("'{'");
    body_into(n);
    return n;
  }

  NodeId paren_cond(const char* label) {
    expect_sym("(", "'('");
    NodeId c = wrap(label, kExpr, {expression()});
    expect_sym(")", "')'");
    return c;
  }

  bool looks_like_local_decl() {
    if (is_kw("final") || (is_sym("@") && is_ident(1))) return true;
    if (!at_end() && kind() == TokenKind::Keyword && is_primitive_type(text())) return !is_sym(".", 1);
    if (!is_ident()) return false;
    State s = save();
    bool decl = false;
    if (try_type() && is_ident()) {
      decl = is_sym("=", 1) || is_sym(";", 1) || is_sym(",", 1) || is_sym("[", 1) || is_sym(":", 1);
    }
    restore(s);
    return decl;
  }

  NodeId local_var_decl() {
    NodeId decl = make("LocalVarDecl", kSimple);
    modifiers_into(decl);
    NodeId type_node = leaf(type_text(true));
    tree_.add_child(decl, type_node);
    do {
      NodeId d = make("Declarator", kExpr);
      tree_.add_child(d, leaf(expect_ident("variable name")));
      c_style_dims(type_node);
      if (accept_sym("=")) tree_.add_child(d, is_sym("{") ? array_init() : expression());
      tree_.add_child(decl, d);
    } while (accept_sym(","));
    return decl;
  }

  NodeId statement() {
    if (at_end()) fail("statement");
    if (is_sym("{")) {
      NodeId b = make("Block", kSimple);
      body_into(b);
      return b;
    }
    if (accept_sym(";")) return make("Empty", kSimple);
    if (kind() == TokenKind::Keyword) {
      auto kw = text();
      if (kw == "if") return if_stmt();
      if (kw == "for") return for_stmt();
      if (kw == "while") {
        advance();
        NodeId cond = paren_cond("Cond");
        NodeId body = make("Body", kExpr);
        body_into(body);
        return wrap("While", kComp, {cond, body});
      }
      if (kw == "do") {
        advance();
        NodeId body = make("Body", kExpr);
        body_into(body);
        expect_kw("while");
        NodeId cond = paren_cond("Cond");
        expect_sym(";", "';'");
        return wrap("DoWhile", kComp, {body, cond});
      }
      if (kw == "switch") return switch_stmt();
      if (kw == "synchronized") {
        advance();
        NodeId lock = paren_cond("Lock");
        NodeId body = block_body("Body");
        return wrap("SynchBlock", kComp, {lock, body});
      }
      if (kw == "try") return try_stmt();
      if (kw == "return") {
        advance();
        NodeId r = make("Return", kSimple);
        if (!is_sym(";")) tree_.add_child(r, expression());
        expect_sym(";", "';'");
        return r;
      }
      if (kw == "break" || kw == "continue") {
        NodeId r = make(kw == "break" ? "Break" : "Continue", kSimple);
        advance();
        if (is_ident()) tree_.add_child(r, leaf(take()));
        expect_sym(";", "';'");
        return r;
      }
      if (kw == "throw") {
        advance();
        NodeId r = wrap("Throw", kSimple, {expression()});
        expect_sym(";", "';'");
        return r;
      }
      if (kw == "assert") {
        advance();
        NodeId r = wrap("Assert", kSimple, {expression()});
        if (accept_sym(":")) tree_.add_child(r, expression());
        expect_sym(";", "';'");
        return r;
      }
      if (kw == "class" || kw == "interface" || kw == "enum") fail("statement (local types are unsupported)");
    }
    if (is_ident() && is_sym(":", 1)) {
      NodeId name = leaf(take());
      advance();
      NodeId body = make("Body", kExpr);
      tree_.add_child(body, statement());
      return wrap("Label", kComp, {name, body});
    }
    if (looks_like_local_decl()) {
      NodeId d = local_var_decl();
      expect_sym(";", "';'");
      return d;
    }
    NodeId e = wrap("ExprStmt", kSimple, {expression()});
    expect_sym(";", "';'");
    return e;
  }

  NodeId if_stmt() {
    expect_kw("if");
    NodeId cond = paren_cond("Cond");
    NodeId then = make("Then", kExpr);
    body_into(then);
    NodeId n = wrap("If", kComp, {cond, then});
    if (is_kw("else")) {
      advance();
      NodeId els = make("Else", kExpr);
      body_into(els);
      tree_.add_child(n, els);
    }
    return n;
  }

  NodeId for_stmt() {
    expect_kw("for");
    expect_sym("(", "'('");
    // enhanced for: [final] Type name :
    if (looks_like_local_decl()) {
      State s = save();
      NodeId var = make("ForEachVar", kExpr);
      modifiers_into(var);
      tree_.add_child(var, leaf(type_text(true)));
      if (is_ident() && is_sym(":", 1)) {
        tree_.add_child(var, leaf(take()));
        advance();
        NodeId iter = wrap("Iter", kExpr, {expression()});
        expect_sym(")", "')'");
        NodeId body = make("Body", kExpr);
        body_into(body);
        return wrap("For", kComp, {var, iter, body});
      }
      restore(s);  // orphaned nodes from the attempt are unreachable from the root
    }
    NodeId init = make("ForInit", kExpr);
    if (!is_sym(";")) {
      if (looks_like_local_decl()) {
        tree_.add_child(init, local_var_decl());
      } else {
        do {
          tree_.add_child(init, expression());
        } while (accept_sym(","));
      }
    }
    expect_sym(";", "';'");
    NodeId cond = make("Cond", kExpr);
    if (!is_sym(";")) tree_.add_child(cond, expression());
    expect_sym(";", "';'");
    NodeId update = make("ForUpdate", kExpr);
    if (!is_sym(")")) {
      do {
        tree_.add_child(update, expression());
      } while (accept_sym(","));
    }
    expect_sym(")", "')'");
    NodeId body = make("Body", kExpr);
    body_into(body);
    return wrap("For", kComp, {init, cond, update, body});
  }

  NodeId switch_stmt() {
    expect_kw("switch");
    NodeId sw = wrap("Switch", kComp, {paren_cond("Cond")});
    expect_sym("{", "'{'");
    while (!is_sym("}")) {
      NodeId group;
      if (is_kw("case")) {
        advance();
        group = wrap("Case", kExpr, {ternary()});
      } else if (is_kw("default")) {
        advance();
        group = make("Default", kExpr);
      } else {
        fail("'case', 'default' or '}'");
      }
      expect_sym(":", "':'");
      while (!is_sym("}") && !is_kw("case") && !is_kw("default")) {
        if (at_end()) fail("'}'");
        tree_.add_child(group, statement());
      }
      tree_.add_child(sw, group);
    }
    advance();
    return sw;
  }

  NodeId try_stmt() {
    expect_kw("try");
    NodeId resources = -1;
    if (is_sym("(")) {
      advance();
      resources = make("Resources", kExpr);
      while (!is_sym(")")) {
        NodeId res = make("Resource", kExpr);
        if (looks_like_local_decl()) {
          modifiers_into(res);
          tree_.add_child(res, leaf(type_text(true)));
          tree_.add_child(res, leaf(expect_ident("resource name")));
          expect_sym("=", "'='");
        }
        tree_.add_child(res, expression());
        tree_.add_child(resources, res);
        if (!accept_sym(";")) break;
      }
      expect_sym(")", "')'");
    }
    NodeId n = make(resources >= 0 ? "TryWith" : "Try", kComp);
    if (resources >= 0) tree_.add_child(n, resources);
    tree_.add_child(n, block_body("Body"));
    bool handlers = false;
    while (is_kw("catch")) {
      advance();
      handlers = true;
      expect_sym("(", "'('");
      NodeId param = make("CatchParam", kExpr);
      modifiers_into(param);
      std::string type = type_text(false);
      while (accept_sym("|")) type += " | " + type_text(false);
      tree_.add_child(param, leaf(type));
      tree_.add_child(param, leaf(expect_ident("exception variable")));
      expect_sym(")", "')'");
      NodeId c = wrap("Catch", kExpr, {param});
      if (!is_sym("{")) fail("'{'");
      body_into(c);
      tree_.add_child(n, c);
    }
    if (is_kw("finally")) {
      advance();
      handlers = true;
      tree_.add_child(n, block_body("Finally"));
    }
    if (!handlers && resources < 0) fail("'catch' or 'finally'");
    return n;
  }

  // --- expressions --------------------------------------------------------

  NodeId array_init() {
    expect_sym("{", "'{'");
    NodeId n = make("ArrayInit", kExpr);
    while (!is_sym("}")) {
      tree_.add_child(n, is_sym("{") ? array_init() : expression());
      if (!accept_sym(",")) break;
    }
    expect_sym("}", "'}'");
    return n;
  }

  NodeId expression() {
    NodeId lhs = ternary();
    if (!at_end() && kind() == TokenKind::Operator && is_assign_op(text())) {
      std::string op = take();
      NodeId rhs = expression();
      return wrap(op, kExpr, {lhs, rhs});
    }
    if (is_sym("->")) fail("expression (lambdas are unsupported)");
    return lhs;
  }

  NodeId ternary() {
    NodeId cond = binary(0);
    if (!is_sym("?")) return cond;
    advance();
    NodeId a = expression();
    expect_sym(":", "':'");
    NodeId b = ternary();
    return wrap("?", kExpr, {cond, a, b});
  }

  NodeId binary(int min_prec) {
    NodeId lhs = unary();
    while (!at_end()) {
      std::string_view op = text();
      bool op_kind = kind() == TokenKind::Operator || is_kw("instanceof");
      int prec = op_kind ? binary_precedence(op) : -1;
      if (prec < min_prec) break;
      std::string op_s(op);
      advance();
      if (op_s == "instanceof") {
        lhs = wrap(op_s, kExpr, {lhs, leaf(type_text(true))});
        continue;
      }
      NodeId rhs = binary(prec + 1);
      lhs = wrap(op_s, kExpr, {lhs, rhs});
    }
    return lhs;
  }

  bool can_start_cast_operand(std::size_t k) const {
    if (pos_ + k >= toks_.size()) return false;
    TokenKind kd = kind(k);
    if (kd == TokenKind::Identifier || kd == TokenKind::IntLiteral || kd == TokenKind::FloatLiteral ||
        kd == TokenKind::StringLiteral || kd == TokenKind::CharLiteral)
      return true;
    if (kd == TokenKind::Keyword) {
      auto t = text(k);
      return t == "this" || t == "super" || t == "new" || t == "true" || t == "false" || t == "null";
    }
    return is_sym("(", k) || is_sym("!", k) || is_sym("~", k);
  }

  std::optional<NodeId> try_cast() {
    State s = save();
    advance();  // '('
    if (!at_end() && kind() == TokenKind::Keyword && is_primitive_type(text())) {
      std::string type = type_text(true);
      if (accept_sym(")")) return wrap("Cast", kExpr, {leaf(type), unary()});
    } else if (is_ident()) {
      if (auto type = try_type(); type && is_sym(")") && can_start_cast_operand(1)) {
        advance();
        return wrap("Cast", kExpr, {leaf(*type), unary()});
      }
    }
    restore(s);
    return std::nullopt;
  }

  NodeId unary() {
    if (!at_end() && kind() == TokenKind::Operator) {
      auto t = text();
      if (t == "+" || t == "-" || t == "++" || t == "--" || t == "!" || t == "~") {
        std::string label = "u" + std::string(t);
        advance();
        return wrap(label, kExpr, {unary()});
      }
    }
    if (is_sym("(")) {
      if (auto c = try_cast()) return *c;
    }
    return postfix(primary());
  }

  void args_into(NodeId call) {
    expect_sym("(", "'('");
    if (!is_sym(")")) {
      do {
        tree_.add_child(call, expression());
      } while (accept_sym(","));
    }
    expect_sym(")", "')'");
  }

  NodeId postfix(NodeId e) {
    while (true) {
      if (is_sym(".")) {
        advance();
        if (is_sym("<")) fail("member name (generic method calls are unsupported)");
        if (is_kw("class") || is_kw("this")) {
          e = wrap("Field", kExpr, {e, leaf(take())});
          continue;
        }
        std::string name = expect_ident("member name");
        if (is_sym("(")) {
          NodeId call = wrap("MemberCall", kExpr, {e, leaf(name)});
          args_into(call);
          e = call;
        } else {
          e = wrap("Field", kExpr, {e, leaf(name)});
        }
      } else if (is_sym("[")) {
        advance();
        NodeId idx = expression();
        expect_sym("]", "']'");
        e = wrap("Index", kExpr, {e, idx});
      } else if (is_sym("++") || is_sym("--")) {
        e = wrap("p" + take(), kExpr, {e});
      } else if (is_sym("::")) {
        fail("expression (method references are unsupported)");
      } else {
        return e;
      }
    }
  }

  NodeId creator() {
    expect_kw("new");
    std::string type = type_text(false);
    if (is_sym("[")) {
      NodeId arr = make("NewArray", kExpr);
      NodeId type_node = leaf(type);
      tree_.add_child(arr, type_node);
      while (is_sym("[")) {
        advance();
        if (!is_sym("]")) tree_.add_child(arr, expression());
        expect_sym("]", "']'");
        tree_.node(type_node).label += "[]";
      }
      if (is_sym("{")) tree_.add_child(arr, array_init());
      return arr;
    }
    NodeId n = wrap("New", kExpr, {leaf(type)});
    args_into(n);
    if (is_sym("{")) fail("';' (anonymous classes are unsupported)");
    return n;
  }

  NodeId primary() {
    if (at_end()) fail("expression");
    const Token& t = toks_[pos_];
    if (t.is_literal()) return leaf(take());
    if (t.kind == TokenKind::Keyword) {
      auto w = text();
      if (w == "new") return creator();
      if (w == "this" || w == "super") {
        NodeId self = leaf(take());
        if (is_sym("(")) {
          NodeId call = wrap("Call", kExpr, {self});
          args_into(call);
          return call;
        }
        return self;
      }
      if (w == "true" || w == "false" || w == "null") return leaf(take());
      if (is_primitive_type(w) || w == "void") {
        std::string type = w == "void" ? take() : type_text(true);
        expect_sym(".", "'.class'");
        expect_kw("class");
        return wrap("Field", kExpr, {leaf(type), leaf("class")});
      }
      fail("expression");
    }
    if (is_sym("(")) {
      advance();
      NodeId e = expression();
      expect_sym(")", "')'");
      return e;
    }
    if (is_ident()) {
      if (is_sym("->", 1)) fail("expression (lambdas are unsupported)");
      std::string name = take();
      if (is_sym("(")) {
        NodeId call = wrap("Call", kExpr, {leaf(name)});
        args_into(call);
        return call;
      }
      if (is_sym("[") && is_sym("]", 1)) {
        // Foo[].class
        while (accept_sym("[")) {
          expect_sym("]", "']'");
          name += "[]";
        }
        expect_sym(".", "'.class'");
        expect_kw("class");
        return wrap("Field", kExpr, {leaf(name), leaf("class")});
      }
      return leaf(name);
    }
    fail("expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t split_ = 0;
  Tree tree_;
};

// Drops nodes that became unreachable after a speculative parse was rolled back.
MethodAst compact(const MethodAst& t) {
  MethodAst out = t.reindexed();
  return out;
}

}  // namespace

MethodAst parse_method(const std::vector<Token>& tokens) { return compact(Parser(tokens).run()); }

MethodAst parse_method_source(std::string_view source) { return parse_method(tokenize(source)); }

}  // namespace cast
