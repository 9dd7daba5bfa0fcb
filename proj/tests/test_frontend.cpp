#include <doctest.h>

#include <cctype>

#include "cast/lexer.hpp"
#include "cast/parser.hpp"
#include "cast/sexpr.hpp"
#include "test_util.hpp"

using namespace cast;

namespace {

std::vector<std::string> texts(const std::vector<Token>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

std::vector<std::string> child_labels(const Tree& t, NodeId id) {
  std::vector<std::string> out;
  for (NodeId c : t.node(id).children) out.push_back(t.node(c).label);
  return out;
}

NodeId find_child(const Tree& t, NodeId parent, const std::string& label) {
  for (NodeId c : t.node(parent).children)
    if (t.node(c).label == label) return c;
  return -1;
}

}  // namespace

TEST_CASE("tokenize: simple declaration") {
  auto toks = tokenize("int x = 1;");
  REQUIRE(toks.size() == 5);
  CHECK(toks[0].kind == TokenKind::Keyword);
  CHECK(toks[1].kind == TokenKind::Identifier);
  CHECK(toks[2].kind == TokenKind::Operator);
  CHECK(toks[3].kind == TokenKind::IntLiteral);
  CHECK(toks[4].kind == TokenKind::Punctuation);
  CHECK(texts(toks) == std::vector<std::string>{"int", "x", "=", "1", ";"});
}

TEST_CASE("tokenize: empty input") { CHECK(tokenize("").empty()); }

TEST_CASE("tokenize: semicolon inside a string literal") {
  auto toks = tokenize("String s = \"a;b\";");
  // String, s, =, "a;b", ;
  REQUIRE(toks.size() == 5);
  CHECK(toks[3].kind == TokenKind::StringLiteral);
  CHECK(toks[3].text == "\"a;b\"");
}

TEST_CASE("tokenize: maximal munch on operators and numbers") {
  auto toks = tokenize("a >>>= b >> 2 ... 1.5e3f 0x1FL 'c' '\\n' x->y");
  CHECK(texts(toks) == std::vector<std::string>{"a", ">>>=", "b", ">>", "2", "...", "1.5e3f", "0x1FL", "'c'",
                                                "'\\n'", "x", "->", "y"});
  CHECK(toks[6].kind == TokenKind::FloatLiteral);
  CHECK(toks[7].kind == TokenKind::IntLiteral);
  CHECK(toks[9].kind == TokenKind::CharLiteral);
}

TEST_CASE("tokenize: errors carry offsets") {
  try {
    tokenize("x = \"abc");
    FAIL("expected LexError");
  } catch (const LexError& e) {
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(tokenize("char c = 'a"), LexError);
  CHECK_THROWS_AS(tokenize("int #x;"), LexError);
  CHECK_THROWS_AS(tokenize("/* open"), LexError);
}

TEST_CASE("tokenize: offsets reproduce the source") {
  std::string src = read_fixture("fig1_method.java");
  auto lexed = lex(src);
  std::size_t prev = 0;
  bool first = true;
  std::string rebuilt(src.size(), ' ');
  for (const auto& t : lexed.tokens) {
    if (!first) CHECK(t.offset > prev);
    first = false;
    prev = t.offset;
    CHECK(src.compare(t.offset, t.text.size(), t.text) == 0);
    rebuilt.replace(t.offset, t.text.size(), t.text);
  }
  for (const auto& c : lexed.comments) rebuilt.replace(c.offset, c.text.size(), c.text);
  // everything not covered by a token or comment is whitespace
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (rebuilt[i] != src[i]) CHECK(std::isspace(static_cast<unsigned char>(src[i])));
  }
}

TEST_CASE("leading javadoc only when it directly precedes the method") {
  CHECK(leading_javadoc("/** Doc. */ void f() {}") == "/** Doc. */");
  CHECK(leading_javadoc("/** Doc. */ // note\nvoid f() {}").empty());
  CHECK(leading_javadoc("void f() { /** inner */ }").empty());
  CHECK(leading_javadoc("/* plain */ void f() {}").empty());
}

TEST_CASE("parse_method: minimal method") {
  auto ast = parse_method_source("void f() { return; }");
  CHECK(ast_to_sexpr(ast) == "(Root (MethSig (void) (f)) (MethBody (Return)))");
  CHECK(ast.node(ast.root()).node_class == NodeClass::SignaturePart);
}

TEST_CASE("parse_method: if followed by a simple statement") {
  auto ast = parse_method_source("int f(int a) { if (a > 0) { return a; } return 0; }");
  NodeId body = find_child(ast, ast.root(), "MethBody");
  CHECK(child_labels(ast, body) == std::vector<std::string>{"If", "Return"});
  NodeId if_node = ast.node(body).children[0];
  CHECK(ast.node(if_node).node_class == NodeClass::CompositeStmt);
  CHECK(ast.node(ast.node(body).children[1]).node_class == NodeClass::SimpleStmt);
  CHECK(ast_to_sexpr(ast) ==
        "(Root (MethSig (int) (f) (Param (int) (a))) (MethBody (If (Cond (> (a) (0))) (Then (Return (a)))) "
        "(Return (0))))");
}

TEST_CASE("parse_method: running example structure") {
  auto ast = parse_method_source(read_fixture("fig1_method.java"));
  NodeId body = find_child(ast, ast.root(), "MethBody");
  auto labels = child_labels(ast, body);
  CHECK(labels == std::vector<std::string>{"LocalVarDecl", "LocalVarDecl", "LocalVarDecl", "LocalVarDecl", "For",
                                           "Return"});
  NodeId for_node = ast.node(body).children[4];
  NodeId for_body = find_child(ast, for_node, "Body");
  REQUIRE(for_body >= 0);
  CHECK(child_labels(ast, for_body) == std::vector<std::string>{"LocalVarDecl", "If"});
  NodeId nested_if = ast.node(for_body).children[1];
  CHECK(child_labels(ast, nested_if) == std::vector<std::string>{"Cond", "Then", "Else"});
}

TEST_CASE("parse_method: composite statement kinds") {
  const char* src = R"(
    synchronized void all(int[] xs, String... rest) throws IOException, Exception {
      outer:
      for (int x : xs) { continue outer; }
      while (n < 3) n++;
      do { n--; } while (n > 0);
      switch (n) { case 1: f(); break; default: g(); }
      synchronized (lock) { h(); }
      try { a(); } catch (IOException | RuntimeException e) { b(); } finally { c(); }
      try (Reader r = open(p)) { r.read(); }
      { int inner = 1; }
      ;
      assert n == 0 : "bad";
      throw new IllegalStateException("x");
    })";
  auto ast = parse_method_source(src);
  NodeId body = find_child(ast, ast.root(), "MethBody");
  CHECK(child_labels(ast, body) == std::vector<std::string>{"Label", "While", "DoWhile", "Switch", "SynchBlock",
                                                            "Try", "TryWith", "Block", "Empty", "Assert", "Throw"});
  NodeId sig = find_child(ast, ast.root(), "MethSig");
  CHECK(child_labels(ast, sig) ==
        std::vector<std::string>{"synchronized", "void", "all", "Param", "Param", "Throws"});
  NodeId param2 = ast.node(sig).children[4];
  CHECK(child_labels(ast, param2) == std::vector<std::string>{"String...", "rest"});
}

TEST_CASE("parse_method: generics are flattened into one type terminal") {
  auto ast = parse_method_source(
      "Map<String, List<Integer>> g(List<? extends Number> xs) { Map<String, List<Integer>> m = new HashMap<>(); "
      "return m; }");
  NodeId sig = find_child(ast, ast.root(), "MethSig");
  auto labels = child_labels(ast, sig);
  CHECK(labels[0] == "Map<String, List<Integer>>");
  NodeId param = ast.node(sig).children[2];
  CHECK(ast.node(ast.node(param).children[0]).label == "List<? extends Number>");
}

TEST_CASE("parse_method: expressions") {
  auto ast = parse_method_source(
      "int f(int a, int b) { int c = (int) (a + b) * 2 - -a; c += a > b ? a : b; this.x[c++] = obj.get(1).y; "
      "return c << 2 >>> 1; }");
  std::string s = ast_to_sexpr(ast);
  CHECK(s.find("(- (* (Cast (int) (+ (a) (b))) (2)) (u- (a)))") != std::string::npos);
  CHECK(s.find("(+= (c) (? (> (a) (b)) (a) (b)))") != std::string::npos);
  CHECK(s.find("(= (Index (Field (this) (x)) (p++ (c))) (Field (MemberCall (obj) (get) (1)) (y)))") !=
        std::string::npos);
  CHECK(s.find("(>>> (<< (c) (2)) (1))") != std::string::npos);
}

TEST_CASE("parse_method: rejects constructs outside the subset") {
  CHECK_THROWS_AS(parse_method_source("void f() { run(() -> 1); }"), ParseError);
  CHECK_THROWS_AS(parse_method_source("void f() { x.forEach(y -> y); }"), ParseError);
  CHECK_THROWS_AS(parse_method_source("void f() { Runnable r = new Runnable() { }; }"), ParseError);
  CHECK_THROWS_AS(parse_method_source("void f() { Collections.<String>emptyList(); }"), ParseError);
  CHECK_THROWS_AS(parse_method_source("void f() { list.forEach(System.out::println); }"), ParseError);
  CHECK_THROWS_AS(parse_method_source("void f() { class Local {} }"), ParseError);
  CHECK_THROWS_AS(parse_method_source("void f() { return; } void g() {}"), ParseError);
  CHECK_THROWS_AS(parse_method_source("void f() { try { a(); } }"), ParseError);
  try {
    parse_method_source("void f() { int x = ; }");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.found() == "';'");
    CHECK(e.offset() == 19);
  }
}

TEST_CASE("ast_to_sexpr: format") {
  Tree one;
  one.set_root(one.add_node("X", NodeClass::Terminal));
  CHECK(ast_to_sexpr(one) == "(X)");

  Tree two;
  NodeId r = two.add_node("Root", NodeClass::SignaturePart);
  two.set_root(r);
  two.add_child(r, two.add_node("A", NodeClass::Terminal));
  two.add_child(r, two.add_node("B", NodeClass::Terminal));
  CHECK(ast_to_sexpr(two) == "(Root (A) (B))");

  Tree esc;
  NodeId e = esc.add_node("a (b)\\c", NodeClass::Terminal);
  esc.set_root(e);
  CHECK(ast_to_sexpr(esc) == "(a\\ \\(b\\)\\\\c)");
  CHECK(parse_sexpr(ast_to_sexpr(esc)).node(0).label == "a (b)\\c");
}

TEST_CASE("ast_to_sexpr: node count and round trip on the running example") {
  auto ast = parse_method_source(read_fixture("fig1_method.java"));
  std::string s = ast_to_sexpr(ast);
  std::size_t opens = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\') {
      ++i;
    } else if (s[i] == '(') {
      ++opens;
    }
  }
  CHECK(opens == ast.size());
  Tree back = parse_sexpr(s);
  CHECK(same_shape(back, ast));
  CHECK(ast_to_sexpr(back) == s);
}

TEST_CASE("parse_sexpr: malformed input") {
  CHECK_THROWS_AS(parse_sexpr(""), SexprError);
  CHECK_THROWS_AS(parse_sexpr("(a"), SexprError);
  CHECK_THROWS_AS(parse_sexpr("(a))"), SexprError);
  CHECK_THROWS_AS(parse_sexpr("(a) (b)"), SexprError);
  CHECK_THROWS_AS(parse_sexpr("( )"), SexprError);
}

TEST_CASE("lossless terminals and determinism on the running example") {
  std::string src = read_fixture("fig1_method.java");
  auto ast = parse_method_source(src);
  std::vector<std::string> from_tree;
  for (NodeId id : ast.preorder()) {
    const auto& n = ast.node(id);
    if (!n.children.empty()) continue;
    // type terminals carry several identifiers; re-lex them
    for (const auto& t : tokenize(n.label))
      if (t.kind == TokenKind::Identifier || t.is_literal()) from_tree.push_back(t.text);
  }
  std::vector<std::string> from_source;
  for (const auto& t : tokenize(src))
    if (t.kind == TokenKind::Identifier || t.is_literal()) from_source.push_back(t.text);
  CHECK(from_tree == from_source);
  CHECK(ast_to_sexpr(parse_method_source(src)) == ast_to_sexpr(ast));
}
