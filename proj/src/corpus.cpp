#include "cast/corpus.hpp"

#include <random>
#include <stdexcept>

#include "cast/parser.hpp"

namespace cast {

namespace {

const char* const kVerbs[] = {"get",    "find",   "compute", "update", "remove", "count", "build",   "check",
                              "load",   "save",   "parse",   "merge",  "sort",   "reset", "process", "collect",
                              "render", "filter", "sync",    "apply"};
const char* const kNouns[] = {"item",    "user",   "column", "record",  "node",   "order",   "file",
                              "entry",   "value",  "account", "table",  "message", "token",  "event",
                              "task",    "buffer", "session", "widget", "packet", "score",   "invoice",
                              "channel", "route",  "shape",   "ticket", "module", "profile", "report"};
const char* const kAdjectives[] = {"valid", "empty", "active", "ready", "expired", "visible", "locked", "dirty"};
const char* const kExceptions[] = {"IOException", "IllegalStateException", "RuntimeException"};

enum class Kind { For, ForIndex, While, If, IfElse, Try, Switch, DoWhile, Synch, Label };

std::string cap(const std::string& s) {
  std::string out = s;
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  CorpusRecord method(int index) {
    verb_ = pick(kVerbs);
    owner_ = pick(kNouns);
    do {
      elem_ = pick(kNouns);
    } while (elem_ == owner_);
    adj_ = pick(kAdjectives);
    label_count_ = 0;

    std::string ret = "void";
    std::string result_init, result_return;
    if (verb_ == "count" || verb_ == "compute") {
      ret = "int";
      result_init = "int result = 0;";
      result_return = "return result;";
    } else if (verb_ == "get" || verb_ == "find" || verb_ == "build" || verb_ == "load" || verb_ == "parse") {
      ret = cap(owner_);
      result_init = cap(owner_) + " result = null;";
      result_return = "return result;";
    } else if (verb_ == "check") {
      ret = "boolean";
      result_init = "boolean result = false;";
      result_return = "return result;";
    }

    std::string name = verb_ + cap(owner_) + (chance(30) ? cap(elem_) + "s" : "");
    std::string params = cap(owner_) + " " + owner_ + ", List<" + cap(elem_) + "> " + elem_ + "List";
    if (chance(40)) params += ", int limit";

    std::string body;
    std::vector<std::string> clauses;
    if (!result_init.empty()) body += "  " + result_init + "\n";
    if (chance(50)) body += "  " + simple(owner_) + "\n";
    int segments = chance(85) ? 1 + static_cast<int>(below(2)) : 0;
    for (int s = 0; s < segments; ++s) {
      std::string clause;
      body += composite(owner_, chance(55) ? 1 : 0, "  ", clause);
      clauses.push_back(clause);
      if (chance(50)) body += "  " + simple(owner_) + "\n";
    }
    if (segments == 0) body += "  " + simple(owner_) + "\n";
    if (!result_return.empty()) body += "  " + result_return + "\n";

    std::string summary = cap(verb_) + " the " + owner_;
    for (std::size_t i = 0; i < clauses.size(); ++i) summary += (i == 0 ? " " : " and ") + clauses[i];
    summary += ".";

    CorpusRecord r;
    r.id = "m" + std::to_string(index);
    r.code = "/** " + summary + " */\npublic " + ret + " " + name + "(" + params + ") {\n" + body + "}\n";
    return r;
  }

 private:
  std::uint64_t below(std::uint64_t n) { return rng_() % n; }
  bool chance(int percent) { return below(100) < static_cast<std::uint64_t>(percent); }
  template <std::size_t N>
  std::string pick(const char* const (&arr)[N]) {
    return arr[below(N)];
  }

  std::string simple(const std::string& var) {
    switch (below(6)) {
      case 0: return var + ".update" + cap(elem_) + "();";
      case 1: return "log(\"" + verb_ + "\");";
      case 2: return "int size = " + elem_ + "List.size();";
      case 3: return var + ".setCount(" + std::to_string(below(10)) + ");";
      case 4: return "String key = " + var + ".getName();";
      default: return "notify" + cap(owner_) + "(" + var + ");";
    }
  }

  std::string accumulate(const std::string& var) {
    if (verb_ == "count" || verb_ == "compute") return "result += " + var + ".getSize();";
    if (verb_ == "check") return "result = " + var + ".is" + cap(adj_) + "();";
    if (verb_ == "get" || verb_ == "find" || verb_ == "build" || verb_ == "load" || verb_ == "parse")
      return "result = " + owner_ + ";";
    return verb_ + cap(elem_) + "(" + var + ");";
  }

  // Emits one composite statement on `var`; `nest` levels of nested
  // composites go inside its body. `clause` receives the summary phrase.
  std::string composite(const std::string& var, int nest, const std::string& ind, std::string& clause) {
    Kind k = static_cast<Kind>(below(10));
    bool loop = k == Kind::For || k == Kind::ForIndex || k == Kind::Label;
    // loops nested inside a loop walk the current element's children
    bool inner_loop = loop && var == elem_;
    std::string loop_var = inner_loop ? "child" : elem_;
    std::string loop_type = cap(elem_);
    std::string coll = inner_loop ? elem_ + ".getChildren()" : elem_ + "List";
    std::string inner_var = loop ? loop_var : var;
    std::string in = ind + "  ";
    std::string body = in + accumulate(inner_var) + "\n";
    std::string sub;
    if (nest > 0) {
      body += composite(inner_var, nest - 1, in, sub);
      if (chance(30)) body += in + simple(inner_var) + "\n";
    }
    std::string tail = sub.empty() ? "" : " " + sub;
    std::string cond = var + ".is" + cap(adj_) + "()";
    switch (k) {
      case Kind::For:
        clause = "for each " + loop_var + tail;
        return ind + "for (" + loop_type + " " + loop_var + " : " + coll + ") {\n" + body + ind + "}\n";
      case Kind::ForIndex:
        clause = "for each " + loop_var + tail;
        return ind + "for (int i = 0; i < " + coll + ".size(); i++) {\n" + in + loop_type + " " + loop_var +
               " = " + coll + ".get(i);\n" + body + ind + "}\n";
      case Kind::Label: {
        std::string label = "outer" + std::to_string(label_count_++);
        clause = "scanning each " + loop_var + tail;
        return ind + label + ":\n" + ind + "for (" + loop_type + " " + loop_var + " : " + coll + ") {\n" + in +
               "if (" + loop_var + " == null) break " + label + ";\n" + body + ind + "}\n";
      }
      case Kind::While:
        clause = "while the " + var + " is " + adj_ + tail;
        return ind + "while (" + cond + ") {\n" + body + ind + "}\n";
      case Kind::DoWhile:
        clause = "until the " + var + " is " + adj_ + tail;
        return ind + "do {\n" + body + ind + "} while (!" + cond + ");\n";
      case Kind::If:
        clause = "if the " + var + " is " + adj_ + tail;
        return ind + "if (" + cond + ") {\n" + body + ind + "}\n";
      case Kind::IfElse:
        clause = "if the " + var + " is " + adj_ + tail + " or otherwise resets it";
        return ind + "if (" + cond + ") {\n" + body + ind + "} else {\n" + in + var + ".reset();\n" + ind + "}\n";
      case Kind::Try: {
        std::string ex = pick(kExceptions);
        clause = "handling errors" + tail;
        return ind + "try {\n" + body + ind + "} catch (" + ex + " e) {\n" + in + "log(e.getMessage());\n" + ind +
               "}\n";
      }
      case Kind::Switch:
        clause = "depending on the " + var + " kind" + tail;
        return ind + "switch (" + var + ".getKind()) {\n" + in + "case " + std::to_string(below(5)) + ":\n" + body +
               in + "  break;\n" + in + "default:\n" + in + "  " + simple(var) + "\n" + ind + "}\n";
      case Kind::Synch:
        clause = "while holding the " + var + " lock" + tail;
        return ind + "synchronized (" + var + ") {\n" + body + ind + "}\n";
    }
    throw std::logic_error("unreachable composite kind");
  }

  std::mt19937_64 rng_;
  std::string verb_, owner_, elem_, adj_;
  int label_count_ = 0;
};

bool nested_below(const MethodAst& ast, NodeId n, bool inside) {
  const auto& node = ast.node(n);
  bool composite = node.node_class == NodeClass::CompositeStmt;
  if (composite && inside) return true;
  for (NodeId c : node.children)
    if (nested_below(ast, c, inside || composite)) return true;
  return false;
}

}  // namespace

std::vector<CorpusRecord> generate_corpus(std::uint64_t seed, int n) {
  if (n < 1) throw std::invalid_argument("corpus size must be at least 1");
  Generator g(seed);
  std::vector<CorpusRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(g.method(i));
  return out;
}

std::string generate_nested_method(int k) {
  std::string body = "handle(value);";
  for (int i = k - 1; i >= 0; --i)
    body = "if (value > " + std::to_string(i) + ") { " + body + " }";
  return "/** Handle the value when it passes " + std::to_string(k) + " checks. */\npublic void handleValue(int value) { " +
         body + " }\n";
}

bool has_nested_composite(const std::string& source) {
  MethodAst ast = parse_method_source(source);
  return nested_below(ast, ast.root(), false);
}

std::vector<Example> examples_from_records(const std::vector<CorpusRecord>& records,
                                           std::vector<std::string>* skipped) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    try {
      out.push_back(make_example(r.id, r.code));
    } catch (const std::exception& e) {
      if (skipped) skipped->push_back(r.id + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cast
