#include "cast/sexpr.hpp"

#include <vector>

namespace cast {

namespace {

bool needs_escape(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '(' || c == ')' || c == '\\';
}

}  // namespace

std::string escape_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  for (char c : label) {
    if (needs_escape(c)) out += '\\';
    out += c;
  }
  return out;
}

std::string ast_to_sexpr(const Tree& tree, NodeId from) {
  std::string out;
  // (node, next child index) frames
  std::vector<std::pair<NodeId, std::size_t>> stack{{from, 0}};
  out += '(';
  out += escape_label(tree.node(from).label);
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    const auto& kids = tree.node(id).children;
    if (next < kids.size()) {
      NodeId c = kids[next++];
      out += " (";
      out += escape_label(tree.node(c).label);
      stack.emplace_back(c, 0);
    } else {
      out += ')';
      stack.pop_back();
    }
  }
  return out;
}

std::string ast_to_sexpr(const Tree& tree) {
  if (tree.empty()) return {};
  return ast_to_sexpr(tree, tree.root());
}

Tree parse_sexpr(std::string_view text) {
  Tree tree;
  std::vector<NodeId> open;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
  };
  auto error = [&](const std::string& what) {
    throw SexprError("s-expression error at offset " + std::to_string(i) + ": " + what);
  };
  bool done = false;
  skip_ws();
  while (i < text.size()) {
    if (done) error("trailing input after root");
    if (text[i] == '(') {
      ++i;
      std::string label;
      while (i < text.size() && text[i] != '(' && text[i] != ')' && text[i] != ' ' && text[i] != '\t' &&
             text[i] != '\n' && text[i] != '\r') {
        if (text[i] == '\\') {
          if (++i >= text.size()) error("dangling escape");
        }
        label += text[i++];
      }
      if (label.empty()) error("empty label");
      NodeId id = tree.add_node(std::move(label), NodeClass::ExpressionPart);
      if (open.empty()) {
        if (!tree.empty() && id != 0) error("multiple roots");
        tree.set_root(id);
      } else {
        tree.add_child(open.back(), id);
      }
      open.push_back(id);
    } else if (text[i] == ')') {
      if (open.empty()) error("unbalanced ')'");
      ++i;
      open.pop_back();
      if (open.empty()) done = true;
    } else {
      error("expected '(' or ')'");
    }
    skip_ws();
  }
  if (!open.empty()) error("unbalanced '('");
  if (tree.empty()) error("empty input");
  for (const auto& n : tree.nodes()) {
    auto& node = tree.node(n.id);
    if (node.children.empty()) {
      node.node_class = NodeClass::Terminal;
    } else if (is_composite_kind(node.label)) {
      node.node_class = NodeClass::CompositeStmt;
    }
  }
  return tree;
}

}  // namespace cast
