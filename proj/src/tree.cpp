#include "cast/tree.hpp"

#include <algorithm>
#include <stdexcept>
#include <string_view>

namespace cast {

const char* to_string(NodeClass cls) {
  switch (cls) {
    case NodeClass::CompositeStmt: return "composite-stmt";
    case NodeClass::SimpleStmt: return "simple-stmt";
    case NodeClass::SignaturePart: return "signature-part";
    case NodeClass::ExpressionPart: return "expression-part";
    case NodeClass::Terminal: return "terminal";
  }
  return "?";
}

NodeId Tree::add_node(std::string label, NodeClass cls) {
  AstNode n;
  n.id = static_cast<NodeId>(nodes_.size());
  n.label = std::move(label);
  n.node_class = cls;
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

void Tree::add_child(NodeId parent, NodeId child) { node(parent).children.push_back(child); }

std::vector<NodeId> Tree::preorder() const {
  std::vector<NodeId> order;
  if (nodes_.empty()) return order;
  order.reserve(nodes_.size());
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = node(id).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

int Tree::depth() const {
  if (nodes_.empty()) return 0;
  int best = 0;
  std::vector<std::pair<NodeId, int>> stack{{root_, 1}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    for (NodeId c : node(id).children) stack.emplace_back(c, d + 1);
  }
  return best;
}

Tree Tree::reindexed() const {
  Tree out;
  if (nodes_.empty()) return out;
  auto order = preorder();
  std::vector<NodeId> remap(nodes_.size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) remap[static_cast<std::size_t>(order[i])] = static_cast<NodeId>(i);
  for (NodeId old : order) {
    const auto& n = node(old);
    out.add_node(n.label, n.node_class);
  }
  for (NodeId old : order) {
    for (NodeId c : node(old).children) out.add_child(remap[static_cast<std::size_t>(old)], remap[static_cast<std::size_t>(c)]);
  }
  out.set_root(0);
  return out;
}

namespace {

bool equal_from(const Tree& a, NodeId x, const Tree& b, NodeId y, bool with_class) {
  std::vector<std::pair<NodeId, NodeId>> stack{{x, y}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    const auto& n = a.node(i);
    const auto& m = b.node(j);
    if (n.label != m.label || n.children.size() != m.children.size()) return false;
    if (with_class && n.node_class != m.node_class) return false;
    for (std::size_t k = 0; k < n.children.size(); ++k) stack.emplace_back(n.children[k], m.children[k]);
  }
  return true;
}

}  // namespace

bool same_shape(const Tree& a, const Tree& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty();
  return equal_from(a, a.root(), b, b.root(), false);
}

bool same_tree(const Tree& a, const Tree& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty();
  return equal_from(a, a.root(), b, b.root(), true);
}

bool is_composite_kind(const std::string& label) {
  return std::any_of(std::begin(kCompositeKinds), std::end(kCompositeKinds),
                     [&](const char* k) { return label == k; });
}

}  // namespace cast
