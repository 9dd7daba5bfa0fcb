#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cast {

enum class NodeClass { CompositeStmt, SimpleStmt, SignaturePart, ExpressionPart, Terminal };

const char* to_string(NodeClass cls);

using NodeId = std::int32_t;

struct AstNode {
  NodeId id = 0;
  std::string label;
  std::vector<NodeId> children;
  NodeClass node_class = NodeClass::Terminal;
};

// Rooted, ordered, labeled tree. Used for whole-method ASTs and for subtrees.
// Node ids index into nodes(); the root need not be node 0.
class Tree {
 public:
  NodeId add_node(std::string label, NodeClass cls);
  void add_child(NodeId parent, NodeId child);

  const AstNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  AstNode& node(NodeId id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<AstNode>& nodes() const { return nodes_; }

  NodeId root() const { return root_; }
  void set_root(NodeId id) { root_ = id; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  std::vector<NodeId> preorder() const;
  // Depth of a single node is 1.
  int depth() const;
  // Copy with ids renumbered so that id == preorder position.
  Tree reindexed() const;

 private:
  std::vector<AstNode> nodes_;
  NodeId root_ = 0;
};

using MethodAst = Tree;

// Label-and-shape equality; storage order is ignored.
bool same_shape(const Tree& a, const Tree& b);
// same_shape plus node-class equality.
bool same_tree(const Tree& a, const Tree& b);

bool is_composite_kind(const std::string& label);
inline constexpr const char* kCompositeKinds[] = {"If",     "For",   "While",      "DoWhile", "Switch",
                                                  "Label",  "SynchBlock", "Try", "TryWith"};

}  // namespace cast
