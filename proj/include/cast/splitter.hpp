#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cast/tree.hpp"

namespace cast {

enum class SubtreeKind { OvT, SigT, StmtsT, BlockT };

const char* to_string(SubtreeKind kind);
SubtreeKind subtree_kind_from_string(const std::string& s);

inline constexpr const char* kStatementsBlock = "StatementsBlock";

struct Placeholder {
  NodeId node = 0;  // leaf inside the owning subtree (preorder index)
  int child = 0;    // index of the subtree that fills it
  bool operator==(const Placeholder&) const = default;
};

// Node ids of `tree` are preorder positions.
struct Subtree {
  SubtreeKind kind = SubtreeKind::OvT;
  Tree tree;
  std::vector<Placeholder> placeholders;
};

struct StructureTree {
  std::vector<std::pair<int, int>> edges;  // (parent, child) subtree indices
  int root = 0;

  // children[i] in placeholder order
  std::vector<std::vector<int>> children(std::size_t node_count) const;
};

struct SplitResult {
  std::vector<Subtree> subtrees;  // structure-tree preorder; index 0 is the OvT
  StructureTree structure;
};

struct SplitStats {
  std::size_t subtree_count = 0;
  std::size_t max_subtree_nodes = 0;
  int max_subtree_depth = 0;
  std::size_t full_tree_nodes = 0;
  int full_tree_depth = 0;
};

class StitchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Breaks a method AST into overview, signature, statement-block and one
// block subtree per composite statement, nesting one level at a time.
SplitResult split(const MethodAst& ast);

// Replaces every placeholder with its subtree, recursively.
MethodAst stitch(const SplitResult& result);

// Wraps each maximal run of simple statements directly under MethBody in a
// StatementsBlock node; this is the shape stitch(split(t)) reproduces.
MethodAst canonicalize(const MethodAst& ast);

SplitStats split_stats(const SplitResult& result);

nlohmann::json split_to_json(const SplitResult& result);
SplitResult split_from_json(const nlohmann::json& j);
nlohmann::json stats_to_json(const SplitStats& stats);

}  // namespace cast
