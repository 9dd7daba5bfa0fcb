#include "cast/splitter.hpp"

#include <algorithm>

#include "cast/sexpr.hpp"

namespace cast {

const char* to_string(SubtreeKind kind) {
  switch (kind) {
    case SubtreeKind::OvT: return "OvT";
    case SubtreeKind::SigT: return "SigT";
    case SubtreeKind::StmtsT: return "StmtsT";
    case SubtreeKind::BlockT: return "BlockT";
  }
  return "?";
}

SubtreeKind subtree_kind_from_string(const std::string& s) {
  if (s == "OvT") return SubtreeKind::OvT;
  if (s == "SigT") return SubtreeKind::SigT;
  if (s == "StmtsT") return SubtreeKind::StmtsT;
  if (s == "BlockT") return SubtreeKind::BlockT;
  throw std::invalid_argument("unknown subtree kind '" + s + "'");
}

std::vector<std::vector<int>> StructureTree::children(std::size_t node_count) const {
  std::vector<std::vector<int>> out(node_count);
  for (auto [p, c] : edges) out.at(static_cast<std::size_t>(p)).push_back(c);
  return out;
}

namespace {

NodeId child_labeled(const MethodAst& ast, NodeId parent, const char* label) {
  for (NodeId c : ast.node(parent).children)
    if (ast.node(c).label == label) return c;
  throw std::invalid_argument(std::string("method AST lacks ") + label);
}

class Splitter {
 public:
  explicit Splitter(const MethodAst& ast) : ast_(ast) {}

  SplitResult run() {
    NodeId sig = child_labeled(ast_, ast_.root(), "MethSig");
    NodeId body = child_labeled(ast_, ast_.root(), "MethBody");

    // Overview tree: Root(MethSig*, MethBody(segment*)), built by hand because
    // its placeholders stand for segments rather than single source nodes.
    reserve(SubtreeKind::OvT);
    Tree ov;
    NodeId root = ov.add_node("Root", NodeClass::SignaturePart);
    ov.set_root(root);
    NodeId sig_ph = ov.add_node("MethSig", NodeClass::SignaturePart);
    ov.add_child(root, sig_ph);
    NodeId body_node = ov.add_node("MethBody", NodeClass::SignaturePart);
    ov.add_child(root, body_node);

    std::vector<std::pair<NodeId, std::vector<NodeId>>> segments;  // placeholder -> statements
    const auto& stmts = ast_.node(body).children;
    for (std::size_t i = 0; i < stmts.size();) {
      const auto& n = ast_.node(stmts[i]);
      if (n.node_class == NodeClass::CompositeStmt) {
        NodeId ph = ov.add_node(n.label, NodeClass::CompositeStmt);
        ov.add_child(body_node, ph);
        segments.push_back({ph, {stmts[i]}});
        ++i;
      } else {
        NodeId ph = ov.add_node(kStatementsBlock, NodeClass::SignaturePart);
        ov.add_child(body_node, ph);
        std::vector<NodeId> run;
        while (i < stmts.size() && ast_.node(stmts[i]).node_class != NodeClass::CompositeStmt) run.push_back(stmts[i++]);
        segments.push_back({ph, std::move(run)});
      }
    }
    out_.subtrees[0].tree = std::move(ov);

    link(0, sig_ph, emit_signature(sig));
    for (auto& [ph, src] : segments) {
      int child = ast_.node(src.front()).node_class == NodeClass::CompositeStmt ? emit_block(src.front())
                                                                               : emit_statements(src);
      link(0, ph, child);
    }
    return std::move(out_);
  }

 private:
  int reserve(SubtreeKind kind) {
    out_.subtrees.push_back(Subtree{kind, {}, {}});
    return static_cast<int>(out_.subtrees.size()) - 1;
  }

  void link(int parent, NodeId ph, int child) {
    out_.subtrees[static_cast<std::size_t>(parent)].placeholders.push_back({ph, child});
    out_.structure.edges.emplace_back(parent, child);
  }

  // Copies `src` into `dst` in preorder. Composite statements below the copy
  // root become placeholder leaves and are queued in `pending`.
  NodeId copy(NodeId src, Tree& dst, bool is_root, std::vector<std::pair<NodeId, NodeId>>& pending) {
    const auto& n = ast_.node(src);
    if (!is_root && n.node_class == NodeClass::CompositeStmt) {
      NodeId ph = dst.add_node(n.label, NodeClass::CompositeStmt);
      pending.emplace_back(ph, src);
      return ph;
    }
    NodeId id = dst.add_node(n.label, n.node_class);
    for (NodeId c : n.children) {
      NodeId k = copy(c, dst, false, pending);
      dst.add_child(id, k);
    }
    return id;
  }

  void finish(int index, Tree tree, std::vector<std::pair<NodeId, NodeId>>& pending) {
    out_.subtrees[static_cast<std::size_t>(index)].tree = std::move(tree);
    // pending is in preorder, so children are emitted in structure preorder
    for (auto [ph, src] : pending) link(index, ph, emit_block(src));
  }

  int emit_signature(NodeId sig) {
    int index = reserve(SubtreeKind::SigT);
    Tree t;
    std::vector<std::pair<NodeId, NodeId>> pending;
    t.set_root(copy(sig, t, true, pending));
    finish(index, std::move(t), pending);
    return index;
  }

  int emit_block(NodeId composite) {
    int index = reserve(SubtreeKind::BlockT);
    Tree t;
    std::vector<std::pair<NodeId, NodeId>> pending;
    t.set_root(copy(composite, t, true, pending));
    finish(index, std::move(t), pending);
    return index;
  }

  int emit_statements(const std::vector<NodeId>& run) {
    int index = reserve(SubtreeKind::StmtsT);
    Tree t;
    NodeId root = t.add_node(kStatementsBlock, NodeClass::SignaturePart);
    t.set_root(root);
    std::vector<std::pair<NodeId, NodeId>> pending;
    for (NodeId s : run) {
      NodeId k = copy(s, t, false, pending);
      t.add_child(root, k);
    }
    finish(index, std::move(t), pending);
    return index;
  }

  const MethodAst& ast_;
  SplitResult out_;
};

}  // namespace

SplitResult split(const MethodAst& ast) { return Splitter(ast).run(); }

MethodAst stitch(const SplitResult& result) {
  const auto& subs = result.subtrees;
  if (subs.empty()) throw StitchError("split result has no subtrees");
  std::vector<bool> used(subs.size(), false);
  used[0] = true;
  MethodAst out;

  struct Frame {
    int sub;
    NodeId node;
    NodeId parent;
  };
  std::vector<Frame> stack{{0, subs[0].tree.root(), -1}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const Subtree& st = subs[static_cast<std::size_t>(f.sub)];
    auto ph = std::find_if(st.placeholders.begin(), st.placeholders.end(),
                           [&](const Placeholder& p) { return p.node == f.node; });
    if (ph != st.placeholders.end()) {
      if (ph->child <= 0 || static_cast<std::size_t>(ph->child) >= subs.size())
        throw StitchError("placeholder in subtree " + std::to_string(f.sub) + " points at missing subtree " +
                          std::to_string(ph->child));
      if (used[static_cast<std::size_t>(ph->child)])
        throw StitchError("subtree " + std::to_string(ph->child) + " is referenced twice");
      used[static_cast<std::size_t>(ph->child)] = true;
      const Tree& ct = subs[static_cast<std::size_t>(ph->child)].tree;
      stack.push_back({ph->child, ct.root(), f.parent});
      continue;
    }
    if (f.node < 0 || static_cast<std::size_t>(f.node) >= st.tree.size())
      throw StitchError("dangling node id in subtree " + std::to_string(f.sub));
    const auto& n = st.tree.node(f.node);
    NodeId id = out.add_node(n.label, n.node_class);
    if (f.parent < 0) {
      out.set_root(id);
    } else {
      out.add_child(f.parent, id);
    }
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back({f.sub, *it, id});
  }
  return out;
}

namespace {

NodeId copy_canonical(const MethodAst& ast, NodeId src, bool is_body, MethodAst& out) {
  const auto& n = ast.node(src);
  NodeId id = out.add_node(n.label, n.node_class);
  const auto& kids = n.children;
  for (std::size_t i = 0; i < kids.size();) {
    if (!is_body || ast.node(kids[i]).node_class == NodeClass::CompositeStmt) {
      NodeId k = copy_canonical(ast, kids[i++], false, out);
      out.add_child(id, k);
      continue;
    }
    NodeId group = out.add_node(kStatementsBlock, NodeClass::SignaturePart);
    out.add_child(id, group);
    while (i < kids.size() && ast.node(kids[i]).node_class != NodeClass::CompositeStmt) {
      NodeId k = copy_canonical(ast, kids[i++], false, out);
      out.add_child(group, k);
    }
  }
  return id;
}

}  // namespace

MethodAst canonicalize(const MethodAst& ast) {
  MethodAst out;
  NodeId body = child_labeled(ast, ast.root(), "MethBody");
  NodeId root = out.add_node(ast.node(ast.root()).label, ast.node(ast.root()).node_class);
  out.set_root(root);
  for (NodeId c : ast.node(ast.root()).children) {
    NodeId k = copy_canonical(ast, c, c == body, out);
    out.add_child(root, k);
  }
  return out;
}

SplitStats split_stats(const SplitResult& result) {
  SplitStats s;
  s.subtree_count = result.subtrees.size();
  for (const auto& st : result.subtrees) {
    s.max_subtree_nodes = std::max(s.max_subtree_nodes, st.tree.size());
    s.max_subtree_depth = std::max(s.max_subtree_depth, st.tree.depth());
  }
  MethodAst full = stitch(result);
  s.full_tree_nodes = full.size();
  s.full_tree_depth = full.depth();
  return s;
}

nlohmann::json split_to_json(const SplitResult& result) {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& st : result.subtrees) {
    nlohmann::json ph = nlohmann::json::array();
    for (const auto& p : st.placeholders) ph.push_back({p.node, p.child});
    subs.push_back({{"kind", to_string(st.kind)}, {"sexpr", ast_to_sexpr(st.tree)}, {"placeholders", ph}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [p, c] : result.structure.edges) edges.push_back({p, c});
  return {{"subtrees", subs}, {"structure_edges", edges}};
}

SplitResult split_from_json(const nlohmann::json& j) {
  SplitResult r;
  for (const auto& s : j.at("subtrees")) {
    Subtree st;
    st.kind = subtree_kind_from_string(s.at("kind").get<std::string>());
    st.tree = parse_sexpr(s.at("sexpr").get<std::string>());
    for (const auto& p : s.at("placeholders")) st.placeholders.push_back({p.at(0).get<NodeId>(), p.at(1).get<int>()});
    r.subtrees.push_back(std::move(st));
  }
  for (const auto& e : j.at("structure_edges")) r.structure.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  return r;
}

nlohmann::json stats_to_json(const SplitStats& s) {
  return {{"subtree_count", s.subtree_count},
          {"max_subtree_nodes", s.max_subtree_nodes},
          {"max_subtree_depth", s.max_subtree_depth},
          {"full_tree_nodes", s.full_tree_nodes},
          {"full_tree_depth", s.full_tree_depth}};
}

}  // namespace cast
