#include "cast/ast_encoder.hpp"

#include <algorithm>

namespace cast {

using nn::Var;

namespace {

// Forest bookkeeping shared by both RvNN phases: node heights and children,
// then a height-by-height evaluation in which every level's children already
// have states.
struct Forest {
  std::vector<std::vector<int>> children;  // by forest node
  std::vector<int> height;

  void compute_heights() {
    height.assign(children.size(), -1);
    // children always have larger forest ids here (preorder), so one reverse sweep suffices
    for (int n = static_cast<int>(children.size()) - 1; n >= 0; --n) {
      int h = 0;
      for (int c : children[static_cast<std::size_t>(n)]) h = std::max(h, height[static_cast<std::size_t>(c)] + 1);
      height[static_cast<std::size_t>(n)] = h;
    }
  }
};

// Runs the bottom-up recursion. `base` holds the per-node input term (c W or
// s W); `combine` is the child-message matrix. With `leaf_tanh` the leaf rule is
// tanh(base), otherwise base itself. Returns the states and each forest node's
// row in them.
template <typename T>
std::pair<Var, std::vector<int>> run_levels(nn::Tape<T>& tape, const Forest& f, Var base, Var combine, bool leaf_tanh) {
  const int n = static_cast<int>(f.children.size());
  int max_h = 0;
  for (int h : f.height) max_h = std::max(max_h, h);
  std::vector<std::vector<int>> by_height(static_cast<std::size_t>(max_h) + 1);
  for (int i = 0; i < n; ++i) by_height[static_cast<std::size_t>(f.height[static_cast<std::size_t>(i)])].push_back(i);

  std::vector<int> row(static_cast<std::size_t>(n), -1);
  Var states{};
  int filled = 0;
  for (int h = 0; h <= max_h; ++h) {
    const auto& level = by_height[static_cast<std::size_t>(h)];
    Var pre = tape.gather_rows(base, level);
    Var out;
    if (h == 0) {
      out = leaf_tanh ? tape.tanh(pre) : pre;
    } else {
      std::vector<std::vector<int>> groups;
      groups.reserve(level.size());
      for (int node : level) {
        std::vector<int> g;
        for (int c : f.children[static_cast<std::size_t>(node)]) g.push_back(row[static_cast<std::size_t>(c)]);
        groups.push_back(std::move(g));
      }
      Var msg = tape.matmul(tape.group_mean(states, std::move(groups)), combine);
      out = tape.tanh(tape.add(pre, msg));
    }
    states = h == 0 ? out : tape.concat_rows({states, out});
    for (int node : level) row[static_cast<std::size_t>(node)] = filled++;
  }
  return {states, row};
}

}  // namespace

template <typename T>
Var encode_subtrees(nn::Tape<T>& tape, const std::vector<EncodedSubtree>& trees, Var embed, Var wc, Var wa) {
  if (trees.empty()) throw nn::ShapeError("encode_subtrees: no subtrees");
  Forest f;
  std::vector<int> labels;
  std::vector<std::vector<int>> members(trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& tree = trees[t];
    const int n = static_cast<int>(tree.labels.size());
    if (n == 0 || tree.children.size() != tree.labels.size()) throw nn::ShapeError("encode_subtrees: malformed subtree");
    std::vector<char> is_child(static_cast<std::size_t>(n), 0);
    for (const auto& kids : tree.children)
      for (int c : kids) {
        if (c < 0 || c >= n) throw nn::ShapeError("encode_subtrees: child index out of range");
        is_child[static_cast<std::size_t>(c)] = 1;
      }
    int root = static_cast<int>(std::find(is_child.begin(), is_child.end(), 0) - is_child.begin());
    if (root == n) throw nn::ShapeError("encode_subtrees: subtree has no root");
    // canonical preorder from the root
    const int offset = static_cast<int>(labels.size());
    std::vector<int> stack{root}, order;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      order.push_back(v);
      const auto& kids = tree.children[static_cast<std::size_t>(v)];
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    for (std::size_t k = 0; k < order.size(); ++k) pos[static_cast<std::size_t>(order[k])] = offset + static_cast<int>(k);
    for (int v : order) {
      labels.push_back(tree.labels[static_cast<std::size_t>(v)]);
      std::vector<int> kids;
      for (int c : tree.children[static_cast<std::size_t>(v)]) kids.push_back(pos[static_cast<std::size_t>(c)]);
      f.children.push_back(std::move(kids));
      members[t].push_back(pos[static_cast<std::size_t>(v)]);
    }
  }
  f.compute_heights();

  Var cw = tape.matmul(tape.gather_rows(embed, labels), wc);
  auto [states, row] = run_levels(tape, f, cw, wa, false);

  std::vector<Var> pooled;
  pooled.reserve(trees.size());
  for (const auto& m : members) {
    std::vector<int> rows;
    rows.reserve(m.size());
    for (int node : m) rows.push_back(row[static_cast<std::size_t>(node)]);
    pooled.push_back(tape.max_rows(tape.gather_rows(states, std::move(rows))));
  }
  return pooled.size() == 1 ? pooled[0] : tape.concat_rows(pooled);
}

template <typename T>
Var encode_subtree(nn::Tape<T>& tape, const EncodedSubtree& tree, Var embed, Var wc, Var wa) {
  return encode_subtrees(tape, std::vector<EncodedSubtree>{tree}, embed, wc, wa);
}

template <typename T>
Var encode_structure(nn::Tape<T>& tape, Var subtree_vectors, const std::vector<std::pair<int, int>>& edges,
                     int node_count, Var ws, Var wb) {
  if (tape.value(subtree_vectors).rows() != node_count)
    throw nn::ShapeError("encode_structure: " + std::to_string(tape.value(subtree_vectors).rows()) +
                         " subtree vectors for " + std::to_string(node_count) + " structure nodes");
  Forest f;
  f.children.resize(static_cast<std::size_t>(node_count));
  for (auto [p, c] : edges) {
    if (p < 0 || c < 0 || p >= node_count || c >= node_count || p >= c)
      throw nn::ShapeError("encode_structure: bad edge " + std::to_string(p) + "->" + std::to_string(c));
    f.children[static_cast<std::size_t>(p)].push_back(c);
  }
  f.compute_heights();
  Var sw = tape.matmul(subtree_vectors, ws);
  auto [states, row] = run_levels(tape, f, sw, wb, true);
  return tape.gather_rows(states, row);  // back to structure preorder
}

#define CAST_INSTANTIATE(T)                                                                                        \
  template Var encode_subtree<T>(nn::Tape<T>&, const EncodedSubtree&, Var, Var, Var);                              \
  template Var encode_subtrees<T>(nn::Tape<T>&, const std::vector<EncodedSubtree>&, Var, Var, Var);                \
  template Var encode_structure<T>(nn::Tape<T>&, Var, const std::vector<std::pair<int, int>>&, int, Var, Var);
CAST_INSTANTIATE(float)
CAST_INSTANTIATE(double)
#undef CAST_INSTANTIATE

}  // namespace cast
