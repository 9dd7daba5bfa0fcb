#pragma once

#include <utility>
#include <vector>

#include "cast/dataset.hpp"
#include "cast/nn/tape.hpp"

namespace cast {

// Subtree RvNN: leaves h = c W_C, internal nodes h = tanh(c W_C + mean_j(h_j) W_A),
// then a coordinate-wise max over every node state. Row-vector convention.
// Nodes are visited in preorder from the root, so the result does not depend
// on how the nodes are stored. Returns 1 x d.
template <typename T>
nn::Var encode_subtree(nn::Tape<T>& tape, const EncodedSubtree& tree, nn::Var embed, nn::Var wc, nn::Var wa);

// Encodes every subtree of a method in one pass (same arithmetic as
// encode_subtree, batched by height). Returns m x d, row t = s_t.
template <typename T>
nn::Var encode_subtrees(nn::Tape<T>& tape, const std::vector<EncodedSubtree>& trees, nn::Var embed, nn::Var wc,
                        nn::Var wa);

// Structure RvNN over the subtree vectors (m x d, one row per structure node,
// rows in structure preorder): internal h = tanh(s W_S + mean_k(h_k) W_B),
// leaves h = tanh(s W_S). Returns m x d in structure preorder. Throws
// nn::ShapeError when the row count differs from the structure node count.
template <typename T>
nn::Var encode_structure(nn::Tape<T>& tape, nn::Var subtree_vectors, const std::vector<std::pair<int, int>>& edges,
                         int node_count, nn::Var ws, nn::Var wb);

}  // namespace cast
