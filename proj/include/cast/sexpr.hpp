#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "cast/tree.hpp"

namespace cast {

// "(label child child ...)". Spaces, tabs, newlines, parentheses and
// backslashes inside labels are escaped with a backslash.
std::string ast_to_sexpr(const Tree& tree);
std::string ast_to_sexpr(const Tree& tree, NodeId from);

class SexprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inverse of ast_to_sexpr up to node classes: leaves come back as Terminal,
// labels that name a composite kind as CompositeStmt, everything else as
// ExpressionPart. Node ids are preorder positions.
Tree parse_sexpr(std::string_view text);

std::string escape_label(std::string_view label);

}  // namespace cast
