#pragma once

#include "irqracer/ast.hpp"

#include <string>

namespace irqr {

// Canonical IDL text for a program. parse(print(parse(s))) is structurally
// equal to parse(s).
std::string print_program(const Program& p);
std::string print_expr(const Expr& e);
std::string print_stmt(const Stmt& s, int indent = 0);

} // namespace irqr
