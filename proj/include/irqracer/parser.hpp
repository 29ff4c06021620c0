#pragma once

#include "irqracer/ast.hpp"
#include "irqracer/diag.hpp"

#include <optional>
#include <string>

namespace irqr {

struct ParseResult {
    std::optional<Program> program; // set iff diags has no SyntaxError
    Diags diags;
    bool ok() const { return program.has_value() && diags.empty(); }
};

// Parse IDL source. Locations are assigned in source order (pre-order over
// nested bodies), deterministically. Grammar: docs/idl-grammar.md.
ParseResult parse_program(const std::string& source);

} // namespace irqr
