#pragma once

#include "irqracer/ast.hpp"
#include "irqracer/diag.hpp"

#include <map>
#include <set>
#include <string>

namespace irqr {

// Name binding for one routine, produced by check_program.
struct RoutineSymbols {
    std::set<std::string> params;
    std::set<std::string> locals; // implicitly declared on first assignment
};

struct CheckResult {
    Diags diags;
    std::map<std::string, RoutineSymbols> symbols; // per routine
    bool ok() const { return diags.empty(); }
};

// Validates every Program invariant: unique routine names, unique ISR lines
// and priorities, ISR priorities strictly above task priorities (numerically
// smaller), tasks on one shared priority level, every identifier resolvable,
// no writes to read-only registers, no recursion, call arity.
CheckResult check_program(const Program& p);

// Locals of a routine: names first assigned there that are not globals,
// registers, locks, or parameters.
std::set<std::string> routine_locals(const Program& p, const Routine& r);

} // namespace irqr
