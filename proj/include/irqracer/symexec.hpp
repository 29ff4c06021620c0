#pragma once

#include "irqracer/ast.hpp"
#include "irqracer/detect.hpp"
#include "irqracer/graph.hpp"
#include "irqracer/solver.hpp"
#include "irqracer/vm.hpp"

#include <set>
#include <string>
#include <vector>

namespace irqr {

// Symbolic roots: every register the program reads, plus globals annotated
// `input`. Write-only registers feed nothing, so they carry no symbol.
std::set<std::string> identify_input_points(const Program& p);

struct SymBudget {
    uint64_t stepBudget = 2'000'000; // deterministic primary bound
    double timeoutSec = 600;         // wall-clock safety net
    int lmax = 1000;
    uint64_t seed = 1;
    bool solverSkip = true; // skip per-branch solver calls, solve at targets
    SolverConfig solver;
};

struct SymExecResult {
    enum class Kind { Reachable, Infeasible, Inconclusive };
    Kind kind = Kind::Inconclusive;
    InputAssignment input;              // Reachable only
    std::vector<TermPtr> pathCondition; // of the reaching path
    std::string reason;                 // Inconclusive: "Timeout" | "SolverLimit"
    int loopBoundUsed = 2;
    uint64_t statesExplored = 0;
};

// Distance-guided exploration toward the warning's two ordered events: walk
// the first event's context, switch to the second context at the first event
// (the ICCFG cross edge), solve the path condition at the second event.
// Backtracks over refuted paths; grows the loop bound x2 up to L_max when a
// bound-limited path blocked the search.
SymExecResult guided_explore(const Program& p, const Iccfg& iccfg, const RaceWarning& wn,
                             const std::vector<RaceWarning>& allWarnings, const SymBudget& budget);

} // namespace irqr
