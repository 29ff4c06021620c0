#pragma once

#include <string>
#include <vector>

namespace irqr {

enum class DiagKind {
    SyntaxError,
    DuplicateRoutine,
    DuplicateIrqLine,
    DuplicatePriority,
    PriorityOverlap,
    UnknownIdentifier,
    UnknownRoutine,
    UnknownLine,
    ReadOnlyWrite,
    ArityMismatch,
    RecursionDetected,
    KindMismatch, // lock used as value, variable used as lock, ...
};

struct Diag {
    DiagKind kind;
    std::string message;
    int line = 0; // source line; 0 when not applicable
    int col = 0;
};

using Diags = std::vector<Diag>;

std::string diagKindName(DiagKind k);
std::string formatDiags(const Diags& ds);

} // namespace irqr
