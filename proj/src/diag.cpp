#include "irqracer/diag.hpp"

#include <sstream>

namespace irqr {

std::string diagKindName(DiagKind k) {
    switch (k) {
    case DiagKind::SyntaxError: return "SyntaxError";
    case DiagKind::DuplicateRoutine: return "DuplicateRoutine";
    case DiagKind::DuplicateIrqLine: return "DuplicateIrqLine";
    case DiagKind::DuplicatePriority: return "DuplicatePriority";
    case DiagKind::PriorityOverlap: return "PriorityOverlap";
    case DiagKind::UnknownIdentifier: return "UnknownIdentifier";
    case DiagKind::UnknownRoutine: return "UnknownRoutine";
    case DiagKind::UnknownLine: return "UnknownLine";
    case DiagKind::ReadOnlyWrite: return "ReadOnlyWrite";
    case DiagKind::ArityMismatch: return "ArityMismatch";
    case DiagKind::RecursionDetected: return "RecursionDetected";
    case DiagKind::KindMismatch: return "KindMismatch";
    }
    return "?";
}

std::string formatDiags(const Diags& ds) {
    std::ostringstream os;
    for (const auto& d : ds) {
        os << diagKindName(d.kind);
        if (d.line) os << " at line " << d.line << ":" << d.col;
        os << ": " << d.message << "\n";
    }
    return os.str();
}

} // namespace irqr
