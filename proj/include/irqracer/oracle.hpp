#pragma once

#include "irqracer/detect.hpp"
#include "irqracer/vm.hpp"

#include <set>
#include <string>
#include <vector>

namespace irqr {

struct OracleRace {
    RaceEvent ei, ej;
    std::string resource;
    auto key() const {
        return std::tie(ei.routine, ei.loc, ej.routine, ej.loc, resource);
    }
    bool operator<(const OracleRace& o) const { return key() < o.key(); }
};

struct OracleOptions {
    uint64_t maxRuns = 200'000; // BudgetExceeded beyond this
    VmConfig vm;
    bool recordFaults = false;
};

struct OracleReport {
    std::set<OracleRace> races;
    int deadlockRuns = 0;
    int faultRuns = 0; // injected output differs from baseline (advisory)
    uint64_t runs = 0;
    bool budgetExceeded = false;
};

// Ground truth by enumeration: every input in the space, every entry context,
// one forced interrupt at every statement boundary. A race is recorded when
// the statement right before a forced ISR and the ISR itself touch the same
// resource with at least one write.
OracleReport exhaustive_oracle(const Program& p, const std::vector<InputAssignment>& space,
                               const OracleOptions& opts = {});

} // namespace irqr
