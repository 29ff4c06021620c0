#pragma once

#include "irqracer/alias.hpp"
#include "irqracer/ast.hpp"
#include "irqracer/diag.hpp"
#include "irqracer/detect.hpp"
#include "irqracer/graph.hpp"
#include "irqracer/repair.hpp"
#include "irqracer/symexec.hpp"
#include "irqracer/vm.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace irqr {

struct ToolConfig {
    double symTimeoutSec = 600; // paper setup: symbolic execution capped at 10 minutes
    uint64_t symStepBudget = 2'000'000;
    int lmax = 1000;
    uint64_t vmStepLimit = 1'000'000;
    uint64_t seed = 1;
    std::vector<std::string> irqctlRegisters; // config-declared, on top of `irqctl` attributes
    int maxWideningPerSection = 32;
    int maxRepairRounds = 64;
    uint64_t solverEnumBudget = 1u << 20;
    int solverProbes = 64;
    bool solverSkip = true;
    int inconclusiveRetries = 4;
    uint64_t oracleBudget = 200'000;
    bool emitTimings = false; // timings break byte-identical reports; opt in
};

enum class PipelineStage { Detect, Validate, Repair };

struct WarningRecord {
    RaceWarning wn;
    std::string symStatus;               // Reachable | Infeasible | Inconclusive | (empty)
    std::string symReason;
    std::optional<InputAssignment> input;
    std::string verdict;                 // dynamic verdict name, when validated
    bool harmful = false;
    std::string strategy;                // repair plan, when repaired
    double symSeconds = 0, dynSeconds = 0;
};

struct PipelineResult {
    Program program;
    Diags diags;                  // parse/check failures (stage aborted)
    AliasSet aliases;
    SharedResources shared;
    InterruptOpList itrl;
    Icfg icfg;                    // owns the unrolled statements ricfg nodes reference
    std::map<std::string, Ricfg> ricfgs;
    std::map<std::string, IntbMap> intb;
    std::vector<WarningRecord> warnings;
    // repair stage
    std::optional<Program> repaired;
    RepairReport repairReport;
    std::string sourceDigest;

    bool anyConfirmed() const;
    bool anyWarnings() const { return !warnings.empty(); }
};

PipelineResult run_pipeline(const std::string& source, PipelineStage stage,
                            const ToolConfig& cfg);

// convenience for tests: pipeline over an already-parsed program
PipelineResult run_pipeline(const Program& p, PipelineStage stage, const ToolConfig& cfg);

// versioned, deterministically ordered report (timings zeroed unless enabled)
std::string report_json(const PipelineResult& r, const ToolConfig& cfg, PipelineStage stage);
std::string report_summary(const PipelineResult& r, PipelineStage stage);

std::string source_digest(const std::string& source);

// unified-diff-style patch between two program texts
std::string unified_diff(const std::string& before, const std::string& after,
                         const std::string& beforeName, const std::string& afterName);

// input-space construction for the oracle
std::vector<InputAssignment> full_input_space(const Program& p, uint64_t maxAssignments);
std::vector<InputAssignment> candidate_input_space(const Program& p, uint64_t maxAssignments,
                                                   const std::vector<InputAssignment>& extra = {});

} // namespace irqr
