#pragma once

#include "irqracer/alias.hpp"
#include "irqracer/ast.hpp"
#include "irqracer/detect.hpp"
#include "irqracer/graph.hpp"
#include "irqracer/vm.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace irqr {

// locks possibly held entering (in) and leaving (out) each RICFG node,
// closed under aliases; may-analysis (union over paths)
struct HoldSets {
    std::vector<std::set<std::string>> in, out;
    std::set<std::string> anywhere() const;
};

HoldSets compute_hold_sets(const Ricfg& g, const AliasSet& aliases, const Program& p);

// acquired-before relation: edge (a, b) when some context acquires a and
// later acquires b on the same path; aliases acquired simultaneously fall
// into one same-order class
struct LockOrderGraph {
    std::set<std::pair<std::string, std::string>> edges; // over class reps
    std::map<std::string, std::string> parent;           // same-order classes

    std::string rep(const std::string& l) const;
    void sameOrder(const std::string& a, const std::string& b);
    void addEdge(const std::string& a, const std::string& b);
    bool hasPath(const std::string& a, const std::string& b) const;
    bool hasCycle() const;
};

LockOrderGraph compute_lock_order(const Program& p, const std::map<std::string, Ricfg>& ricfgs);
LockOrderGraph lock_order_of_program(const Program& p); // builds its own graphs

// Rule 2: the patched order must not create a cycle and must not reverse any
// acquired-before path of the original program.
bool lock_order_admits(const LockOrderGraph& original, const LockOrderGraph& patched);

struct PatchOp {
    enum class Kind { InsertIrqDisable, InsertIrqEnable, InsertLock, InsertUnlock, MoveLock };
    Kind kind;
    int irqLine = 0;
    std::string lockName;
    Location anchor;
    bool before = true;
    Location moveFrom; // MoveLock only: the existing lock/unlock statement
    int tag = -1;      // generated critical-section id
};

enum class RepairStrategy { IDE, AL, ECS, Unrepairable };

struct RepairPlan {
    RaceWarning warning;
    RepairStrategy strategy = RepairStrategy::Unrepairable;
    std::vector<PatchOp> patches;
    std::string note;
};

std::string strategyName(RepairStrategy s);

// Eq. 1 placement: the closest predecessor of the first event whose hold set
// is disjoint from everything the second context may hold, paired with the
// nearest post-dominated/dominating enable point; rejects regions spanning a
// blocking lock acquire.
RepairPlan plan_ide_repair(const Program& p, const RaceWarning& wn,
                           const std::map<std::string, Ricfg>& ricfgs, const AliasSet& aliases);

// AL with a fresh lock around both events when Rule 2 admits it, otherwise
// ECS widening of a common enclosing lock; Unrepairable when no common lock
// exists or the widened order still violates Rule 2.
RepairPlan plan_lock_repair(const Program& p, const RaceWarning& wn,
                            const std::map<std::string, Ricfg>& ricfgs, const AliasSet& aliases);

// IDE first when it admits a placement, then AL, then ECS.
RepairPlan choose_repair(const Program& p, const RaceWarning& wn,
                         const std::map<std::string, Ricfg>& ricfgs, const AliasSet& aliases);

struct ApplyResult {
    Program program;
    std::map<Location, Location> remap; // original statement -> new location
};

// Inserts and moves, then renumbers; multiple inserts at one anchor nest
// deterministically with interrupt ops outermost. Throws on vanished anchors.
ApplyResult apply_patches(const Program& p, const std::vector<PatchOp>& patches);

// Coalesces generated critical sections that overlap or touch: same-line
// interrupt sections merge, lock sections merge when they share the lock or
// both locks are generated. Idempotent; never increases operation count.
Program merge_fixes(const Program& p);

int count_generated_ops(const Program& p);
Program strip_generated(const Program& p);

struct ConfirmedRace {
    RaceWarning wn;
    InputAssignment input;
};

struct RepairHooks {
    // full detection->symbolic->dynamic pipeline on a candidate program
    std::function<std::vector<ConfirmedRace>(const Program&)> confirmed;
};

struct RepairConfig {
    int maxWideningPerSection = 32;
    int maxRounds = 64;
    VmConfig vm;
};

struct RepairReport {
    std::vector<RepairPlan> plans;
    std::string status; // NoConfirmedRaces | Repaired | PartiallyRepaired
    std::vector<RaceWarning> surviving;
    int insertedOps = 0;
    int rounds = 0;
    bool mergeApplied = false;
};

// Alg. 5: plan per warning, apply, revalidate (fresh pipeline + original
// warnings + bounded injection sweep for output faults and new deadlocks),
// widen the offending critical section one statement at a time, then merge.
std::pair<Program, RepairReport> repair_and_validate(const Program& p,
                                                     const std::vector<ConfirmedRace>& races,
                                                     const RepairHooks& hooks,
                                                     const RepairConfig& cfg,
                                                     const std::map<std::string, Ricfg>& ricfgs,
                                                     const AliasSet& aliases);

// Table-1 strategy catalog: machine-readable, strategies beyond IDE/AL/ECS
// ship as data with applicability notes.
struct StrategyCatalogEntry {
    std::string key, name, description, example, applicationCondition;
    bool usedByIndustry = false;
    bool automated = false;
    int linuxTaskCount = 0;
    double linuxTaskPct = 0;
    int linuxIntCount = 0;
    double linuxIntPct = 0;
};

const std::vector<StrategyCatalogEntry>& strategy_catalog();

} // namespace irqr
