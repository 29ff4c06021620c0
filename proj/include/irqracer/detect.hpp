#pragma once

#include "irqracer/alias.hpp"
#include "irqracer/ast.hpp"
#include "irqracer/graph.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace irqr {

enum class AccessType { Read, Write };

// The 6-tuple for one access event: which routine, where, under what name,
// whether that name is the declared one, the declared name, and read/write.
struct SharedResourceAccess {
    std::string routine;    // T
    Location loc;           // L
    std::string nameAtSite; // V
    bool isRealName;        // AV
    std::string realName;   // R (qualified)
    AccessType type;        // A

    auto key() const { return std::tie(routine, loc, realName, nameAtSite, type); }
    bool operator<(const SharedResourceAccess& o) const { return key() < o.key(); }
    bool operator==(const SharedResourceAccess& o) const { return key() == o.key(); }
};

struct InterruptOperation {
    std::string routine; // M
    Location loc;        // L
    int line = 0;        // I; 0 = all
    bool all = false;
    bool enable = false; // T
};

using InterruptOpList = std::vector<InterruptOperation>;

struct SharedResourceSet {
    std::set<std::string> names;                               // incl. alias forms
    std::map<std::string, std::set<std::string>> provenance;   // real name -> routines
    bool contains(const std::string& n) const { return names.count(n) != 0; }
};

// Per-line interrupt status: 1 = disabled, 0 = enabled.
using IntStatus = std::map<int, int>;
using IntbMap = std::vector<IntStatus>; // indexed by ricfg node id

struct RaceEvent {
    std::string routine;
    Location loc;
    AccessType type;
    auto key() const { return std::tie(routine, loc, type); }
};

enum class WarningStatus { Static, InputFound, Infeasible, Inconclusive, Confirmed, RefutedDynamic };

struct RaceWarning {
    RaceEvent ei, ej;
    std::string resource; // real (qualified) name
    WarningStatus status = WarningStatus::Static;
};

// Every read/write of a global, register, or alias-resolved pointer target,
// across the whole program. Dereferences expand to one access per may-target.
std::vector<SharedResourceAccess> collect_accesses(const Program& p, const AliasSet& aliases);

struct SharedResources {
    SharedResourceSet srs;
    std::vector<SharedResourceAccess> accesses; // only accesses to SRS members
};

// Alg.-1 style membership: a name (or an alias of it) accessed by two ISRs or
// by a task and an ISR; ISR-local names count only when global or aliasing an
// ISR parameter.
SharedResources identify_shared_resources(const Program& p, const AliasSet& aliases);

// Explicit irq_enable/irq_disable(/all) plus the conservative implicit rule:
// every write to an interrupt-controlling register is <routine, L, all, enable>.
InterruptOpList identify_interrupt_ops(const Program& p,
                                       const std::set<std::string>& extraIrqctlRegs = {});

// Statement locations of implicit interrupt operations (used for RICFG
// retention).
std::set<Location> implicit_itrl_locations(const InterruptOpList& itrl, const Program& p);

// Interrupt-status propagation over one RICFG: DFS-order fixpoint with
// bitwise-AND joins (enabled wins), the owning ISR's line forced disabled,
// and disables neutralized when an enabled ISR could immediately re-enable
// the line.
IntbMap propagate_intb(const Ricfg& g, const InterruptOpList& itrl, const Program& p);

// Status of line `line` at `loc`, meet over all unrolled copies.
int intb_at(const Ricfg& g, const IntbMap& m, const Location& loc, int line);

// Alg. 2: same resource, at least one write, strictly preempting context,
// line enabled at the first event. Deduplicated by (loc_i, loc_j, resource),
// deterministically ordered.
std::vector<RaceWarning> detect_static_races(const Program& p,
                                             const std::map<std::string, Ricfg>& ricfgs,
                                             const std::vector<SharedResourceAccess>& accesses,
                                             const std::map<std::string, IntbMap>& intb);

bool can_preempt(const Program& p, const std::string& hi, const std::string& lo);

} // namespace irqr
