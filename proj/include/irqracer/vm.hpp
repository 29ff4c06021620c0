#pragma once

#include "irqracer/ast.hpp"
#include "irqracer/detect.hpp"
#include "irqracer/word.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace irqr {

// Stable integer addresses for named cells; pointer values are cell id + 1,
// 0 is null. Registers are not addressable.
struct CellMap {
    std::vector<std::string> names; // id -> qualified name
    std::map<std::string, int> ids;

    static CellMap build(const Program& p);
    int addressOf(const std::string& qualified) const;   // id + 1
    const std::string* cellAt(uint32_t address) const;   // nullptr when invalid
};

struct InputAssignment {
    std::map<std::string, uint32_t> values; // register or input-global -> value
    bool operator<(const InputAssignment& o) const { return values < o.values; }
    bool operator==(const InputAssignment& o) const { return values == o.values; }
};

struct InterruptSchedule {
    struct Trigger {
        Location after; // raise when this statement completes (each execution)
        int line = 0;
    };
    std::vector<Trigger> triggers;
};

struct TraceEvent {
    enum class Kind { Access, IrqOp, IsrEntry, IsrExit, Output, Block, Fault };
    Kind kind;
    std::string context; // active task/ISR
    Location loc;
    std::string detail;  // resource / lock / op text
    bool write = false;
    uint32_t value = 0;
    int line = 0;
};

struct Trace {
    std::vector<TraceEvent> events;
    bool deadlock = false;
    bool stepLimit = false;
    bool runtimeFault = false;

    std::vector<uint32_t> outputs() const;
    std::string dump() const; // line-oriented: kind \t context \t location \t detail
};

struct MachineState {
    std::map<std::string, uint32_t> globals;
    std::map<std::string, uint32_t> registers;   // latched values
    std::set<std::string> latched;
    std::map<std::string, std::map<std::string, uint32_t>> frames; // routine -> locals/params
    std::map<std::string, std::vector<uint32_t>> isrParams;        // bound at registration
    bool globalIrqEnabled = true;               // eflags[9] analog, true = enabled
    std::map<int, bool> lineMask;               // redirection-table analog, true = masked
    std::map<int, bool> pinPending;             // raised, not yet delivered
    std::map<int, bool> inService;              // ISR active (non-reentrancy)
    std::map<std::string, std::string> lockHolder; // lock -> holding context
    std::vector<std::string> contextStack;      // entry at bottom, ISRs above
    uint64_t steps = 0;
};

struct VmConfig {
    uint64_t stepLimit = 1'000'000;
    std::set<std::string> extraIrqctlRegs;
};

// Alg.-4 check: global bit enabled, line unmasked, pin low.
bool isr_enabled(const MachineState& s, const Program& p, int line);

class Executor;

// Boundary hooks for controllers (race validation, oracle sweeps).
class Injector {
public:
    virtual ~Injector() = default;
    virtual void beforeStmt(Executor&, const Stmt&) {}
    virtual void afterStmt(Executor&, const Stmt&) {}
};

class Executor {
public:
    Executor(const Program& p, VmConfig cfg = {});

    Trace run(const InputAssignment& input, const InterruptSchedule& sched,
              const std::string& entry, Injector* injector = nullptr);

    // controller surface
    bool isrEnabled(int line) const;
    bool wouldPreempt(int line) const; // strict priority vs the active context
    void raisePin(int line);
    const std::string& currentContext() const;
    const MachineState& state() const { return st_; }
    const CellMap& cells() const { return cells_; }
    size_t traceSize() const;

private:
    friend struct ExecImpl;
    const Program& p_;
    VmConfig cfg_;
    WordOps w_;
    CellMap cells_;
    MachineState st_;
    Trace* trace_ = nullptr;
    Injector* inj_ = nullptr;
    const InterruptSchedule* sched_ = nullptr;
    const InputAssignment* input_ = nullptr;

    struct Halt {
        enum class Why { Deadlock, StepLimit, Fault } why;
    };

    void execList(const StmtList& body);
    void execStmt(const Stmt& s);
    void boundary(const Stmt& s);
    void dispatch();
    void runIsr(const Routine& isr);
    uint32_t eval(const Expr& e, const std::string& stmtRoutine, const Location& loc);
    uint32_t readCell(const std::string& qualified, const Location& loc);
    void writeCell(const std::string& qualified, uint32_t v, const Location& loc);
    uint32_t readRegister(const std::string& name, const Location& loc);
    void writeRegister(const std::string& name, uint32_t v, const Location& loc);
    std::string qualify(const std::string& routine, const std::string& name) const;
    void access(const std::string& name, bool write, uint32_t v, const Location& loc);
    int ownerPriority(const std::string& ctx) const;
};

// simple one-shot execution
Trace execute(const Program& p, const InputAssignment& input, const InterruptSchedule& sched,
              const std::string& entry, const VmConfig& cfg = {});

enum class VerdictKind { Confirmed, RefutedDisabled, RefutedNoAccess, NotCovered, Deadlock };

struct ValidationVerdict {
    VerdictKind kind = VerdictKind::NotCovered;
    bool harmful = false; // output stream differs from the uninjected baseline
    Trace trace;
    bool isrFired = false;
    bool eiCovered = false;
    bool ejCovered = false; // e_j access performed by the forced ISR
};

struct ValidationContext {
    std::set<Location> otherRacingPoints; // first events of the other warnings
    VmConfig vm;
};

// Alg. 3: run to the first event, force the second event's ISR right after
// it; when its line is disabled there, keep going until the event statement
// re-executes with the line enabled, another pair's racing point is reached,
// or the run ends.
ValidationVerdict validate_race(const Program& p, const RaceWarning& wn,
                                const InputAssignment& input, const ValidationContext& ctx = {});

std::string verdictName(VerdictKind k);

} // namespace irqr
