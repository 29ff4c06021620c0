#include "irqracer/vm.hpp"
#include "irqracer/alias.hpp"
#include "irqracer/checker.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace irqr {

CellMap CellMap::build(const Program& p) {
    CellMap m;
    auto add = [&](const std::string& n) {
        if (m.ids.count(n)) return;
        m.ids[n] = static_cast<int>(m.names.size());
        m.names.push_back(n);
    };
    for (const auto& g : p.globals) add(g.name);
    for (const auto& l : p.lockDecls) add(l);
    for (const auto& r : p.routines) {
        for (const auto& pm : r.params) add(r.name + "::" + pm.name);
        for (const auto& lv : routine_locals(p, r)) add(r.name + "::" + lv);
    }
    return m;
}

int CellMap::addressOf(const std::string& qualified) const {
    auto it = ids.find(qualified);
    if (it == ids.end()) return 0;
    return it->second + 1;
}

const std::string* CellMap::cellAt(uint32_t address) const {
    if (address == 0 || address > names.size()) return nullptr;
    return &names[address - 1];
}

std::vector<uint32_t> Trace::outputs() const {
    std::vector<uint32_t> out;
    for (const auto& e : events)
        if (e.kind == TraceEvent::Kind::Output) out.push_back(e.value);
    return out;
}

std::string Trace::dump() const {
    std::ostringstream os;
    for (const auto& e : events) {
        const char* k = "?";
        switch (e.kind) {
        case TraceEvent::Kind::Access: k = e.write ? "write" : "read"; break;
        case TraceEvent::Kind::IrqOp: k = "irqop"; break;
        case TraceEvent::Kind::IsrEntry: k = "isr_entry"; break;
        case TraceEvent::Kind::IsrExit: k = "isr_exit"; break;
        case TraceEvent::Kind::Output: k = "output"; break;
        case TraceEvent::Kind::Block: k = "block"; break;
        case TraceEvent::Kind::Fault: k = "fault"; break;
        }
        os << k << "\t" << e.context << "\t" << e.loc.str() << "\t" << e.detail;
        if (e.kind == TraceEvent::Kind::Access || e.kind == TraceEvent::Kind::Output)
            os << "=" << e.value;
        os << "\n";
    }
    if (deadlock) os << "deadlock\n";
    if (stepLimit) os << "step_limit\n";
    return os.str();
}

bool isr_enabled(const MachineState& s, const Program& p, int line) {
    bool declared = false;
    for (const auto& r : p.routines)
        if (r.isIsr() && r.irqLine == line) declared = true;
    if (!declared) throw std::runtime_error("UnknownLine: irq " + std::to_string(line));
    if (!s.globalIrqEnabled) return false;
    auto mask = s.lineMask.find(line);
    if (mask != s.lineMask.end() && mask->second) return false;
    auto pend = s.pinPending.find(line);
    if (pend != s.pinPending.end() && pend->second) return false;
    auto svc = s.inService.find(line);
    if (svc != s.inService.end() && svc->second) return false;
    return true;
}

Executor::Executor(const Program& p, VmConfig cfg)
    : p_(p), cfg_(std::move(cfg)), w_(p.wordWidth), cells_(CellMap::build(p)) {}

std::string Executor::qualify(const std::string& routine, const std::string& name) const {
    return qualified_name(p_, routine, name);
}

int Executor::ownerPriority(const std::string& ctx) const {
    const Routine* r = p_.find(ctx);
    return r ? r->priority : 1 << 20;
}

bool Executor::isrEnabled(int line) const { return isr_enabled(st_, p_, line); }

bool Executor::wouldPreempt(int line) const {
    const Routine* isr = nullptr;
    for (const auto& r : p_.routines)
        if (r.isIsr() && r.irqLine == line) isr = &r;
    if (!isr || st_.contextStack.empty()) return false;
    const Routine* cur = p_.find(st_.contextStack.back());
    if (!cur) return true;
    if (!cur->isIsr()) return true;
    return isr->priority < cur->priority;
}

void Executor::raisePin(int line) {
    if (st_.pinPending[line] || st_.inService[line]) return; // pin already high
    st_.pinPending[line] = true;
}

const std::string& Executor::currentContext() const { return st_.contextStack.back(); }

size_t Executor::traceSize() const { return trace_ ? trace_->events.size() : 0; }

void Executor::access(const std::string& name, bool write, uint32_t v, const Location& loc) {
    trace_->events.push_back({TraceEvent::Kind::Access, st_.contextStack.back(), loc, name, write,
                              v, 0});
}

uint32_t Executor::readRegister(const std::string& name, const Location& loc) {
    const RegisterDecl* rd = p_.findRegister(name);
    if (!st_.latched.count(name)) {
        uint32_t v = 0;
        if (input_) {
            auto it = input_->values.find(name);
            if (it != input_->values.end()) v = it->second;
        }
        WordOps rw(rd->width);
        st_.registers[name] = rw.trunc(v);
        st_.latched.insert(name);
    }
    uint32_t v = st_.registers[name];
    access(name, false, v, loc);
    return v;
}

void Executor::writeRegister(const std::string& name, uint32_t v, const Location& loc) {
    const RegisterDecl* rd = p_.findRegister(name);
    WordOps rw(rd->width);
    v = rw.trunc(v);
    st_.registers[name] = v;
    st_.latched.insert(name);
    access(name, true, v, loc);
    bool irqctl = rd->irqControl || cfg_.extraIrqctlRegs.count(name);
    if (irqctl) {
        // hardware mask register: bit (line-1) set = line enabled
        for (const auto& r : p_.routines) {
            if (!r.isIsr()) continue;
            bool enabled = r.irqLine >= 1 && ((v >> (r.irqLine - 1)) & 1u);
            st_.lineMask[r.irqLine] = !enabled;
        }
        trace_->events.push_back({TraceEvent::Kind::IrqOp, st_.contextStack.back(), loc,
                                  "irqctl_write " + name, true, v, 0});
    }
}

uint32_t Executor::readCell(const std::string& qualified, const Location& loc) {
    uint32_t v = 0;
    auto sep = qualified.find("::");
    if (sep == std::string::npos) {
        v = st_.globals[qualified];
    } else {
        v = st_.frames[qualified.substr(0, sep)][qualified.substr(sep + 2)];
    }
    access(qualified, false, v, loc);
    return v;
}

void Executor::writeCell(const std::string& qualified, uint32_t v, const Location& loc) {
    v = w_.trunc(v);
    auto sep = qualified.find("::");
    if (sep == std::string::npos) {
        st_.globals[qualified] = v;
    } else {
        st_.frames[qualified.substr(0, sep)][qualified.substr(sep + 2)] = v;
    }
    access(qualified, true, v, loc);
}

uint32_t Executor::eval(const Expr& e, const std::string& routine, const Location& loc) {
    switch (e.kind) {
    case Expr::Kind::IntLit:
        return w_.trunc(e.value);
    case Expr::Kind::Var:
        if (p_.findRegister(e.name)) return readRegister(e.name, loc);
        return readCell(qualify(routine, e.name), loc);
    case Expr::Kind::Deref: {
        uint32_t pv = readCell(qualify(routine, e.name), loc);
        const std::string* cell = cells_.cellAt(pv);
        if (!cell) {
            trace_->events.push_back({TraceEvent::Kind::Fault, st_.contextStack.back(), loc,
                                      "bad pointer *" + e.name, false, pv, 0});
            throw Halt{Halt::Why::Fault};
        }
        return readCell(*cell, loc);
    }
    case Expr::Kind::Unary: {
        uint32_t a = eval(*e.a, routine, loc);
        return e.uop == UnOp::Neg ? w_.neg(a) : (a == 0 ? 1u : 0u);
    }
    case Expr::Kind::Binary: {
        // no short-circuit: IDL logical ops evaluate both sides
        uint32_t a = eval(*e.a, routine, loc);
        uint32_t b = eval(*e.b, routine, loc);
        switch (e.bop) {
        case BinOp::Add: return w_.add(a, b);
        case BinOp::Sub: return w_.sub(a, b);
        case BinOp::Mul: return w_.mul(a, b);
        case BinOp::And: return w_.band(a, b);
        case BinOp::Or: return w_.bor(a, b);
        case BinOp::Xor: return w_.bxor(a, b);
        case BinOp::Shl: return w_.shl(a, b);
        case BinOp::Shr: return w_.shr(a, b);
        case BinOp::Eq: return a == b;
        case BinOp::Ne: return a != b;
        case BinOp::Lt: return w_.lt(a, b);
        case BinOp::Le: return w_.le(a, b);
        case BinOp::Gt: return w_.lt(b, a);
        case BinOp::Ge: return w_.le(b, a);
        case BinOp::LAnd: return (a != 0 && b != 0) ? 1u : 0u;
        case BinOp::LOr: return (a != 0 || b != 0) ? 1u : 0u;
        }
        return 0;
    }
    }
    return 0;
}

void Executor::execList(const StmtList& body) {
    for (const auto& s : body) execStmt(*s);
}

void Executor::boundary(const Stmt& s) {
    if (++st_.steps > cfg_.stepLimit) throw Halt{Halt::Why::StepLimit};
    if (inj_) inj_->afterStmt(*this, s);
    if (sched_) {
        for (const auto& t : sched_->triggers)
            if (t.after == s.loc) raisePin(t.line);
    }
    dispatch();
}

void Executor::dispatch() {
    for (;;) {
        int best = 0;
        int bestPrio = 1 << 20;
        const Routine* bestIsr = nullptr;
        for (const auto& r : p_.routines) {
            if (!r.isIsr()) continue;
            int line = r.irqLine;
            if (!st_.pinPending[line]) continue;
            if (!st_.globalIrqEnabled || st_.lineMask[line]) continue;
            if (!wouldPreempt(line)) continue;
            if (r.priority < bestPrio) {
                bestPrio = r.priority;
                best = line;
                bestIsr = &r;
            }
        }
        if (!bestIsr) return;
        st_.pinPending[best] = false;
        st_.inService[best] = true;
        runIsr(*bestIsr);
        st_.inService[best] = false;
    }
}

void Executor::runIsr(const Routine& isr) {
    trace_->events.push_back({TraceEvent::Kind::IsrEntry, isr.name, {isr.name, -1}, isr.name,
                              false, 0, isr.irqLine});
    st_.contextStack.push_back(isr.name);
    auto& frame = st_.frames[isr.name];
    frame.clear();
    for (const auto& lv : routine_locals(p_, isr)) frame[lv] = 0;
    const auto& bound = st_.isrParams[isr.name];
    for (size_t i = 0; i < isr.params.size(); ++i)
        frame[isr.params[i].name] = i < bound.size() ? bound[i] : 0;
    execList(isr.body);
    st_.contextStack.pop_back();
    trace_->events.push_back({TraceEvent::Kind::IsrExit, isr.name, {isr.name, -1}, isr.name, false,
                              0, isr.irqLine});
}

void Executor::execStmt(const Stmt& s) {
    const std::string routine = s.loc.routine;
    if (inj_) inj_->beforeStmt(*this, s);
    switch (s.kind) {
    case Stmt::Kind::Assign: {
        uint32_t v = 0;
        if (s.rhsAddrOf) {
            v = static_cast<uint32_t>(cells_.addressOf(qualify(routine, s.addrName)));
        } else {
            v = eval(*s.expr, routine, s.loc);
        }
        if (s.lhsDeref) {
            uint32_t pv = readCell(qualify(routine, s.lhs), s.loc);
            const std::string* cell = cells_.cellAt(pv);
            if (!cell) {
                trace_->events.push_back({TraceEvent::Kind::Fault, st_.contextStack.back(), s.loc,
                                          "bad pointer *" + s.lhs, true, pv, 0});
                throw Halt{Halt::Why::Fault};
            }
            writeCell(*cell, v, s.loc);
        } else if (p_.findRegister(s.lhs)) {
            writeRegister(s.lhs, v, s.loc);
        } else {
            writeCell(qualify(routine, s.lhs), v, s.loc);
        }
        boundary(s);
        break;
    }
    case Stmt::Kind::If: {
        uint32_t c = eval(*s.expr, routine, s.loc);
        boundary(s);
        execList(c != 0 ? s.thenBody : s.elseBody);
        break;
    }
    case Stmt::Kind::While: {
        bool first = true;
        for (;;) {
            // every guard evaluation is one execution of this statement, so
            // the observer hooks pair up per iteration
            if (!first && inj_) inj_->beforeStmt(*this, s);
            first = false;
            uint32_t c = eval(*s.expr, routine, s.loc);
            boundary(s);
            if (c == 0) break;
            execList(s.thenBody);
        }
        break;
    }
    case Stmt::Kind::Lock:
    case Stmt::Kind::Unlock: {
        std::string lockName = s.target;
        if (s.targetDeref) {
            uint32_t pv = readCell(qualify(routine, s.target), s.loc);
            const std::string* cell = cells_.cellAt(pv);
            if (!cell || !p_.isLock(*cell)) {
                trace_->events.push_back({TraceEvent::Kind::Fault, st_.contextStack.back(), s.loc,
                                          "bad lock pointer *" + s.target, false, pv, 0});
                throw Halt{Halt::Why::Fault};
            }
            lockName = *cell;
        }
        if (s.kind == Stmt::Kind::Lock) {
            auto holder = st_.lockHolder.find(lockName);
            if (holder != st_.lockHolder.end() && !holder->second.empty()) {
                // single core, strict preemption: a blocked acquire can never
                // be released from below us
                trace_->events.push_back({TraceEvent::Kind::Block, st_.contextStack.back(), s.loc,
                                          lockName, false, 0, 0});
                throw Halt{Halt::Why::Deadlock};
            }
            st_.lockHolder[lockName] = st_.contextStack.back();
        } else {
            auto holder = st_.lockHolder.find(lockName);
            if (holder != st_.lockHolder.end() && holder->second == st_.contextStack.back())
                holder->second.clear();
        }
        trace_->events.push_back({TraceEvent::Kind::IrqOp, st_.contextStack.back(), s.loc,
                                  (s.kind == Stmt::Kind::Lock ? "lock " : "unlock ") + lockName,
                                  false, 0, 0});
        boundary(s);
        break;
    }
    case Stmt::Kind::IrqDisable:
    case Stmt::Kind::IrqEnable: {
        st_.lineMask[s.irqLine] = s.kind == Stmt::Kind::IrqDisable;
        trace_->events.push_back({TraceEvent::Kind::IrqOp, st_.contextStack.back(), s.loc,
                                  s.kind == Stmt::Kind::IrqDisable ? "irq_disable" : "irq_enable",
                                  false, 0, s.irqLine});
        boundary(s);
        break;
    }
    case Stmt::Kind::IrqDisableAll:
    case Stmt::Kind::IrqEnableAll: {
        st_.globalIrqEnabled = s.kind == Stmt::Kind::IrqEnableAll;
        trace_->events.push_back({TraceEvent::Kind::IrqOp, st_.contextStack.back(), s.loc,
                                  s.kind == Stmt::Kind::IrqDisableAll ? "irq_disable_all"
                                                                      : "irq_enable_all",
                                  false, 0, 0});
        boundary(s);
        break;
    }
    case Stmt::Kind::Output: {
        uint32_t v = eval(*s.expr, routine, s.loc);
        trace_->events.push_back(
            {TraceEvent::Kind::Output, st_.contextStack.back(), s.loc, "", false, v, 0});
        boundary(s);
        break;
    }
    case Stmt::Kind::Call: {
        const Routine* callee = p_.find(s.callee);
        std::vector<uint32_t> argv;
        for (const auto& a : s.args) {
            if (a.addrOf)
                argv.push_back(static_cast<uint32_t>(cells_.addressOf(qualify(routine, a.addrName))));
            else
                argv.push_back(eval(*a.expr, routine, s.loc));
        }
        boundary(s);
        if (callee && callee->isIsr()) {
            st_.isrParams[s.callee] = argv; // registration binds parameters
        } else if (callee) {
            auto& frame = st_.frames[callee->name];
            frame.clear();
            for (const auto& lv : routine_locals(p_, *callee)) frame[lv] = 0;
            for (size_t i = 0; i < callee->params.size() && i < argv.size(); ++i)
                frame[callee->params[i].name] = argv[i];
            execList(callee->body);
        }
        break;
    }
    }
}

Trace Executor::run(const InputAssignment& input, const InterruptSchedule& sched,
                    const std::string& entry, Injector* injector) {
    Trace trace;
    trace_ = &trace;
    inj_ = injector;
    sched_ = &sched;
    input_ = &input;

    st_ = MachineState{};
    for (const auto& g : p_.globals) {
        uint32_t v = g.init;
        if (g.isInput) {
            auto it = input.values.find(g.name);
            if (it != input.values.end()) v = it->second;
        }
        st_.globals[g.name] = w_.trunc(v);
    }
    for (const auto& r : p_.routines)
        if (r.isIsr()) {
            st_.lineMask[r.irqLine] = false;
            st_.pinPending[r.irqLine] = false;
            st_.inService[r.irqLine] = false;
        }

    const Routine* e = p_.find(entry);
    if (!e) throw std::runtime_error("unknown entry routine " + entry);

    try {
        if (e->isIsr()) {
            st_.inService[e->irqLine] = true;
            st_.contextStack.push_back(entry);
            auto& frame = st_.frames[entry];
            for (const auto& lv : routine_locals(p_, *e)) frame[lv] = 0;
            const auto& bound = st_.isrParams[entry];
            for (size_t i = 0; i < e->params.size(); ++i)
                frame[e->params[i].name] = i < bound.size() ? bound[i] : 0;
            execList(e->body);
            st_.contextStack.pop_back();
            st_.inService[e->irqLine] = false;
        } else {
            st_.contextStack.push_back(entry);
            auto& frame = st_.frames[entry];
            for (const auto& lv : routine_locals(p_, *e)) frame[lv] = 0;
            for (const auto& pm : e->params) frame[pm.name] = 0;
            execList(e->body);
            st_.contextStack.pop_back();
        }
    } catch (const Halt& h) {
        switch (h.why) {
        case Halt::Why::Deadlock: trace.deadlock = true; break;
        case Halt::Why::StepLimit: trace.stepLimit = true; break;
        case Halt::Why::Fault: trace.runtimeFault = true; break;
        }
    }

    trace_ = nullptr;
    inj_ = nullptr;
    sched_ = nullptr;
    input_ = nullptr;
    return trace;
}

Trace execute(const Program& p, const InputAssignment& input, const InterruptSchedule& sched,
              const std::string& entry, const VmConfig& cfg) {
    Executor ex(p, cfg);
    return ex.run(input, sched, entry, nullptr);
}

namespace {

class ValidationInjector : public Injector {
public:
    ValidationInjector(const RaceWarning& wn, int lineJ, const std::set<Location>& others)
        : wn_(wn), lineJ_(lineJ), others_(others) {}

    void beforeStmt(Executor& ex, const Stmt& s) override {
        (void)ex;
        if (scanning_ && !fired_ && !(s.loc == wn_.ei.loc) && others_.count(s.loc)) {
            scanning_ = false;
            stopped_ = true;
        }
    }

    void afterStmt(Executor& ex, const Stmt& s) override {
        if (fired_) return;
        if (!(s.loc == wn_.ei.loc)) return;
        covered_ = true;
        if (stopped_) return;
        if (ex.isrEnabled(lineJ_) && ex.wouldPreempt(lineJ_)) {
            fireEventIdx_ = ex.traceSize();
            ex.raisePin(lineJ_);
            fired_ = true;
        } else {
            scanning_ = true; // wait for the next occurrence of e_i
        }
    }

    bool covered_ = false, fired_ = false, scanning_ = false, stopped_ = false;
    size_t fireEventIdx_ = 0;

private:
    const RaceWarning& wn_;
    int lineJ_;
    const std::set<Location>& others_;
};

} // namespace

std::string verdictName(VerdictKind k) {
    switch (k) {
    case VerdictKind::Confirmed: return "Confirmed";
    case VerdictKind::RefutedDisabled: return "RefutedDisabled";
    case VerdictKind::RefutedNoAccess: return "RefutedNoAccess";
    case VerdictKind::NotCovered: return "NotCovered";
    case VerdictKind::Deadlock: return "Deadlock";
    }
    return "?";
}

ValidationVerdict validate_race(const Program& p, const RaceWarning& wn,
                                const InputAssignment& input, const ValidationContext& ctx) {
    ValidationVerdict out;
    const Routine* ri = p.find(wn.ei.routine);
    const Routine* rj = p.find(wn.ej.routine);
    if (!ri || !rj || !rj->isIsr()) return out;

    // e_i in a task: execute the task; e_i in an ISR: execute that ISR
    std::string entry = wn.ei.routine;

    Trace baseline = execute(p, input, {}, entry, ctx.vm);

    Executor ex(p, ctx.vm);
    ValidationInjector inj(wn, rj->irqLine, ctx.otherRacingPoints);
    Trace injected = ex.run(input, {}, entry, &inj);

    out.trace = injected;
    out.eiCovered = inj.covered_;
    out.isrFired = inj.fired_;

    if (injected.deadlock) {
        out.kind = VerdictKind::Deadlock;
        return out;
    }
    if (!inj.covered_) {
        out.kind = VerdictKind::NotCovered;
        return out;
    }
    if (!inj.fired_) {
        out.kind = VerdictKind::RefutedDisabled;
        return out;
    }
    // forced activation: IsrEntry for line j at/after the recorded index
    size_t i = inj.fireEventIdx_;
    const auto& ev = injected.events;
    while (i < ev.size() &&
           !(ev[i].kind == TraceEvent::Kind::IsrEntry && ev[i].line == rj->irqLine))
        ++i;
    bool performed = false;
    for (size_t k = i + 1; k < ev.size(); ++k) {
        if (ev[k].kind == TraceEvent::Kind::IsrExit && ev[k].line == rj->irqLine) break;
        if (ev[k].kind == TraceEvent::Kind::Access && ev[k].loc == wn.ej.loc &&
            ev[k].detail == wn.resource)
            performed = true;
    }
    out.ejCovered = performed;
    if (!performed) {
        out.kind = VerdictKind::RefutedNoAccess;
        return out;
    }
    out.kind = VerdictKind::Confirmed;
    out.harmful = injected.outputs() != baseline.outputs();
    return out;
}

} // namespace irqr
