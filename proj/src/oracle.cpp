#include "irqracer/oracle.hpp"

#include <algorithm>

namespace irqr {
namespace {

class OracleInjector : public Injector {
public:
    OracleInjector(int fireAt, int line) : fireAt_(fireAt), line_(line) {}

    void beforeStmt(Executor& ex, const Stmt&) override {
        if (count_ == fireAt_) preTraceIdx_ = ex.traceSize();
    }

    void afterStmt(Executor& ex, const Stmt& s) override {
        if (count_ == fireAt_) {
            stmtLoc_ = s.loc;
            postTraceIdx_ = ex.traceSize();
            if (ex.isrEnabled(line_) && ex.wouldPreempt(line_)) {
                fired_ = true;
                ex.raisePin(line_);
            }
        }
        ++count_;
    }

    int count_ = 0, fireAt_, line_;
    bool fired_ = false;
    Location stmtLoc_;
    size_t preTraceIdx_ = 0, postTraceIdx_ = 0;
};

} // namespace

OracleReport exhaustive_oracle(const Program& p, const std::vector<InputAssignment>& space,
                               const OracleOptions& opts) {
    OracleReport rep;

    std::vector<std::string> entries;
    bool anyIsr = false;
    for (const auto& r : p.routines)
        if (r.isIsr()) anyIsr = true;
    if (!anyIsr) return rep;
    for (const auto& r : p.routines) {
        if (!r.isIsr()) {
            entries.push_back(r.name);
        } else {
            // a lower-priority ISR is an entry when something can preempt it
            for (const auto& hi : p.routines)
                if (hi.isIsr() && hi.priority < r.priority) {
                    entries.push_back(r.name);
                    break;
                }
        }
    }

    std::vector<const Routine*> isrs;
    for (const auto& r : p.routines)
        if (r.isIsr()) isrs.push_back(&r);

    for (const auto& entry : entries) {
        for (const auto& input : space) {
            Executor base(p, opts.vm);
            OracleInjector counter(-1, 0);
            Trace baseline = base.run(input, {}, entry, &counter);
            auto baseOutputs = baseline.outputs();
            if (baseline.deadlock) ++rep.deadlockRuns;
            int boundaries = counter.count_;
            for (int k = 0; k < boundaries; ++k) {
                for (const auto* isr : isrs) {
                    if (++rep.runs > opts.maxRuns) {
                        rep.budgetExceeded = true;
                        return rep;
                    }
                    Executor ex(p, opts.vm);
                    OracleInjector inj(k, isr->irqLine);
                    Trace t = ex.run(input, {}, entry, &inj);
                    if (!inj.fired_) continue;
                    if (t.deadlock) ++rep.deadlockRuns;
                    if (opts.recordFaults && !t.deadlock && !t.stepLimit &&
                        t.outputs() != baseOutputs)
                        ++rep.faultRuns;

                    // accesses of the statement right before the forced entry
                    const auto& ev = t.events;
                    size_t isrEntry = inj.postTraceIdx_;
                    while (isrEntry < ev.size() &&
                           !(ev[isrEntry].kind == TraceEvent::Kind::IsrEntry &&
                             ev[isrEntry].line == isr->irqLine))
                        ++isrEntry;
                    if (isrEntry == ev.size()) continue;

                    std::vector<const TraceEvent*> prevAcc, isrAcc;
                    for (size_t i = inj.preTraceIdx_; i < inj.postTraceIdx_ && i < ev.size(); ++i)
                        if (ev[i].kind == TraceEvent::Kind::Access) prevAcc.push_back(&ev[i]);
                    int depth = 0;
                    for (size_t i = isrEntry; i < ev.size(); ++i) {
                        if (ev[i].kind == TraceEvent::Kind::IsrEntry && ev[i].line == isr->irqLine)
                            ++depth;
                        if (ev[i].kind == TraceEvent::Kind::IsrExit && ev[i].line == isr->irqLine) {
                            if (--depth == 0) break;
                        }
                        if (ev[i].kind == TraceEvent::Kind::Access && ev[i].context == isr->name)
                            isrAcc.push_back(&ev[i]);
                    }
                    for (const auto* a : prevAcc)
                        for (const auto* b : isrAcc) {
                            if (a->detail != b->detail) continue;
                            if (!a->write && !b->write) continue;
                            OracleRace r;
                            r.ei = {a->context, a->loc,
                                    a->write ? AccessType::Write : AccessType::Read};
                            r.ej = {isr->name, b->loc,
                                    b->write ? AccessType::Write : AccessType::Read};
                            r.resource = a->detail;
                            rep.races.insert(r);
                        }
                }
            }
        }
    }
    return rep;
}

} // namespace irqr
