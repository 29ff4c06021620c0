#include "irqracer/symexec.hpp"
#include "irqracer/alias.hpp"
#include "irqracer/checker.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <functional>

namespace irqr {

namespace {

void collectReadRegisters(const Program& p, const Expr& e, std::set<std::string>& out) {
    switch (e.kind) {
    case Expr::Kind::Var:
        if (p.findRegister(e.name)) out.insert(e.name);
        break;
    case Expr::Kind::Unary:
        collectReadRegisters(p, *e.a, out);
        break;
    case Expr::Kind::Binary:
        collectReadRegisters(p, *e.a, out);
        collectReadRegisters(p, *e.b, out);
        break;
    default:
        break;
    }
}

} // namespace

std::set<std::string> identify_input_points(const Program& p) {
    std::set<std::string> out;
    std::function<void(const StmtList&)> scan = [&](const StmtList& body) {
        for (const auto& s : body) {
            if (s->expr) collectReadRegisters(p, *s->expr, out);
            for (const auto& a : s->args)
                if (a.expr) collectReadRegisters(p, *a.expr, out);
            scan(s->thenBody);
            scan(s->elseBody);
        }
    };
    for (const auto& r : p.routines) scan(r.body);
    for (const auto& g : p.globals)
        if (g.isInput) out.insert(g.name);
    return out;
}

namespace {

struct StuckPath {};

struct Frame {
    const StmtList* body = nullptr;
    size_t idx = 0;
    const Stmt* loopGuard = nullptr; // while body: control returns to the guard
    int iter = 0;
};

struct PathState {
    int side = 0; // 0 = first event's context, 1 = second
    std::vector<Frame> stack;
    std::map<std::string, TermPtr> store; // cells -> terms
    std::map<std::string, TermPtr> regs;  // latched registers
    std::map<std::string, std::vector<TermPtr>> regParams; // ISR registration
    std::vector<TermPtr> pc;
    int phase = 0;
    std::set<Location> covered; // racing points on this path (secondary key)
    uint64_t tiebreak = 0;
    bool done = false;
};

class Engine {
public:
    Engine(const Program& p, const RaceWarning& wn, const std::vector<RaceWarning>& all,
           const SymBudget& budget)
        : p_(p), wn_(wn), budget_(budget), w_(p.wordWidth), cells_(CellMap::build(p)),
          rng_(budget.seed), inputs_(identify_input_points(p)) {
        for (const auto& aw : all) {
            racingPoints_.insert(aw.ei.loc);
            racingPoints_.insert(aw.ej.loc);
        }
        for (const auto& r : p.registers) regWidths_[r.name] = r.width;
        start_ = std::chrono::steady_clock::now();
    }

    SymExecResult run() {
        SymExecResult res;
        int unroll = 2;
        for (;;) {
            Outcome o = exploreOnce(unroll);
            stepsUsed_ += o.statesExplored;
            res.statesExplored += o.statesExplored;
            res.loopBoundUsed = unroll;
            if (o.kind == Outcome::Kind::Reached) {
                res.kind = SymExecResult::Kind::Reachable;
                res.input = o.input;
                res.pathCondition = o.pc;
                return res;
            }
            if (o.kind == Outcome::Kind::Budget) {
                res.kind = SymExecResult::Kind::Inconclusive;
                res.reason = "Timeout";
                return res;
            }
            if (o.sawUnknown) {
                res.kind = SymExecResult::Kind::Inconclusive;
                res.reason = "SolverLimit";
                return res;
            }
            if (!o.sawBoundLimit || unroll >= budget_.lmax) {
                res.kind = SymExecResult::Kind::Infeasible; // refuted under L_max
                return res;
            }
            unroll = std::min(unroll * 2, budget_.lmax);
        }
    }

private:
    struct Outcome {
        enum class Kind { Reached, Exhausted, Budget } kind = Kind::Exhausted;
        bool sawBoundLimit = false;
        bool sawUnknown = false;
        uint64_t statesExplored = 0;
        InputAssignment input;
        std::vector<TermPtr> pc;
    };

    std::string qualify(const std::string& routine, const std::string& name) const {
        return qualified_name(p_, routine, name);
    }

    TermPtr readVar(PathState& st, const std::string& routine, const std::string& name) {
        if (p_.findRegister(name)) {
            auto it = st.regs.find(name);
            if (it != st.regs.end()) return it->second;
            TermPtr sym = Term::mkSym(name); // latched once per run
            st.regs[name] = sym;
            return sym;
        }
        std::string q = qualify(routine, name);
        auto it = st.store.find(q);
        if (it != st.store.end()) return it->second;
        return Term::mkConst(0, w_);
    }

    TermPtr evalExpr(PathState& st, const Expr& e, const std::string& routine) {
        switch (e.kind) {
        case Expr::Kind::IntLit:
            return Term::mkConst(e.value, w_);
        case Expr::Kind::Var:
            return readVar(st, routine, e.name);
        case Expr::Kind::Deref: {
            TermPtr pv = readVar(st, routine, e.name);
            if (!pv->isConst()) throw StuckPath{};
            const std::string* cell = cells_.cellAt(pv->value);
            if (!cell) throw StuckPath{};
            auto it = st.store.find(*cell);
            return it != st.store.end() ? it->second : Term::mkConst(0, w_);
        }
        case Expr::Kind::Unary:
            return Term::mkUn(e.uop, evalExpr(st, *e.a, routine), w_);
        case Expr::Kind::Binary:
            return Term::mkBin(e.bop, evalExpr(st, *e.a, routine), evalExpr(st, *e.b, routine), w_);
        }
        return Term::mkConst(0, w_);
    }

    void writeVar(PathState& st, const std::string& routine, const std::string& name, TermPtr v) {
        if (p_.findRegister(name)) {
            st.regs[name] = std::move(v);
            return;
        }
        st.store[qualify(routine, name)] = std::move(v);
    }

    void zeroFrame(PathState& st, const Routine& r) {
        for (const auto& lv : routine_locals(p_, r))
            st.store[r.name + "::" + lv] = Term::mkConst(0, w_);
        for (const auto& pm : r.params)
            st.store[r.name + "::" + pm.name] = Term::mkConst(0, w_);
    }

    // next statement to execute, or nullptr when the context is finished
    const Stmt* peek(PathState& st) {
        for (;;) {
            if (st.stack.empty()) return nullptr;
            Frame& f = st.stack.back();
            if (f.idx < f.body->size()) return (*f.body)[f.idx].get();
            if (f.loopGuard) return f.loopGuard; // back to the guard
            st.stack.pop_back();
        }
    }

    void enterSecondContext(PathState& st) {
        st.side = 1;
        st.phase = 1;
        const Routine* rj = p_.find(wn_.ej.routine);
        st.stack.clear();
        st.stack.push_back({&rj->body, 0, nullptr, 0});
        zeroFrame(st, *rj);
        auto bound = st.regParams.find(rj->name);
        for (size_t i = 0; i < rj->params.size(); ++i) {
            TermPtr v = Term::mkConst(0, w_);
            if (bound != st.regParams.end() && i < bound->second.size()) v = bound->second[i];
            st.store[rj->name + "::" + rj->params[i].name] = v;
        }
    }

    // executes one statement; successors appended to `out`; true = second
    // event reached (solve st.pc)
    bool step(PathState& st, std::vector<PathState>& out, int unroll, Outcome& oc) {
        const Stmt* sp = peek(st);
        if (!sp) {
            st.done = true;
            return false;
        }
        const Stmt& s = *sp;

        if (st.phase == 1 && s.loc == wn_.ej.loc) return true;

        if (racingPoints_.count(s.loc)) st.covered.insert(s.loc);
        const std::string& routine = s.loc.routine;

        Frame& f = st.stack.back();
        bool isLoopRecheck = f.idx >= f.body->size() && f.loopGuard == &s;
        bool isFirstEvent = st.phase == 0 && st.side == 0 && s.loc == wn_.ei.loc;

        auto advance = [&](PathState& x) {
            if (!isLoopRecheck) ++x.stack.back().idx;
        };
        auto finish = [&](PathState x) {
            if (isFirstEvent) enterSecondContext(x);
            out.push_back(std::move(x));
        };

        try {
            switch (s.kind) {
            case Stmt::Kind::Assign: {
                TermPtr v;
                if (s.rhsAddrOf)
                    v = Term::mkConst(
                        static_cast<uint32_t>(cells_.addressOf(qualify(routine, s.addrName))), w_);
                else
                    v = evalExpr(st, *s.expr, routine);
                if (s.lhsDeref) {
                    TermPtr pv = readVar(st, routine, s.lhs);
                    if (!pv->isConst()) throw StuckPath{};
                    const std::string* cell = cells_.cellAt(pv->value);
                    if (!cell) throw StuckPath{};
                    st.store[*cell] = v;
                } else {
                    writeVar(st, routine, s.lhs, v);
                }
                advance(st);
                finish(std::move(st));
                return false;
            }
            case Stmt::Kind::If:
            case Stmt::Kind::While: {
                if (isFirstEvent) {
                    // the guard's read is the event; the branch outcome does
                    // not constrain reaching the second context
                    finish(std::move(st));
                    return false;
                }
                TermPtr c = evalExpr(st, *s.expr, routine);
                bool isWhile = s.kind == Stmt::Kind::While;
                int nextIter = isLoopRecheck ? f.iter + 1 : 1;
                bool boundHit = isWhile && nextIter > unroll;

                auto makeTaken = [&](PathState base) {
                    if (isWhile) {
                        if (isLoopRecheck) {
                            base.stack.back().idx = 0;
                            base.stack.back().iter = nextIter;
                        } else {
                            ++base.stack.back().idx;
                            base.stack.push_back({&s.thenBody, 0, &s, 1});
                        }
                    } else {
                        ++base.stack.back().idx;
                        if (!s.thenBody.empty()) base.stack.push_back({&s.thenBody, 0, nullptr, 0});
                    }
                    return base;
                };
                auto makeSkipped = [&](PathState base) {
                    if (isWhile && isLoopRecheck) {
                        base.stack.pop_back();
                    } else {
                        ++base.stack.back().idx;
                        if (!isWhile && !s.elseBody.empty())
                            base.stack.push_back({&s.elseBody, 0, nullptr, 0});
                    }
                    return base;
                };

                std::vector<PathState> succ;
                if (c->isConst()) {
                    bool taken = c->value != 0;
                    if (taken && boundHit)
                        oc.sawBoundLimit = true;
                    else
                        succ.push_back(taken ? makeTaken(std::move(st))
                                             : makeSkipped(std::move(st)));
                } else {
                    if (boundHit) {
                        oc.sawBoundLimit = true;
                    } else {
                        PathState t = st;
                        t.pc.push_back(c);
                        t.tiebreak = rng_();
                        succ.push_back(makeTaken(std::move(t)));
                    }
                    PathState e = std::move(st);
                    e.pc.push_back(Term::mkUn(UnOp::LNot, c, w_));
                    e.tiebreak = rng_();
                    succ.push_back(makeSkipped(std::move(e)));
                    if (!budget_.solverSkip) pruneUnsat(succ, oc);
                }
                for (auto& x : succ) out.push_back(std::move(x));
                return false;
            }
            case Stmt::Kind::Call: {
                const Routine* callee = p_.find(s.callee);
                std::vector<TermPtr> argv;
                for (const auto& a : s.args) {
                    if (a.addrOf)
                        argv.push_back(Term::mkConst(
                            static_cast<uint32_t>(cells_.addressOf(qualify(routine, a.addrName))),
                            w_));
                    else
                        argv.push_back(evalExpr(st, *a.expr, routine));
                }
                advance(st);
                if (callee && callee->isIsr()) {
                    st.regParams[s.callee] = argv; // registration
                } else if (callee) {
                    zeroFrame(st, *callee);
                    for (size_t i = 0; i < callee->params.size() && i < argv.size(); ++i)
                        st.store[callee->name + "::" + callee->params[i].name] = argv[i];
                    st.stack.push_back({&callee->body, 0, nullptr, 0});
                }
                finish(std::move(st));
                return false;
            }
            default: {
                // lock/unlock, irq ops, output: no symbolic store effect
                advance(st);
                finish(std::move(st));
                return false;
            }
            }
        } catch (const StuckPath&) {
            oc.sawUnknown = true;
            return false;
        }
    }

    void pruneUnsat(std::vector<PathState>& succ, Outcome& oc) {
        std::vector<PathState> kept;
        for (auto& x : succ) {
            SolveResult r = solve(x.pc, w_, solverCfg(), rng_);
            if (r.status == SolveStatus::Unsat) continue;
            if (r.status == SolveStatus::Unknown) oc.sawUnknown = true;
            kept.push_back(std::move(x));
        }
        succ = std::move(kept);
    }

    SolverConfig solverCfg() const {
        SolverConfig cfg = budget_.solver;
        for (const auto& [n, ww] : regWidths_) cfg.symWidths[n] = ww;
        return cfg;
    }

    void buildDistances(const Icfg& g) {
        auto reverseBfs = [&](const std::vector<int>& targets) {
            std::vector<int> dist(g.nodes.size(), -1);
            std::deque<int> q;
            for (int t : targets) {
                dist[t] = 0;
                q.push_back(t);
            }
            while (!q.empty()) {
                int n = q.front();
                q.pop_front();
                for (int pnode : g.pred[n])
                    if (dist[pnode] < 0) {
                        dist[pnode] = dist[n] + 1;
                        q.push_back(pnode);
                    }
            }
            return dist;
        };
        distToEi_ = reverseBfs(g.nodesAt(wn_.ei.loc));
        distToEj_ = reverseBfs(g.nodesAt(wn_.ej.loc));
        locNodes_.clear();
        for (const auto& n : g.nodes)
            if (n.kind == Icfg::NodeKind::Stmt) locNodes_[n.loc].push_back(n.id);
    }

    int stateDistance(PathState& st) {
        const Stmt* s = peek(st);
        if (!s) return -1;
        auto it = locNodes_.find(s->loc);
        if (it == locNodes_.end()) return -1;
        const auto& dist = st.phase == 0 ? distToEi_ : distToEj_;
        int best = -1;
        for (int n : it->second)
            if (dist[n] >= 0 && (best < 0 || dist[n] < best)) best = dist[n];
        return best;
    }

    Outcome exploreOnce(int unroll) {
        Outcome oc;
        Icfg g = build_icfg(p_, std::min(unroll, 8)); // distance grid only
        buildDistances(g);

        std::vector<PathState> work;
        {
            PathState init;
            const Routine* ri = p_.find(wn_.ei.routine);
            init.stack.push_back({&ri->body, 0, nullptr, 0});
            for (const auto& gd : p_.globals)
                init.store[gd.name] =
                    gd.isInput ? TermPtr(Term::mkSym(gd.name)) : Term::mkConst(gd.init, w_);
            zeroFrame(init, *ri);
            init.tiebreak = rng_();
            work.push_back(std::move(init));
        }

        uint64_t steps = 0;
        while (!work.empty()) {
            // the step budget spans every loop-growth retry of this warning
            if (++steps + stepsUsed_ > budget_.stepBudget) {
                oc.kind = Outcome::Kind::Budget;
                return oc;
            }
            if ((steps & 1023) == 0) {
                auto now = std::chrono::steady_clock::now();
                if (std::chrono::duration<double>(now - start_).count() > budget_.timeoutSec) {
                    oc.kind = Outcome::Kind::Budget;
                    return oc;
                }
            }

            size_t bestIdx = work.size();
            std::tuple<int, int, uint64_t> bestKey;
            for (size_t i = 0; i < work.size(); ++i) {
                int d = stateDistance(work[i]);
                if (d < 0) continue;
                std::tuple<int, int, uint64_t> key{d, -static_cast<int>(work[i].covered.size()),
                                                   work[i].tiebreak};
                if (bestIdx == work.size() || key < bestKey) {
                    bestIdx = i;
                    bestKey = key;
                }
            }
            if (bestIdx == work.size()) break; // no state can reach the target
            PathState st = std::move(work[bestIdx]);
            work.erase(work.begin() + static_cast<long>(bestIdx));
            ++oc.statesExplored;

            std::vector<PathState> succ;
            bool reached = step(st, succ, unroll, oc);
            if (reached) {
                SolveResult r = solve(st.pc, w_, solverCfg(), rng_, seedPool());
                if (r.status == SolveStatus::Sat) {
                    oc.kind = Outcome::Kind::Reached;
                    oc.pc = st.pc;
                    for (const auto& ip : inputs_) {
                        auto it = r.model.find(ip);
                        oc.input.values[ip] = it == r.model.end() ? 0u : it->second;
                    }
                    return oc;
                }
                if (r.status == SolveStatus::Unknown) oc.sawUnknown = true;
                continue; // refuted path: backtrack
            }
            for (auto& x : succ)
                if (!x.done) work.push_back(std::move(x));
        }
        oc.kind = Outcome::Kind::Exhausted;
        return oc;
    }

    std::vector<std::map<std::string, uint32_t>> seedPool() {
        // concrete random inputs help the solver through complex constraints
        std::vector<std::map<std::string, uint32_t>> seeds;
        for (int i = 0; i < 8; ++i) {
            std::map<std::string, uint32_t> s;
            for (const auto& ip : inputs_) s[ip] = static_cast<uint32_t>(rng_());
            seeds.push_back(std::move(s));
        }
        return seeds;
    }

    const Program& p_;
    const RaceWarning& wn_;
    SymBudget budget_;
    WordOps w_;
    CellMap cells_;
    std::mt19937_64 rng_;
    std::set<std::string> inputs_;
    std::set<Location> racingPoints_;
    std::map<std::string, unsigned> regWidths_;
    std::vector<int> distToEi_, distToEj_;
    std::map<Location, std::vector<int>> locNodes_;
    std::chrono::steady_clock::time_point start_;
    uint64_t stepsUsed_ = 0;
};

} // namespace

SymExecResult guided_explore(const Program& p, const Iccfg& iccfg, const RaceWarning& wn,
                             const std::vector<RaceWarning>& allWarnings, const SymBudget& budget) {
    if (iccfg.gi.firstNodeAt(wn.ei.loc) < 0 || iccfg.gj.firstNodeAt(wn.ej.loc) < 0) {
        SymExecResult res;
        res.kind = SymExecResult::Kind::Inconclusive;
        res.reason = "SolverLimit";
        return res;
    }
    Engine e(p, wn, allWarnings, budget);
    return e.run();
}

} // namespace irqr
