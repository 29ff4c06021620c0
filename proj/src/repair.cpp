#include "irqracer/repair.hpp"
#include "irqracer/checker.hpp"
#include "irqracer/printer.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <stdexcept>

namespace irqr {

std::set<std::string> HoldSets::anywhere() const {
    std::set<std::string> all;
    for (const auto& s : in) all.insert(s.begin(), s.end());
    for (const auto& s : out) all.insert(s.begin(), s.end());
    return all;
}

namespace {

// may-targets of a lock statement, alias-closed
std::set<std::string> lockClass(const Program& p, const AliasSet& aliases, const Stmt& s,
                                const std::string& routine) {
    std::set<std::string> out;
    if (!s.targetDeref) {
        for (const auto& a : aliases.of(s.target)) out.insert(a);
        out.insert(s.target);
        return out;
    }
    std::string q = qualified_name(p, routine, s.target);
    auto it = aliases.pts.find(q);
    if (it != aliases.pts.end())
        for (const auto& t : it->second)
            if (p.isLock(t)) out.insert(t);
    out.insert("*" + q);
    return out;
}

} // namespace

HoldSets compute_hold_sets(const Ricfg& g, const AliasSet& aliases, const Program& p) {
    HoldSets hs;
    hs.in.assign(g.nodes.size(), {});
    hs.out.assign(g.nodes.size(), {});
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& n : g.nodes) {
            std::set<std::string> in;
            for (int pr : g.pred[n.id]) in.insert(hs.out[pr].begin(), hs.out[pr].end());
            std::set<std::string> out = in;
            if (n.stmt && n.stmt->kind == Stmt::Kind::Lock) {
                auto cls = lockClass(p, aliases, *n.stmt, n.loc.routine);
                out.insert(cls.begin(), cls.end());
            } else if (n.stmt && n.stmt->kind == Stmt::Kind::Unlock) {
                for (const auto& l : lockClass(p, aliases, *n.stmt, n.loc.routine)) out.erase(l);
            }
            if (in != hs.in[n.id] || out != hs.out[n.id]) {
                hs.in[n.id] = std::move(in);
                hs.out[n.id] = std::move(out);
                changed = true;
            }
        }
    }
    return hs;
}

std::string LockOrderGraph::rep(const std::string& l) const {
    std::string cur = l;
    for (;;) {
        auto it = parent.find(cur);
        if (it == parent.end() || it->second == cur) return cur;
        cur = it->second;
    }
}

void LockOrderGraph::sameOrder(const std::string& a, const std::string& b) {
    std::string ra = rep(a), rb = rep(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
}

void LockOrderGraph::addEdge(const std::string& a, const std::string& b) {
    std::string ra = rep(a), rb = rep(b);
    if (ra != rb) edges.insert({ra, rb});
}

bool LockOrderGraph::hasPath(const std::string& a, const std::string& b) const {
    std::string from = rep(a), to = rep(b);
    if (from == to) return false;
    std::deque<std::string> q{from};
    std::set<std::string> seen{from};
    while (!q.empty()) {
        std::string n = q.front();
        q.pop_front();
        for (const auto& [x, y] : edges) {
            if (x != n) continue;
            if (y == to) return true;
            if (seen.insert(y).second) q.push_back(y);
        }
    }
    return false;
}

bool LockOrderGraph::hasCycle() const {
    for (const auto& [a, b] : edges)
        if (hasPath(b, a)) return true;
    return false;
}

namespace {

// DFS over a per-context graph collecting acquired-before pairs
void traverseForOrder(const Program& p, const AliasSet& aliases,
                      const std::vector<std::vector<int>>& succ,
                      const std::vector<const Stmt*>& stmtOf,
                      const std::vector<std::string>& routineOf, int entry, LockOrderGraph& out) {
    struct Item {
        int node;
        std::vector<std::string> seq; // lock-class reps acquired so far on this path
    };
    // bounded DFS over paths; loop-unrolled graphs are DAGs so this terminates
    std::deque<Item> work{{entry, {}}};
    int guard = 0;
    std::set<std::pair<int, size_t>> seen; // (node, seq length) cap re-visits
    while (!work.empty() && ++guard < 100000) {
        Item it = std::move(work.back());
        work.pop_back();
        if (!seen.insert({it.node, it.seq.size()}).second && it.seq.empty()) continue;
        const Stmt* s = stmtOf[it.node];
        if (s && s->kind == Stmt::Kind::Lock) {
            auto cls = lockClass(p, aliases, *s, routineOf[it.node]);
            std::vector<std::string> reps;
            for (const auto& c : cls)
                if (p.isLock(c)) reps.push_back(c);
            // simultaneous (aliased) acquisition: one order class
            for (size_t i = 1; i < reps.size(); ++i) out.sameOrder(reps[0], reps[i]);
            if (!reps.empty()) {
                for (const auto& prev : it.seq) out.addEdge(prev, reps[0]);
                it.seq.push_back(out.rep(reps[0]));
            }
        }
        for (int v : succ[it.node]) work.push_back({v, it.seq});
    }
}

} // namespace

LockOrderGraph compute_lock_order(const Program& p, const std::map<std::string, Ricfg>& ricfgs) {
    LockOrderGraph out;
    for (const auto& l : p.lockDecls) out.parent[l] = l;
    AliasSet aliases = link_alias_sets(p);
    for (const auto& [name, g] : ricfgs) {
        std::vector<const Stmt*> stmtOf(g.nodes.size());
        std::vector<std::string> routineOf(g.nodes.size());
        for (const auto& n : g.nodes) {
            stmtOf[n.id] = n.stmt;
            routineOf[n.id] = n.loc.routine.empty() ? name : n.loc.routine;
        }
        traverseForOrder(p, aliases, g.succ, stmtOf, routineOf, g.entry, out);
    }
    return out;
}

LockOrderGraph lock_order_of_program(const Program& p) {
    LockOrderGraph out;
    for (const auto& l : p.lockDecls) out.parent[l] = l;
    Icfg g = build_icfg(p, 2);
    AliasSet aliases = link_alias_sets(p);
    std::vector<const Stmt*> stmtOf(g.nodes.size());
    std::vector<std::string> routineOf(g.nodes.size());
    for (const auto& n : g.nodes) {
        stmtOf[n.id] = n.stmt;
        routineOf[n.id] = n.loc.routine.empty() ? n.routine : n.loc.routine;
    }
    for (const auto& r : p.routines)
        traverseForOrder(p, aliases, g.succ, stmtOf, routineOf, g.entryOf.at(r.name), out);
    return out;
}

bool lock_order_admits(const LockOrderGraph& original, const LockOrderGraph& patched) {
    if (patched.hasCycle()) return false;
    for (const auto& [a, b] : patched.edges) {
        if (original.edges.count({a, b})) continue;
        if (original.hasPath(b, a)) return false; // reverses an existing path
    }
    return true;
}

std::string strategyName(RepairStrategy s) {
    switch (s) {
    case RepairStrategy::IDE: return "IDE";
    case RepairStrategy::AL: return "AL";
    case RepairStrategy::ECS: return "ECS";
    case RepairStrategy::Unrepairable: return "Unrepairable";
    }
    return "?";
}

RepairPlan plan_ide_repair(const Program& p, const RaceWarning& wn,
                           const std::map<std::string, Ricfg>& ricfgs, const AliasSet& aliases) {
    RepairPlan plan;
    plan.warning = wn;
    plan.strategy = RepairStrategy::Unrepairable;

    auto gi = ricfgs.find(wn.ei.routine);
    auto gj = ricfgs.find(wn.ej.routine);
    if (gi == ricfgs.end() || gj == ricfgs.end()) {
        plan.note = "no RICFG for warning context";
        return plan;
    }
    const Ricfg& G = gi->second;
    int Ii = G.firstNodeAt(wn.ei.loc);
    if (Ii < 0) {
        plan.note = "event not in RICFG";
        return plan;
    }

    HoldSets holdI = compute_hold_sets(G, aliases, p);
    HoldSets holdJ = compute_hold_sets(gj->second, aliases, p);
    std::set<std::string> unionJ = holdJ.anywhere();

    DomInfo dom = compute_dominators(G);

    // Preds(I_i) inclusive, nearest first
    std::vector<std::pair<int, int>> preds; // (distance to I_i, node)
    for (const auto& n : G.nodes) {
        if (n.kind != Icfg::NodeKind::Stmt) continue;
        auto d = ricfg_distance(G, n.id, Ii);
        if (d) preds.push_back({*d, n.id});
    }
    std::sort(preds.begin(), preds.end());

    int line = p.find(wn.ej.routine)->irqLine;

    for (auto [dToI, Id] : preds) {
        std::set<std::string> interf;
        std::set_intersection(holdI.in[Id].begin(), holdI.in[Id].end(), unionJ.begin(),
                              unionJ.end(), std::inserter(interf, interf.begin()));
        if (!interf.empty()) continue; // Eq. 1 fails here

        // I_e: post-dominates I_d, dominated by I_d, nearest
        int Ie = -1, bestD = -1;
        for (const auto& k : G.nodes) {
            if (k.kind != Icfg::NodeKind::Stmt) continue;
            if (!dom.postDominates(k.id, Id) || !dom.dominates(Id, k.id)) continue;
            auto d = ricfg_distance(G, Id, k.id);
            if (!d) continue;
            if (Ie < 0 || *d < bestD || (*d == bestD && k.id < Ie)) {
                Ie = k.id;
                bestD = *d;
            }
        }
        if (Ie < 0) continue;

        // never stretch a disable region across a blocking acquire
        bool lockInRegion = false;
        for (const auto& m : G.nodes) {
            if (!m.stmt || m.stmt->kind != Stmt::Kind::Lock) continue;
            if (dom.dominates(Id, m.id) && dom.postDominates(Ie, m.id)) lockInRegion = true;
        }
        if (lockInRegion) continue;

        plan.strategy = RepairStrategy::IDE;
        plan.patches.push_back(
            {PatchOp::Kind::InsertIrqDisable, line, "", G.nodes[Id].loc, true, {}, -1});
        plan.patches.push_back(
            {PatchOp::Kind::InsertIrqEnable, line, "", G.nodes[Ie].loc, false, {}, -1});
        return plan;
    }
    plan.note = "no I_d/I_e";
    return plan;
}

namespace {

std::string freshLockName(const Program& p) {
    int k = 0;
    for (const auto& l : p.lockDecls)
        if (l.rfind("__sdr_lock_", 0) == 0) ++k;
    return "__sdr_lock_" + std::to_string(k);
}

// locks (class reps) acquired on some entry->event path, order-insensitive
std::set<std::string> acquiredBefore(const Program& p, const AliasSet& aliases, const Ricfg& g,
                                     int event) {
    std::set<std::string> out;
    for (const auto& n : g.nodes) {
        if (!n.stmt || n.stmt->kind != Stmt::Kind::Lock) continue;
        auto d = ricfg_distance(g, n.id, event);
        if (!d || *d == 0) continue;
        for (const auto& c : lockClass(p, aliases, *n.stmt, n.loc.routine))
            if (p.isLock(c)) out.insert(c);
    }
    return out;
}

// nearest lock acquire reachable from the event (the l_ii / l_jj of ECS)
std::optional<std::pair<std::string, int>> nearestLockAfter(const Program& p,
                                                            const AliasSet& aliases, const Ricfg& g,
                                                            int event) {
    std::optional<std::pair<std::string, int>> best;
    for (const auto& n : g.nodes) {
        if (!n.stmt || n.stmt->kind != Stmt::Kind::Lock) continue;
        auto d = ricfg_distance(g, event, n.id);
        if (!d || *d == 0) continue;
        for (const auto& c : lockClass(p, aliases, *n.stmt, n.loc.routine))
            if (p.isLock(c) && (!best || *d < best->second)) best = {{c, *d}};
    }
    return best;
}

struct EcsSide {
    bool needed = false;
    PatchOp op;
};

// widen lock `c`'s section in graph `g` to cover `event`
std::optional<EcsSide> ecsWiden(const Program& p, const AliasSet& aliases, const Ricfg& g,
                                int event, const std::string& c, const HoldSets& hold) {
    EcsSide side;
    if (hold.in[event].count(c)) return side; // already protected

    // acquire after the event: move the lock statement up, before the event
    int bestNode = -1, bestD = -1;
    for (const auto& n : g.nodes) {
        if (!n.stmt || n.stmt->kind != Stmt::Kind::Lock) continue;
        if (!lockClass(p, aliases, *n.stmt, n.loc.routine).count(c)) continue;
        auto d = ricfg_distance(g, event, n.id);
        if (d && (bestNode < 0 || *d < bestD)) {
            bestNode = n.id;
            bestD = *d;
        }
    }
    if (bestNode >= 0) {
        side.needed = true;
        side.op = {PatchOp::Kind::MoveLock, 0, c, g.nodes[event].loc, true, g.nodes[bestNode].loc, -1};
        return side;
    }
    // section before the event: move its unlock down, after the event
    bestNode = -1;
    bestD = -1;
    for (const auto& n : g.nodes) {
        if (!n.stmt || n.stmt->kind != Stmt::Kind::Unlock) continue;
        if (!lockClass(p, aliases, *n.stmt, n.loc.routine).count(c)) continue;
        auto d = ricfg_distance(g, n.id, event);
        if (d && (bestNode < 0 || *d < bestD)) {
            bestNode = n.id;
            bestD = *d;
        }
    }
    if (bestNode >= 0) {
        side.needed = true;
        side.op = {PatchOp::Kind::MoveLock, 0, c, g.nodes[event].loc, false, g.nodes[bestNode].loc, -1};
        return side;
    }
    return std::nullopt;
}

} // namespace

RepairPlan plan_lock_repair(const Program& p, const RaceWarning& wn,
                            const std::map<std::string, Ricfg>& ricfgs, const AliasSet& aliases) {
    RepairPlan plan;
    plan.warning = wn;
    plan.strategy = RepairStrategy::Unrepairable;

    auto gi = ricfgs.find(wn.ei.routine);
    auto gj = ricfgs.find(wn.ej.routine);
    if (gi == ricfgs.end() || gj == ricfgs.end()) {
        plan.note = "no RICFG for warning context";
        return plan;
    }
    const Ricfg &G = gi->second, &H = gj->second;
    int Ii = G.firstNodeAt(wn.ei.loc), Ij = H.firstNodeAt(wn.ej.loc);
    if (Ii < 0 || Ij < 0) {
        plan.note = "event not in RICFG";
        return plan;
    }

    LockOrderGraph original = lock_order_of_program(p);

    // AL: fresh lock around both events
    std::string fresh = freshLockName(p);
    std::vector<PatchOp> al = {
        {PatchOp::Kind::InsertLock, 0, fresh, wn.ei.loc, true, {}, -1},
        {PatchOp::Kind::InsertUnlock, 0, fresh, wn.ei.loc, false, {}, -1},
        {PatchOp::Kind::InsertLock, 0, fresh, wn.ej.loc, true, {}, -1},
        {PatchOp::Kind::InsertUnlock, 0, fresh, wn.ej.loc, false, {}, -1},
    };
    {
        ApplyResult trial = apply_patches(p, al);
        if (lock_order_admits(original, lock_order_of_program(trial.program))) {
            plan.strategy = RepairStrategy::AL;
            plan.patches = al;
            return plan;
        }
    }

    // ECS: widen one common lock of the two acquisition prefixes
    std::set<std::string> lsI = acquiredBefore(p, aliases, G, Ii);
    std::set<std::string> lsJ = acquiredBefore(p, aliases, H, Ij);
    auto afterI = nearestLockAfter(p, aliases, G, Ii);
    auto afterJ = nearestLockAfter(p, aliases, H, Ij);
    if (afterI) lsI.insert(afterI->first);
    if (afterJ) lsJ.insert(afterJ->first);
    std::set<std::string> cand;
    std::set_intersection(lsI.begin(), lsI.end(), lsJ.begin(), lsJ.end(),
                          std::inserter(cand, cand.begin()));
    if (cand.empty()) {
        plan.note = "unable to repair by ECS: no common lock";
        return plan;
    }
    HoldSets holdI = compute_hold_sets(G, aliases, p);
    HoldSets holdJ = compute_hold_sets(H, aliases, p);
    // prefer the lock adjacent to an event, then lexicographic
    std::vector<std::string> ordered(cand.begin(), cand.end());
    std::stable_sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
        auto near = [&](const std::string& c) {
            return (afterI && afterI->first == c) || (afterJ && afterJ->first == c) ? 0 : 1;
        };
        return std::make_pair(near(a), a) < std::make_pair(near(b), b);
    });
    for (const auto& c : ordered) {
        auto sideI = ecsWiden(p, aliases, G, Ii, c, holdI);
        auto sideJ = ecsWiden(p, aliases, H, Ij, c, holdJ);
        if (!sideI || !sideJ) continue;
        std::vector<PatchOp> ecs;
        if (sideI->needed) ecs.push_back(sideI->op);
        if (sideJ->needed) ecs.push_back(sideJ->op);
        if (ecs.empty()) continue; // both already protected: nothing to widen
        ApplyResult trial = apply_patches(p, ecs);
        if (!lock_order_admits(original, lock_order_of_program(trial.program))) continue;
        plan.strategy = RepairStrategy::ECS;
        plan.patches = ecs;
        return plan;
    }
    plan.note = "unable to repair by ECS";
    return plan;
}

RepairPlan choose_repair(const Program& p, const RaceWarning& wn,
                         const std::map<std::string, Ricfg>& ricfgs, const AliasSet& aliases) {
    RepairPlan ide = plan_ide_repair(p, wn, ricfgs, aliases);
    if (ide.strategy == RepairStrategy::IDE) return ide;
    RepairPlan lock = plan_lock_repair(p, wn, ricfgs, aliases);
    if (lock.strategy != RepairStrategy::Unrepairable) return lock;
    lock.note = ide.note + "; " + lock.note;
    return lock;
}

// --- patch application ------------------------------------------------------

namespace {

struct StmtRef {
    StmtList* list = nullptr;
    size_t idx = 0;
};

void indexStmts(StmtList& body, std::map<Location, StmtRef>& out) {
    for (size_t i = 0; i < body.size(); ++i) {
        out[body[i]->loc] = {&body, i};
        indexStmts(body[i]->thenBody, out);
        indexStmts(body[i]->elseBody, out);
    }
}

StmtPtr makeOpStmt(const PatchOp& op) {
    auto s = std::make_unique<Stmt>();
    s->generated = true;
    s->patchTag = op.tag;
    switch (op.kind) {
    case PatchOp::Kind::InsertIrqDisable:
        s->kind = Stmt::Kind::IrqDisable;
        s->irqLine = op.irqLine;
        break;
    case PatchOp::Kind::InsertIrqEnable:
        s->kind = Stmt::Kind::IrqEnable;
        s->irqLine = op.irqLine;
        break;
    case PatchOp::Kind::InsertLock:
        s->kind = Stmt::Kind::Lock;
        s->target = op.lockName;
        break;
    case PatchOp::Kind::InsertUnlock:
        s->kind = Stmt::Kind::Unlock;
        s->target = op.lockName;
        break;
    case PatchOp::Kind::MoveLock:
        break;
    }
    return s;
}

// nesting order at one anchor: interrupt ops outermost
int beforeRank(const Stmt& s) { return s.kind == Stmt::Kind::IrqDisable ? 0 : 1; }
int afterRank(const Stmt& s) { return s.kind == Stmt::Kind::IrqEnable ? 1 : 0; }

void renumber(Program& p, std::map<Location, Location>& remap,
              const std::map<const Stmt*, Location>& oldLoc) {
    for (auto& r : p.routines) {
        int next = 0;
        std::function<void(StmtList&)> walk = [&](StmtList& body) {
            for (auto& s : body) {
                Location nl{r.name, next++};
                auto it = oldLoc.find(s.get());
                if (it != oldLoc.end()) remap[it->second] = nl;
                s->loc = nl;
                walk(s->thenBody);
                walk(s->elseBody);
            }
        };
        walk(r.body);
    }
}

} // namespace

ApplyResult apply_patches(const Program& p, const std::vector<PatchOp>& patches) {
    ApplyResult out;
    out.program = p.clone();
    Program& np = out.program;

    std::map<Location, StmtRef> index;
    for (auto& r : np.routines) indexStmts(r.body, index);

    // detach moved statements first
    std::map<Location, StmtPtr> detached;
    for (const auto& op : patches) {
        if (op.kind != PatchOp::Kind::MoveLock) continue;
        auto it = index.find(op.moveFrom);
        if (it == index.end()) throw std::runtime_error("AnchorVanished: " + op.moveFrom.str());
        detached[op.moveFrom] = std::move((*it->second.list)[it->second.idx]);
    }

    // inserts grouped per anchor
    struct Pending {
        std::vector<StmtPtr> before, after;
    };
    std::map<Location, Pending> pend;
    for (const auto& op : patches) {
        StmtPtr s;
        if (op.kind == PatchOp::Kind::MoveLock) {
            s = std::move(detached.at(op.moveFrom));
            if (op.tag >= 0) s->patchTag = op.tag;
        } else {
            s = makeOpStmt(op);
            if (op.kind == PatchOp::Kind::InsertLock || op.kind == PatchOp::Kind::InsertUnlock)
                if (!np.isLock(op.lockName)) np.lockDecls.push_back(op.lockName);
        }
        if (!index.count(op.anchor)) throw std::runtime_error("AnchorVanished: " + op.anchor.str());
        auto& slot = pend[op.anchor];
        (op.before ? slot.before : slot.after).push_back(std::move(s));
    }
    for (auto& [_, slot] : pend) {
        std::stable_sort(slot.before.begin(), slot.before.end(),
                         [](const StmtPtr& a, const StmtPtr& b) {
                             return beforeRank(*a) < beforeRank(*b);
                         });
        std::stable_sort(slot.after.begin(), slot.after.end(),
                         [](const StmtPtr& a, const StmtPtr& b) {
                             return afterRank(*a) < afterRank(*b);
                         });
    }

    std::map<const Stmt*, Location> oldLoc;
    std::function<void(StmtList&)> record = [&](StmtList& body) {
        for (auto& s : body) {
            if (s) {
                oldLoc[s.get()] = s->loc;
                record(s->thenBody);
                record(s->elseBody);
            }
        }
    };
    for (auto& r : np.routines) record(r.body);
    for (auto& [from, s] : detached)
        if (s) oldLoc[s.get()] = from;

    // rebuild each statement list with insertions, skipping detached slots
    std::function<void(StmtList&)> rebuild = [&](StmtList& body) {
        StmtList rebuilt;
        for (auto& s : body) {
            if (!s) continue; // moved away
            Location at = oldLoc.at(s.get());
            auto slot = pend.find(at);
            if (slot != pend.end())
                for (auto& b : slot->second.before) rebuilt.push_back(std::move(b));
            rebuilt.push_back(std::move(s));
            if (slot != pend.end())
                for (auto& a : slot->second.after) rebuilt.push_back(std::move(a));
            if (slot != pend.end()) pend.erase(slot);
        }
        body = std::move(rebuilt);
        for (auto& s : body) {
            rebuild(s->thenBody);
            rebuild(s->elseBody);
        }
    };
    for (auto& r : np.routines) rebuild(r.body);
    if (!pend.empty()) throw std::runtime_error("AnchorVanished: unplaced insertions");

    renumber(np, out.remap, oldLoc);

    CheckResult chk = check_program(np);
    if (!chk.ok())
        throw std::runtime_error("apply_patches produced an invalid program:\n" +
                                 formatDiags(chk.diags));
    return out;
}

// --- merge-fix ---------------------------------------------------------------

namespace {

struct Section {
    int tag = -1;
    std::string routine;
    bool isIrq = false;
    int line = 0;
    std::string lockName;
    int openPos = -1, closePos = -1; // pre-order positions
    Location openLoc, closeLoc;
    const StmtList* openList = nullptr; // enclosing statement list of each op
    const StmtList* closeList = nullptr;
    int openSib = -1, closeSib = -1;    // sibling indices within those lists
};

struct FlatStmt {
    Stmt* s;
    int pos;
    const StmtList* list;
    int sib;
};

void flatten(StmtList& body, std::vector<FlatStmt>& out, int& next) {
    for (size_t i = 0; i < body.size(); ++i) {
        out.push_back({body[i].get(), next++, &body, static_cast<int>(i)});
        flatten(body[i]->thenBody, out, next);
        flatten(body[i]->elseBody, out, next);
    }
}

std::vector<Section> findSections(Program& p) {
    std::vector<Section> out;
    for (auto& r : p.routines) {
        std::vector<FlatStmt> flat;
        int next = 0;
        flatten(r.body, flat, next);
        std::map<int, Section> byTag;
        for (const auto& f : flat) {
            if (f.s->patchTag < 0) continue;
            bool open = f.s->kind == Stmt::Kind::IrqDisable || f.s->kind == Stmt::Kind::Lock;
            bool close = f.s->kind == Stmt::Kind::IrqEnable || f.s->kind == Stmt::Kind::Unlock;
            if (!open && !close) continue;
            Section& sec = byTag[f.s->patchTag];
            sec.tag = f.s->patchTag;
            sec.routine = r.name;
            if (f.s->kind == Stmt::Kind::IrqDisable || f.s->kind == Stmt::Kind::IrqEnable) {
                sec.isIrq = true;
                sec.line = f.s->irqLine;
            } else {
                sec.lockName = f.s->target;
            }
            if (open) {
                sec.openPos = f.pos;
                sec.openLoc = f.s->loc;
                sec.openList = f.list;
                sec.openSib = f.sib;
            } else {
                sec.closePos = f.pos;
                sec.closeLoc = f.s->loc;
                sec.closeList = f.list;
                sec.closeSib = f.sib;
            }
        }
        for (auto& [_, sec] : byTag)
            if (sec.openPos >= 0 && sec.closePos >= 0) out.push_back(sec);
    }
    std::sort(out.begin(), out.end(), [](const Section& a, const Section& b) {
        return std::tie(a.routine, a.openPos) < std::tie(b.routine, b.openPos);
    });
    return out;
}

Stmt* stmtAtLoc(Program& p, const Location& loc) {
    for (auto& r : p.routines) {
        if (r.name != loc.routine) continue;
        std::function<Stmt*(StmtList&)> find = [&](StmtList& body) -> Stmt* {
            for (auto& s : body) {
                if (s->loc == loc) return s.get();
                if (Stmt* t = find(s->thenBody)) return t;
                if (Stmt* t = find(s->elseBody)) return t;
            }
            return nullptr;
        };
        if (Stmt* s = find(r.body)) return s;
    }
    return nullptr;
}

bool eraseStmtAt(Program& p, const Location& loc) {
    for (auto& r : p.routines) {
        if (r.name != loc.routine) continue;
        std::function<bool(StmtList&)> go = [&](StmtList& body) -> bool {
            for (size_t i = 0; i < body.size(); ++i) {
                if (body[i]->loc == loc) {
                    body.erase(body.begin() + static_cast<long>(i));
                    return true;
                }
                if (go(body[i]->thenBody) || go(body[i]->elseBody)) return true;
            }
            return false;
        };
        if (go(r.body)) return true;
    }
    return false;
}

bool isGeneratedName(const std::string& l) { return l.rfind("__sdr_lock_", 0) == 0; }

} // namespace

Program merge_fixes(const Program& p) {
    Program np = p.clone();
    bool merged = true;
    while (merged) {
        merged = false;
        auto sections = findSections(np);
        for (size_t i = 0; i + 1 < sections.size() && !merged; ++i) {
            for (size_t j = i + 1; j < sections.size() && !merged; ++j) {
                const Section &a = sections[i], &b = sections[j];
                if (a.routine != b.routine) continue;
                if (a.isIrq != b.isIrq) continue;
                if (a.isIrq && a.line != b.line) continue; // same IRQ only
                if (!a.isIrq && a.lockName != b.lockName &&
                    !(isGeneratedName(a.lockName) && isGeneratedName(b.lockName)))
                    continue;
                // overlap, or nothing between a's close and b's open; merging
                // never crosses block boundaries
                bool sameList = a.openList == b.openList && a.openList == a.closeList &&
                                a.openList == b.closeList;
                if (!sameList) continue;
                bool overlap = b.openSib < a.closeSib;
                bool adjacent = b.openSib == a.closeSib + 1;
                if (!overlap && !adjacent) continue;

                // drop a.close and b.open; unify lock names and tags
                if (!a.isIrq && a.lockName != b.lockName) {
                    if (Stmt* bc = stmtAtLoc(np, b.closeLoc)) bc->target = a.lockName;
                }
                if (Stmt* bc = stmtAtLoc(np, b.closeLoc)) bc->patchTag = a.tag;
                eraseStmtAt(np, a.closeLoc);
                eraseStmtAt(np, b.openLoc);
                merged = true;
            }
        }
    }
    return np;
}

int count_generated_ops(const Program& p) {
    int n = 0;
    std::function<void(const StmtList&)> walk = [&](const StmtList& body) {
        for (const auto& s : body) {
            if (s->generated) ++n;
            walk(s->thenBody);
            walk(s->elseBody);
        }
    };
    for (const auto& r : p.routines) walk(r.body);
    return n;
}

Program strip_generated(const Program& p) {
    Program np = p.clone();
    std::function<void(StmtList&)> walk = [&](StmtList& body) {
        StmtList kept;
        for (auto& s : body) {
            if (s->generated) continue;
            walk(s->thenBody);
            walk(s->elseBody);
            kept.push_back(std::move(s));
        }
        body = std::move(kept);
    };
    for (auto& r : np.routines) walk(r.body);
    return np;
}

// --- repair-and-validate loop -------------------------------------------------

namespace {

struct SweepResult {
    bool fault = false;    // some injected run's output differs from baseline
    bool deadlock = false; // some injected run wedges
    Location faultNear;    // statement right before the offending injection
};

class SweepInjector : public Injector {
public:
    SweepInjector(int fireAt, int line) : fireAt_(fireAt), line_(line) {}
    void afterStmt(Executor& ex, const Stmt& s) override {
        if (count_++ == fireAt_ && ex.isrEnabled(line_) && ex.wouldPreempt(line_)) {
            fired_ = true;
            firedAfter_ = s.loc;
            ex.raisePin(line_);
        }
    }
    int count_ = 0, fireAt_, line_;
    bool fired_ = false;
    Location firedAfter_;
};

class CountingInjector : public Injector {
public:
    void afterStmt(Executor&, const Stmt&) override { ++count_; }
    int count_ = 0;
};

// outputs emitted by one context; an ISR legitimately printing when it fires
// is not a fault, the preempted context printing differently is
std::vector<uint32_t> contextOutputs(const Trace& t, const std::string& ctx) {
    std::vector<uint32_t> out;
    for (const auto& e : t.events)
        if (e.kind == TraceEvent::Kind::Output && e.context == ctx) out.push_back(e.value);
    return out;
}

// output-fault and deadlock sweep: one forced interrupt at every boundary.
// An output change counts as a fault only when the interrupt landed inside
// the repair's own territory (`spanLocs`): the patched region failing to be
// atomic is the repair's fault, an interrupt before or after it is ordinary
// concurrency. New deadlocks count anywhere.
SweepResult faultSweep(const Program& p, const std::string& entry, const InputAssignment& input,
                       const VmConfig& vm, bool baselineDeadlockFree,
                       const std::set<Location>& spanLocs) {
    SweepResult out;
    Executor base(p, vm);
    CountingInjector counter;
    Trace baseline = base.run(input, {}, entry, &counter);
    if (baseline.deadlock || baseline.stepLimit) return out; // nothing comparable
    auto baseOut = contextOutputs(baseline, entry);
    std::vector<int> lines;
    for (const auto& r : p.routines)
        if (r.isIsr()) lines.push_back(r.irqLine);
    for (int k = 0; k < counter.count_; ++k) {
        for (int line : lines) {
            Executor ex(p, vm);
            SweepInjector inj(k, line);
            Trace t = ex.run(input, {}, entry, &inj);
            if (!inj.fired_) continue;
            if (t.deadlock && baselineDeadlockFree) {
                out.deadlock = true;
                out.faultNear = inj.firedAfter_;
                return out;
            }
            if (!t.deadlock && !t.stepLimit && spanLocs.count(inj.firedAfter_) &&
                contextOutputs(t, entry) != baseOut) {
                out.fault = true;
                out.faultNear = inj.firedAfter_;
                return out;
            }
        }
    }
    return out;
}

// whether any single forced injection deadlocks the given program
bool injectionDeadlockFree(const Program& p, const std::string& entry,
                           const InputAssignment& input, const VmConfig& vm) {
    Executor base(p, vm);
    CountingInjector counter;
    Trace baseline = base.run(input, {}, entry, &counter);
    if (baseline.deadlock) return false;
    std::vector<int> lines;
    for (const auto& r : p.routines)
        if (r.isIsr()) lines.push_back(r.irqLine);
    for (int k = 0; k < counter.count_; ++k)
        for (int line : lines) {
            Executor ex(p, vm);
            SweepInjector inj(k, line);
            if (ex.run(input, {}, entry, &inj).deadlock) return false;
        }
    return true;
}

struct LiveSection {
    int tag;
    std::string routine;
    int openPos, closePos;
    Location openLoc, closeLoc;
};

std::vector<LiveSection> liveSections(Program& p) {
    std::vector<LiveSection> out;
    for (const auto& s : findSections(p))
        out.push_back({s.tag, s.routine, s.openPos, s.closePos, s.openLoc, s.closeLoc});
    return out;
}

int flatPosOf(Program& p, const Location& loc) {
    for (auto& r : p.routines) {
        if (r.name != loc.routine) continue;
        std::vector<FlatStmt> flat;
        int next = 0;
        flatten(r.body, flat, next);
        for (const auto& f : flat)
            if (f.s->loc == loc) return f.pos;
    }
    return -1;
}

// statement locations spanned by the routine's generated sections
std::set<Location> sectionSpan(Program& p, const std::string& routine) {
    int lo = -1, hi = -1;
    for (const auto& sec : liveSections(p)) {
        if (sec.routine != routine) continue;
        if (lo < 0 || sec.openPos < lo) lo = sec.openPos;
        if (sec.closePos > hi) hi = sec.closePos;
    }
    std::set<Location> out;
    if (lo < 0) return out;
    for (auto& r : p.routines) {
        if (r.name != routine) continue;
        std::vector<FlatStmt> flat;
        int next = 0;
        flatten(r.body, flat, next);
        for (const auto& f : flat)
            if (f.pos >= lo && f.pos < hi) out.insert(f.s->loc);
    }
    return out;
}

// moves a generated boundary statement one sibling position outward; falls
// out of the enclosing block when already at its edge
bool moveBoundary(Program& p, const Location& loc, bool endward) {
    for (auto& r : p.routines) {
        if (r.name != loc.routine) continue;
        std::function<bool(StmtList&, StmtList*, size_t)> go =
            [&](StmtList& body, StmtList* parentList, size_t parentIdx) -> bool {
            for (size_t i = 0; i < body.size(); ++i) {
                Stmt* s = body[i].get();
                if (s->loc == loc) {
                    if (endward) {
                        if (i + 1 < body.size()) {
                            std::swap(body[i], body[i + 1]);
                            return true;
                        }
                        if (parentList) { // hop out of the block, after the parent
                            StmtPtr taken = std::move(body[i]);
                            body.erase(body.begin() + static_cast<long>(i));
                            parentList->insert(parentList->begin() + static_cast<long>(parentIdx) + 1,
                                               std::move(taken));
                            return true;
                        }
                        return false;
                    }
                    if (i > 0) {
                        std::swap(body[i], body[i - 1]);
                        return true;
                    }
                    if (parentList) {
                        StmtPtr taken = std::move(body[i]);
                        body.erase(body.begin() + static_cast<long>(i));
                        parentList->insert(parentList->begin() + static_cast<long>(parentIdx),
                                           std::move(taken));
                        return true;
                    }
                    return false;
                }
                if (go(body[i]->thenBody, &body, i)) return true;
                if (go(body[i]->elseBody, &body, i)) return true;
            }
            return false;
        };
        if (go(r.body, nullptr, 0)) return true;
    }
    return false;
}

} // namespace

std::pair<Program, RepairReport> repair_and_validate(const Program& p,
                                                     const std::vector<ConfirmedRace>& races,
                                                     const RepairHooks& hooks,
                                                     const RepairConfig& cfg,
                                                     const std::map<std::string, Ricfg>& ricfgs,
                                                     const AliasSet& aliases) {
    RepairReport report;
    if (races.empty()) {
        report.status = "NoConfirmedRaces";
        return {p.clone(), report};
    }

    // plan per warning
    std::vector<PatchOp> allPatches;
    int nextTag = 0;
    for (const auto& cr : races) {
        RepairPlan plan = choose_repair(p, cr.wn, ricfgs, aliases);
        if (plan.strategy != RepairStrategy::Unrepairable) {
            // one section per (plan, routine side)
            std::map<std::string, int> tagOfRoutine;
            for (auto& op : plan.patches) {
                auto [it, fresh] = tagOfRoutine.try_emplace(op.anchor.routine, nextTag);
                if (fresh) ++nextTag;
                op.tag = it->second;
                allPatches.push_back(op);
            }
        } else {
            report.surviving.push_back(cr.wn);
        }
        report.plans.push_back(std::move(plan));
    }

    if (allPatches.empty()) {
        report.status = "PartiallyRepaired";
        return {p.clone(), report};
    }

    ApplyResult applied = apply_patches(p, allPatches);
    Program cur = std::move(applied.program);

    // remap the original warnings into the patched location space
    auto remapLoc = [&](const Location& l) {
        auto it = applied.remap.find(l);
        return it == applied.remap.end() ? l : it->second;
    };
    std::vector<ConfirmedRace> tracked;
    std::set<Location> racingPoints;
    for (const auto& cr : races) {
        ConfirmedRace t = cr;
        t.wn.ei.loc = remapLoc(cr.wn.ei.loc);
        t.wn.ej.loc = remapLoc(cr.wn.ej.loc);
        tracked.push_back(t);
        racingPoints.insert(t.wn.ei.loc);
    }

    // pre-existing injection deadlocks are not the repair's to fix
    std::map<std::string, bool> baselineDeadlockFree;
    for (const auto& cr : races) {
        const std::string& entry = cr.wn.ei.routine;
        if (!baselineDeadlockFree.count(entry))
            baselineDeadlockFree[entry] = injectionDeadlockFree(p, entry, cr.input, cfg.vm);
    }

    std::map<int, int> widened; // section tag -> rounds used
    bool gaveUp = false;

    for (report.rounds = 1; report.rounds <= cfg.maxRounds; ++report.rounds) {
        struct Failure {
            std::string routine;
            Location near;
        };
        std::vector<Failure> failures;

        // (a) fresh pipeline on the candidate
        for (const auto& fresh : hooks.confirmed(cur))
            failures.push_back({fresh.wn.ei.routine, fresh.wn.ei.loc});

        // (b) the original warnings, revalidated with their inputs
        if (failures.empty()) {
            for (const auto& t : tracked) {
                ValidationContext vctx;
                vctx.otherRacingPoints = racingPoints;
                vctx.vm = cfg.vm;
                ValidationVerdict v = validate_race(cur, t.wn, t.input, vctx);
                if (v.kind == VerdictKind::Confirmed)
                    failures.push_back({t.wn.ei.routine, t.wn.ei.loc});
                else if (v.kind == VerdictKind::Deadlock &&
                         baselineDeadlockFree[t.wn.ei.routine])
                    failures.push_back({t.wn.ei.routine, t.wn.ei.loc});
            }
        }

        // (c) forced-injection sweep: atomicity shows up as an output fault
        if (failures.empty()) {
            for (const auto& t : tracked) {
                SweepResult sr = faultSweep(cur, t.wn.ei.routine, t.input, cfg.vm,
                                            baselineDeadlockFree[t.wn.ei.routine],
                                            sectionSpan(cur, t.wn.ei.routine));
                if (sr.fault || sr.deadlock) {
                    failures.push_back({t.wn.ei.routine, sr.faultNear});
                    break;
                }
            }
        }

        if (getenv("IRQRACER_DEBUG")) {
            fprintf(stderr, "[repair] round %d: %zu failure(s)\n", report.rounds, failures.size());
            for (const auto& f : failures)
                fprintf(stderr, "[repair]   near %s (%s)\n", f.near.str().c_str(), f.routine.c_str());
        }
        if (failures.empty()) break;
        if (report.rounds == cfg.maxRounds) {
            gaveUp = true;
            break;
        }

        // the responsible boundary is the close op that most recently ended
        // protection before the failure point; push it outward. A failure
        // ahead of every section pulls the earliest open backward instead.
        bool anyWidened = false;
        for (const auto& f : failures) {
            auto sections = liveSections(cur);
            int failPos = flatPosOf(cur, f.near);
            const LiveSection* best = nullptr;
            bool endward = true;
            int bestPos = -1;
            for (const auto& sec : sections) {
                if (sec.routine != f.routine) continue;
                if (widened[sec.tag] >= cfg.maxWideningPerSection) continue;
                if (failPos >= 0 && sec.closePos <= failPos && sec.closePos > bestPos) {
                    best = &sec;
                    bestPos = sec.closePos;
                    endward = true;
                }
            }
            if (!best) {
                for (const auto& sec : sections) {
                    if (sec.routine != f.routine) continue;
                    if (widened[sec.tag] >= cfg.maxWideningPerSection) continue;
                    if (failPos < 0 || sec.openPos >= failPos) {
                        if (!best || sec.openPos < bestPos) {
                            best = &sec;
                            bestPos = sec.openPos;
                            endward = false;
                        }
                    }
                }
            }
            if (!best) continue;
            bool ok = endward ? moveBoundary(cur, best->closeLoc, true)
                              : moveBoundary(cur, best->openLoc, false);
            if (!ok) // boundary stuck at the routine edge: try the other one
                ok = endward ? moveBoundary(cur, best->openLoc, false)
                             : moveBoundary(cur, best->closeLoc, true);
            if (ok) {
                ++widened[best->tag];
                anyWidened = true;
            }
        }
        if (!anyWidened) {
            gaveUp = true;
            break;
        }
    }

    // merge, then make sure the merged program still validates
    if (!gaveUp) {
        Program merged = merge_fixes(cur);
        bool clean = hooks.confirmed(merged).empty();
        if (clean) {
            for (const auto& t : tracked) {
                ValidationContext vctx;
                vctx.otherRacingPoints = racingPoints;
                vctx.vm = cfg.vm;
                ValidationVerdict v = validate_race(merged, t.wn, t.input, vctx);
                if (v.kind == VerdictKind::Confirmed) clean = false;
                SweepResult sr = faultSweep(merged, t.wn.ei.routine, t.input, cfg.vm,
                                            baselineDeadlockFree[t.wn.ei.routine],
                                            sectionSpan(merged, t.wn.ei.routine));
                if (sr.fault || sr.deadlock) clean = false;
            }
        }
        if (clean) {
            cur = std::move(merged);
            report.mergeApplied = true;
        }
    }

    // final verdicts: a race is unfixed when it still confirms or when the fix
    // traded it for a deadlock the original program did not have
    for (const auto& fresh : hooks.confirmed(cur)) report.surviving.push_back(fresh.wn);
    if (gaveUp)
        for (const auto& t : tracked) {
            ValidationContext vctx;
            vctx.otherRacingPoints = racingPoints;
            vctx.vm = cfg.vm;
            VerdictKind v = validate_race(cur, t.wn, t.input, vctx).kind;
            if (v == VerdictKind::Confirmed ||
                (v == VerdictKind::Deadlock && baselineDeadlockFree[t.wn.ei.routine]))
                report.surviving.push_back(t.wn);
        }
    report.insertedOps = count_generated_ops(cur);
    report.status = report.surviving.empty() ? "Repaired" : "PartiallyRepaired";
    return {std::move(cur), report};
}

const std::vector<StrategyCatalogEntry>& strategy_catalog() {
    static const std::vector<StrategyCatalogEntry> catalog = {
        {"COO", "Change operation orders",
         "Change the order of operations so the racing operations happen in separate timing",
         "Move code to a position where interrupts are finished", "The separate timing is available",
         true, false, 88, 26.8, 17, 28.8},
        {"AAC", "Add additional checks",
         "Add checks of program state to avoid the race",
         "if (!dev_initialized()) wait_until_init();",
         "There is an available and race-free program state", false, false, 85, 25.9, 5, 8.5},
        {"AL", "Add locks", "Add additional lock and unlock operations",
         "spin_lock/spin_unlock", "It will not introduce deadlocks", true, true, 81, 24.7, 0, 0.0},
        {"IDE", "Interrupt disable and enable", "Disable and enable interrupts",
         "disable_irq/enable_irq", "It will not introduce deadlocks", true, true, 0, 0.0, 26, 44.1},
        {"AAI", "Add atomic instructions", "Add atomic instructions", "atomic_set",
         "Its corresponding atomic instruction is available", false, false, 19, 5.8, 4, 6.8},
        {"Sync", "Synchronization", "Read-copy update, memory barriers",
         "Read-copy update, memory barrier",
         "Use judiciously to avoid impeding performance", true, false, 23, 7.0, 0, 0.0},
        {"RRC", "Remove race codes", "Remove the racing code",
         "Remove unnecessary but buggy code", "The racy code is no longer needed", false, false,
         12, 3.7, 2, 3.4},
        {"ECS", "Extend critical sections", "Extend an existing critical section",
         "Move spin_unlock after the racing code", "It will not introduce deadlocks", false, true,
         10, 3.0, 4, 6.8},
        {"MinUse", "Minimize the use of shared resources",
         "Access distinct memory instead of one shared cell",
         "Use bit operations instead of value assignment", "Some accesses are redundant", false,
         false, 3, 0.9, 0, 0.0},
        {"ATM", "Add try-again marks", "Retry interrupted tasks",
         "T(){if(flag==0)...} ISR(){flag=1;...}",
         "Performance-insensitive tasks or interrupt handlers", true, false, 2, 0.6, 0, 0.0},
        {"ResUser", "Restrict users", "Restrict usage by documentation",
         "Forbid sending requests right after starting a device", "A general method", true, false,
         0, 0.0, 0, 0.0},
        {"ChgPrio", "Change priorities of tasks or interrupts",
         "Change task or interrupt priorities", "Reverse priorities of two interrupts",
         "It will not lead to other races", true, false, 0, 0.0, 0, 0.0},
    };
    return catalog;
}

} // namespace irqr
