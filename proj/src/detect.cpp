#include "irqracer/detect.hpp"
#include "irqracer/checker.hpp"

#include <algorithm>
#include <deque>
#include <functional>

namespace irqr {
namespace {

struct RawAccess {
    std::string nameAtSite;
    std::string realName; // qualified
    AccessType type;
};

void exprReads(const Program& p, const std::string& routine, const AliasSet& aliases,
               const Expr& e, std::vector<RawAccess>& out) {
    switch (e.kind) {
    case Expr::Kind::IntLit:
        break;
    case Expr::Kind::Var:
        out.push_back({e.name, qualified_name(p, routine, e.name), AccessType::Read});
        break;
    case Expr::Kind::Deref: {
        std::string q = qualified_name(p, routine, e.name);
        out.push_back({e.name, q, AccessType::Read}); // the pointer itself
        for (const auto& t : aliases.of("*" + q))
            if (t[0] != '*')
                out.push_back({"*" + e.name, t, AccessType::Read});
        break;
    }
    case Expr::Kind::Unary:
        exprReads(p, routine, aliases, *e.a, out);
        break;
    case Expr::Kind::Binary:
        exprReads(p, routine, aliases, *e.a, out);
        exprReads(p, routine, aliases, *e.b, out);
        break;
    }
}

std::vector<RawAccess> stmtAccesses(const Program& p, const std::string& routine,
                                    const AliasSet& aliases, const Stmt& s) {
    std::vector<RawAccess> out;
    switch (s.kind) {
    case Stmt::Kind::Assign:
        if (!s.rhsAddrOf) exprReads(p, routine, aliases, *s.expr, out);
        if (s.lhsDeref) {
            std::string q = qualified_name(p, routine, s.lhs);
            out.push_back({s.lhs, q, AccessType::Read});
            for (const auto& t : aliases.of("*" + q))
                if (t[0] != '*')
                    out.push_back({"*" + s.lhs, t, AccessType::Write});
        } else {
            out.push_back({s.lhs, qualified_name(p, routine, s.lhs), AccessType::Write});
        }
        break;
    case Stmt::Kind::If:
    case Stmt::Kind::While:
    case Stmt::Kind::Output:
        exprReads(p, routine, aliases, *s.expr, out);
        break;
    case Stmt::Kind::Call:
        for (const auto& a : s.args)
            if (!a.addrOf && a.expr) exprReads(p, routine, aliases, *a.expr, out);
        break;
    default:
        break; // lock/unlock and irq ops are synchronization, not data accesses
    }
    return out;
}

void walkStmts(const StmtList& body, const std::function<void(const Stmt&)>& f) {
    for (const auto& s : body) {
        f(*s);
        walkStmts(s->thenBody, f);
        walkStmts(s->elseBody, f);
    }
}

} // namespace

std::vector<SharedResourceAccess> collect_accesses(const Program& p, const AliasSet& aliases) {
    std::vector<SharedResourceAccess> out;
    for (const auto& r : p.routines) {
        walkStmts(r.body, [&](const Stmt& s) {
            for (const auto& a : stmtAccesses(p, r.name, aliases, s)) {
                SharedResourceAccess sra;
                sra.routine = r.name;
                sra.loc = s.loc;
                sra.nameAtSite = a.nameAtSite;
                sra.realName = a.realName;
                sra.isRealName = a.nameAtSite == a.realName ||
                                 qualified_name(p, r.name, a.nameAtSite) == a.realName;
                sra.type = a.type;
                out.push_back(sra);
            }
        });
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SharedResources identify_shared_resources(const Program& p, const AliasSet& aliases) {
    auto all = collect_accesses(p, aliases);

    // realName -> set of routines touching it (directly or through an alias)
    std::map<std::string, std::set<std::string>> touchedBy;
    for (const auto& a : all) touchedBy[a.realName].insert(a.routine);

    auto isIsrLocalOnly = [&](const Routine& isr, const std::string& real) {
        // keep if global/register, or aliasing one of the ISR's parameters
        if (real.find("::") == std::string::npos) return false; // global or register
        if (real.rfind(isr.name + "::", 0) != 0) return false;  // some other routine's local
        std::string bare = real.substr(isr.name.size() + 2);
        for (const auto& pm : isr.params) {
            if (pm.name == bare) return false; // parameter, not a plain local
            std::string q = qualified_name(p, isr.name, pm.name);
            if (aliases.alias(real, "*" + q)) return false;
            if (aliases.pts.count(q) && aliases.pts.at(q).count(real)) return false;
        }
        return true;
    };

    SharedResources out;
    for (const auto& r : p.routines) {
        if (!r.isIsr()) continue;
        std::set<std::string> names;
        for (const auto& a : all)
            if (a.routine == r.name) names.insert(a.realName);
        for (const auto& n : names) {
            if (isIsrLocalOnly(r, n)) continue;
            bool sharedElsewhere = false;
            for (const auto& candidate : aliases.of(n)) {
                auto it = touchedBy.find(candidate);
                if (it == touchedBy.end()) continue;
                for (const auto& t : it->second)
                    if (t != r.name) sharedElsewhere = true;
            }
            if (!sharedElsewhere) continue;
            for (const auto& member : aliases.of(n)) out.srs.names.insert(member);
            out.srs.names.insert(n);
        }
    }
    for (const auto& a : all)
        if (out.srs.contains(a.realName)) {
            out.srs.provenance[a.realName].insert(a.routine);
            out.accesses.push_back(a);
        }
    return out;
}

InterruptOpList identify_interrupt_ops(const Program& p,
                                       const std::set<std::string>& extraIrqctlRegs) {
    InterruptOpList out;
    auto irqctl = [&](const std::string& name) {
        const RegisterDecl* r = p.findRegister(name);
        return (r && r->irqControl) || extraIrqctlRegs.count(name) != 0;
    };
    for (const auto& r : p.routines) {
        walkStmts(r.body, [&](const Stmt& s) {
            switch (s.kind) {
            case Stmt::Kind::IrqDisable:
                out.push_back({r.name, s.loc, s.irqLine, false, false});
                break;
            case Stmt::Kind::IrqEnable:
                out.push_back({r.name, s.loc, s.irqLine, false, true});
                break;
            case Stmt::Kind::IrqDisableAll:
                out.push_back({r.name, s.loc, 0, true, false});
                break;
            case Stmt::Kind::IrqEnableAll:
                out.push_back({r.name, s.loc, 0, true, true});
                break;
            case Stmt::Kind::Assign:
                // implicit: hardware writes to interrupt-controlling registers
                // are conservatively interrupt-enabling
                if (!s.lhsDeref && irqctl(s.lhs))
                    out.push_back({r.name, s.loc, 0, true, true});
                break;
            default:
                break;
            }
        });
    }
    std::sort(out.begin(), out.end(), [](const InterruptOperation& a, const InterruptOperation& b) {
        return std::tie(a.routine, a.loc) < std::tie(b.routine, b.loc);
    });
    return out;
}

std::set<Location> implicit_itrl_locations(const InterruptOpList& itrl, const Program& p) {
    std::set<Location> out;
    for (const auto& op : itrl) {
        const Stmt* s = p.stmtAt(op.loc);
        if (s && s->kind == Stmt::Kind::Assign) out.insert(op.loc);
    }
    return out;
}

bool can_preempt(const Program& p, const std::string& hi, const std::string& lo) {
    const Routine* h = p.find(hi);
    const Routine* l = p.find(lo);
    if (!h || !l || !h->isIsr()) return false;
    if (!l->isIsr()) return true;                // ISR preempts any task
    return h->priority < l->priority;           // larger number = lower priority
}

namespace {

std::vector<int> declaredLines(const Program& p) {
    std::vector<int> lines;
    for (const auto& r : p.routines)
        if (r.isIsr()) lines.push_back(r.irqLine);
    std::sort(lines.begin(), lines.end());
    return lines;
}

// enable/disable ops of a routine plus its task-call closure
std::vector<const InterruptOperation*> opsOfContext(const Program& p, const InterruptOpList& itrl,
                                                    const std::string& routine) {
    std::set<std::string> closure{routine};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& name : std::set<std::string>(closure)) {
            const Routine* r = p.find(name);
            if (!r) continue;
            walkStmts(r->body, [&](const Stmt& s) {
                if (s.kind == Stmt::Kind::Call) {
                    const Routine* callee = p.find(s.callee);
                    if (callee && !callee->isIsr() && closure.insert(s.callee).second) grew = true;
                }
            });
        }
    }
    std::vector<const InterruptOperation*> out;
    for (const auto& op : itrl)
        if (closure.count(op.routine)) out.push_back(&op);
    return out;
}

bool contextReenables(const Program& p, const InterruptOpList& itrl, const std::string& isr,
                      int line) {
    for (const auto* op : opsOfContext(p, itrl, isr))
        if (op->enable && (op->all || op->line == line)) return true;
    return false;
}

} // namespace

IntbMap propagate_intb(const Ricfg& g, const InterruptOpList& itrl, const Program& p) {
    auto lines = declaredLines(p);
    const Routine* owner = p.find(g.owner);

    IntStatus allEnabled;
    for (int l : lines) allEnabled[l] = 0;

    // pair each disable with the next same-line enable in flattened order, so a
    // neutralized disable drags its enable along
    std::map<const Stmt*, bool> neutralized; // disable/enable stmt -> ignored
    auto pairedEnable = [&](const Ricfg::Node& disableNode) -> const Stmt* {
        const Stmt* best = nullptr;
        for (const auto& n : g.nodes) {
            if (!n.stmt || n.stmt->kind != Stmt::Kind::IrqEnable) continue;
            if (n.stmt->irqLine != disableNode.stmt->irqLine) continue;
            if (n.routine != disableNode.routine) continue;
            if (n.loc.index <= disableNode.loc.index) continue;
            if (!best || n.loc.index < best->loc.index) best = n.stmt;
        }
        return best;
    };

    auto run = [&]() {
        IntbMap at(g.nodes.size()); // status on entry to the node
        std::vector<bool> known(g.nodes.size(), false);
        at[g.entry] = allEnabled;
        known[g.entry] = true;
        std::deque<int> work{g.entry};
        auto meet = [](IntStatus& a, const IntStatus& b) {
            bool changed = false;
            for (auto& [line, bit] : a) {
                int nb = std::min(bit, b.at(line)); // enabled (0) wins
                if (nb != bit) {
                    bit = nb;
                    changed = true;
                }
            }
            return changed;
        };
        while (!work.empty()) {
            int u = work.front();
            work.pop_front();
            IntStatus out = at[u];
            const Stmt* s = g.nodes[u].stmt;
            if (s && !neutralized[s]) {
                switch (s->kind) {
                case Stmt::Kind::IrqDisable:
                    out[s->irqLine] = 1;
                    break;
                case Stmt::Kind::IrqEnable:
                    out[s->irqLine] = 0;
                    break;
                case Stmt::Kind::IrqDisableAll:
                    for (auto& [_, bit] : out) bit = 1;
                    break;
                case Stmt::Kind::IrqEnableAll:
                    for (auto& [_, bit] : out) bit = 0;
                    break;
                case Stmt::Kind::Assign: {
                    const RegisterDecl* rd = s->lhsDeref ? nullptr : p.findRegister(s->lhs);
                    bool imp = rd && rd->irqControl;
                    if (!imp)
                        for (const auto& op : itrl)
                            if (op.loc == s->loc && op.all && op.enable) imp = true;
                    if (imp)
                        for (auto& [_, bit] : out) bit = 0;
                    break;
                }
                default:
                    break;
                }
            }
            for (int v : g.succ[u]) {
                if (!known[v]) {
                    at[v] = out;
                    known[v] = true;
                    work.push_back(v);
                } else if (meet(at[v], out)) {
                    work.push_back(v);
                }
            }
        }
        for (size_t i = 0; i < at.size(); ++i)
            if (!known[i]) at[i] = allEnabled;
        return at;
    };

    // The re-enable rule: right after a disable, any enabled ISR that could
    // preempt here and re-enables the line voids the disable/enable pair.
    // Neutralization only enables more, so iterating to a fixpoint terminates.
    IntbMap at = run();
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& n : g.nodes) {
            if (!n.stmt || n.stmt->kind != Stmt::Kind::IrqDisable || neutralized[n.stmt]) continue;
            IntStatus after = at[n.id];
            after[n.stmt->irqLine] = 1;
            for (const auto& r : p.routines) {
                if (!r.isIsr() || !can_preempt(p, r.name, g.owner)) continue;
                if (after.count(r.irqLine) && after[r.irqLine] != 0) continue;
                if (contextReenables(p, itrl, r.name, n.stmt->irqLine)) {
                    neutralized[n.stmt] = true;
                    if (const Stmt* en = pairedEnable(n)) neutralized[en] = true;
                    changed = true;
                    break;
                }
            }
        }
        if (changed) at = run();
    }

    // non-reentrancy: inside an ISR's own graph its line reads disabled
    if (owner && owner->isIsr())
        for (auto& st : at) st[owner->irqLine] = 1;
    return at;
}

int intb_at(const Ricfg& g, const IntbMap& m, const Location& loc, int line) {
    int bit = 1;
    bool found = false;
    for (const auto& n : g.nodes) {
        if (n.kind != Icfg::NodeKind::Stmt || !(n.loc == loc)) continue;
        found = true;
        auto it = m[n.id].find(line);
        bit = std::min(bit, it == m[n.id].end() ? 0 : it->second);
    }
    return found ? bit : 1;
}

std::vector<RaceWarning> detect_static_races(const Program& p,
                                             const std::map<std::string, Ricfg>& ricfgs,
                                             const std::vector<SharedResourceAccess>& accesses,
                                             const std::map<std::string, IntbMap>& intb) {
    // group accesses per routine
    std::map<std::string, std::vector<const SharedResourceAccess*>> byRoutine;
    for (const auto& a : accesses) byRoutine[a.routine].push_back(&a);

    struct Key {
        Location li, lj;
        std::string res;
        bool operator<(const Key& o) const { return std::tie(li, lj, res) < std::tie(o.li, o.lj, o.res); }
    };
    std::map<Key, RaceWarning> dedup;

    for (const auto& [ri, accI] : byRoutine) {
        auto gi = ricfgs.find(ri);
        if (gi == ricfgs.end()) continue;
        for (const auto& [rj, accJ] : byRoutine) {
            if (!can_preempt(p, rj, ri)) continue;
            int lineJ = p.find(rj)->irqLine;
            for (const auto* ai : accI) {
                if (intb_at(gi->second, intb.at(ri), ai->loc, lineJ) != 0) continue;
                for (const auto* aj : accJ) {
                    if (ai->realName != aj->realName) continue;
                    if (ai->type != AccessType::Write && aj->type != AccessType::Write) continue;
                    Key k{ai->loc, aj->loc, ai->realName};
                    auto [it, inserted] = dedup.try_emplace(k);
                    RaceWarning& w = it->second;
                    if (inserted) {
                        w.ei = {ri, ai->loc, ai->type};
                        w.ej = {rj, aj->loc, aj->type};
                        w.resource = ai->realName;
                        w.status = WarningStatus::Static;
                    } else {
                        // collapsed V-forms: report the write when any access
                        // at this location writes
                        if (ai->type == AccessType::Write) w.ei.type = AccessType::Write;
                        if (aj->type == AccessType::Write) w.ej.type = AccessType::Write;
                    }
                }
            }
        }
    }

    std::vector<RaceWarning> out;
    out.reserve(dedup.size());
    for (auto& [_, w] : dedup) out.push_back(std::move(w));
    std::sort(out.begin(), out.end(), [&](const RaceWarning& a, const RaceWarning& b) {
        // lowest-priority first context first (tasks before ISRs), then
        // highest-priority second context first: the paper's WN1..WN4 order
        int pa = -p.find(a.ei.routine)->priority, pb = -p.find(b.ei.routine)->priority;
        int qa = p.find(a.ej.routine)->priority, qb = p.find(b.ej.routine)->priority;
        return std::tie(pa, a.ei.routine, a.ei.loc, qa, a.ej.routine, a.ej.loc, a.resource) <
               std::tie(pb, b.ei.routine, b.ei.loc, qb, b.ej.routine, b.ej.loc, b.resource);
    });
    return out;
}

} // namespace irqr
