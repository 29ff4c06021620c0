#include "irqracer/checker.hpp"

#include <functional>
#include <map>
#include <set>

namespace irqr {
namespace {

struct NameSets {
    std::set<std::string> globals, registers, locks;
};

void collectAssigned(const StmtList& body, std::set<std::string>& out) {
    for (const auto& s : body) {
        if (s->kind == Stmt::Kind::Assign && !s->lhsDeref) out.insert(s->lhs);
        collectAssigned(s->thenBody, out);
        collectAssigned(s->elseBody, out);
    }
}

class Checker {
public:
    explicit Checker(const Program& p) : p_(p) {
        for (const auto& g : p.globals) names_.globals.insert(g.name);
        for (const auto& r : p.registers) names_.registers.insert(r.name);
        for (const auto& l : p.lockDecls) names_.locks.insert(l);
    }

    CheckResult run() {
        checkDecls();
        for (const auto& r : p_.routines) checkRoutine(r);
        checkRecursion();
        return std::move(out_);
    }

private:
    void diag(DiagKind k, const std::string& msg, int line = 0) {
        out_.diags.push_back({k, msg, line, 0});
    }

    void checkDecls() {
        std::set<std::string> seen;
        std::set<int> lines, prios;
        std::set<int> taskPrios;
        for (const auto& r : p_.routines) {
            if (!seen.insert(r.name).second)
                diag(DiagKind::DuplicateRoutine, "routine '" + r.name + "' declared twice");
            if (r.isIsr()) {
                if (!lines.insert(r.irqLine).second)
                    diag(DiagKind::DuplicateIrqLine,
                         "irq line " + std::to_string(r.irqLine) + " used by two ISRs");
                if (!prios.insert(r.priority).second)
                    diag(DiagKind::DuplicatePriority,
                         "ISR priority " + std::to_string(r.priority) + " used twice");
            } else {
                taskPrios.insert(r.priority);
                if (r.irqLine != 0)
                    diag(DiagKind::KindMismatch, "task '" + r.name + "' has an irq line");
            }
        }
        if (taskPrios.size() > 1)
            diag(DiagKind::PriorityOverlap, "tasks must share one priority level");
        // larger number = lower priority; ISRs strictly above every task
        for (const auto& r : p_.routines) {
            if (!r.isIsr()) continue;
            for (int tp : taskPrios) {
                if (r.priority >= tp) {
                    diag(DiagKind::PriorityOverlap,
                         "ISR '" + r.name + "' priority " + std::to_string(r.priority) +
                             " does not strictly preempt task priority " + std::to_string(tp));
                    break;
                }
            }
        }
        std::set<std::string> allNames;
        auto uniq = [&](const std::string& n, const char* what) {
            if (!allNames.insert(n).second)
                diag(DiagKind::KindMismatch, std::string(what) + " '" + n + "' collides with another declaration");
        };
        for (const auto& g : p_.globals) uniq(g.name, "global");
        for (const auto& r : p_.registers) uniq(r.name, "register");
        for (const auto& l : p_.lockDecls) uniq(l, "lock");
    }

    bool lineDeclared(int n) const {
        for (const auto& r : p_.routines)
            if (r.isIsr() && r.irqLine == n) return true;
        return false;
    }

    void checkRoutine(const Routine& r) {
        RoutineSymbols sym;
        for (const auto& pm : r.params) sym.params.insert(pm.name);
        std::set<std::string> assigned;
        collectAssigned(r.body, assigned);
        for (const auto& n : assigned) {
            if (!names_.globals.count(n) && !names_.registers.count(n) &&
                !names_.locks.count(n) && !sym.params.count(n))
                sym.locals.insert(n);
        }
        walk(r, r.body, sym);
        out_.symbols[r.name] = std::move(sym);
    }

    void walk(const Routine& r, const StmtList& body, const RoutineSymbols& sym) {
        for (const auto& s : body) {
            checkStmt(r, *s, sym);
            walk(r, s->thenBody, sym);
            walk(r, s->elseBody, sym);
        }
    }

    bool resolves(const std::string& n, const RoutineSymbols& sym) const {
        return names_.globals.count(n) || names_.registers.count(n) || sym.params.count(n) ||
               sym.locals.count(n);
    }

    void checkVarUse(const Routine&, const Stmt& s, const std::string& n,
                     const RoutineSymbols& sym) {
        if (names_.locks.count(n)) {
            diag(DiagKind::KindMismatch, "lock '" + n + "' used as a value at " + s.loc.str(),
                 s.srcLine);
            return;
        }
        if (!resolves(n, sym))
            diag(DiagKind::UnknownIdentifier, "'" + n + "' at " + s.loc.str(), s.srcLine);
    }

    void checkExpr(const Routine& r, const Stmt& s, const Expr& e, const RoutineSymbols& sym) {
        switch (e.kind) {
        case Expr::Kind::IntLit: break;
        case Expr::Kind::Var:
        case Expr::Kind::Deref:
            checkVarUse(r, s, e.name, sym);
            break;
        case Expr::Kind::Unary:
            checkExpr(r, s, *e.a, sym);
            break;
        case Expr::Kind::Binary:
            checkExpr(r, s, *e.a, sym);
            checkExpr(r, s, *e.b, sym);
            break;
        }
    }

    void checkStmt(const Routine& r, const Stmt& s, const RoutineSymbols& sym) {
        switch (s.kind) {
        case Stmt::Kind::Assign: {
            if (names_.locks.count(s.lhs)) {
                diag(DiagKind::KindMismatch, "assignment to lock '" + s.lhs + "'", s.srcLine);
            } else if (!s.lhsDeref && names_.registers.count(s.lhs)) {
                if (p_.findRegister(s.lhs)->readOnly)
                    diag(DiagKind::ReadOnlyWrite,
                         "write to read-only register '" + s.lhs + "' at " + s.loc.str(),
                         s.srcLine);
            } else if (!resolves(s.lhs, sym)) {
                diag(DiagKind::UnknownIdentifier, "'" + s.lhs + "' at " + s.loc.str(), s.srcLine);
            }
            if (s.rhsAddrOf) {
                if (names_.registers.count(s.addrName))
                    diag(DiagKind::KindMismatch, "cannot take the address of register '" +
                                                     s.addrName + "'", s.srcLine);
                else if (names_.locks.count(s.addrName)) {
                    // &lock is allowed: lock pointers feed lock(*p)
                } else if (!resolves(s.addrName, sym))
                    diag(DiagKind::UnknownIdentifier, "'" + s.addrName + "' at " + s.loc.str(),
                         s.srcLine);
            } else {
                checkExpr(r, s, *s.expr, sym);
            }
            break;
        }
        case Stmt::Kind::If:
        case Stmt::Kind::While:
        case Stmt::Kind::Output:
            checkExpr(r, s, *s.expr, sym);
            break;
        case Stmt::Kind::Lock:
        case Stmt::Kind::Unlock:
            if (s.targetDeref) {
                checkVarUse(r, s, s.target, sym);
            } else if (!names_.locks.count(s.target)) {
                diag(DiagKind::UnknownIdentifier,
                     "undeclared lock '" + s.target + "' at " + s.loc.str(), s.srcLine);
            }
            break;
        case Stmt::Kind::IrqDisable:
        case Stmt::Kind::IrqEnable:
            if (!lineDeclared(s.irqLine))
                diag(DiagKind::UnknownLine,
                     "irq line " + std::to_string(s.irqLine) + " has no ISR (" + s.loc.str() + ")",
                     s.srcLine);
            break;
        case Stmt::Kind::IrqDisableAll:
        case Stmt::Kind::IrqEnableAll:
            break;
        case Stmt::Kind::Call: {
            const Routine* callee = p_.find(s.callee);
            if (!callee) {
                diag(DiagKind::UnknownRoutine, "call to unknown routine '" + s.callee + "'",
                     s.srcLine);
                break;
            }
            if (callee->params.size() != s.args.size())
                diag(DiagKind::ArityMismatch,
                     "call to '" + s.callee + "' with " + std::to_string(s.args.size()) +
                         " args, expected " + std::to_string(callee->params.size()),
                     s.srcLine);
            for (const auto& a : s.args) {
                if (a.addrOf) {
                    if (names_.registers.count(a.addrName))
                        diag(DiagKind::KindMismatch,
                             "cannot take the address of register '" + a.addrName + "'",
                             s.srcLine);
                    else if (!names_.locks.count(a.addrName) && !resolves(a.addrName, sym))
                        diag(DiagKind::UnknownIdentifier, "'" + a.addrName + "'", s.srcLine);
                } else {
                    checkExpr(r, s, *a.expr, sym);
                }
            }
            break;
        }
        }
    }

    // Only calls to tasks are inlined; a cycle among them is a hard error.
    void checkRecursion() {
        std::map<std::string, std::set<std::string>> edges;
        for (const auto& r : p_.routines) {
            std::function<void(const StmtList&)> scan = [&](const StmtList& body) {
                for (const auto& s : body) {
                    if (s->kind == Stmt::Kind::Call) {
                        const Routine* callee = p_.find(s->callee);
                        if (callee && !callee->isIsr()) edges[r.name].insert(s->callee);
                    }
                    scan(s->thenBody);
                    scan(s->elseBody);
                }
            };
            scan(r.body);
        }
        std::set<std::string> done, onPath;
        std::function<bool(const std::string&)> dfs = [&](const std::string& n) -> bool {
            if (onPath.count(n)) return true;
            if (done.count(n)) return false;
            onPath.insert(n);
            for (const auto& m : edges[n])
                if (dfs(m)) return true;
            onPath.erase(n);
            done.insert(n);
            return false;
        };
        for (const auto& r : p_.routines) {
            if (dfs(r.name)) {
                diag(DiagKind::RecursionDetected, "call cycle through '" + r.name + "'");
                break;
            }
        }
    }

    const Program& p_;
    NameSets names_;
    CheckResult out_;
};

} // namespace

CheckResult check_program(const Program& p) {
    return Checker(p).run();
}

std::set<std::string> routine_locals(const Program& p, const Routine& r) {
    std::set<std::string> assigned;
    collectAssigned(r.body, assigned);
    std::set<std::string> locals;
    for (const auto& n : assigned) {
        if (p.findGlobal(n) || p.findRegister(n) || p.isLock(n)) continue;
        bool isParam = false;
        for (const auto& pm : r.params)
            if (pm.name == n) isParam = true;
        if (!isParam) locals.insert(n);
    }
    return locals;
}

} // namespace irqr
