#include "irqracer/alias.hpp"

#include <functional>

namespace irqr {

std::string qualified_name(const Program& p, const std::string& routine, const std::string& name) {
    if (p.findGlobal(name) || p.findRegister(name) || p.isLock(name)) return name;
    return routine + "::" + name;
}

namespace {

struct Constraint {
    enum class Kind { AddrOf, Copy, Load, Store };
    Kind kind;
    std::string dst, src; // AddrOf: src in pts(dst); Copy: pts(src) subset of pts(dst);
                          // Load: dst = *src; Store: *dst = src
};

void collectConstraints(const Program& p, const Routine& r, const StmtList& body,
                        std::vector<Constraint>& out) {
    for (const auto& s : body) {
        if (s->kind == Stmt::Kind::Assign) {
            auto q = [&](const std::string& n) { return qualified_name(p, r.name, n); };
            if (s->rhsAddrOf) {
                if (s->lhsDeref) {
                    // *p = &x: store of a fresh pointer; model via temp
                    out.push_back({Constraint::Kind::AddrOf, q(s->lhs) + "#tmp", q(s->addrName)});
                    out.push_back({Constraint::Kind::Store, q(s->lhs), q(s->lhs) + "#tmp"});
                } else {
                    out.push_back({Constraint::Kind::AddrOf, q(s->lhs), q(s->addrName)});
                }
            } else if (s->expr && s->expr->kind == Expr::Kind::Var) {
                if (s->lhsDeref)
                    out.push_back({Constraint::Kind::Store, q(s->lhs), q(s->expr->name)});
                else
                    out.push_back({Constraint::Kind::Copy, q(s->lhs), q(s->expr->name)});
            } else if (s->expr && s->expr->kind == Expr::Kind::Deref) {
                if (!s->lhsDeref)
                    out.push_back({Constraint::Kind::Load, q(s->lhs), q(s->expr->name)});
                // *p = *q needs a temp in both directions
                else {
                    out.push_back({Constraint::Kind::Load, q(s->lhs) + "#tmp", q(s->expr->name)});
                    out.push_back({Constraint::Kind::Store, q(s->lhs), q(s->lhs) + "#tmp"});
                }
            }
        }
        collectConstraints(p, r, s->thenBody, out);
        collectConstraints(p, r, s->elseBody, out);
    }
}

// registration/call binding: argument aliases merged into parameters
void collectCallBindings(const Program& p, std::vector<Constraint>& out) {
    for (const auto& r : p.routines) {
        std::function<void(const StmtList&)> scan = [&](const StmtList& body) {
            for (const auto& s : body) {
                if (s->kind == Stmt::Kind::Call) {
                    const Routine* callee = p.find(s->callee);
                    if (callee && callee->params.size() == s->args.size()) {
                        for (size_t i = 0; i < s->args.size(); ++i) {
                            std::string param =
                                qualified_name(p, callee->name, callee->params[i].name);
                            const CallArg& a = s->args[i];
                            if (a.addrOf)
                                out.push_back({Constraint::Kind::AddrOf, param,
                                               qualified_name(p, r.name, a.addrName)});
                            else if (a.expr && a.expr->kind == Expr::Kind::Var)
                                out.push_back({Constraint::Kind::Copy, param,
                                               qualified_name(p, r.name, a.expr->name)});
                        }
                    }
                }
                scan(s->thenBody);
                scan(s->elseBody);
            }
        };
        scan(r.body);
    }
}

bool isRegisterName(const Program& p, const std::string& n) {
    return p.findRegister(n) != nullptr;
}

std::map<std::string, std::set<std::string>> solve(const Program& p,
                                                   const std::vector<Constraint>& cs) {
    std::map<std::string, std::set<std::string>> pts;
    bool changed = true;
    auto addAll = [&](std::set<std::string>& dst, const std::set<std::string>& src) {
        size_t before = dst.size();
        dst.insert(src.begin(), src.end());
        return dst.size() != before;
    };
    while (changed) {
        changed = false;
        for (const auto& c : cs) {
            switch (c.kind) {
            case Constraint::Kind::AddrOf:
                if (!isRegisterName(p, c.src)) changed |= pts[c.dst].insert(c.src).second;
                break;
            case Constraint::Kind::Copy:
                changed |= addAll(pts[c.dst], pts[c.src]);
                break;
            case Constraint::Kind::Load:
                for (const auto& v : pts[c.src]) changed |= addAll(pts[c.dst], pts[v]);
                break;
            case Constraint::Kind::Store:
                for (const auto& v : pts[c.dst]) changed |= addAll(pts[v], pts[c.src]);
                break;
            }
        }
    }
    // drop solver temps
    for (auto it = pts.begin(); it != pts.end();) {
        if (it->first.find("#tmp") != std::string::npos) it = pts.erase(it);
        else ++it;
    }
    return pts;
}

} // namespace

bool AliasSet::alias(const std::string& a, const std::string& b) const {
    if (a == b) return true;
    auto it = cls_.find(a);
    return it != cls_.end() && it->second.count(b) != 0;
}

std::set<std::string> AliasSet::of(const std::string& name) const {
    auto it = cls_.find(name);
    if (it == cls_.end()) return {name};
    return it->second;
}

std::set<std::pair<std::string, std::string>> AliasSet::pairs() const {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& [n, members] : cls_)
        for (const auto& m : members)
            if (n < m) out.insert({n, m});
    return out;
}

void AliasSet::finalize() {
    // union-find over: (*p, x) for x in pts(p); (*p, *q) when pts intersect
    std::map<std::string, std::string> parent;
    std::function<std::string(const std::string&)> find = [&](const std::string& x) -> std::string {
        auto it = parent.find(x);
        if (it == parent.end()) {
            parent[x] = x;
            return x;
        }
        if (it->second == x) return x;
        std::string r = find(it->second);
        parent[x] = r;
        return r;
    };
    auto unite = [&](const std::string& a, const std::string& b) {
        std::string ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    };
    for (const auto& [ptr, targets] : pts) {
        std::string deref = "*" + ptr;
        for (const auto& t : targets) unite(deref, t);
    }
    cls_.clear();
    std::map<std::string, std::set<std::string>> groups;
    for (const auto& [n, _] : parent) groups[find(n)].insert(n);
    for (const auto& [_, members] : groups)
        for (const auto& m : members) cls_[m] = members;
}

AliasSet andersen_points_to(const Program& p, const Routine& r) {
    std::vector<Constraint> cs;
    collectConstraints(p, r, r.body, cs);
    AliasSet out;
    out.pts = solve(p, cs);
    out.finalize();
    return out;
}

AliasSet link_alias_sets(const Program& p) {
    std::vector<Constraint> cs;
    for (const auto& r : p.routines) collectConstraints(p, r, r.body, cs);
    collectCallBindings(p, cs);
    AliasSet out;
    out.pts = solve(p, cs);
    out.finalize();
    return out;
}

} // namespace irqr
