#include "irqracer/ast.hpp"
#include "irqracer/word.hpp"

#include <sstream>

namespace irqr {

std::string WordOps::hex(uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

ExprPtr Expr::lit(uint32_t v) {
    auto e = std::make_unique<Expr>();
    e->kind = Kind::IntLit;
    e->value = v;
    return e;
}

ExprPtr Expr::var(std::string n) {
    auto e = std::make_unique<Expr>();
    e->kind = Kind::Var;
    e->name = std::move(n);
    return e;
}

ExprPtr Expr::deref(std::string n) {
    auto e = std::make_unique<Expr>();
    e->kind = Kind::Deref;
    e->name = std::move(n);
    return e;
}

ExprPtr Expr::unary(UnOp op, ExprPtr x) {
    auto e = std::make_unique<Expr>();
    e->kind = Kind::Unary;
    e->uop = op;
    e->a = std::move(x);
    return e;
}

ExprPtr Expr::binary(BinOp op, ExprPtr l, ExprPtr r) {
    auto e = std::make_unique<Expr>();
    e->kind = Kind::Binary;
    e->bop = op;
    e->a = std::move(l);
    e->b = std::move(r);
    return e;
}

ExprPtr Expr::clone() const {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->value = value;
    e->name = name;
    e->uop = uop;
    e->bop = bop;
    if (a) e->a = a->clone();
    if (b) e->b = b->clone();
    return e;
}

CallArg CallArg::clone() const {
    CallArg c;
    c.addrOf = addrOf;
    c.addrName = addrName;
    if (expr) c.expr = expr->clone();
    return c;
}

static StmtList cloneList(const StmtList& xs) {
    StmtList out;
    out.reserve(xs.size());
    for (const auto& s : xs) out.push_back(s->clone());
    return out;
}

StmtPtr Stmt::clone() const {
    auto s = std::make_unique<Stmt>();
    s->kind = kind;
    s->loc = loc;
    s->srcLine = srcLine;
    s->lhs = lhs;
    s->lhsDeref = lhsDeref;
    s->rhsAddrOf = rhsAddrOf;
    s->addrName = addrName;
    if (expr) s->expr = expr->clone();
    s->thenBody = cloneList(thenBody);
    s->elseBody = cloneList(elseBody);
    s->target = target;
    s->targetDeref = targetDeref;
    s->irqLine = irqLine;
    s->callee = callee;
    for (const auto& a : args) s->args.push_back(a.clone());
    s->generated = generated;
    s->patchTag = patchTag;
    return s;
}

const Routine* Program::find(const std::string& name) const {
    for (const auto& r : routines)
        if (r.name == name) return &r;
    return nullptr;
}

Routine* Program::find(const std::string& name) {
    for (auto& r : routines)
        if (r.name == name) return &r;
    return nullptr;
}

const GlobalDecl* Program::findGlobal(const std::string& name) const {
    for (const auto& g : globals)
        if (g.name == name) return &g;
    return nullptr;
}

const RegisterDecl* Program::findRegister(const std::string& name) const {
    for (const auto& r : registers)
        if (r.name == name) return &r;
    return nullptr;
}

bool Program::isLock(const std::string& name) const {
    for (const auto& l : lockDecls)
        if (l == name) return true;
    return false;
}

static const Stmt* findStmt(const StmtList& body, const Location& loc) {
    for (const auto& s : body) {
        if (s->loc == loc) return s.get();
        if (const Stmt* t = findStmt(s->thenBody, loc)) return t;
        if (const Stmt* t = findStmt(s->elseBody, loc)) return t;
    }
    return nullptr;
}

const Stmt* Program::stmtAt(const Location& loc) const {
    const Routine* r = find(loc.routine);
    return r ? findStmt(r->body, loc) : nullptr;
}

Program Program::clone() const {
    Program p;
    p.globals = globals;
    p.registers = registers;
    p.lockDecls = lockDecls;
    p.wordWidth = wordWidth;
    for (const auto& r : routines) {
        Routine c;
        c.name = r.name;
        c.kind = r.kind;
        c.priority = r.priority;
        c.irqLine = r.irqLine;
        c.params = r.params;
        c.body = cloneList(r.body);
        p.routines.push_back(std::move(c));
    }
    return p;
}

static bool exprEq(const Expr* a, const Expr* b) {
    if (!a || !b) return a == b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case Expr::Kind::IntLit: return a->value == b->value;
    case Expr::Kind::Var:
    case Expr::Kind::Deref: return a->name == b->name;
    case Expr::Kind::Unary: return a->uop == b->uop && exprEq(a->a.get(), b->a.get());
    case Expr::Kind::Binary:
        return a->bop == b->bop && exprEq(a->a.get(), b->a.get()) && exprEq(a->b.get(), b->b.get());
    }
    return false;
}

static bool stmtEq(const Stmt* a, const Stmt* b);

static bool listEq(const StmtList& xs, const StmtList& ys) {
    if (xs.size() != ys.size()) return false;
    for (size_t i = 0; i < xs.size(); ++i)
        if (!stmtEq(xs[i].get(), ys[i].get())) return false;
    return true;
}

static bool stmtEq(const Stmt* a, const Stmt* b) {
    if (a->kind != b->kind) return false;
    if (a->lhs != b->lhs || a->lhsDeref != b->lhsDeref) return false;
    if (a->rhsAddrOf != b->rhsAddrOf || a->addrName != b->addrName) return false;
    if (!exprEq(a->expr.get(), b->expr.get())) return false;
    if (!listEq(a->thenBody, b->thenBody) || !listEq(a->elseBody, b->elseBody)) return false;
    if (a->target != b->target || a->targetDeref != b->targetDeref) return false;
    if (a->irqLine != b->irqLine || a->callee != b->callee) return false;
    if (a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i) {
        if (a->args[i].addrOf != b->args[i].addrOf) return false;
        if (a->args[i].addrName != b->args[i].addrName) return false;
        if (!exprEq(a->args[i].expr.get(), b->args[i].expr.get())) return false;
    }
    return true;
}

bool structurallyEqual(const Program& a, const Program& b) {
    if (a.wordWidth != b.wordWidth) return false;
    if (a.lockDecls != b.lockDecls) return false;
    if (a.globals.size() != b.globals.size() || a.registers.size() != b.registers.size() ||
        a.routines.size() != b.routines.size())
        return false;
    for (size_t i = 0; i < a.globals.size(); ++i) {
        const auto &x = a.globals[i], &y = b.globals[i];
        if (x.name != y.name || x.init != y.init || x.isInput != y.isInput) return false;
    }
    for (size_t i = 0; i < a.registers.size(); ++i) {
        const auto &x = a.registers[i], &y = b.registers[i];
        if (x.name != y.name || x.width != y.width || x.readOnly != y.readOnly ||
            x.irqControl != y.irqControl)
            return false;
    }
    for (size_t i = 0; i < a.routines.size(); ++i) {
        const auto &x = a.routines[i], &y = b.routines[i];
        if (x.name != y.name || x.kind != y.kind || x.priority != y.priority ||
            x.irqLine != y.irqLine || x.params.size() != y.params.size())
            return false;
        for (size_t j = 0; j < x.params.size(); ++j)
            if (x.params[j].name != y.params[j].name) return false;
        if (!listEq(x.body, y.body)) return false;
    }
    return true;
}

} // namespace irqr
