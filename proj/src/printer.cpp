#include "irqracer/printer.hpp"
#include "irqracer/word.hpp"

#include <sstream>

namespace irqr {
namespace {

int prec(BinOp op) {
    switch (op) {
    case BinOp::Mul: return 10;
    case BinOp::Add:
    case BinOp::Sub: return 9;
    case BinOp::Shl:
    case BinOp::Shr: return 8;
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge: return 7;
    case BinOp::And: return 6;
    case BinOp::Xor: return 5;
    case BinOp::Or: return 4;
    case BinOp::LAnd: return 3;
    case BinOp::LOr: return 2;
    }
    return 0;
}

const char* opText(BinOp op) {
    switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::And: return "&";
    case BinOp::Or: return "|";
    case BinOp::Xor: return "^";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::LAnd: return "&&";
    case BinOp::LOr: return "||";
    }
    return "?";
}

void printExprPrec(std::ostringstream& os, const Expr& e, int outer) {
    switch (e.kind) {
    case Expr::Kind::IntLit:
        os << e.value;
        break;
    case Expr::Kind::Var:
        os << e.name;
        break;
    case Expr::Kind::Deref:
        os << "*" << e.name;
        break;
    case Expr::Kind::Unary:
        os << (e.uop == UnOp::Neg ? "-" : "!");
        os << "(";
        printExprPrec(os, *e.a, 0);
        os << ")";
        break;
    case Expr::Kind::Binary: {
        int p = prec(e.bop);
        bool paren = p < outer;
        if (paren) os << "(";
        printExprPrec(os, *e.a, p);
        os << " " << opText(e.bop) << " ";
        printExprPrec(os, *e.b, p + 1);
        if (paren) os << ")";
        break;
    }
    }
}

void ind(std::ostringstream& os, int n) {
    for (int i = 0; i < n; ++i) os << "  ";
}

void printStmtTo(std::ostringstream& os, const Stmt& s, int depth);

void printBody(std::ostringstream& os, const StmtList& body, int depth) {
    for (const auto& s : body) printStmtTo(os, *s, depth);
}

void printStmtTo(std::ostringstream& os, const Stmt& s, int depth) {
    ind(os, depth);
    switch (s.kind) {
    case Stmt::Kind::Assign:
        if (s.lhsDeref) os << "*";
        os << s.lhs << " = ";
        if (s.rhsAddrOf) os << "&" << s.addrName;
        else printExprPrec(os, *s.expr, 0);
        os << ";\n";
        break;
    case Stmt::Kind::If:
        os << "if (";
        printExprPrec(os, *s.expr, 0);
        os << ") {\n";
        printBody(os, s.thenBody, depth + 1);
        ind(os, depth);
        os << "}";
        if (!s.elseBody.empty()) {
            os << " else {\n";
            printBody(os, s.elseBody, depth + 1);
            ind(os, depth);
            os << "}";
        }
        os << "\n";
        break;
    case Stmt::Kind::While:
        os << "while (";
        printExprPrec(os, *s.expr, 0);
        os << ") {\n";
        printBody(os, s.thenBody, depth + 1);
        ind(os, depth);
        os << "}\n";
        break;
    case Stmt::Kind::Lock:
        os << "lock(" << (s.targetDeref ? "*" : "") << s.target << ");\n";
        break;
    case Stmt::Kind::Unlock:
        os << "unlock(" << (s.targetDeref ? "*" : "") << s.target << ");\n";
        break;
    case Stmt::Kind::IrqDisable:
        os << "irq_disable(" << s.irqLine << ");\n";
        break;
    case Stmt::Kind::IrqEnable:
        os << "irq_enable(" << s.irqLine << ");\n";
        break;
    case Stmt::Kind::IrqDisableAll:
        os << "irq_disable_all;\n";
        break;
    case Stmt::Kind::IrqEnableAll:
        os << "irq_enable_all;\n";
        break;
    case Stmt::Kind::Output:
        os << "output(";
        printExprPrec(os, *s.expr, 0);
        os << ");\n";
        break;
    case Stmt::Kind::Call:
        os << "call " << s.callee << "(";
        for (size_t i = 0; i < s.args.size(); ++i) {
            if (i) os << ", ";
            if (s.args[i].addrOf) os << "&" << s.args[i].addrName;
            else printExprPrec(os, *s.args[i].expr, 0);
        }
        os << ");\n";
        break;
    }
}

} // namespace

std::string print_expr(const Expr& e) {
    std::ostringstream os;
    printExprPrec(os, e, 0);
    return os.str();
}

std::string print_stmt(const Stmt& s, int indent) {
    std::ostringstream os;
    printStmtTo(os, s, indent);
    return os.str();
}

std::string print_program(const Program& p) {
    std::ostringstream os;
    if (p.wordWidth != 16) os << "width " << p.wordWidth << ";\n";
    for (const auto& r : p.registers) {
        os << "register " << r.name << " width " << r.width;
        if (r.readOnly) os << " readonly";
        if (r.irqControl) os << " irqctl";
        os << ";\n";
    }
    for (const auto& g : p.globals) {
        os << "global " << g.name << " = " << g.init;
        if (g.isInput) os << " input";
        os << ";\n";
    }
    for (const auto& l : p.lockDecls) os << "lock " << l << ";\n";
    for (const auto& r : p.routines) {
        os << "\n" << (r.kind == RoutineKind::Task ? "task " : "isr ") << r.name;
        if (!r.params.empty()) {
            os << "(";
            for (size_t i = 0; i < r.params.size(); ++i) {
                if (i) os << ", ";
                os << r.params[i].name;
            }
            os << ")";
        }
        if (r.isIsr()) os << " line " << r.irqLine;
        os << " prio " << r.priority << " {\n";
        for (const auto& s : r.body) printStmtTo(os, *s, 1);
        os << "}\n";
    }
    return os.str();
}

} // namespace irqr
