#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace irqr {

// Statement position: routine name plus the statement's ordinal within the
// routine body in source (pre-)order. Ordinals are assigned once by the parser
// and survive every later transformation; generated statements receive fresh
// ordinals past the original range.
struct Location {
    std::string routine;
    int index = -1;

    auto operator<=>(const Location&) const = default;
    std::string str() const { return routine + ":" + std::to_string(index); }
};

enum class BinOp { Add, Sub, Mul, And, Or, Xor, Shl, Shr, Eq, Ne, Lt, Le, Gt, Ge, LAnd, LOr };
enum class UnOp { Neg, LNot };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { IntLit, Var, Deref, Unary, Binary };
    Kind kind;
    uint32_t value = 0;      // IntLit
    std::string name;        // Var / Deref (the pointer variable)
    UnOp uop{};              // Unary
    BinOp bop{};             // Binary
    ExprPtr a, b;

    static ExprPtr lit(uint32_t v);
    static ExprPtr var(std::string n);
    static ExprPtr deref(std::string n);
    static ExprPtr unary(UnOp op, ExprPtr e);
    static ExprPtr binary(BinOp op, ExprPtr l, ExprPtr r);
    ExprPtr clone() const;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;
using StmtList = std::vector<StmtPtr>;

// Call arguments may pass a value or the address of a variable; address
// arguments are what feed pointer parameters (and ISR registration).
struct CallArg {
    bool addrOf = false;
    std::string addrName; // when addrOf
    ExprPtr expr;         // otherwise
    CallArg clone() const;
};

struct Stmt {
    enum class Kind {
        Assign,       // lhs = expr;  or  lhs = &name;  lhs is a variable or *ptr
        If,           // if (cond) { then } else { els }
        While,        // while (cond) { body }
        Lock,         // lock(target) / lock(*target)
        Unlock,
        IrqDisable,   // irq_disable(n)
        IrqEnable,
        IrqDisableAll,
        IrqEnableAll,
        Output,       // output(expr)
        Call,         // call f(args)
    };

    Kind kind;
    Location loc;        // stable identity; loc.index set by the parser
    int srcLine = 0;

    // Assign
    std::string lhs;
    bool lhsDeref = false;
    bool rhsAddrOf = false;
    std::string addrName;
    ExprPtr expr;        // Assign rhs / If cond / While cond / Output expr

    StmtList thenBody, elseBody; // If (elseBody may be empty) / While uses thenBody

    std::string target;  // Lock/Unlock lock name
    bool targetDeref = false;

    int irqLine = 0;     // IrqDisable/IrqEnable

    std::string callee;  // Call
    std::vector<CallArg> args;

    // Set on statements synthesized by the repair engine; used by merge_fixes
    // and by the inserted-operation counters.
    bool generated = false;
    int patchTag = -1;   // which generated critical section this op belongs to

    StmtPtr clone() const;
};

enum class RoutineKind { Task, Isr };

struct Param {
    std::string name;
};

struct Routine {
    std::string name;
    RoutineKind kind = RoutineKind::Task;
    int priority = 0;          // larger number = lower priority
    int irqLine = 0;           // ISR only
    std::vector<Param> params;
    StmtList body;

    bool isIsr() const { return kind == RoutineKind::Isr; }
};

struct GlobalDecl {
    std::string name;
    uint32_t init = 0;
    bool isInput = false; // annotated `input`: symbolic root for the engine
};

struct RegisterDecl {
    std::string name;
    unsigned width = 16;
    bool readOnly = false;
    bool irqControl = false; // writes conservatively treated as enable-all
};

struct Program {
    std::vector<GlobalDecl> globals;
    std::vector<RegisterDecl> registers;
    std::vector<std::string> lockDecls;
    std::vector<Routine> routines;
    unsigned wordWidth = 16;

    const Routine* find(const std::string& name) const;
    Routine* find(const std::string& name);
    const GlobalDecl* findGlobal(const std::string& name) const;
    const RegisterDecl* findRegister(const std::string& name) const;
    bool isLock(const std::string& name) const;
    const Stmt* stmtAt(const Location& loc) const;

    Program clone() const;
};

bool structurallyEqual(const Program& a, const Program& b);

} // namespace irqr
