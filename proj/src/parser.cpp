#include "irqracer/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <map>

namespace irqr {
namespace {

enum class Tok {
    End, Ident, Int,
    LBrace, RBrace, LParen, RParen, Semi, Comma, Assign,
    Star, Amp, Plus, Minus, Pipe, Caret, Shl, Shr,
    EqEq, NotEq, Lt, Le, Gt, Ge, AndAnd, OrOr, Bang,
};

struct Token {
    Tok kind;
    std::string text;
    uint32_t value = 0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        skipWs();
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= src_.size()) {
            tok_.kind = Tok::End;
            tok_.text.clear();
            return;
        }
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                bump();
            tok_.kind = Tok::Ident;
            tok_.text = src_.substr(start, pos_ - start);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            int base = 10;
            if (c == '0' && pos_ + 1 < src_.size() && (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X')) {
                base = 16;
                bump();
                bump();
            }
            while (pos_ < src_.size() &&
                   std::isxdigit(static_cast<unsigned char>(src_[pos_])))
                bump();
            tok_.kind = Tok::Int;
            tok_.text = src_.substr(start, pos_ - start);
            tok_.value = static_cast<uint32_t>(
                std::strtoul(tok_.text.c_str(), nullptr, base == 16 ? 16 : 10));
            return;
        }
        auto two = [&](char a, char b) {
            return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
        };
        if (two('=', '=')) { tok_.kind = Tok::EqEq; bump(); bump(); return; }
        if (two('!', '=')) { tok_.kind = Tok::NotEq; bump(); bump(); return; }
        if (two('<', '=')) { tok_.kind = Tok::Le; bump(); bump(); return; }
        if (two('>', '=')) { tok_.kind = Tok::Ge; bump(); bump(); return; }
        if (two('<', '<')) { tok_.kind = Tok::Shl; bump(); bump(); return; }
        if (two('>', '>')) { tok_.kind = Tok::Shr; bump(); bump(); return; }
        if (two('&', '&')) { tok_.kind = Tok::AndAnd; bump(); bump(); return; }
        if (two('|', '|')) { tok_.kind = Tok::OrOr; bump(); bump(); return; }
        bump();
        switch (c) {
        case '{': tok_.kind = Tok::LBrace; return;
        case '}': tok_.kind = Tok::RBrace; return;
        case '(': tok_.kind = Tok::LParen; return;
        case ')': tok_.kind = Tok::RParen; return;
        case ';': tok_.kind = Tok::Semi; return;
        case ',': tok_.kind = Tok::Comma; return;
        case '=': tok_.kind = Tok::Assign; return;
        case '*': tok_.kind = Tok::Star; return;
        case '&': tok_.kind = Tok::Amp; return;
        case '+': tok_.kind = Tok::Plus; return;
        case '-': tok_.kind = Tok::Minus; return;
        case '|': tok_.kind = Tok::Pipe; return;
        case '^': tok_.kind = Tok::Caret; return;
        case '<': tok_.kind = Tok::Lt; return;
        case '>': tok_.kind = Tok::Gt; return;
        case '!': tok_.kind = Tok::Bang; return;
        default:
            tok_.kind = Tok::End;
            tok_.text = std::string(1, c);
            bad_ = true;
            return;
        }
    }

    void skipWs() {
        for (;;) {
            while (pos_ < src_.size() &&
                   std::isspace(static_cast<unsigned char>(src_[pos_])))
                bump();
            if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') bump();
                continue;
            }
            break;
        }
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;

public:
    bool bad_ = false;
};

struct ParseError {
    std::string msg;
    int line, col;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lx_(src) {}

    Program run() {
        Program p;
        while (lx_.peek().kind != Tok::End) {
            Token t = expectIdent("declaration");
            if (t.text == "global") parseGlobal(p);
            else if (t.text == "register") parseRegister(p);
            else if (t.text == "lock") parseLockDecl(p);
            else if (t.text == "width") parseWidth(p);
            else if (t.text == "task") parseRoutine(p, RoutineKind::Task);
            else if (t.text == "isr") parseRoutine(p, RoutineKind::Isr);
            else fail("unknown declaration '" + t.text + "'", t);
        }
        assignLocations(p);
        return p;
    }

private:
    void parseWidth(Program& p) {
        Token t = expect(Tok::Int, "word width");
        p.wordWidth = t.value;
        expect(Tok::Semi, "';'");
    }

    void parseGlobal(Program& p) {
        GlobalDecl g;
        g.name = expectIdent("global name").text;
        if (lx_.peek().kind == Tok::Assign) {
            lx_.take();
            bool neg = false;
            if (lx_.peek().kind == Tok::Minus) { lx_.take(); neg = true; }
            Token v = expect(Tok::Int, "initial value");
            g.init = neg ? static_cast<uint32_t>(-static_cast<int64_t>(v.value)) : v.value;
        }
        if (lx_.peek().kind == Tok::Ident && lx_.peek().text == "input") {
            lx_.take();
            g.isInput = true;
        }
        expect(Tok::Semi, "';'");
        p.globals.push_back(std::move(g));
    }

    void parseRegister(Program& p) {
        RegisterDecl r;
        r.name = expectIdent("register name").text;
        Token w = expectIdent("'width'");
        if (w.text != "width") fail("expected 'width'", w);
        r.width = expect(Tok::Int, "register width").value;
        while (lx_.peek().kind == Tok::Ident) {
            Token a = lx_.take();
            if (a.text == "readonly") r.readOnly = true;
            else if (a.text == "irqctl") r.irqControl = true;
            else fail("unknown register attribute '" + a.text + "'", a);
        }
        expect(Tok::Semi, "';'");
        p.registers.push_back(std::move(r));
    }

    void parseLockDecl(Program& p) {
        Token n = expectIdent("lock name");
        expect(Tok::Semi, "';'");
        p.lockDecls.push_back(n.text);
    }

    void parseRoutine(Program& p, RoutineKind kind) {
        Routine r;
        r.kind = kind;
        r.name = expectIdent("routine name").text;
        if (lx_.peek().kind == Tok::LParen) {
            lx_.take();
            if (lx_.peek().kind != Tok::RParen) {
                for (;;) {
                    r.params.push_back({expectIdent("parameter").text});
                    if (lx_.peek().kind != Tok::Comma) break;
                    lx_.take();
                }
            }
            expect(Tok::RParen, "')'");
        }
        for (;;) {
            if (lx_.peek().kind != Tok::Ident) break;
            Token k = lx_.take();
            if (k.text == "prio") r.priority = static_cast<int>(expect(Tok::Int, "priority").value);
            else if (k.text == "line") r.irqLine = static_cast<int>(expect(Tok::Int, "irq line").value);
            else fail("unknown routine attribute '" + k.text + "'", k);
        }
        expect(Tok::LBrace, "'{'");
        r.body = parseBlockRest();
        p.routines.push_back(std::move(r));
    }

    StmtList parseBlockRest() {
        StmtList body;
        while (lx_.peek().kind != Tok::RBrace) {
            if (lx_.peek().kind == Tok::End) failHere("unexpected end of input in block");
            body.push_back(parseStmt());
        }
        lx_.take();
        return body;
    }

    StmtPtr parseStmt() {
        Token t = lx_.peek();
        auto s = std::make_unique<Stmt>();
        s->srcLine = t.line;
        if (t.kind == Tok::Star) {
            lx_.take();
            s->kind = Stmt::Kind::Assign;
            s->lhsDeref = true;
            s->lhs = expectIdent("pointer variable").text;
            expect(Tok::Assign, "'='");
            parseAssignRhs(*s);
            return s;
        }
        if (t.kind != Tok::Ident) failHere("expected statement");
        std::string kw = t.text;
        if (kw == "if") {
            lx_.take();
            s->kind = Stmt::Kind::If;
            expect(Tok::LParen, "'('");
            s->expr = parseExpr();
            expect(Tok::RParen, "')'");
            expect(Tok::LBrace, "'{'");
            s->thenBody = parseBlockRest();
            if (lx_.peek().kind == Tok::Ident && lx_.peek().text == "else") {
                lx_.take();
                expect(Tok::LBrace, "'{'");
                s->elseBody = parseBlockRest();
            }
            return s;
        }
        if (kw == "while") {
            lx_.take();
            s->kind = Stmt::Kind::While;
            expect(Tok::LParen, "'('");
            s->expr = parseExpr();
            expect(Tok::RParen, "')'");
            expect(Tok::LBrace, "'{'");
            s->thenBody = parseBlockRest();
            return s;
        }
        if (kw == "lock" || kw == "unlock") {
            lx_.take();
            s->kind = kw == "lock" ? Stmt::Kind::Lock : Stmt::Kind::Unlock;
            expect(Tok::LParen, "'('");
            if (lx_.peek().kind == Tok::Star) {
                lx_.take();
                s->targetDeref = true;
            }
            s->target = expectIdent("lock name").text;
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return s;
        }
        if (kw == "irq_disable" || kw == "irq_enable") {
            lx_.take();
            s->kind = kw == "irq_disable" ? Stmt::Kind::IrqDisable : Stmt::Kind::IrqEnable;
            expect(Tok::LParen, "'('");
            s->irqLine = static_cast<int>(expect(Tok::Int, "irq line").value);
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return s;
        }
        if (kw == "irq_disable_all" || kw == "irq_enable_all") {
            lx_.take();
            s->kind = kw == "irq_disable_all" ? Stmt::Kind::IrqDisableAll : Stmt::Kind::IrqEnableAll;
            expect(Tok::Semi, "';'");
            return s;
        }
        if (kw == "output") {
            lx_.take();
            s->kind = Stmt::Kind::Output;
            expect(Tok::LParen, "'('");
            s->expr = parseExpr();
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return s;
        }
        if (kw == "call") {
            lx_.take();
            s->kind = Stmt::Kind::Call;
            s->callee = expectIdent("routine name").text;
            expect(Tok::LParen, "'('");
            if (lx_.peek().kind != Tok::RParen) {
                for (;;) {
                    CallArg a;
                    if (lx_.peek().kind == Tok::Amp) {
                        lx_.take();
                        a.addrOf = true;
                        a.addrName = expectIdent("variable").text;
                    } else {
                        a.expr = parseExpr();
                    }
                    s->args.push_back(std::move(a));
                    if (lx_.peek().kind != Tok::Comma) break;
                    lx_.take();
                }
            }
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return s;
        }
        // plain assignment: ident = ...
        lx_.take();
        s->kind = Stmt::Kind::Assign;
        s->lhs = kw;
        expect(Tok::Assign, "'='");
        parseAssignRhs(*s);
        return s;
    }

    void parseAssignRhs(Stmt& s) {
        if (lx_.peek().kind == Tok::Amp) {
            lx_.take();
            s.rhsAddrOf = true;
            s.addrName = expectIdent("variable").text;
        } else {
            s.expr = parseExpr();
        }
        expect(Tok::Semi, "';'");
    }

    // precedence climbing, C-like ordering
    ExprPtr parseExpr() { return parseOr(); }

    ExprPtr parseOr() {
        auto e = parseAnd();
        while (lx_.peek().kind == Tok::OrOr) {
            lx_.take();
            e = Expr::binary(BinOp::LOr, std::move(e), parseAnd());
        }
        return e;
    }

    ExprPtr parseAnd() {
        auto e = parseBitOr();
        while (lx_.peek().kind == Tok::AndAnd) {
            lx_.take();
            e = Expr::binary(BinOp::LAnd, std::move(e), parseBitOr());
        }
        return e;
    }

    ExprPtr parseBitOr() {
        auto e = parseBitXor();
        while (lx_.peek().kind == Tok::Pipe) {
            lx_.take();
            e = Expr::binary(BinOp::Or, std::move(e), parseBitXor());
        }
        return e;
    }

    ExprPtr parseBitXor() {
        auto e = parseBitAnd();
        while (lx_.peek().kind == Tok::Caret) {
            lx_.take();
            e = Expr::binary(BinOp::Xor, std::move(e), parseBitAnd());
        }
        return e;
    }

    ExprPtr parseBitAnd() {
        auto e = parseCmp();
        while (lx_.peek().kind == Tok::Amp) {
            lx_.take();
            e = Expr::binary(BinOp::And, std::move(e), parseCmp());
        }
        return e;
    }

    ExprPtr parseCmp() {
        auto e = parseShift();
        for (;;) {
            BinOp op;
            switch (lx_.peek().kind) {
            case Tok::EqEq: op = BinOp::Eq; break;
            case Tok::NotEq: op = BinOp::Ne; break;
            case Tok::Lt: op = BinOp::Lt; break;
            case Tok::Le: op = BinOp::Le; break;
            case Tok::Gt: op = BinOp::Gt; break;
            case Tok::Ge: op = BinOp::Ge; break;
            default: return e;
            }
            lx_.take();
            e = Expr::binary(op, std::move(e), parseShift());
        }
    }

    ExprPtr parseShift() {
        auto e = parseAdd();
        for (;;) {
            if (lx_.peek().kind == Tok::Shl) {
                lx_.take();
                e = Expr::binary(BinOp::Shl, std::move(e), parseAdd());
            } else if (lx_.peek().kind == Tok::Shr) {
                lx_.take();
                e = Expr::binary(BinOp::Shr, std::move(e), parseAdd());
            } else {
                return e;
            }
        }
    }

    ExprPtr parseAdd() {
        auto e = parseMul();
        for (;;) {
            if (lx_.peek().kind == Tok::Plus) {
                lx_.take();
                e = Expr::binary(BinOp::Add, std::move(e), parseMul());
            } else if (lx_.peek().kind == Tok::Minus) {
                lx_.take();
                e = Expr::binary(BinOp::Sub, std::move(e), parseMul());
            } else {
                return e;
            }
        }
    }

    ExprPtr parseMul() {
        auto e = parseUnary();
        while (lx_.peek().kind == Tok::Star) {
            lx_.take();
            e = Expr::binary(BinOp::Mul, std::move(e), parseUnary());
        }
        return e;
    }

    ExprPtr parseUnary() {
        if (lx_.peek().kind == Tok::Minus) {
            lx_.take();
            return Expr::unary(UnOp::Neg, parseUnary());
        }
        if (lx_.peek().kind == Tok::Bang) {
            lx_.take();
            return Expr::unary(UnOp::LNot, parseUnary());
        }
        if (lx_.peek().kind == Tok::Star) {
            lx_.take();
            return Expr::deref(expectIdent("pointer variable").text);
        }
        return parsePrimary();
    }

    ExprPtr parsePrimary() {
        Token t = lx_.peek();
        if (t.kind == Tok::Int) {
            lx_.take();
            return Expr::lit(t.value);
        }
        if (t.kind == Tok::Ident) {
            lx_.take();
            return Expr::var(t.text);
        }
        if (t.kind == Tok::LParen) {
            lx_.take();
            auto e = parseExpr();
            expect(Tok::RParen, "')'");
            return e;
        }
        failHere("expected expression");
        return nullptr;
    }

    static void number(StmtList& body, int& next) {
        for (auto& s : body) {
            s->loc.index = next++;
            number(s->thenBody, next);
            number(s->elseBody, next);
        }
    }

    void assignLocations(Program& p) {
        for (auto& r : p.routines) {
            int next = 0;
            number(r.body, next);
            setRoutineName(r.body, r.name);
        }
    }

    static void setRoutineName(StmtList& body, const std::string& name) {
        for (auto& s : body) {
            s->loc.routine = name;
            setRoutineName(s->thenBody, name);
            setRoutineName(s->elseBody, name);
        }
    }

    Token expect(Tok k, const std::string& what) {
        Token t = lx_.peek();
        if (t.kind != k) fail("expected " + what, t);
        return lx_.take();
    }

    Token expectIdent(const std::string& what) {
        Token t = lx_.peek();
        if (t.kind != Tok::Ident) fail("expected " + what, t);
        return lx_.take();
    }

    [[noreturn]] void fail(const std::string& msg, const Token& t) {
        throw ParseError{msg, t.line, t.col};
    }

    [[noreturn]] void failHere(const std::string& msg) { fail(msg, lx_.peek()); }

    Lexer lx_;
};

} // namespace

ParseResult parse_program(const std::string& source) {
    ParseResult out;
    try {
        Parser p(source);
        out.program = p.run();
    } catch (const ParseError& e) {
        out.diags.push_back({DiagKind::SyntaxError, e.msg, e.line, e.col});
    }
    return out;
}

} // namespace irqr
