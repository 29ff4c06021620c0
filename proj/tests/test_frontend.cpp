#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irqracer/checker.hpp"
#include "irqracer/parser.hpp"
#include "irqracer/printer.hpp"

#include "test_util.hpp"

#include <random>

using namespace irqr;

TEST_CASE("empty source parses to a program with zero routines") {
    ParseResult pr = parse_program("");
    REQUIRE(pr.ok());
    CHECK(pr.program->routines.empty());
    CHECK(pr.program->globals.empty());
}

TEST_CASE("uart transcription parses with the expected structure") {
    Program p = parseChecked(readCorpus("uart.idl"));
    int tasks = 0, isrs = 0;
    for (const auto& r : p.routines)
        (r.isIsr() ? isrs : tasks)++;
    CHECK(tasks == 1);
    CHECK(isrs == 2);

    const Routine* irq1 = p.find("irq1_handler");
    REQUIRE(irq1);
    CHECK(irq1->priority == 1);
    CHECK(irq1->irqLine == 1);
    const Routine* irq2 = p.find("irq2_handler");
    REQUIRE(irq2);
    CHECK(irq2->priority == 2);
    CHECK(irq2->irqLine == 2);

    CHECK(p.findGlobal("xmit_tail") != nullptr);
    REQUIRE(p.findRegister("IIR") != nullptr);
    CHECK(p.findRegister("IIR")->readOnly);
    CHECK(p.findRegister("IER")->irqControl);
}

TEST_CASE("duplicate irq line is rejected") {
    ParseResult pr = parse_program("isr a line 1 prio 1 { }\nisr b line 1 prio 2 { }\n");
    REQUIRE(pr.ok());
    CheckResult chk = check_program(*pr.program);
    bool found = false;
    for (const auto& d : chk.diags)
        if (d.kind == DiagKind::DuplicateIrqLine) found = true;
    CHECK(found);
}

TEST_CASE("priority overlap between isr and task is a diagnostic") {
    ParseResult pr = parse_program("task t prio 5 { }\nisr a line 1 prio 5 { }\n");
    REQUIRE(pr.ok());
    CheckResult chk = check_program(*pr.program);
    bool found = false;
    for (const auto& d : chk.diags)
        if (d.kind == DiagKind::PriorityOverlap) found = true;
    CHECK(found);
}

TEST_CASE("undeclared lock reference carries a diagnostic") {
    ParseResult pr = parse_program("task t prio 9 { lock(nope); }\n");
    REQUIRE(pr.ok());
    CheckResult chk = check_program(*pr.program);
    REQUIRE(!chk.ok());
    CHECK(chk.diags.front().kind == DiagKind::UnknownIdentifier);
}

TEST_CASE("unknown identifier read is rejected, implicit locals are fine") {
    ParseResult ok = parse_program("task t prio 9 { x = 1; y = x + 1; }\n");
    REQUIRE(ok.ok());
    CHECK(check_program(*ok.program).ok());

    ParseResult bad = parse_program("task t prio 9 { y = z + 1; }\n");
    REQUIRE(bad.ok());
    CHECK(!check_program(*bad.program).ok());
}

TEST_CASE("write to a read-only register is rejected") {
    ParseResult pr = parse_program("register IIR width 16 readonly;\ntask t prio 9 { IIR = 1; }\n");
    REQUIRE(pr.ok());
    CheckResult chk = check_program(*pr.program);
    REQUIRE(!chk.ok());
    CHECK(chk.diags.front().kind == DiagKind::ReadOnlyWrite);
}

TEST_CASE("recursion is a check error") {
    ParseResult pr = parse_program("task a prio 9 { call b(); }\ntask b prio 9 { call a(); }\n");
    REQUIRE(pr.ok());
    CheckResult chk = check_program(*pr.program);
    bool found = false;
    for (const auto& d : chk.diags)
        if (d.kind == DiagKind::RecursionDetected) found = true;
    CHECK(found);
}

TEST_CASE("call arity mismatches are diagnosed") {
    ParseResult pr = parse_program(
        "global b = 0;\ntask t prio 9 { call h(1, 2); }\nisr h(x) line 1 prio 1 { b = x; }\n");
    REQUIRE(pr.ok());
    CheckResult chk = check_program(*pr.program);
    bool found = false;
    for (const auto& d : chk.diags)
        if (d.kind == DiagKind::ArityMismatch) found = true;
    CHECK(found);
}

TEST_CASE("syntax errors carry a position") {
    ParseResult pr = parse_program("task t prio 9 {\n  x = ;\n}\n");
    REQUIRE(!pr.program.has_value());
    REQUIRE(!pr.diags.empty());
    CHECK(pr.diags.front().kind == DiagKind::SyntaxError);
    CHECK(pr.diags.front().line == 2);
}

TEST_CASE("parse-print-parse is a fixed point on the corpus") {
    for (const char* name : {"uart.idl", "keyboard.idl", "adjacent_pair.idl", "al_pattern.idl",
                             "ecs_pattern.idl", "atomicity.idl"}) {
        CAPTURE(name);
        Program p1 = parseChecked(readCorpus(name));
        std::string printed = print_program(p1);
        ParseResult pr2 = parse_program(printed);
        REQUIRE(pr2.ok());
        CHECK(structurallyEqual(p1, *pr2.program));
        // and printing again is stable
        CHECK(print_program(*pr2.program) == printed);
    }
}

TEST_CASE("location assignment is deterministic and source-ordered") {
    std::string src = readCorpus("uart.idl");
    Program a = parseChecked(src);
    Program b = parseChecked(src);
    for (const auto& r : a.routines) {
        const Routine* rb = b.find(r.name);
        REQUIRE(rb);
        // collect locations pre-order from both
        std::vector<int> la, lb;
        std::function<void(const StmtList&, std::vector<int>&)> collect =
            [&](const StmtList& body, std::vector<int>& out) {
                for (const auto& s : body) {
                    out.push_back(s->loc.index);
                    collect(s->thenBody, out);
                    collect(s->elseBody, out);
                }
            };
        collect(r.body, la);
        collect(rb->body, lb);
        CHECK(la == lb);
        for (size_t i = 0; i < la.size(); ++i) CHECK(la[i] == static_cast<int>(i));
    }
}

TEST_CASE("expression precedence round-trips") {
    // random expression statements survive print->parse->print
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::ostringstream src;
        src << "global g = 0;\ntask t prio 9 { x = ";
        std::function<void(int)> gen = [&](int depth) {
            if (depth > 3 || rng() % 3 == 0) {
                switch (rng() % 3) {
                case 0: src << (rng() % 100); break;
                case 1: src << "g"; break;
                default: src << (rng() % 50); break;
                }
                return;
            }
            const char* ops[] = {"+", "-", "*", "&", "|", "^", "<<", ">>", "==", "!=", "<", "<=",
                                 ">", ">=", "&&", "||"};
            src << "(";
            gen(depth + 1);
            src << " " << ops[rng() % 16] << " ";
            gen(depth + 1);
            src << ")";
        };
        gen(0);
        src << "; }\n";
        ParseResult p1 = parse_program(src.str());
        REQUIRE(p1.ok());
        std::string printed = print_program(*p1.program);
        ParseResult p2 = parse_program(printed);
        REQUIRE(p2.ok());
        CHECK(structurallyEqual(*p1.program, *p2.program));
    }
}
