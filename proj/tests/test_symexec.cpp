#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irqracer/pipeline.hpp"
#include "irqracer/symexec.hpp"
#include "irqracer/vm.hpp"

#include "test_util.hpp"

using namespace irqr;

namespace {

// the PipelineResult owns the graphs' backing storage; keep it whole
struct Setup {
    PipelineResult res;
    std::vector<RaceWarning> warnings;
    Program& p;
    std::map<std::string, Ricfg>& ricfgs;

    explicit Setup(PipelineResult r) : res(std::move(r)), p(res.program), ricfgs(res.ricfgs) {
        for (const auto& w : res.warnings) warnings.push_back(w.wn);
    }
};

Setup staticSetup(const std::string& src) {
    Program parsed = parseChecked(src);
    ToolConfig cfg;
    return Setup(run_pipeline(parsed, PipelineStage::Detect, cfg));
}

SymExecResult explore(const Setup& s, const RaceWarning& wn, SymBudget budget = {}) {
    Iccfg iccfg = build_iccfg(s.ricfgs.at(wn.ei.routine), s.ricfgs.at(wn.ej.routine), wn.ei.loc,
                              wn.ej.loc);
    return guided_explore(s.p, iccfg, wn, s.warnings, budget);
}

const RaceWarning& findWarning(const Setup& s, const std::string& ri, int ii,
                               const std::string& rj, int ij) {
    for (const auto& w : s.warnings)
        if (w.ei.routine == ri && w.ei.loc.index == ii && w.ej.routine == rj &&
            w.ej.loc.index == ij)
            return w;
    REQUIRE(false);
    return s.warnings.front();
}

} // namespace

TEST_CASE("input points: none without registers or annotations") {
    Program p = parseChecked("global g = 0;\ntask t prio 9 { g = 1; }\n"
                             "isr i line 1 prio 1 { g = 2; }\n");
    CHECK(identify_input_points(p).empty());
}

TEST_CASE("uart input points are the read registers plus the annotated port field") {
    Program p = parseChecked(readCorpus("uart.idl"));
    CHECK(identify_input_points(p) == std::set<std::string>{"IIR", "THR", "port_bugs"});
}

TEST_CASE("a read-only register that is read stays an input point") {
    Program p = parseChecked("register RO width 8 readonly;\nglobal g = 0;\n"
                             "task t prio 9 { a = RO; g = 1; }\n"
                             "isr i line 1 prio 1 { g = 2; }\n");
    CHECK(identify_input_points(p) == std::set<std::string>{"RO"});
}

TEST_CASE("branch-free warning is reachable with an empty path condition") {
    Setup s = staticSetup("global g = 0;\ntask t prio 9 { g = 1; }\n"
                          "isr i line 1 prio 1 { g = 2; }\n");
    REQUIRE(s.warnings.size() == 1);
    SymExecResult r = explore(s, s.warnings[0]);
    REQUIRE(r.kind == SymExecResult::Kind::Reachable);
    CHECK(r.pathCondition.empty());
}

TEST_CASE("WN3's contradictory THR constraint is infeasible") {
    Setup s = staticSetup(readCorpus("uart.idl"));
    const RaceWarning& wn3 = findWarning(s, "irq2_handler", 1, "irq1_handler", 1);
    SymExecResult r = explore(s, wn3);
    CHECK(r.kind == SymExecResult::Kind::Infeasible);
}

TEST_CASE("WN1 is reachable; the generated input and the paper's both replay") {
    Setup s = staticSetup(readCorpus("uart.idl"));
    const RaceWarning& wn1 = findWarning(s, "transmit", 5, "irq1_handler", 1);
    SymExecResult r = explore(s, wn1);
    REQUIRE(r.kind == SymExecResult::Kind::Reachable);

    // soundness of Reachable: the engine's own input replays to a confirm
    ValidationVerdict own = validate_race(s.p, wn1, r.input);
    CHECK(own.kind == VerdictKind::Confirmed);

    // the paper's t1 exercises the same pair end-to-end
    InputAssignment t1;
    t1.values = {{"IIR", 0x0111}, {"THR", 0x0111}, {"port_bugs", 0}};
    ValidationVerdict paper = validate_race(s.p, wn1, t1);
    CHECK(paper.kind == VerdictKind::Confirmed);
}

TEST_CASE("WN2 and WN4 are reachable symbolically") {
    Setup s = staticSetup(readCorpus("uart.idl"));
    CHECK(explore(s, findWarning(s, "transmit", 5, "irq2_handler", 1)).kind ==
          SymExecResult::Kind::Reachable);
    const RaceWarning& wn4 = findWarning(s, "irq2_handler", 1, "irq1_handler", 2);
    SymExecResult r4 = explore(s, wn4);
    REQUIRE(r4.kind == SymExecResult::Kind::Reachable);
    CHECK(validate_race(s.p, wn4, r4.input).kind == VerdictKind::Confirmed);
}

TEST_CASE("loop growth reaches an event behind more than two iterations") {
    Setup s = staticSetup(
        "global g = 0;\nglobal n = 0;\n"
        "task t prio 9 { while (n < 5) { n = n + 1; } g = 1; }\n"
        "isr i line 1 prio 1 { g = 2; }\n");
    REQUIRE(s.warnings.size() == 1);
    SymExecResult r = explore(s, s.warnings[0]);
    REQUIRE(r.kind == SymExecResult::Kind::Reachable);
    CHECK(r.loopBoundUsed >= 5); // grew past the default bound of two
    CHECK(validate_race(s.p, s.warnings[0], r.input).kind == VerdictKind::Confirmed);
}

TEST_CASE("an event behind an unsatisfiable guard is infeasible") {
    Setup s = staticSetup(
        "register R width 8;\nglobal g = 0;\n"
        "task t prio 9 { a = R; if (a != a) { g = 1; } }\n"
        "isr i line 1 prio 1 { g = 2; }\n");
    REQUIRE(s.warnings.size() == 1);
    SymExecResult r = explore(s, s.warnings[0]);
    CHECK(r.kind == SymExecResult::Kind::Infeasible);
}

TEST_CASE("exploration is deterministic under a fixed seed") {
    Setup s = staticSetup(readCorpus("uart.idl"));
    const RaceWarning& wn1 = findWarning(s, "transmit", 5, "irq1_handler", 1);
    SymBudget b1, b2;
    b1.seed = b2.seed = 77;
    SymExecResult r1 = explore(s, wn1, b1);
    SymExecResult r2 = explore(s, wn1, b2);
    REQUIRE(r1.kind == SymExecResult::Kind::Reachable);
    CHECK(r1.input.values == r2.input.values);
    CHECK(r1.statesExplored == r2.statesExplored);
}

TEST_CASE("the solver-skip optimization changes no verdict on the corpus") {
    for (const char* name : {"uart.idl", "keyboard.idl", "adjacent_pair.idl", "al_pattern.idl",
                             "ecs_pattern.idl", "atomicity.idl"}) {
        CAPTURE(name);
        Setup s = staticSetup(readCorpus(name));
        for (const auto& wn : s.warnings) {
            SymBudget on, off;
            off.solverSkip = false;
            SymExecResult a = explore(s, wn, on);
            SymExecResult b = explore(s, wn, off);
            CHECK(a.kind == b.kind);
        }
    }
}

TEST_CASE("an exhausted step budget folds into an inconclusive timeout") {
    Setup s = staticSetup(
        "register R width 16;\nglobal g = 0;\nglobal n = 0;\n"
        "task t prio 9 { while (n < 900) { n = n + 1; } g = R; }\n"
        "isr i line 1 prio 1 { g = 2; }\n");
    REQUIRE(!s.warnings.empty());
    SymBudget tiny;
    tiny.stepBudget = 50;
    SymExecResult r = explore(s, s.warnings[0], tiny);
    CHECK(r.kind == SymExecResult::Kind::Inconclusive);
    CHECK(r.reason == "Timeout");
}
