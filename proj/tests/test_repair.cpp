#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irqracer/oracle.hpp"
#include "irqracer/pipeline.hpp"
#include "irqracer/printer.hpp"
#include "irqracer/repair.hpp"

#include "test_util.hpp"

using namespace irqr;

namespace {

// the PipelineResult owns the graphs' backing storage; keep it whole
struct Setup {
    PipelineResult res;
    std::vector<RaceWarning> warnings;
    Program& p;
    AliasSet& aliases;
    std::map<std::string, Ricfg>& ricfgs;

    explicit Setup(PipelineResult r)
        : res(std::move(r)), p(res.program), aliases(res.aliases), ricfgs(res.ricfgs) {
        for (const auto& w : res.warnings) warnings.push_back(w.wn);
    }
};

Setup staticSetup(const std::string& src) {
    Program parsed = parseChecked(src);
    ToolConfig cfg;
    return Setup(run_pipeline(parsed, PipelineStage::Detect, cfg));
}

const RaceWarning& warningOn(const Setup& s, const std::string& resource) {
    for (const auto& w : s.warnings)
        if (w.resource == resource) return w;
    REQUIRE(false);
    return s.warnings.front();
}

} // namespace

TEST_CASE("hold sets: lock-free graph maps everything to the empty set") {
    Setup s = staticSetup("global g = 0;\ntask t prio 9 { g = 1; g = 2; }\n"
                          "isr i line 1 prio 1 { g = 3; }\n");
    HoldSets h = compute_hold_sets(s.ricfgs.at("t"), s.aliases, s.p);
    for (const auto& in : h.in) CHECK(in.empty());
}

TEST_CASE("hold sets: a critical section holds exactly between acquire and release") {
    Setup s = staticSetup("global g = 0;\nlock l;\n"
                          "task t prio 9 { lock(l); g = 1; unlock(l); g = 2; }\n"
                          "isr i line 1 prio 1 { g = 3; }\n");
    const Ricfg& G = s.ricfgs.at("t");
    HoldSets h = compute_hold_sets(G, s.aliases, s.p);
    CHECK(h.in[G.firstNodeAt({"t", 1})].count("l") == 1);  // g = 1 inside
    CHECK(h.in[G.firstNodeAt({"t", 3})].count("l") == 0);  // g = 2 after unlock
    CHECK(h.in[G.firstNodeAt({"t", 0})].empty());          // entry to the acquire
}

TEST_CASE("hold sets close over lock aliases reached through pointers") {
    Setup s = staticSetup("global g = 0;\nlock l;\n"
                          "task t prio 9 { p = &l; lock(*p); g = 1; unlock(*p); }\n"
                          "isr i line 1 prio 1 { g = 3; }\n");
    const Ricfg& G = s.ricfgs.at("t");
    HoldSets h = compute_hold_sets(G, s.aliases, s.p);
    CHECK(h.in[G.firstNodeAt({"t", 2})].count("l") == 1);
}

TEST_CASE("lock order: single lock has no edges; nesting and sequencing do") {
    Setup one = staticSetup("global g = 0;\nlock a;\n"
                            "task t prio 9 { lock(a); g = 1; unlock(a); }\n"
                            "isr i line 1 prio 1 { g = 2; }\n");
    CHECK(lock_order_of_program(one.p).edges.empty());

    Setup two = staticSetup("global g = 0;\nlock a;\nlock b;\n"
                            "task t prio 9 { lock(a); lock(b); g = 1; unlock(b); unlock(a); }\n"
                            "isr i line 1 prio 1 { g = 2; }\n");
    LockOrderGraph order = lock_order_of_program(two.p);
    CHECK(order.edges.count({"a", "b"}) == 1);
    CHECK(order.edges.count({"b", "a"}) == 0);
    CHECK(!order.hasCycle());
}

TEST_CASE("lock order: opposite orders in two routines form a visible cycle") {
    Setup s = staticSetup(
        "global g = 0;\nlock a;\nlock b;\n"
        "task t1 prio 9 { lock(a); lock(b); g = 1; unlock(b); unlock(a); }\n"
        "task t2 prio 9 { lock(b); lock(a); g = 2; unlock(a); unlock(b); }\n"
        "isr i line 1 prio 1 { g = 3; }\n");
    LockOrderGraph order = lock_order_of_program(s.p);
    CHECK(order.edges.count({"a", "b"}) == 1);
    CHECK(order.edges.count({"b", "a"}) == 1);
    CHECK(order.hasCycle());
}

TEST_CASE("IDE plan for WN1 lands immediately around the racing read") {
    Setup s = staticSetup(readCorpus("uart.idl"));
    const RaceWarning* wn1 = nullptr;
    for (const auto& w : s.warnings)
        if (w.ei.routine == "transmit" && w.ej.routine == "irq1_handler") wn1 = &w;
    REQUIRE(wn1);
    RepairPlan plan = plan_ide_repair(s.p, *wn1, s.ricfgs, s.aliases);
    REQUIRE(plan.strategy == RepairStrategy::IDE);
    REQUIRE(plan.patches.size() == 2);
    CHECK(plan.patches[0].kind == PatchOp::Kind::InsertIrqDisable);
    CHECK(plan.patches[0].irqLine == 1);
    CHECK(plan.patches[0].anchor == Location{"transmit", 5});
    CHECK(plan.patches[0].before);
    CHECK(plan.patches[1].kind == PatchOp::Kind::InsertIrqEnable);
    CHECK(plan.patches[1].anchor == Location{"transmit", 5});
    CHECK(!plan.patches[1].before);
}

TEST_CASE("IDE plan for WN4 wraps the write inside the lower handler") {
    Setup s = staticSetup(readCorpus("uart.idl"));
    const RaceWarning* wn4 = nullptr;
    for (const auto& w : s.warnings)
        if (w.ei.routine == "irq2_handler" && w.ej.loc.index == 2) wn4 = &w;
    REQUIRE(wn4);
    RepairPlan plan = plan_ide_repair(s.p, *wn4, s.ricfgs, s.aliases);
    REQUIRE(plan.strategy == RepairStrategy::IDE);
    CHECK(plan.patches[0].anchor == Location{"irq2_handler", 1});
    CHECK(plan.patches[0].irqLine == 1);
    CHECK(plan.patches[1].anchor == Location{"irq2_handler", 1});
}

TEST_CASE("Eq.1 blocks IDE when every placement spans the contended acquire") {
    Setup s = staticSetup(readCorpus("unrepairable.idl"));
    const RaceWarning& wn = warningOn(s, "x");
    RepairPlan plan = plan_ide_repair(s.p, wn, s.ricfgs, s.aliases);
    CHECK(plan.strategy == RepairStrategy::Unrepairable);
    CHECK(plan.note == "no I_d/I_e");
}

TEST_CASE("Eq.1 safety: every emitted IDE plan has disjoint hold sets, recomputed") {
    for (const char* name : {"uart.idl", "keyboard.idl", "atomicity.idl", "al_pattern.idl",
                             "ecs_pattern.idl"}) {
        CAPTURE(name);
        Setup s = staticSetup(readCorpus(name));
        for (const auto& wn : s.warnings) {
            RepairPlan plan = plan_ide_repair(s.p, wn, s.ricfgs, s.aliases);
            if (plan.strategy != RepairStrategy::IDE) continue;
            const Ricfg& G = s.ricfgs.at(wn.ei.routine);
            HoldSets hi = compute_hold_sets(G, s.aliases, s.p);
            HoldSets hj = compute_hold_sets(s.ricfgs.at(wn.ej.routine), s.aliases, s.p);
            int Id = G.firstNodeAt(plan.patches[0].anchor);
            REQUIRE(Id >= 0);
            auto unionJ = hj.anywhere();
            for (const auto& l : hi.in[Id]) CHECK(unionJ.count(l) == 0);
        }
    }
}

TEST_CASE("AL plan: fig. 3 shape takes a fresh lock in both contexts") {
    Setup s = staticSetup(readCorpus("al_pattern.idl"));
    const RaceWarning& wn = warningOn(s, "shared_data");
    RepairPlan plan = plan_lock_repair(s.p, wn, s.ricfgs, s.aliases);
    REQUIRE(plan.strategy == RepairStrategy::AL);
    REQUIRE(plan.patches.size() == 4);
    std::string fresh = plan.patches[0].lockName;
    CHECK(fresh.rfind("__sdr_lock_", 0) == 0);
    // lock+unlock around the task's race code and around the handler's
    CHECK(plan.patches[0].anchor == Location{"al_task", 3});
    CHECK(plan.patches[1].anchor == Location{"al_task", 3});
    CHECK(plan.patches[2].anchor == Location{"al_isr", 0});
    CHECK(plan.patches[3].anchor == Location{"al_isr", 0});
    for (const auto& op : plan.patches) CHECK(op.lockName == fresh);
}

TEST_CASE("ECS plan: fig. 4 shape widens the common lock instead") {
    Setup s = staticSetup(readCorpus("ecs_pattern.idl"));
    const RaceWarning& wn = warningOn(s, "buf");
    RepairPlan plan = plan_lock_repair(s.p, wn, s.ricfgs, s.aliases);
    REQUIRE(plan.strategy == RepairStrategy::ECS);
    REQUIRE(plan.patches.size() == 2);
    // task side: the l2 acquire moves up before the race code
    CHECK(plan.patches[0].kind == PatchOp::Kind::MoveLock);
    CHECK(plan.patches[0].lockName == "l2");
    CHECK(plan.patches[0].moveFrom == Location{"ecs_task", 4});
    CHECK(plan.patches[0].anchor == Location{"ecs_task", 3});
    CHECK(plan.patches[0].before);
    // handler side: the unlock moves down past the race code
    CHECK(plan.patches[1].kind == PatchOp::Kind::MoveLock);
    CHECK(plan.patches[1].moveFrom == Location{"ecs_isr", 2});
    CHECK(plan.patches[1].anchor == Location{"ecs_isr", 3});
    CHECK(!plan.patches[1].before);
}

TEST_CASE("Rule-2 safety: applied lock plans never reverse an existing order") {
    for (const char* name : {"al_pattern.idl", "ecs_pattern.idl", "unrepairable.idl"}) {
        CAPTURE(name);
        Setup s = staticSetup(readCorpus(name));
        LockOrderGraph original = lock_order_of_program(s.p);
        for (const auto& wn : s.warnings) {
            RepairPlan plan = plan_lock_repair(s.p, wn, s.ricfgs, s.aliases);
            if (plan.strategy == RepairStrategy::Unrepairable) continue;
            ApplyResult applied = apply_patches(s.p, plan.patches);
            CHECK(lock_order_admits(original, lock_order_of_program(applied.program)));
        }
    }
}

TEST_CASE("lock repair is unrepairable when no common lock admits the order") {
    // a fresh lock would close a cycle with the existing (a,b) order and the
    // two acquisition prefixes share no lock for ECS to widen
    Setup s = staticSetup(
        "global g = 0;\nlock a;\nlock b;\n"
        "task t prio 9 { g = 1; lock(a); q = 1; unlock(a); }\n"
        "task t2 prio 9 { lock(a); lock(b); w = 1; unlock(b); unlock(a); }\n"
        "isr hi line 1 prio 1 { lock(b); r = 2; unlock(b); g = 3; }\n");
    // the g-race: t@0 vs hi@3; fresh lock f gives t the order (f, a) and hi the
    // order (b, f); with t2's (a, b) that cycles f -> a -> b -> f
    const RaceWarning* gw = nullptr;
    for (const auto& w : s.warnings)
        if (w.resource == "g" && w.ei.routine == "t") gw = &w;
    REQUIRE(gw);
    RepairPlan plan = plan_lock_repair(s.p, *gw, s.ricfgs, s.aliases);
    CHECK(plan.strategy == RepairStrategy::Unrepairable);
    CHECK(plan.note.find("ECS") != std::string::npos);
}

TEST_CASE("apply_patches: empty list clones, conflicting anchors nest disables outermost") {
    Program p = parseChecked(readCorpus("uart.idl"));
    ApplyResult same = apply_patches(p, {});
    CHECK(structurallyEqual(p, same.program));

    std::vector<PatchOp> ops{
        {PatchOp::Kind::InsertLock, 0, "__sdr_lock_0", {"transmit", 5}, true, {}, 1},
        {PatchOp::Kind::InsertIrqDisable, 1, "", {"transmit", 5}, true, {}, 0},
        {PatchOp::Kind::InsertUnlock, 0, "__sdr_lock_0", {"transmit", 5}, false, {}, 1},
        {PatchOp::Kind::InsertIrqEnable, 1, "", {"transmit", 5}, false, {}, 0},
    };
    ApplyResult r = apply_patches(p, ops);
    // order inside the workaround branch: disable, lock, read, unlock, enable
    const Routine* t = r.program.find("transmit");
    const StmtList& branch = t->body[2]->thenBody;
    REQUIRE(branch.size() >= 5);
    CHECK(branch[0]->kind == Stmt::Kind::IrqDisable);
    CHECK(branch[1]->kind == Stmt::Kind::Lock);
    CHECK(branch[2]->kind == Stmt::Kind::Assign);
    CHECK(branch[3]->kind == Stmt::Kind::Unlock);
    CHECK(branch[4]->kind == Stmt::Kind::IrqEnable);
    // the original read's location is tracked through the remap
    CHECK(r.remap.at(Location{"transmit", 5}) == branch[2]->loc);

    CHECK_THROWS_WITH_AS(apply_patches(p, {{PatchOp::Kind::InsertIrqDisable, 1, "",
                                            {"transmit", 99}, true, {}, 0}}),
                         doctest::Contains("AnchorVanished"), std::runtime_error);
}

TEST_CASE("apply then strip restores a trace-equivalent program") {
    Setup s = staticSetup(readCorpus("uart.idl"));
    const RaceWarning& wn = *std::find_if(s.warnings.begin(), s.warnings.end(),
                                          [](const RaceWarning& w) { return w.ei.routine == "transmit"; });
    RepairPlan plan = plan_ide_repair(s.p, wn, s.ricfgs, s.aliases);
    REQUIRE(plan.strategy == RepairStrategy::IDE);
    for (auto& op : plan.patches) op.tag = 0;
    ApplyResult applied = apply_patches(s.p, plan.patches);
    Program stripped = strip_generated(applied.program);

    InputAssignment t1;
    t1.values = {{"IIR", 0x0111}, {"THR", 0x0111}, {"port_bugs", 0}};
    Trace a = execute(s.p, t1, {}, "transmit");
    Trace b = execute(stripped, t1, {}, "transmit");
    CHECK(a.outputs() == b.outputs());
    // same access sequence modulo renumbered locations
    std::vector<std::string> da, db;
    for (const auto& e : a.events)
        if (e.kind == TraceEvent::Kind::Access) da.push_back(e.detail + (e.write ? "w" : "r"));
    for (const auto& e : b.events)
        if (e.kind == TraceEvent::Kind::Access) db.push_back(e.detail + (e.write ? "w" : "r"));
    CHECK(da == db);
}

TEST_CASE("merge-fix arithmetic: two adjacent AL repairs cost 4 operations, not 8") {
    Setup s = staticSetup(readCorpus("adjacent_pair.idl"));
    REQUIRE(s.warnings.size() == 2);
    std::vector<PatchOp> all;
    int tag = 0;
    for (const auto& wn : s.warnings) {
        RepairPlan plan = plan_lock_repair(s.p, wn, s.ricfgs, s.aliases);
        REQUIRE(plan.strategy == RepairStrategy::AL);
        std::map<std::string, int> tagOf;
        for (auto op : plan.patches) {
            auto [it, fresh] = tagOf.try_emplace(op.anchor.routine, tag);
            if (fresh) ++tag;
            op.tag = it->second;
            // distinct plans need distinct lock names before merging unifies them
            op.lockName = "__sdr_lock_" + std::to_string(&wn - s.warnings.data());
            all.push_back(op);
        }
    }
    ApplyResult applied = apply_patches(s.p, all);
    CHECK(count_generated_ops(applied.program) == 8);
    Program merged = merge_fixes(applied.program);
    CHECK(count_generated_ops(merged) == 4);
    // merging is idempotent
    Program again = merge_fixes(merged);
    CHECK(count_generated_ops(again) == 4);
    CHECK(structurallyEqual(merged, again));
}

TEST_CASE("disjoint sections and different irq lines stay unmerged") {
    Program p = parseChecked("global a = 0;\nglobal b = 0;\nglobal c = 0;\n"
                             "task t prio 9 { a = 1; c = 9; b = 2; }\n"
                             "isr i1 line 1 prio 1 { a = 3; }\n"
                             "isr i2 line 2 prio 2 { b = 4; }\n");
    std::vector<PatchOp> ops{
        {PatchOp::Kind::InsertIrqDisable, 1, "", {"t", 0}, true, {}, 0},
        {PatchOp::Kind::InsertIrqEnable, 1, "", {"t", 0}, false, {}, 0},
        {PatchOp::Kind::InsertIrqDisable, 2, "", {"t", 2}, true, {}, 1},
        {PatchOp::Kind::InsertIrqEnable, 2, "", {"t", 2}, false, {}, 1},
    };
    ApplyResult applied = apply_patches(p, ops);
    Program merged = merge_fixes(applied.program);
    CHECK(count_generated_ops(merged) == 4); // separated by c = 9, and lines differ

    // adjacent but different lines: still unmerged
    Program p2 = parseChecked("global a = 0;\nglobal b = 0;\n"
                              "task t prio 9 { a = 1; b = 2; }\n"
                              "isr i1 line 1 prio 1 { a = 3; }\n"
                              "isr i2 line 2 prio 2 { b = 4; }\n");
    std::vector<PatchOp> ops2{
        {PatchOp::Kind::InsertIrqDisable, 1, "", {"t", 0}, true, {}, 0},
        {PatchOp::Kind::InsertIrqEnable, 1, "", {"t", 0}, false, {}, 0},
        {PatchOp::Kind::InsertIrqDisable, 2, "", {"t", 1}, true, {}, 1},
        {PatchOp::Kind::InsertIrqEnable, 2, "", {"t", 1}, false, {}, 1},
    };
    Program merged2 = merge_fixes(apply_patches(p2, ops2).program);
    CHECK(count_generated_ops(merged2) == 4);
}

TEST_CASE("strategy choice follows IDE, then AL, then ECS") {
    Setup al = staticSetup(readCorpus("al_pattern.idl"));
    CHECK(choose_repair(al.p, warningOn(al, "shared_data"), al.ricfgs, al.aliases).strategy ==
          RepairStrategy::IDE); // nothing blocks the interrupt fix here

    Setup ur = staticSetup(readCorpus("unrepairable.idl"));
    RepairPlan plan = choose_repair(ur.p, warningOn(ur, "x"), ur.ricfgs, ur.aliases);
    CHECK(plan.strategy == RepairStrategy::AL); // IDE blocked, AL admitted by Rule 2
}

TEST_CASE("the checked-in strategy catalog matches the embedded one") {
    std::ifstream in(std::string(IRQRACER_CORPUS_DIR) + "/../data/repair-strategies.json");
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    const auto& cat = strategy_catalog();
    // the data file is the CLI's serialization of the same table
    for (const auto& e : cat) {
        CAPTURE(e.key);
        CHECK(os.str().find("\"key\": \"" + e.key + "\"") != std::string::npos);
        CHECK(os.str().find("\"name\": \"" + e.name + "\"") != std::string::npos);
    }
}

TEST_CASE("the strategy catalog carries the survey rows") {
    const auto& cat = strategy_catalog();
    CHECK(cat.size() == 12);
    int automated = 0;
    for (const auto& e : cat)
        if (e.automated) ++automated;
    CHECK(automated == 3); // AL, IDE, ECS
    for (const auto& e : cat) {
        if (e.key == "IDE") {
            CHECK(e.linuxIntPct == doctest::Approx(44.1));
            CHECK(e.linuxTaskCount == 0);
        }
        if (e.key == "AL") CHECK(e.linuxTaskCount == 81);
        if (e.key == "COO") CHECK(e.linuxTaskPct == doctest::Approx(26.8));
    }
}
