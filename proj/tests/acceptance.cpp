// Acceptance suite: every criterion runs at its stated tolerance and prints
// one pass/fail line.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irqracer/oracle.hpp"
#include "irqracer/pipeline.hpp"
#include "irqracer/printer.hpp"
#include "irqracer/repair.hpp"
#include "irqracer/solver.hpp"

#include "random_programs.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cstdio>
#include <deque>

using namespace irqr;

namespace {

struct Criterion {
    std::string name;
    bool ok = true;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit Criterion(std::string n) : name(std::move(n)) {}

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            MESSAGE(name, ": ", what);
        }
        CHECK(cond);
    }

    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    ~Criterion() {
        std::printf("[%s] %s (%.1fs)\n", ok ? "PASS" : "FAIL", name.c_str(), seconds());
        std::fflush(stdout);
    }
};

std::string readGolden(const std::string& name) {
    std::ifstream in(std::string(IRQRACER_CORPUS_DIR) + "/expected/" + name, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const WarningRecord* findRecord(const PipelineResult& r, const std::string& ri,
                                const std::string& rj, int ij) {
    for (const auto& w : r.warnings)
        if (w.wn.ei.routine == ri && w.wn.ej.routine == rj && w.wn.ej.loc.index == ij) return &w;
    return nullptr;
}

// oracle input space for a corpus program: full when it fits, otherwise the
// constant-derived candidates extended with the pipeline's synthesized inputs
std::vector<InputAssignment> boundedSpace(const Program& p, const PipelineResult& r) {
    std::vector<InputAssignment> extra;
    for (const auto& w : r.warnings)
        if (w.input) extra.push_back(*w.input);
    auto space = full_input_space(p, 1u << 16);
    if (space.empty()) space = candidate_input_space(p, 1u << 16, extra);
    return space;
}

struct RaceKey {
    Location li, lj;
    std::string res;
    bool operator<(const RaceKey& o) const {
        return std::tie(li, lj, res) < std::tie(o.li, o.lj, o.res);
    }
};

std::set<RaceKey> oracleKeys(const OracleReport& rep) {
    std::set<RaceKey> out;
    for (const auto& r : rep.races) out.insert({r.ei.loc, r.ej.loc, r.resource});
    return out;
}

} // namespace

TEST_CASE("criterion 1: uart pipeline replication") {
    Criterion c("criterion 1: uart pipeline replication (WN1..WN4, golden report, <10s)");
    ToolConfig cfg;
    PipelineResult r = run_pipeline(readCorpus("uart.idl"), PipelineStage::Validate, cfg);

    c.expect(r.warnings.size() == 4, "exactly 4 static warnings");
    // WN1..WN4 structure: (routine, access type) pairs
    auto structure = [&](int i, const std::string& ri, char ai, const std::string& rj, char aj) {
        const auto& w = r.warnings[size_t(i)].wn;
        return w.ei.routine == ri && (w.ei.type == AccessType::Write ? 'W' : 'R') == ai &&
               w.ej.routine == rj && (w.ej.type == AccessType::Write ? 'W' : 'R') == aj;
    };
    c.expect(structure(0, "transmit", 'R', "irq1_handler", 'W'), "WN1 structure");
    c.expect(structure(1, "transmit", 'R', "irq2_handler", 'W'), "WN2 structure");
    c.expect(structure(2, "irq2_handler", 'W', "irq1_handler", 'W'), "WN3 structure");
    c.expect(structure(3, "irq2_handler", 'W', "irq1_handler", 'R'), "WN4 structure");

    c.expect(r.warnings[2].symStatus == "Infeasible", "WN3 infeasible via the THR contradiction");
    c.expect(r.warnings[0].wn.status == WarningStatus::Confirmed, "WN1 confirmed");
    c.expect(r.warnings[3].wn.status == WarningStatus::Confirmed, "WN4 confirmed");
    c.expect(r.warnings[1].verdict == "RefutedDisabled", "WN2 refuted: line disabled");

    c.expect(report_json(r, cfg, PipelineStage::Validate) == readGolden("uart.validate.json"),
             "exact golden report match");
    c.expect(c.seconds() < 10.0, "runtime under 10 seconds");
}

TEST_CASE("criterion 2: keyboard-driver analog") {
    Criterion c("criterion 2: keyboard analog 4/4/4 (<10s)");
    ToolConfig cfg;
    PipelineResult r = run_pipeline(readCorpus("keyboard.idl"), PipelineStage::Validate, cfg);
    c.expect(r.warnings.size() == 4, "4 static warnings");
    int survived = 0, confirmed = 0;
    for (const auto& w : r.warnings) {
        if (w.symStatus == "Reachable") ++survived;
        if (w.wn.status == WarningStatus::Confirmed) ++confirmed;
    }
    c.expect(survived == 4, "4 survive symbolic execution");
    c.expect(confirmed == 4, "4 confirmed");
    c.expect(report_json(r, cfg, PipelineStage::Validate) == readGolden("keyboard.validate.json"),
             "golden report match");
    c.expect(c.seconds() < 10.0, "runtime under 10 seconds");
}

TEST_CASE("criterion 3: repair validity on the corpus") {
    Criterion c("criterion 3: repairs leave zero races, no new deadlocks (<5min)");
    for (const char* name : {"uart.idl", "keyboard.idl", "adjacent_pair.idl", "al_pattern.idl",
                             "ecs_pattern.idl", "atomicity.idl"}) {
        CAPTURE(name);
        ToolConfig cfg;
        std::string src = readCorpus(name);
        PipelineResult r = run_pipeline(src, PipelineStage::Repair, cfg);
        bool hadConfirmed = r.anyConfirmed();
        if (!hadConfirmed) continue;
        c.expect(r.repaired.has_value(), std::string(name) + ": repair produced a program");
        c.expect(r.repairReport.status == "Repaired", std::string(name) + ": fully repaired");

        // (a) the full pipeline reports zero confirmed races on the result
        PipelineResult again =
            run_pipeline(print_program(*r.repaired), PipelineStage::Validate, cfg);
        c.expect(!again.anyConfirmed(), std::string(name) + ": pipeline clean after repair");

        // (b) the bounded oracle agrees and the repair introduced no deadlock
        Program original = parseChecked(src);
        OracleOptions opts;
        opts.maxRuns = 600'000;
        OracleReport before = exhaustive_oracle(original, boundedSpace(original, r), opts);
        OracleReport after =
            exhaustive_oracle(*r.repaired, boundedSpace(*r.repaired, r), opts);
        c.expect(!after.budgetExceeded, std::string(name) + ": oracle within budget");
        c.expect(after.races.empty(), std::string(name) + ": oracle finds zero races");
        c.expect(after.deadlockRuns == 0 || before.deadlockRuns > 0,
                 std::string(name) + ": no deadlocks beyond pre-existing ones");
    }
    c.expect(c.seconds() < 300.0, "runtime under 5 minutes");
}

TEST_CASE("criterion 4: merge-fix arithmetic") {
    Criterion c("criterion 4: adjacent pair costs 4 operations after merging, not 8");
    Program parsed = parseChecked(readCorpus("adjacent_pair.idl"));
    ToolConfig cfg;
    PipelineResult r = run_pipeline(parsed, PipelineStage::Detect, cfg);
    c.expect(r.warnings.size() == 2, "two adjacent races");

    std::vector<PatchOp> all;
    int tag = 0, planIdx = 0;
    for (const auto& w : r.warnings) {
        RepairPlan plan = plan_lock_repair(r.program, w.wn, r.ricfgs, r.aliases);
        c.expect(plan.strategy == RepairStrategy::AL, "AL plan per race");
        std::map<std::string, int> tagOf;
        for (auto op : plan.patches) {
            auto [it, fresh] = tagOf.try_emplace(op.anchor.routine, tag);
            if (fresh) ++tag;
            op.tag = it->second;
            op.lockName = "__sdr_lock_" + std::to_string(planIdx);
            all.push_back(op);
        }
        ++planIdx;
    }
    ApplyResult applied = apply_patches(r.program, all);
    c.expect(count_generated_ops(applied.program) == 8, "8 operations before merging");
    Program merged = merge_fixes(applied.program);
    c.expect(count_generated_ops(merged) == 4, "exactly 4 operations after merging");
}

TEST_CASE("criterion 5: AL and ECS pattern fidelity") {
    Criterion c("criterion 5: fig.3 yields AL, fig.4 yields ECS, matching anchors");
    ToolConfig cfg;
    {
        Program p = parseChecked(readCorpus("al_pattern.idl"));
        PipelineResult r = run_pipeline(p, PipelineStage::Detect, cfg);
        REQUIRE(!r.warnings.empty());
        RepairPlan plan = plan_lock_repair(r.program, r.warnings[0].wn, r.ricfgs, r.aliases);
        c.expect(plan.strategy == RepairStrategy::AL, "fig.3 shape repaired by AL");
        int taskOps = 0, isrOps = 0;
        for (const auto& op : plan.patches) {
            bool lockish = op.kind == PatchOp::Kind::InsertLock || op.kind == PatchOp::Kind::InsertUnlock;
            c.expect(lockish, "AL inserts only lock operations");
            if (op.anchor.routine == "al_task") ++taskOps;
            if (op.anchor.routine == "al_isr") ++isrOps;
            c.expect(op.anchor.index == (op.anchor.routine == "al_task" ? 3 : 0),
                     "lock wraps the race code");
        }
        c.expect(taskOps == 2 && isrOps == 2, "new lock in both contexts");
    }
    {
        Program p = parseChecked(readCorpus("ecs_pattern.idl"));
        PipelineResult r = run_pipeline(p, PipelineStage::Detect, cfg);
        const WarningRecord* buf = nullptr;
        for (const auto& w : r.warnings)
            if (w.wn.resource == "buf") buf = &w;
        REQUIRE(buf);
        RepairPlan plan = plan_lock_repair(r.program, buf->wn, r.ricfgs, r.aliases);
        c.expect(plan.strategy == RepairStrategy::ECS, "fig.4 shape repaired by ECS");
        c.expect(plan.patches.size() == 2, "one widening per side");
        bool taskSide = false, isrSide = false;
        for (const auto& op : plan.patches) {
            c.expect(op.kind == PatchOp::Kind::MoveLock, "ECS only moves existing operations");
            if (op.moveFrom == Location{"ecs_task", 4} && op.anchor == Location{"ecs_task", 3} &&
                op.before)
                taskSide = true; // acquire moves up before the race code
            if (op.moveFrom == Location{"ecs_isr", 2} && op.anchor == Location{"ecs_isr", 3} &&
                !op.before)
                isrSide = true; // release moves down after the race code
        }
        c.expect(taskSide, "task lock acquire moved before the race code");
        c.expect(isrSide, "isr unlock moved after the race code");
    }
    // the documented blocked instance stays partially repaired
    {
        PipelineResult r = run_pipeline(readCorpus("unrepairable.idl"), PipelineStage::Repair, cfg);
        c.expect(r.repairReport.status == "PartiallyRepaired",
                 "Eq.1-blocked instance reported PartiallyRepaired");
    }
}

TEST_CASE("criterion 6: oracle soundness on random programs") {
    Criterion c("criterion 6: 200 random programs, oracle within static, confirms within oracle (<10min)");
    std::mt19937_64 seedRng(20260810);
    int raceyPrograms = 0, oracleRaces = 0, confirmedRaces = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::mt19937_64 rng(seedRng());
        std::string src = randomProgram(rng);
        CAPTURE(trial);
        CAPTURE(src);
        ParseResult pr = parse_program(src);
        REQUIRE(pr.ok());
        CheckResult chk = check_program(*pr.program);
        REQUIRE(chk.ok());

        ToolConfig cfg;
        cfg.seed = trial + 1;
        cfg.vmStepLimit = 20000;
        PipelineResult r = run_pipeline(*pr.program, PipelineStage::Validate, cfg);

        OracleOptions opts;
        opts.maxRuns = 120'000;
        opts.vm.stepLimit = 20000;
        auto space = full_input_space(r.program, 1u << 16);
        if (space.empty()) space = candidate_input_space(r.program, 4096);
        OracleReport rep = exhaustive_oracle(r.program, space, opts);
        if (rep.budgetExceeded) continue;

        std::set<RaceKey> oracle = oracleKeys(rep);
        std::set<RaceKey> staticKeys, confirmedKeys, infeasibleKeys;
        for (const auto& w : r.warnings) {
            RaceKey k{w.wn.ei.loc, w.wn.ej.loc, w.wn.resource};
            staticKeys.insert(k);
            if (w.wn.status == WarningStatus::Confirmed) confirmedKeys.insert(k);
            if (w.wn.status == WarningStatus::Infeasible) infeasibleKeys.insert(k);
        }
        if (!oracle.empty()) ++raceyPrograms;
        oracleRaces += static_cast<int>(oracle.size());
        confirmedRaces += static_cast<int>(confirmedKeys.size());

        for (const auto& k : oracle) {
            c.expect(staticKeys.count(k) == 1, "oracle race missed by the static stage");
            c.expect(infeasibleKeys.count(k) == 0, "oracle race marked infeasible");
        }
        for (const auto& k : confirmedKeys)
            c.expect(oracle.count(k) == 1, "confirmed race the oracle cannot reproduce");
    }
    // the suite must actually exercise racy programs to be meaningful
    c.expect(raceyPrograms >= 50, "enough racy programs generated");
    c.expect(oracleRaces >= 100, "enough oracle races observed");
    c.expect(confirmedRaces >= 50, "enough confirmed races observed");
    c.expect(c.seconds() < 600.0, "runtime under 10 minutes");
}

TEST_CASE("criterion 7: deterministic replay of every reachable input") {
    Criterion c("criterion 7: every Reachable input replays over e_i then e_j");
    auto checkReplay = [&](const Program& p, const PipelineResult& r, const char* label) {
        std::set<Location> others;
        for (const auto& w : r.warnings) others.insert(w.wn.ei.loc);
        for (const auto& w : r.warnings) {
            if (w.symStatus != "Reachable" || !w.input) continue;
            ValidationContext vctx;
            vctx.otherRacingPoints = others;
            ValidationVerdict v = validate_race(p, w.wn, *w.input, vctx);
            c.expect(v.eiCovered, std::string(label) + ": replay covers the first event");
            // lock blocking is outside the symbolic model; a wedged handler is
            // the dynamic stage's Deadlock verdict, not a replay failure
            c.expect(!v.isrFired || v.ejCovered || v.trace.deadlock,
                     std::string(label) + ": a fired handler reaches the second event");
        }
    };
    for (const char* name : {"uart.idl", "keyboard.idl", "adjacent_pair.idl", "al_pattern.idl",
                             "ecs_pattern.idl", "atomicity.idl", "unrepairable.idl"}) {
        ToolConfig cfg;
        PipelineResult r = run_pipeline(readCorpus(name), PipelineStage::Validate, cfg);
        checkReplay(r.program, r, name);
    }
    std::mt19937_64 seedRng(77);
    for (int trial = 0; trial < 60; ++trial) {
        std::mt19937_64 rng(seedRng());
        ParseResult pr = parse_program(randomProgram(rng));
        REQUIRE(pr.ok());
        if (!check_program(*pr.program).ok()) continue;
        ToolConfig cfg;
        cfg.seed = trial + 1;
        cfg.vmStepLimit = 20000;
        PipelineResult r = run_pipeline(*pr.program, PipelineStage::Validate, cfg);
        checkReplay(r.program, r, "random");
    }
}

TEST_CASE("criterion 8: numerical and structural micro-oracles") {
    Criterion c("criterion 8: dominators, solver, andersen vs brute force");
    // dominators: every digraph up to 4 nodes plus random ones to 15 are
    // checked in test_graphs; here sample a fixed family again end to end
    {
        std::mt19937 rng(31337);
        int graphs = 0;
        for (int trial = 0; trial < 120; ++trial) {
            int n = 2 + static_cast<int>(rng() % 14);
            std::vector<std::vector<int>> succ(n), pred(n);
            for (int u = 0; u < n; ++u)
                for (int v = 0; v < n; ++v)
                    if (u != v && rng() % 4 == 0) {
                        succ[u].push_back(v);
                        pred[v].push_back(u);
                    }
            auto dom = dominator_sets(n, pred, 0);
            // removal-based definitional check
            auto reachAvoid = [&](int from, int to, int avoid) {
                if (from == avoid) return false;
                std::deque<int> q{from};
                std::set<int> seen{from};
                while (!q.empty()) {
                    int x = q.front();
                    q.pop_front();
                    if (x == to) return true;
                    for (int v : succ[x])
                        if (v != avoid && seen.insert(v).second) q.push_back(v);
                }
                return false;
            };
            for (int t = 0; t < n; ++t) {
                if (!reachAvoid(0, t, -1)) continue;
                std::set<int> brute{t};
                for (int v = 0; v < n; ++v)
                    if (v != t && !reachAvoid(0, t, v)) brute.insert(v);
                if (dom[t] != brute) {
                    c.expect(false, "dominator mismatch");
                    break;
                }
            }
            ++graphs;
        }
        c.expect(graphs == 120, "dominator family complete");
    }
    // solver vs exhaustive enumeration on random 8-bit systems
    {
        WordOps w8(8);
        std::mt19937_64 seedRng(1001);
        for (int trial = 0; trial < 100; ++trial) {
            std::mt19937_64 rng(seedRng());
            std::vector<TermPtr> pc;
            int atoms = 1 + static_cast<int>(rng() % 4);
            for (int i = 0; i < atoms; ++i) {
                BinOp rels[] = {BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Ge};
                BinOp ops[] = {BinOp::Add, BinOp::And, BinOp::Xor, BinOp::Sub};
                TermPtr lhs = Term::mkBin(ops[rng() % 4],
                                          Term::mkSym(rng() % 2 ? "a" : "b"),
                                          Term::mkConst(static_cast<uint32_t>(rng() % 256), w8), w8);
                pc.push_back(Term::mkBin(rels[rng() % 4], lhs,
                                         Term::mkConst(static_cast<uint32_t>(rng() % 256), w8), w8));
            }
            SolverConfig scfg;
            std::mt19937_64 srng(rng());
            SolveResult got = solve(pc, w8, scfg, srng);
            bool truth = false;
            for (uint32_t a = 0; a < 256 && !truth; ++a)
                for (uint32_t b = 0; b < 256 && !truth; ++b) {
                    std::map<std::string, uint32_t> env{{"a", a}, {"b", b}};
                    bool ok = true;
                    for (const auto& t : pc)
                        if (eval_term(*t, env, w8) == 0) ok = false;
                    truth = ok;
                }
            c.expect(got.status == (truth ? SolveStatus::Sat : SolveStatus::Unsat),
                     "solver/enumeration disagreement");
            if (got.status == SolveStatus::Sat)
                for (const auto& t : pc)
                    c.expect(eval_term(*t, got.model, w8) != 0, "model fails an atom");
        }
    }
    // andersen vs the inline-everything oracle on random snippets
    {
        std::mt19937 rng(555);
        for (int trial = 0; trial < 100; ++trial) {
            std::ostringstream src;
            src << "global g0 = 0;\nglobal g1 = 0;\n";
            src << "task t prio 9 {\n  v = 0;\n  p = &g0;\n  q = &g1;\n";
            int stmts = 3 + static_cast<int>(rng() % 9);
            for (int i = 0; i < stmts; ++i) {
                const char* ptrs[] = {"p", "q"};
                const char* objs[] = {"g0", "g1", "v"};
                switch (rng() % 4) {
                case 0: src << "  " << ptrs[rng() % 2] << " = &" << objs[rng() % 3] << ";\n"; break;
                case 1: src << "  " << ptrs[rng() % 2] << " = " << ptrs[rng() % 2] << ";\n"; break;
                case 2: src << "  *" << ptrs[rng() % 2] << " = " << (rng() % 9) << ";\n"; break;
                default: src << "  v = *" << ptrs[rng() % 2] << ";\n"; break;
                }
            }
            src << "}\n";
            ParseResult pr = parse_program(src.str());
            REQUIRE(pr.ok());
            const Program& prog = *pr.program;
            AliasSet got = andersen_points_to(prog, *prog.find("t"));

            // independent saturation over the four inclusion rules
            auto qual = [&](const std::string& n) {
                return prog.findGlobal(n) ? n : "t::" + n;
            };
            std::map<std::string, std::set<std::string>> want;
            bool changed = true;
            while (changed) {
                changed = false;
                auto add = [&](const std::string& d, const std::string& v) {
                    if (want[d].insert(v).second) changed = true;
                };
                for (const auto& s : prog.find("t")->body) {
                    if (s->kind != Stmt::Kind::Assign) continue;
                    std::string lhs = qual(s->lhs);
                    if (s->rhsAddrOf && !s->lhsDeref) {
                        add(lhs, qual(s->addrName));
                    } else if (!s->rhsAddrOf && s->expr->kind == Expr::Kind::Var && !s->lhsDeref) {
                        for (const auto& v : want[qual(s->expr->name)]) add(lhs, v);
                    } else if (!s->rhsAddrOf && s->expr->kind == Expr::Kind::Deref && !s->lhsDeref) {
                        for (const auto& m : want[qual(s->expr->name)]) {
                            auto it = want.find(m);
                            if (it != want.end())
                                for (const auto& v : it->second) add(lhs, v);
                        }
                    } else if (s->lhsDeref && !s->rhsAddrOf && s->expr->kind == Expr::Kind::Var) {
                        for (const auto& m : std::set<std::string>(want[lhs]))
                            for (const auto& v : want[qual(s->expr->name)]) add(m, v);
                    }
                }
            }
            for (const auto& [ptr, targets] : want)
                for (const auto& v : targets) {
                    bool present = got.pts.count(ptr) && got.pts.at(ptr).count(v);
                    if (!present) c.expect(false, "alias pair missed by andersen: " + ptr + " -> " + v);
                }
        }
        c.expect(true, "andersen leg complete");
    }
}
