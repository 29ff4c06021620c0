#include "irqracer/pipeline.hpp"
#include "irqracer/checker.hpp"
#include "irqracer/oracle.hpp"
#include "irqracer/parser.hpp"
#include "irqracer/printer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <sstream>

using nlohmann::json;

namespace irqr {

bool PipelineResult::anyConfirmed() const {
    for (const auto& w : warnings)
        if (w.wn.status == WarningStatus::Confirmed) return true;
    return false;
}

std::string source_digest(const std::string& source) {
    // FNV-1a, enough to pin a corpus file in a report
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : source) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

namespace {

std::string statusName(WarningStatus s) {
    switch (s) {
    case WarningStatus::Static: return "Static";
    case WarningStatus::InputFound: return "InputFound";
    case WarningStatus::Infeasible: return "Infeasible";
    case WarningStatus::Inconclusive: return "Inconclusive";
    case WarningStatus::Confirmed: return "Confirmed";
    case WarningStatus::RefutedDynamic: return "RefutedDynamic";
    }
    return "?";
}

std::string accessName(AccessType t) { return t == AccessType::Write ? "W" : "R"; }

VmConfig vmConfig(const ToolConfig& cfg) {
    VmConfig vm;
    vm.stepLimit = cfg.vmStepLimit;
    vm.extraIrqctlRegs.insert(cfg.irqctlRegisters.begin(), cfg.irqctlRegisters.end());
    return vm;
}

SymBudget symBudget(const ToolConfig& cfg) {
    SymBudget b;
    b.stepBudget = cfg.symStepBudget;
    b.timeoutSec = cfg.symTimeoutSec;
    b.lmax = cfg.lmax;
    b.seed = cfg.seed;
    b.solverSkip = cfg.solverSkip;
    b.solver.enumBudget = cfg.solverEnumBudget;
    b.solver.randomProbes = cfg.solverProbes;
    return b;
}

struct StageData {
    AliasSet aliases;
    SharedResources shared;
    InterruptOpList itrl;
    Icfg icfg; // ricfg nodes point into its unrolled statement clones
    std::map<std::string, Ricfg> ricfgs;
    std::map<std::string, IntbMap> intb;
    std::vector<RaceWarning> warnings;
};

StageData runStatic(const Program& p, const ToolConfig& cfg) {
    StageData d;
    d.aliases = link_alias_sets(p);
    d.shared = identify_shared_resources(p, d.aliases);
    std::set<std::string> extraIrqctl(cfg.irqctlRegisters.begin(), cfg.irqctlRegisters.end());
    d.itrl = identify_interrupt_ops(p, extraIrqctl);

    // retention inputs: shared accesses plus every hardware/input-point access
    RicfgInputs in;
    auto inputPoints = identify_input_points(p);
    for (const auto& a : collect_accesses(p, d.aliases)) {
        if (d.shared.srs.contains(a.realName) || p.findRegister(a.realName) ||
            inputPoints.count(a.realName))
            in.accessLocs.insert(a.loc);
    }
    in.itrlLocs = implicit_itrl_locations(d.itrl, p);

    d.icfg = build_icfg(p, 2);
    for (const auto& r : p.routines) {
        d.ricfgs.emplace(r.name, build_ricfg(d.icfg, p, r.name, in));
        d.intb.emplace(r.name, propagate_intb(d.ricfgs.at(r.name), d.itrl, p));
    }

    // the warning pairing works over context-attributed events: an access in a
    // helper belongs to every task/ISR whose call closure reaches it
    std::vector<SharedResourceAccess> ctxAccesses;
    for (const auto& r : p.routines) {
        std::set<std::string> closure{r.name};
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& name : std::set<std::string>(closure)) {
                const Routine* rr = p.find(name);
                if (!rr) continue;
                std::function<void(const StmtList&)> scan = [&](const StmtList& body) {
                    for (const auto& s : body) {
                        if (s->kind == Stmt::Kind::Call) {
                            const Routine* callee = p.find(s->callee);
                            if (callee && !callee->isIsr() && closure.insert(s->callee).second)
                                grew = true;
                        }
                        scan(s->thenBody);
                        scan(s->elseBody);
                    }
                };
                scan(rr->body);
            }
        }
        for (const auto& a : d.shared.accesses)
            if (closure.count(a.loc.routine)) {
                SharedResourceAccess c = a;
                c.routine = r.name;
                ctxAccesses.push_back(c);
            }
    }
    std::sort(ctxAccesses.begin(), ctxAccesses.end());
    ctxAccesses.erase(std::unique(ctxAccesses.begin(), ctxAccesses.end()), ctxAccesses.end());

    d.warnings = detect_static_races(p, d.ricfgs, ctxAccesses, d.intb);
    return d;
}

std::vector<ConfirmedRace> confirmedOf(const Program& p, const ToolConfig& cfg);

void runDynamicStages(const Program& p, const ToolConfig& cfg, StageData& d,
                      std::vector<WarningRecord>& out) {
    std::set<Location> allEi;
    for (const auto& w : d.warnings) allEi.insert(w.ei.loc);

    std::mt19937_64 retryRng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    auto inputPoints = identify_input_points(p);

    for (size_t i = 0; i < d.warnings.size(); ++i) {
        WarningRecord rec;
        rec.wn = d.warnings[i];

        const Ricfg& gi = d.ricfgs.at(rec.wn.ei.routine);
        const Ricfg& gj = d.ricfgs.at(rec.wn.ej.routine);
        Iccfg iccfg = build_iccfg(gi, gj, rec.wn.ei.loc, rec.wn.ej.loc);

        SymBudget budget = symBudget(cfg);
        budget.seed = cfg.seed + i; // independent exploration per warning
        auto t0 = std::chrono::steady_clock::now();
        SymExecResult sym = guided_explore(p, iccfg, rec.wn, d.warnings, budget);
        rec.symSeconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        ValidationContext vctx;
        vctx.vm = vmConfig(cfg);
        vctx.otherRacingPoints = allEi;

        switch (sym.kind) {
        case SymExecResult::Kind::Infeasible:
            rec.symStatus = "Infeasible";
            rec.wn.status = WarningStatus::Infeasible;
            break;
        case SymExecResult::Kind::Reachable: {
            rec.symStatus = "Reachable";
            rec.input = sym.input;
            rec.wn.status = WarningStatus::InputFound;
            auto t1 = std::chrono::steady_clock::now();
            ValidationVerdict v = validate_race(p, rec.wn, sym.input, vctx);
            rec.dynSeconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
            rec.verdict = verdictName(v.kind);
            rec.harmful = v.harmful;
            rec.wn.status = v.kind == VerdictKind::Confirmed ? WarningStatus::Confirmed
                            : v.kind == VerdictKind::Deadlock ? WarningStatus::Inconclusive
                                                              : WarningStatus::RefutedDynamic;
            break;
        }
        case SymExecResult::Kind::Inconclusive: {
            rec.symStatus = "Inconclusive";
            rec.symReason = sym.reason;
            rec.wn.status = WarningStatus::Inconclusive;
            // the paper forwards type-3 outputs to dynamic validation: try a
            // few concrete inputs
            for (int attempt = 0; attempt < cfg.inconclusiveRetries; ++attempt) {
                InputAssignment in;
                for (const auto& ip : inputPoints)
                    in.values[ip] = static_cast<uint32_t>(retryRng());
                ValidationVerdict v = validate_race(p, rec.wn, in, vctx);
                if (v.kind == VerdictKind::Confirmed) {
                    rec.input = in;
                    rec.verdict = verdictName(v.kind);
                    rec.harmful = v.harmful;
                    rec.wn.status = WarningStatus::Confirmed;
                    break;
                }
            }
            break;
        }
        }
        out.push_back(std::move(rec));
    }
}

std::vector<ConfirmedRace> confirmedOf(const Program& p, const ToolConfig& cfg) {
    StageData d = runStatic(p, cfg);
    std::vector<WarningRecord> recs;
    runDynamicStages(p, cfg, d, recs);
    std::vector<ConfirmedRace> out;
    for (const auto& r : recs)
        if (r.wn.status == WarningStatus::Confirmed && r.input)
            out.push_back({r.wn, *r.input});
    return out;
}

} // namespace

PipelineResult run_pipeline(const Program& p, PipelineStage stage, const ToolConfig& cfg) {
    PipelineResult res;
    res.program = p.clone();
    res.sourceDigest = source_digest(print_program(p));

    CheckResult chk = check_program(res.program);
    if (!chk.ok()) {
        res.diags = chk.diags;
        return res;
    }

    StageData d = runStatic(res.program, cfg);
    res.aliases = d.aliases;
    res.shared = d.shared;
    res.itrl = d.itrl;
    res.ricfgs = d.ricfgs;
    res.intb = d.intb;

    if (stage == PipelineStage::Detect) {
        for (const auto& w : d.warnings) {
            WarningRecord rec;
            rec.wn = w;
            res.warnings.push_back(rec);
        }
        res.icfg = std::move(d.icfg);
        return res;
    }

    runDynamicStages(res.program, cfg, d, res.warnings);

    if (stage == PipelineStage::Repair) {
        std::vector<ConfirmedRace> confirmed;
        for (const auto& r : res.warnings)
            if (r.wn.status == WarningStatus::Confirmed && r.input)
                confirmed.push_back({r.wn, *r.input});

        RepairHooks hooks;
        hooks.confirmed = [&cfg](const Program& candidate) {
            return confirmedOf(candidate, cfg);
        };
        RepairConfig rcfg;
        rcfg.maxWideningPerSection = cfg.maxWideningPerSection;
        rcfg.maxRounds = cfg.maxRepairRounds;
        rcfg.vm = vmConfig(cfg);

        auto [patched, report] = repair_and_validate(res.program, confirmed, hooks, rcfg,
                                                     d.ricfgs, d.aliases);
        res.repaired = std::move(patched);
        res.repairReport = std::move(report);
        for (auto& rec : res.warnings)
            for (const auto& plan : res.repairReport.plans)
                if (plan.warning.ei.loc == rec.wn.ei.loc && plan.warning.ej.loc == rec.wn.ej.loc &&
                    plan.warning.resource == rec.wn.resource)
                    rec.strategy = strategyName(plan.strategy);
    }
    res.icfg = std::move(d.icfg);
    return res;
}

PipelineResult run_pipeline(const std::string& source, PipelineStage stage,
                            const ToolConfig& cfg) {
    ParseResult pr = parse_program(source);
    if (!pr.program) {
        PipelineResult res;
        res.diags = pr.diags;
        res.sourceDigest = source_digest(source);
        return res;
    }
    PipelineResult res = run_pipeline(*pr.program, stage, cfg);
    res.sourceDigest = source_digest(source);
    return res;
}

namespace {

json locJson(const Location& l) { return json{{"routine", l.routine}, {"index", l.index}}; }

json eventJson(const RaceEvent& e) {
    return json{{"routine", e.routine}, {"location", locJson(e.loc)}, {"access", accessName(e.type)}};
}

} // namespace

std::string report_json(const PipelineResult& r, const ToolConfig& cfg, PipelineStage stage) {
    json j;
    j["schema"] = "irqracer-report/1";
    j["stage"] = stage == PipelineStage::Detect     ? "detect"
                 : stage == PipelineStage::Validate ? "validate"
                                                    : "repair";
    j["program"] = {{"digest", r.sourceDigest}};
    j["config"] = {
        {"seed", cfg.seed},
        {"lmax", cfg.lmax},
        {"symTimeoutSec", cfg.symTimeoutSec},
        {"vmStepLimit", cfg.vmStepLimit},
        {"solverSkip", cfg.solverSkip},
    };
    if (!r.diags.empty()) {
        json ds = json::array();
        for (const auto& d : r.diags)
            ds.push_back({{"kind", diagKindName(d.kind)}, {"message", d.message}, {"line", d.line}});
        j["diagnostics"] = ds;
        return j.dump(2) + "\n";
    }

    json srs = json::array();
    for (const auto& n : r.shared.srs.names) srs.push_back(n);
    j["sharedResources"] = srs;

    json ws = json::array();
    for (size_t i = 0; i < r.warnings.size(); ++i) {
        const auto& w = r.warnings[i];
        json wj;
        wj["id"] = "WN" + std::to_string(i + 1);
        wj["resource"] = w.wn.resource;
        wj["ei"] = eventJson(w.wn.ei);
        wj["ej"] = eventJson(w.wn.ej);
        wj["status"] = statusName(w.wn.status);
        if (!w.symStatus.empty()) {
            wj["symbolic"] = w.symStatus;
            if (!w.symReason.empty()) wj["symbolicReason"] = w.symReason;
        }
        if (w.input) {
            json in;
            for (const auto& [k, v] : w.input->values) in[k] = v;
            wj["input"] = in;
        }
        if (!w.verdict.empty()) {
            wj["verdict"] = w.verdict;
            if (w.verdict == "Confirmed") wj["harmful"] = w.harmful;
        }
        if (!w.strategy.empty()) wj["strategy"] = w.strategy;
        if (cfg.emitTimings) {
            wj["symSeconds"] = w.symSeconds;
            wj["dynSeconds"] = w.dynSeconds;
        }
        ws.push_back(wj);
    }
    j["warnings"] = ws;

    if (stage == PipelineStage::Repair) {
        json rep;
        rep["status"] = r.repairReport.status;
        rep["rounds"] = r.repairReport.rounds;
        rep["insertedOperations"] = r.repairReport.insertedOps;
        rep["mergeApplied"] = r.repairReport.mergeApplied;
        json plans = json::array();
        for (const auto& plan : r.repairReport.plans) {
            json pj;
            pj["strategy"] = strategyName(plan.strategy);
            pj["resource"] = plan.warning.resource;
            pj["ei"] = eventJson(plan.warning.ei);
            if (!plan.note.empty()) pj["note"] = plan.note;
            json ops = json::array();
            for (const auto& op : plan.patches) {
                json oj;
                switch (op.kind) {
                case PatchOp::Kind::InsertIrqDisable: oj["op"] = "irq_disable"; break;
                case PatchOp::Kind::InsertIrqEnable: oj["op"] = "irq_enable"; break;
                case PatchOp::Kind::InsertLock: oj["op"] = "lock"; break;
                case PatchOp::Kind::InsertUnlock: oj["op"] = "unlock"; break;
                case PatchOp::Kind::MoveLock: oj["op"] = "move"; break;
                }
                if (op.irqLine) oj["line"] = op.irqLine;
                if (!op.lockName.empty()) oj["lock"] = op.lockName;
                oj["anchor"] = locJson(op.anchor);
                oj["side"] = op.before ? "before" : "after";
                if (op.kind == PatchOp::Kind::MoveLock) oj["from"] = locJson(op.moveFrom);
                ops.push_back(oj);
            }
            pj["patches"] = ops;
            plans.push_back(pj);
        }
        rep["plans"] = plans;
        json surv = json::array();
        for (const auto& s : r.repairReport.surviving)
            surv.push_back({{"resource", s.resource}, {"ei", eventJson(s.ei)}, {"ej", eventJson(s.ej)}});
        rep["surviving"] = surv;
        j["repair"] = rep;
    }
    return j.dump(2) + "\n";
}

std::string report_summary(const PipelineResult& r, PipelineStage stage) {
    std::ostringstream os;
    if (!r.diags.empty()) {
        os << formatDiags(r.diags);
        return os.str();
    }
    os << r.warnings.size() << " static warning(s)\n";
    for (size_t i = 0; i < r.warnings.size(); ++i) {
        const auto& w = r.warnings[i];
        os << "  WN" << (i + 1) << " " << w.wn.resource << "  <" << w.wn.ei.routine << ":"
           << w.wn.ei.loc.index << "," << accessName(w.wn.ei.type) << "> -> <" << w.wn.ej.routine
           << ":" << w.wn.ej.loc.index << "," << accessName(w.wn.ej.type) << ">";
        if (stage != PipelineStage::Detect) {
            os << "  [" << statusName(w.wn.status);
            if (!w.verdict.empty()) os << "/" << w.verdict;
            if (w.wn.status == WarningStatus::Confirmed)
                os << (w.harmful ? ", harmful" : ", benign");
            os << "]";
            if (!w.strategy.empty()) os << " repair=" << w.strategy;
        }
        os << "\n";
    }
    if (stage == PipelineStage::Repair) {
        os << "repair: " << r.repairReport.status << ", " << r.repairReport.insertedOps
           << " inserted op(s), " << r.repairReport.rounds << " validation round(s)\n";
    }
    return os.str();
}

std::string unified_diff(const std::string& before, const std::string& after,
                         const std::string& beforeName, const std::string& afterName) {
    auto splitLines = [](const std::string& s) {
        std::vector<std::string> out;
        std::istringstream is(s);
        std::string line;
        while (std::getline(is, line)) out.push_back(line);
        return out;
    };
    std::vector<std::string> a = splitLines(before), b = splitLines(after);

    // plain LCS; corpus programs are tiny
    size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = n; i-- > 0;)
        for (size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1
                                     : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    struct Op {
        char tag; // ' ', '-', '+'
        const std::string* line;
    };
    std::vector<Op> ops;
    size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j]) {
            ops.push_back({' ', &a[i]});
            ++i;
            ++j;
        } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
            ops.push_back({'-', &a[i++]});
        } else {
            ops.push_back({'+', &b[j++]});
        }
    }
    while (i < n) ops.push_back({'-', &a[i++]});
    while (j < m) ops.push_back({'+', &b[j++]});

    std::ostringstream os;
    os << "--- " << beforeName << "\n+++ " << afterName << "\n";
    const int ctx = 2;
    size_t k = 0, ai = 0, bi = 0, floorIdx = 0;
    while (k < ops.size()) {
        if (ops[k].tag == ' ') {
            ++k;
            ++ai;
            ++bi;
            continue;
        }
        // hunk: back up for context, never into the previous hunk
        size_t start = k;
        size_t backup = 0;
        while (start > floorIdx && ops[start - 1].tag == ' ' && backup < ctx) {
            --start;
            ++backup;
        }
        size_t aStart = ai - backup, bStart = bi - backup;
        size_t end = k;
        size_t quiet = 0;
        size_t aCount = backup, bCount = backup;
        size_t aEnd = ai, bEnd = bi;
        while (end < ops.size() && quiet <= ctx) {
            if (ops[end].tag == ' ') ++quiet;
            else quiet = 0;
            if (ops[end].tag != '+') ++aEnd;
            if (ops[end].tag != '-') ++bEnd;
            ++end;
        }
        aCount += aEnd - ai;
        bCount += bEnd - bi;
        os << "@@ -" << (aStart + 1) << "," << aCount << " +" << (bStart + 1) << "," << bCount
           << " @@\n";
        for (size_t q = start; q < end; ++q) os << ops[q].tag << *ops[q].line << "\n";
        ai = aEnd;
        bi = bEnd;
        k = end;
        floorIdx = end;
    }
    return os.str();
}

std::vector<InputAssignment> full_input_space(const Program& p, uint64_t maxAssignments) {
    auto points = identify_input_points(p);
    std::vector<std::string> order(points.begin(), points.end());
    std::vector<std::vector<uint32_t>> domains;
    uint64_t total = 1;
    for (const auto& ip : order) {
        unsigned width = p.wordWidth;
        if (const RegisterDecl* r = p.findRegister(ip)) width = r->width;
        uint64_t n = 1ull << width;
        total *= n;
        if (total > maxAssignments) return {}; // caller falls back to candidates
        std::vector<uint32_t> vs(n);
        for (uint64_t v = 0; v < n; ++v) vs[v] = static_cast<uint32_t>(v);
        domains.push_back(std::move(vs));
    }
    std::vector<InputAssignment> out;
    std::vector<size_t> idx(order.size(), 0);
    for (;;) {
        InputAssignment a;
        for (size_t i = 0; i < order.size(); ++i) a.values[order[i]] = domains[i][idx[i]];
        out.push_back(std::move(a));
        size_t i = 0;
        while (i < idx.size() && ++idx[i] == domains[i].size()) idx[i++] = 0;
        if (idx.empty() || i == idx.size()) break;
    }
    return out;
}

namespace {

void mineProgramConstants(const Expr& e, std::set<uint32_t>& out) {
    if (e.kind == Expr::Kind::IntLit) out.insert(e.value);
    if (e.a) mineProgramConstants(*e.a, out);
    if (e.b) mineProgramConstants(*e.b, out);
}

} // namespace

std::vector<InputAssignment> candidate_input_space(const Program& p, uint64_t maxAssignments,
                                                   const std::vector<InputAssignment>& extra) {
    auto points = identify_input_points(p);
    std::vector<std::string> order(points.begin(), points.end());

    std::set<uint32_t> consts;
    std::function<void(const StmtList&)> scan = [&](const StmtList& body) {
        for (const auto& s : body) {
            if (s->expr) mineProgramConstants(*s->expr, consts);
            for (const auto& a : s->args)
                if (a.expr) mineProgramConstants(*a.expr, consts);
            scan(s->thenBody);
            scan(s->elseBody);
        }
    };
    for (const auto& r : p.routines) scan(r.body);

    WordOps w(p.wordWidth);
    std::set<uint32_t> values{0, 1, w.mask()};
    for (uint32_t c : consts) {
        values.insert(w.trunc(c));
        values.insert(w.add(c, 1));
        values.insert(w.sub(c, 1));
    }

    std::vector<uint32_t> vs(values.begin(), values.end());
    std::vector<InputAssignment> out;
    std::vector<size_t> idx(order.size(), 0);
    if (order.empty()) {
        out.push_back({});
    } else {
        for (;;) {
            InputAssignment a;
            for (size_t i = 0; i < order.size(); ++i) a.values[order[i]] = vs[idx[i]];
            out.push_back(std::move(a));
            if (out.size() >= maxAssignments) break;
            size_t i = 0;
            while (i < idx.size() && ++idx[i] == vs.size()) idx[i++] = 0;
            if (i == idx.size()) break;
        }
    }
    for (const auto& e : extra) {
        InputAssignment a;
        for (const auto& ip : order) {
            auto it = e.values.find(ip);
            a.values[ip] = it == e.values.end() ? 0u : it->second;
        }
        out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace irqr
