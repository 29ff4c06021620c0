// irqracer: detect, validate and repair interrupt-level races in IDL programs.

#include "irqracer/oracle.hpp"
#include "irqracer/pipeline.hpp"
#include "irqracer/parser.hpp"
#include "irqracer/checker.hpp"
#include "irqracer/printer.hpp"
#include "irqracer/repair.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace irqr;
using nlohmann::json;

namespace {

std::string readFile(const std::string& path, bool& ok) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ok = false;
        return {};
    }
    std::ostringstream os;
    os << in.rdbuf();
    ok = true;
    return os.str();
}

bool writeFile(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << text;
    return out.good();
}

// key=value config file, one entry per line, # comments
void loadConfigFile(const std::string& path, ToolConfig& cfg) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "timeout") cfg.symTimeoutSec = std::stod(val);
        else if (key == "lmax") cfg.lmax = std::stoi(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "step_limit") cfg.vmStepLimit = std::stoull(val);
        else if (key == "widening_max") cfg.maxWideningPerSection = std::stoi(val);
        else if (key == "oracle_budget") cfg.oracleBudget = std::stoull(val);
        else if (key == "solver_skip") cfg.solverSkip = val == "1" || val == "true";
        else if (key == "irqctl") cfg.irqctlRegisters.push_back(val);
    }
}

int emit(const PipelineResult& res, const ToolConfig& cfg, PipelineStage stage,
         const std::string& jsonPath) {
    if (!jsonPath.empty())
        if (!writeFile(jsonPath, report_json(res, cfg, stage))) {
            std::cerr << "cannot write " << jsonPath << "\n";
            return 2;
        }
    std::cout << report_summary(res, stage);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"interrupt-level race detection, validation and repair"};
    app.require_subcommand(1);

    std::string file, outPath, jsonPath, configPath;
    ToolConfig cfg;
    uint64_t oracleBudget = 0;

    auto addCommon = [&](CLI::App* cmd, bool needsFile = true) {
        if (needsFile) cmd->add_option("file", file, "IDL source file")->required();
        cmd->add_option("--timeout", cfg.symTimeoutSec, "symbolic execution timeout (seconds)");
        cmd->add_option("--lmax", cfg.lmax, "loop bound for symbolic execution");
        cmd->add_option("--seed", cfg.seed, "RNG seed");
        cmd->add_option("--json", jsonPath, "write the JSON report here");
        cmd->add_option("--config", configPath, "key=value config file");
        cmd->add_flag("--emit-timings", cfg.emitTimings, "include timings in the report");
        cmd->add_flag("--no-solver-skip",
                      [&cfg](size_t) { cfg.solverSkip = false; },
                      "solve at every branch instead of only at racing targets");
    };

    CLI::App* cDetect = app.add_subcommand("detect", "static stage only");
    addCommon(cDetect);
    CLI::App* cValidate = app.add_subcommand("validate", "static + symbolic + dynamic");
    addCommon(cValidate);
    CLI::App* cRepair = app.add_subcommand("repair", "full pipeline plus repair");
    addCommon(cRepair);
    cRepair->add_option("--out", outPath, "write the patched program here");
    CLI::App* cOracle = app.add_subcommand("oracle", "bounded exhaustive enumeration");
    addCommon(cOracle);
    cOracle->add_option("--budget", oracleBudget, "max oracle runs");
    CLI::App* cStrategies = app.add_subcommand("strategies", "print the repair strategy catalog");
    (void)cStrategies;
    CLI::App* cGraph = app.add_subcommand("graph", "dump DOT graphs for debugging");
    addCommon(cGraph);

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand("strategies")) {
        json js = json::array();
        for (const auto& e : strategy_catalog()) {
            js.push_back({{"key", e.key},
                          {"name", e.name},
                          {"description", e.description},
                          {"example", e.example},
                          {"applicationCondition", e.applicationCondition},
                          {"usedByIndustry", e.usedByIndustry},
                          {"automated", e.automated},
                          {"linuxTaskCount", e.linuxTaskCount},
                          {"linuxTaskPct", e.linuxTaskPct},
                          {"linuxIntCount", e.linuxIntCount},
                          {"linuxIntPct", e.linuxIntPct}});
        }
        std::cout << js.dump(2) << "\n";
        return 0;
    }

    if (!configPath.empty()) loadConfigFile(configPath, cfg);

    bool ok = false;
    std::string source = readFile(file, ok);
    if (!ok) {
        std::cerr << "cannot read " << file << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand("detect")) {
            PipelineResult res = run_pipeline(source, PipelineStage::Detect, cfg);
            if (!res.diags.empty()) {
                std::cerr << formatDiags(res.diags);
                return 2;
            }
            emit(res, cfg, PipelineStage::Detect, jsonPath);
            return res.anyWarnings() ? 1 : 0;
        }
        if (app.got_subcommand("validate")) {
            PipelineResult res = run_pipeline(source, PipelineStage::Validate, cfg);
            if (!res.diags.empty()) {
                std::cerr << formatDiags(res.diags);
                return 2;
            }
            emit(res, cfg, PipelineStage::Validate, jsonPath);
            return res.anyConfirmed() ? 1 : 0;
        }
        if (app.got_subcommand("repair")) {
            PipelineResult res = run_pipeline(source, PipelineStage::Repair, cfg);
            if (!res.diags.empty()) {
                std::cerr << formatDiags(res.diags);
                return 2;
            }
            if (!outPath.empty()) {
                // nothing confirmed: ship a byte-for-byte copy of the input
                bool untouched = !res.repaired || res.repairReport.status == "NoConfirmedRaces";
                std::string text = untouched ? source : print_program(*res.repaired);
                if (!writeFile(outPath, text)) {
                    std::cerr << "cannot write " << outPath << "\n";
                    return 2;
                }
                // and the patch alongside it
                std::string patch =
                    untouched ? std::string() : unified_diff(source, text, file, outPath);
                writeFile(outPath + ".patch", patch);
            }
            emit(res, cfg, PipelineStage::Repair, jsonPath);
            return 0;
        }
        if (app.got_subcommand("oracle")) {
            ParseResult pr = parse_program(source);
            if (!pr.ok()) {
                std::cerr << formatDiags(pr.diags);
                return 2;
            }
            CheckResult chk = check_program(*pr.program);
            if (!chk.ok()) {
                std::cerr << formatDiags(chk.diags);
                return 2;
            }
            OracleOptions opts;
            opts.maxRuns = oracleBudget ? oracleBudget : cfg.oracleBudget;
            opts.vm.stepLimit = cfg.vmStepLimit;
            opts.vm.extraIrqctlRegs.insert(cfg.irqctlRegisters.begin(),
                                           cfg.irqctlRegisters.end());
            auto space = full_input_space(*pr.program, 1u << 16);
            if (space.empty()) space = candidate_input_space(*pr.program, 4096);
            OracleReport rep = exhaustive_oracle(*pr.program, space, opts);
            json j;
            j["schema"] = "irqracer-oracle/1";
            j["runs"] = rep.runs;
            j["budgetExceeded"] = rep.budgetExceeded;
            j["deadlockRuns"] = rep.deadlockRuns;
            json races = json::array();
            for (const auto& r : rep.races)
                races.push_back({{"resource", r.resource},
                                 {"ei", {{"routine", r.ei.routine}, {"index", r.ei.loc.index}}},
                                 {"ej", {{"routine", r.ej.routine}, {"index", r.ej.loc.index}}}});
            j["races"] = races;
            if (!jsonPath.empty()) writeFile(jsonPath, j.dump(2) + "\n");
            std::cout << "oracle: " << rep.races.size() << " race(s), " << rep.deadlockRuns
                      << " deadlocked run(s), " << rep.runs << " runs\n";
            return 0;
        }
        if (app.got_subcommand("graph")) {
            ParseResult pr = parse_program(source);
            if (!pr.ok()) {
                std::cerr << formatDiags(pr.diags);
                return 2;
            }
            std::cout << dump_dot(build_icfg(*pr.program, 2));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
