#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "irqracer/pipeline.hpp"
#include "irqracer/printer.hpp"

#include "test_util.hpp"

using namespace irqr;

namespace {

std::string goldenPath(const std::string& name) {
    return std::string(IRQRACER_CORPUS_DIR) + "/expected/" + name;
}

std::string readFileAt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("empty program produces an empty report and no diagnostics") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(std::string{}, PipelineStage::Detect, cfg);
    CHECK(r.diags.empty());
    CHECK(r.warnings.empty());
    CHECK(!r.anyConfirmed());
}

TEST_CASE("malformed source surfaces diagnostics instead of warnings") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(std::string("task {"), PipelineStage::Detect, cfg);
    CHECK(!r.diags.empty());
    std::string js = report_json(r, cfg, PipelineStage::Detect);
    CHECK(js.find("SyntaxError") != std::string::npos);
}

TEST_CASE("uart detect report matches the frozen golden byte for byte") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(readCorpus("uart.idl"), PipelineStage::Detect, cfg);
    CHECK(report_json(r, cfg, PipelineStage::Detect) == readFileAt(goldenPath("uart.detect.json")));
}

TEST_CASE("uart validate report matches the frozen golden byte for byte") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(readCorpus("uart.idl"), PipelineStage::Validate, cfg);
    CHECK(report_json(r, cfg, PipelineStage::Validate) ==
          readFileAt(goldenPath("uart.validate.json")));
}

TEST_CASE("keyboard validate report matches the frozen golden byte for byte") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(readCorpus("keyboard.idl"), PipelineStage::Validate, cfg);
    CHECK(report_json(r, cfg, PipelineStage::Validate) ==
          readFileAt(goldenPath("keyboard.validate.json")));
}

TEST_CASE("reports are byte-identical across runs under one seed and config") {
    ToolConfig cfg;
    cfg.seed = 99;
    PipelineResult a = run_pipeline(readCorpus("uart.idl"), PipelineStage::Validate, cfg);
    PipelineResult b = run_pipeline(readCorpus("uart.idl"), PipelineStage::Validate, cfg);
    CHECK(report_json(a, cfg, PipelineStage::Validate) ==
          report_json(b, cfg, PipelineStage::Validate));
}

TEST_CASE("the seed is echoed into every report") {
    ToolConfig cfg;
    cfg.seed = 4242;
    PipelineResult r = run_pipeline(readCorpus("uart.idl"), PipelineStage::Detect, cfg);
    std::string js = report_json(r, cfg, PipelineStage::Detect);
    CHECK(js.find("\"seed\": 4242") != std::string::npos);
}

TEST_CASE("all-interrupts-disabled program validates everything refuted") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(
        std::string("global g = 0;\n"
                    "task t prio 9 { irq_disable_all; g = 1; }\n"
                    "isr i line 1 prio 1 { g = 2; }\n"),
        PipelineStage::Validate, cfg);
    CHECK(!r.anyConfirmed());
}

TEST_CASE("repair stage on uart ships a clean patched program") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(readCorpus("uart.idl"), PipelineStage::Repair, cfg);
    REQUIRE(r.repaired.has_value());
    CHECK(r.repairReport.status == "Repaired");
    CHECK(r.repairReport.insertedOps == 4);

    ToolConfig cfg2;
    PipelineResult again =
        run_pipeline(print_program(*r.repaired), PipelineStage::Validate, cfg2);
    CHECK(again.diags.empty());
    CHECK(!again.anyConfirmed());
}

TEST_CASE("repair stage reports PartiallyRepaired for the blocked instance") {
    ToolConfig cfg;
    PipelineResult r = run_pipeline(readCorpus("unrepairable.idl"), PipelineStage::Repair, cfg);
    CHECK(r.repairReport.status == "PartiallyRepaired");
    CHECK(!r.repairReport.surviving.empty());
}

TEST_CASE("input spaces: full enumeration within budget, candidates from constants") {
    Program p = parseChecked("width 8;\nregister R width 8;\nglobal g = 0;\n"
                             "task t prio 9 { g = R; }\nisr i line 1 prio 1 { g = 2; }\n");
    auto space = full_input_space(p, 1u << 16);
    CHECK(space.size() == 256);
    auto tooBig = full_input_space(parseChecked(readCorpus("uart.idl")), 1u << 16);
    CHECK(tooBig.empty()); // three 16-bit inputs cannot be fully enumerated

    auto cands = candidate_input_space(parseChecked(readCorpus("uart.idl")), 4096);
    CHECK(!cands.empty());
    bool hasPaperThr = false;
    for (const auto& a : cands)
        if (a.values.at("THR") == 0x0111) hasPaperThr = true;
    CHECK(hasPaperThr); // program constants seed the candidate grid
}
