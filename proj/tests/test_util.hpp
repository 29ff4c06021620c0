#pragma once

#include "irqracer/checker.hpp"
#include "irqracer/parser.hpp"

#include <fstream>
#include <sstream>
#include <string>

inline std::string readCorpus(const std::string& name) {
    std::ifstream in(std::string(IRQRACER_CORPUS_DIR) + "/" + name, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline irqr::Program parseChecked(const std::string& source) {
    irqr::ParseResult pr = irqr::parse_program(source);
    REQUIRE(pr.program.has_value());
    irqr::CheckResult chk = irqr::check_program(*pr.program);
    if (!chk.ok()) INFO(irqr::formatDiags(chk.diags));
    REQUIRE(chk.ok());
    return std::move(*pr.program);
}
