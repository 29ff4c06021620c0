#pragma once

#include "irqracer/ast.hpp"
#include "irqracer/word.hpp"

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace irqr {

// Fixed-width bit-vector terms over symbolic inputs. Smart constructors fold
// constants so closed terms collapse immediately.
struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
    enum class Kind { Const, Sym, Un, Bin };
    Kind kind = Kind::Const;
    uint32_t value = 0;  // Const
    std::string sym;     // Sym
    UnOp uop{};
    BinOp bop{};
    TermPtr a, b;

    static TermPtr mkConst(uint32_t v, const WordOps& w);
    static TermPtr mkSym(std::string name);
    static TermPtr mkUn(UnOp op, TermPtr x, const WordOps& w);
    static TermPtr mkBin(BinOp op, TermPtr l, TermPtr r, const WordOps& w);

    bool isConst() const { return kind == Kind::Const; }
    std::string str() const;
};

uint32_t eval_term(const Term& t, const std::map<std::string, uint32_t>& env, const WordOps& w);
void collect_syms(const Term& t, std::set<std::string>& out);

enum class SolveStatus { Sat, Unsat, Unknown };

struct SolveResult {
    SolveStatus status = SolveStatus::Unknown;
    std::map<std::string, uint32_t> model; // Sat only; verified by evaluation
};

struct SolverConfig {
    uint64_t enumBudget = 1u << 20; // max assignments to enumerate exhaustively
    int randomProbes = 64;
    int candidateCap = 4096;
    std::map<std::string, unsigned> symWidths; // per-symbol width (registers)
};

// Interval/exclusion propagation on single-variable atoms, exhaustive
// enumeration when the residual space fits the budget, and seeded probing
// over constants mined from the constraints otherwise. Every atom in `pc`
// must evaluate nonzero under a returned model.
SolveResult solve(const std::vector<TermPtr>& pc, const WordOps& w, const SolverConfig& cfg,
                  std::mt19937_64& rng,
                  const std::vector<std::map<std::string, uint32_t>>& seeds = {});

} // namespace irqr
