#include "irqracer/solver.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <sstream>

namespace irqr {

TermPtr Term::mkConst(uint32_t v, const WordOps& w) {
    auto t = std::make_shared<Term>();
    t->kind = Kind::Const;
    t->value = w.trunc(v);
    return t;
}

TermPtr Term::mkSym(std::string name) {
    auto t = std::make_shared<Term>();
    t->kind = Kind::Sym;
    t->sym = std::move(name);
    return t;
}

TermPtr Term::mkUn(UnOp op, TermPtr x, const WordOps& w) {
    if (x->isConst()) {
        uint32_t v = op == UnOp::Neg ? w.neg(x->value) : (x->value == 0 ? 1u : 0u);
        return mkConst(v, w);
    }
    auto t = std::make_shared<Term>();
    t->kind = Kind::Un;
    t->uop = op;
    t->a = std::move(x);
    return t;
}

TermPtr Term::mkBin(BinOp op, TermPtr l, TermPtr r, const WordOps& w) {
    if (l->isConst() && r->isConst()) {
        std::map<std::string, uint32_t> none;
        auto t = std::make_shared<Term>();
        t->kind = Kind::Bin;
        t->bop = op;
        t->a = l;
        t->b = r;
        return mkConst(eval_term(*t, none, w), w);
    }
    auto t = std::make_shared<Term>();
    t->kind = Kind::Bin;
    t->bop = op;
    t->a = std::move(l);
    t->b = std::move(r);
    return t;
}

std::string Term::str() const {
    switch (kind) {
    case Kind::Const: return std::to_string(value);
    case Kind::Sym: return sym;
    case Kind::Un: return (uop == UnOp::Neg ? "-(" : "!(") + a->str() + ")";
    case Kind::Bin: {
        static const char* names[] = {"+", "-", "*", "&", "|", "^", "<<", ">>",
                                      "==", "!=", "<", "<=", ">", ">=", "&&", "||"};
        return "(" + a->str() + " " + names[static_cast<int>(bop)] + " " + b->str() + ")";
    }
    }
    return "?";
}

uint32_t eval_term(const Term& t, const std::map<std::string, uint32_t>& env, const WordOps& w) {
    switch (t.kind) {
    case Term::Kind::Const:
        return t.value;
    case Term::Kind::Sym: {
        auto it = env.find(t.sym);
        return it == env.end() ? 0u : w.trunc(it->second);
    }
    case Term::Kind::Un: {
        uint32_t a = eval_term(*t.a, env, w);
        return t.uop == UnOp::Neg ? w.neg(a) : (a == 0 ? 1u : 0u);
    }
    case Term::Kind::Bin: {
        uint32_t a = eval_term(*t.a, env, w);
        uint32_t b = eval_term(*t.b, env, w);
        switch (t.bop) {
        case BinOp::Add: return w.add(a, b);
        case BinOp::Sub: return w.sub(a, b);
        case BinOp::Mul: return w.mul(a, b);
        case BinOp::And: return w.band(a, b);
        case BinOp::Or: return w.bor(a, b);
        case BinOp::Xor: return w.bxor(a, b);
        case BinOp::Shl: return w.shl(a, b);
        case BinOp::Shr: return w.shr(a, b);
        case BinOp::Eq: return a == b;
        case BinOp::Ne: return a != b;
        case BinOp::Lt: return w.lt(a, b);
        case BinOp::Le: return w.le(a, b);
        case BinOp::Gt: return w.lt(b, a);
        case BinOp::Ge: return w.le(b, a);
        case BinOp::LAnd: return (a != 0 && b != 0) ? 1u : 0u;
        case BinOp::LOr: return (a != 0 || b != 0) ? 1u : 0u;
        }
        return 0;
    }
    }
    return 0;
}

void collect_syms(const Term& t, std::set<std::string>& out) {
    switch (t.kind) {
    case Term::Kind::Sym: out.insert(t.sym); break;
    case Term::Kind::Un: collect_syms(*t.a, out); break;
    case Term::Kind::Bin:
        collect_syms(*t.a, out);
        collect_syms(*t.b, out);
        break;
    default: break;
    }
}

namespace {

// per-symbol domain: sorted disjoint unsigned ranges minus exclusions
struct Domain {
    std::vector<std::pair<uint32_t, uint32_t>> ranges; // inclusive
    std::set<uint32_t> excluded;

    static Domain full(uint32_t mask) { return {{{0u, mask}}, {}}; }

    uint64_t size() const {
        uint64_t n = 0;
        for (auto [lo, hi] : ranges) n += static_cast<uint64_t>(hi) - lo + 1;
        uint64_t ex = 0;
        for (uint32_t v : excluded)
            if (containsRaw(v)) ++ex;
        return n > ex ? n - ex : 0;
    }

    bool containsRaw(uint32_t v) const {
        for (auto [lo, hi] : ranges)
            if (v >= lo && v <= hi) return true;
        return false;
    }

    bool contains(uint32_t v) const { return containsRaw(v) && !excluded.count(v); }

    void intersectRanges(const std::vector<std::pair<uint32_t, uint32_t>>& rs) {
        std::vector<std::pair<uint32_t, uint32_t>> out;
        for (auto [alo, ahi] : ranges)
            for (auto [blo, bhi] : rs) {
                uint32_t lo = std::max(alo, blo), hi = std::min(ahi, bhi);
                if (lo <= hi) out.push_back({lo, hi});
            }
        std::sort(out.begin(), out.end());
        ranges = std::move(out);
    }

    void pin(uint32_t v) {
        if (contains(v)) ranges = {{v, v}};
        else ranges.clear();
        excluded.clear();
    }

    template <typename F> void each(F f) const {
        for (auto [lo, hi] : ranges)
            for (uint64_t v = lo; v <= hi; ++v)
                if (!excluded.count(static_cast<uint32_t>(v))) f(static_cast<uint32_t>(v));
    }

    std::optional<uint32_t> first() const {
        std::optional<uint32_t> out;
        for (auto [lo, hi] : ranges)
            for (uint64_t v = lo; v <= hi; ++v)
                if (!excluded.count(static_cast<uint32_t>(v))) return static_cast<uint32_t>(v);
        return out;
    }
};

// signed interval [loS, hiS] -> unsigned segments under two's complement
std::vector<std::pair<uint32_t, uint32_t>> signedSegments(int64_t loS, int64_t hiS,
                                                          const WordOps& w) {
    int64_t minS = -(static_cast<int64_t>(1) << (w.width() - 1));
    int64_t maxS = (static_cast<int64_t>(1) << (w.width() - 1)) - 1;
    loS = std::max(loS, minS);
    hiS = std::min(hiS, maxS);
    if (loS > hiS) return {};
    auto enc = [&](int64_t v) { return w.trunc(static_cast<uint32_t>(v)); };
    std::vector<std::pair<uint32_t, uint32_t>> out;
    if (loS >= 0 || hiS < 0) {
        out.push_back({enc(loS), enc(hiS)});
    } else {
        out.push_back({0u, enc(hiS)});        // 0..hi
        out.push_back({enc(loS), w.mask()});  // lo..-1
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct Atom {
    BinOp rel;
    TermPtr lhs, rhs;
};

// flatten a truthy term into rel-atoms when possible; returns false when the
// shape is too complex for propagation (still handled by enumeration/probing)
bool flatten(const TermPtr& t, bool negate, std::vector<Atom>& out, const WordOps& w) {
    if (t->kind == Term::Kind::Un && t->uop == UnOp::LNot) return flatten(t->a, !negate, out, w);
    if (t->kind == Term::Kind::Bin) {
        auto neg = [](BinOp op) {
            switch (op) {
            case BinOp::Eq: return BinOp::Ne;
            case BinOp::Ne: return BinOp::Eq;
            case BinOp::Lt: return BinOp::Ge;
            case BinOp::Le: return BinOp::Gt;
            case BinOp::Gt: return BinOp::Le;
            case BinOp::Ge: return BinOp::Lt;
            default: return op;
            }
        };
        switch (t->bop) {
        case BinOp::Eq:
        case BinOp::Ne:
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge:
            out.push_back({negate ? neg(t->bop) : t->bop, t->a, t->b});
            return true;
        case BinOp::LAnd:
            if (!negate) return flatten(t->a, false, out, w) && flatten(t->b, false, out, w);
            return false; // disjunction: leave to search
        case BinOp::LOr:
            if (negate) return flatten(t->a, true, out, w) && flatten(t->b, true, out, w);
            return false;
        default:
            break;
        }
    }
    // truthy term t != 0
    out.push_back({negate ? BinOp::Eq : BinOp::Ne, t, Term::mkConst(0, w)});
    return true;
}

bool checkAll(const std::vector<TermPtr>& pc, const std::map<std::string, uint32_t>& env,
              const WordOps& w) {
    for (const auto& t : pc)
        if (eval_term(*t, env, w) == 0) return false;
    return true;
}

void mineConstants(const Term& t, std::set<uint32_t>& out) {
    if (t.kind == Term::Kind::Const) out.insert(t.value);
    if (t.a) mineConstants(*t.a, out);
    if (t.b) mineConstants(*t.b, out);
}

} // namespace

SolveResult solve(const std::vector<TermPtr>& pc, const WordOps& w, const SolverConfig& cfg,
                  std::mt19937_64& rng, const std::vector<std::map<std::string, uint32_t>>& seeds) {
    SolveResult out;

    std::set<std::string> syms;
    for (const auto& t : pc) collect_syms(*t, syms);

    std::map<std::string, uint32_t> env;
    if (syms.empty()) {
        out.status = checkAll(pc, env, w) ? SolveStatus::Sat : SolveStatus::Unsat;
        return out;
    }

    auto widthOf = [&](const std::string& s) {
        auto it = cfg.symWidths.find(s);
        return it == cfg.symWidths.end() ? w.width() : it->second;
    };
    std::map<std::string, Domain> dom;
    for (const auto& s : syms) dom[s] = Domain::full(WordOps(widthOf(s)).mask());

    // flatten; propagation works only when every conjunct flattens
    std::vector<Atom> atoms;
    bool flatOk = true;
    for (const auto& t : pc)
        if (!flatten(t, false, atoms, w)) flatOk = false;

    std::map<std::string, uint32_t> pinned;
    if (flatOk) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto& a : atoms) {
                // substitute pinned symbols, refold
                TermPtr l = a.lhs, r = a.rhs;
                if (!pinned.empty()) {
                    std::function<TermPtr(const TermPtr&)> subst = [&](const TermPtr& t) -> TermPtr {
                        if (t->kind == Term::Kind::Sym) {
                            auto it = pinned.find(t->sym);
                            if (it != pinned.end()) return Term::mkConst(it->second, w);
                            return t;
                        }
                        if (t->kind == Term::Kind::Un) return Term::mkUn(t->uop, subst(t->a), w);
                        if (t->kind == Term::Kind::Bin)
                            return Term::mkBin(t->bop, subst(t->a), subst(t->b), w);
                        return t;
                    };
                    l = subst(l);
                    r = subst(r);
                }
                // orient sym-rel-const
                bool flipped = false;
                if (r->kind == Term::Kind::Sym && l->isConst()) {
                    std::swap(l, r);
                    flipped = true;
                }
                if (l->kind != Term::Kind::Sym || !r->isConst()) continue;
                Domain& d = dom[l->sym];
                uint64_t before = d.size();
                uint32_t c = r->value;
                BinOp rel = a.rel;
                if (flipped) {
                    switch (rel) {
                    case BinOp::Lt: rel = BinOp::Gt; break;
                    case BinOp::Le: rel = BinOp::Ge; break;
                    case BinOp::Gt: rel = BinOp::Lt; break;
                    case BinOp::Ge: rel = BinOp::Le; break;
                    default: break;
                    }
                }
                WordOps sw(widthOf(l->sym));
                int64_t cs = sw.toSigned(c);
                switch (rel) {
                case BinOp::Eq: d.pin(c); break;
                case BinOp::Ne: d.excluded.insert(c); break;
                case BinOp::Lt: d.intersectRanges(signedSegments(INT64_MIN, cs - 1, sw)); break;
                case BinOp::Le: d.intersectRanges(signedSegments(INT64_MIN, cs, sw)); break;
                case BinOp::Gt: d.intersectRanges(signedSegments(cs + 1, INT64_MAX, sw)); break;
                case BinOp::Ge: d.intersectRanges(signedSegments(cs, INT64_MAX, sw)); break;
                default: break;
                }
                if (d.size() == 0) {
                    out.status = SolveStatus::Unsat;
                    return out;
                }
                if (d.size() == 1 && !pinned.count(l->sym)) {
                    pinned[l->sym] = *d.first();
                    changed = true;
                }
                if (d.size() != before) changed = true;
            }
        }
    }

    // exhaustive enumeration when the residual space is small enough
    uint64_t space = 1;
    bool overflow = false;
    for (const auto& [s, d] : dom) {
        uint64_t n = d.size();
        if (n == 0) {
            out.status = SolveStatus::Unsat;
            return out;
        }
        if (space > cfg.enumBudget / std::max<uint64_t>(n, 1)) overflow = true;
        space *= std::max<uint64_t>(n, 1);
    }
    std::vector<std::string> order(syms.begin(), syms.end());
    if (!overflow && space <= cfg.enumBudget) {
        std::vector<std::vector<uint32_t>> values;
        for (const auto& s : order) {
            std::vector<uint32_t> vs;
            dom[s].each([&](uint32_t v) { vs.push_back(v); });
            values.push_back(std::move(vs));
        }
        std::vector<size_t> idx(order.size(), 0);
        for (;;) {
            for (size_t i = 0; i < order.size(); ++i) env[order[i]] = values[i][idx[i]];
            if (checkAll(pc, env, w)) {
                out.status = SolveStatus::Sat;
                out.model = env;
                return out;
            }
            size_t i = 0;
            while (i < idx.size() && ++idx[i] == values[i].size()) idx[i++] = 0;
            if (i == idx.size()) break;
        }
        out.status = SolveStatus::Unsat;
        return out;
    }

    // probing: caller seeds, mined-constant grid, then random
    auto trySat = [&](const std::map<std::string, uint32_t>& candidate) {
        std::map<std::string, uint32_t> full = candidate;
        for (const auto& s : order) {
            auto it = full.find(s);
            uint32_t v = it == full.end() ? 0u : it->second;
            if (!dom[s].contains(v)) {
                auto f = dom[s].first();
                if (!f) return false;
                v = *f;
            }
            full[s] = WordOps(widthOf(s)).trunc(v);
        }
        if (checkAll(pc, full, w)) {
            out.status = SolveStatus::Sat;
            out.model = full;
            return true;
        }
        return false;
    };

    for (const auto& seed : seeds)
        if (trySat(seed)) return out;

    std::set<uint32_t> consts;
    for (const auto& t : pc) mineConstants(*t, consts);
    std::vector<uint32_t> grid;
    for (uint32_t c : consts) {
        grid.push_back(c);
        grid.push_back(w.add(c, 1));
        grid.push_back(w.sub(c, 1));
    }
    grid.push_back(0);
    grid.push_back(1);
    grid.push_back(w.mask());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    // cartesian over the grid, capped deterministically
    uint64_t combos = 1;
    for (size_t i = 0; i < order.size() && combos <= static_cast<uint64_t>(cfg.candidateCap); ++i)
        combos *= grid.size();
    if (combos <= static_cast<uint64_t>(cfg.candidateCap)) {
        std::vector<size_t> idx(order.size(), 0);
        for (;;) {
            std::map<std::string, uint32_t> cand;
            for (size_t i = 0; i < order.size(); ++i) cand[order[i]] = grid[idx[i]];
            if (trySat(cand)) return out;
            size_t i = 0;
            while (i < idx.size() && ++idx[i] == grid.size()) idx[i++] = 0;
            if (i == idx.size()) break;
        }
    } else {
        for (int probe = 0; probe < cfg.candidateCap / 8; ++probe) {
            std::map<std::string, uint32_t> cand;
            for (const auto& s : order) cand[s] = grid[rng() % grid.size()];
            if (trySat(cand)) return out;
        }
    }

    for (int probe = 0; probe < cfg.randomProbes; ++probe) {
        std::map<std::string, uint32_t> cand;
        for (const auto& s : order) cand[s] = static_cast<uint32_t>(rng());
        if (trySat(cand)) return out;
    }

    out.status = SolveStatus::Unknown;
    return out;
}

} // namespace irqr
