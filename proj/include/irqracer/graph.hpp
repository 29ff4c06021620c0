#pragma once

#include "irqracer/ast.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace irqr {

// Inter-procedural CFG over flattened instructions: loops unrolled (default
// twice), task calls wired with call/return edge pairs (context-insensitive,
// one instance per callee). ISR-targeted calls are registration statements and
// stay plain nodes.
struct Icfg {
    enum class NodeKind { Entry, Exit, Stmt };

    struct Node {
        int id = -1;
        NodeKind kind = NodeKind::Stmt;
        std::string routine;      // owning routine
        const irqr::Stmt* stmt = nullptr;
        Location loc;             // original location (unroll copies share it)
        int unroll = 0;           // which unrolled copy of a loop body/guard
    };

    std::vector<Node> nodes;
    std::vector<std::vector<int>> succ, pred;
    std::map<std::string, int> entryOf, exitOf;
    // branch nodes: succ[0] = taken, succ[1] = fall-through; kept separately so
    // edge insertion elsewhere cannot scramble the order
    std::map<int, std::pair<int, int>> branchTargets;
    std::map<int, int> callReturnTarget; // call node -> node after the call
    std::map<int, int> callEntry;        // call node -> callee entry
    std::vector<StmtPtr> owned;          // unrolled statement clones

    int unrollFactor = 2;

    bool isBranch(int n) const { return branchTargets.count(n) != 0; }
    const Node& node(int n) const { return nodes[n]; }
    std::vector<int> nodesOfRoutine(const std::string& r) const;
    std::vector<int> nodesAt(const Location& loc) const;
};

Icfg build_icfg(const Program& p, int unrollFactor = 2);

// Reduced ICFG of one task/ISR context: only nodes that touch an
// analysis-relevant resource, interrupt/lock operations, and branches or calls
// dominating such a node survive; everything else collapses into edges.
struct Ricfg {
    struct Node {
        int id = -1;      // ricfg-local
        int origin = -1;  // Icfg node id
        Icfg::NodeKind kind = Icfg::NodeKind::Stmt;
        const irqr::Stmt* stmt = nullptr;
        Location loc;
        int unroll = 0;
        std::string routine;
    };

    std::string owner;   // top routine
    int priority = 0;
    std::vector<Node> nodes;
    std::vector<std::vector<int>> succ, pred;
    int entry = -1, exit = -1;
    std::vector<Location> pruned; // for reporting

    std::vector<int> nodesAt(const Location& loc) const;
    int firstNodeAt(const Location& loc) const; // lowest id, -1 if absent
};

struct RicfgInputs {
    std::set<Location> accessLocs;  // statements accessing SRS or input points
    std::set<Location> itrlLocs;    // implicit interrupt ops (irqctl writes)
};

Ricfg build_ricfg(const Icfg& g, const Program& p, const std::string& topRoutine,
                  const RicfgInputs& in);

// A pair of reduced graphs joined by the single cross-context edge from the
// node after the first racing event to the entry of the second event's graph.
struct IccfgRef {
    int side = 0; // 0 = first context, 1 = second
    int node = -1;
    auto operator<=>(const IccfgRef&) const = default;
};

struct Iccfg {
    Ricfg gi, gj; // owned copies: explorations over distinct warnings share nothing
    IccfgRef crossFrom; // always side 0
    // cross edge target is gj.entry

    std::optional<int> distance(IccfgRef from, IccfgRef to) const;
};

struct IccfgError {
    std::string message; // EventNotInGraph
};

struct RaceEventKey {
    std::string routine;
    Location loc;
};

// Throws std::runtime_error("EventNotInGraph: ...") when wnFirst is absent
// from gi or wnSecond from gj.
Iccfg build_iccfg(const Ricfg& gi, const Ricfg& gj, const Location& wnFirst,
                  const Location& wnSecond);

// Dominators / post-dominators with set semantics (n dominates m if every
// entry->m path passes n).
struct DomInfo {
    std::vector<std::set<int>> dom;      // dom[n] = dominators of n (incl. n)
    std::vector<std::set<int>> postdom;  // postdom[n] incl. n
    bool dominates(int a, int b) const { return dom[b].count(a) != 0; }
    bool postDominates(int a, int b) const { return postdom[b].count(a) != 0; }
};

DomInfo compute_dominators(const Ricfg& g);

// Shortest instruction distance (unit edge weight, BFS); nullopt = unreachable.
std::optional<int> distance(const std::vector<std::vector<int>>& succ, int from, int to);
std::optional<int> ricfg_distance(const Ricfg& g, int from, int to);

std::string dump_dot(const Icfg& g);
std::string dump_dot(const Ricfg& g);

// Generic helpers shared with test oracles.
std::vector<std::set<int>> dominator_sets(int n, const std::vector<std::vector<int>>& pred,
                                          int entry);

} // namespace irqr
