#include "irqracer/graph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace irqr {

std::vector<int> Icfg::nodesOfRoutine(const std::string& r) const {
    std::vector<int> out;
    for (const auto& n : nodes)
        if (n.routine == r) out.push_back(n.id);
    return out;
}

std::vector<int> Icfg::nodesAt(const Location& loc) const {
    std::vector<int> out;
    for (const auto& n : nodes)
        if (n.kind == NodeKind::Stmt && n.loc == loc) out.push_back(n.id);
    return out;
}

namespace {

class IcfgBuilder {
public:
    IcfgBuilder(const Program& p, int unroll) : p_(p), unroll_(unroll) { g_.unrollFactor = unroll; }

    Icfg build() {
        for (const auto& r : p_.routines) {
            int entry = addNode(Icfg::NodeKind::Entry, r.name);
            int exit = addNode(Icfg::NodeKind::Exit, r.name);
            g_.entryOf[r.name] = entry;
            g_.exitOf[r.name] = exit;
        }
        for (const auto& r : p_.routines) {
            int first = buildList(r.body, g_.exitOf[r.name], r.name, 0);
            addEdge(g_.entryOf[r.name], first);
        }
        // call / return edges (all entries exist now)
        for (const auto& [node, callee] : pendingCalls_) {
            g_.callEntry[node] = g_.entryOf.at(callee);
            addEdge(node, g_.entryOf.at(callee));
            addEdge(g_.exitOf.at(callee), g_.callReturnTarget.at(node));
        }
        return std::move(g_);
    }

private:
    int addNode(Icfg::NodeKind kind, const std::string& routine, const Stmt* s = nullptr,
                int unroll = 0) {
        Icfg::Node n;
        n.id = static_cast<int>(g_.nodes.size());
        n.kind = kind;
        n.routine = routine;
        n.stmt = s;
        if (s) n.loc = s->loc;
        n.unroll = unroll;
        g_.nodes.push_back(n);
        g_.succ.emplace_back();
        g_.pred.emplace_back();
        return n.id;
    }

    void addEdge(int a, int b) {
        auto& s = g_.succ[a];
        if (std::find(s.begin(), s.end(), b) == s.end()) {
            s.push_back(b);
            g_.pred[b].push_back(a);
        }
    }

    // Builds the chain for `body`, every tail flowing to `cont`; returns the
    // first node (or `cont` when body is empty).
    int buildList(const StmtList& body, int cont, const std::string& routine, int unroll) {
        int next = cont;
        for (auto it = body.rbegin(); it != body.rend(); ++it)
            next = buildStmt(**it, next, routine, unroll);
        return next;
    }

    int buildStmt(const Stmt& s, int cont, const std::string& routine, int unroll) {
        switch (s.kind) {
        case Stmt::Kind::If: {
            int thenEntry = buildList(s.thenBody, cont, routine, unroll);
            int elseEntry = s.elseBody.empty() ? cont : buildList(s.elseBody, cont, routine, unroll);
            int n = addNode(Icfg::NodeKind::Stmt, routine, &s, unroll);
            g_.branchTargets[n] = {thenEntry, elseEntry};
            addEdge(n, thenEntry);
            addEdge(n, elseEntry);
            return n;
        }
        case Stmt::Kind::While: {
            // while (c) { B }  =>  if (c) { B0  if (c) { B1 ... } }
            // k guard copies, k body copies; the last body falls through.
            return buildLoopLevel(s, 0, cont, routine);
        }
        case Stmt::Kind::Call: {
            int n = addNode(Icfg::NodeKind::Stmt, routine, &s, unroll);
            const Routine* callee = p_.find(s.callee);
            if (callee && !callee->isIsr()) {
                g_.callReturnTarget[n] = cont;
                pendingCalls_.push_back({n, s.callee});
            } else {
                addEdge(n, cont); // ISR registration: plain node
            }
            return n;
        }
        default: {
            int n = addNode(Icfg::NodeKind::Stmt, routine, &s, unroll);
            addEdge(n, cont);
            return n;
        }
        }
    }

    int buildLoopLevel(const Stmt& loop, int level, int cont, const std::string& routine) {
        if (level >= unroll_) return cont;
        StmtPtr guard = loop.clone();
        const Stmt* guardRef = guard.get();
        g_.owned.push_back(std::move(guard));
        // body copy for this level; its tail reaches the next level's guard
        int inner = buildLoopLevel(loop, level + 1, cont, routine);
        StmtList bodyClone;
        for (const auto& b : loop.thenBody) bodyClone.push_back(b->clone());
        int bodyEntry = cont;
        {
            // keep clones alive in g_.owned, then chain them
            std::vector<const Stmt*> refs;
            for (auto& b : bodyClone) refs.push_back(b.get());
            for (auto& b : bodyClone) g_.owned.push_back(std::move(b));
            int next = inner;
            for (auto it = refs.rbegin(); it != refs.rend(); ++it)
                next = buildStmt(**it, next, routine, level);
            bodyEntry = next;
        }
        int n = addNode(Icfg::NodeKind::Stmt, routine, guardRef, level);
        g_.branchTargets[n] = {bodyEntry, cont};
        addEdge(n, bodyEntry);
        addEdge(n, cont);
        return n;
    }

    const Program& p_;
    int unroll_;
    Icfg g_;
    std::vector<std::pair<int, std::string>> pendingCalls_;
};

bool isSyncOp(const Stmt* s) {
    if (!s) return false;
    switch (s->kind) {
    case Stmt::Kind::Lock:
    case Stmt::Kind::Unlock:
    case Stmt::Kind::IrqDisable:
    case Stmt::Kind::IrqEnable:
    case Stmt::Kind::IrqDisableAll:
    case Stmt::Kind::IrqEnableAll:
        return true;
    default:
        return false;
    }
}

} // namespace

Icfg build_icfg(const Program& p, int unrollFactor) {
    return IcfgBuilder(p, unrollFactor).build();
}

std::vector<std::set<int>> dominator_sets(int n, const std::vector<std::vector<int>>& pred,
                                          int entry) {
    // nodes the entry reaches; edges from outside that region must not
    // shrink the intersection
    std::vector<bool> reach(n, false);
    {
        std::vector<std::vector<int>> succ(n);
        for (int v = 0; v < n; ++v)
            for (int p : pred[v]) succ[p].push_back(v);
        std::deque<int> q{entry};
        reach[entry] = true;
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            for (int v : succ[u])
                if (!reach[v]) {
                    reach[v] = true;
                    q.push_back(v);
                }
        }
    }

    std::set<int> all;
    for (int i = 0; i < n; ++i)
        if (reach[i]) all.insert(i);
    std::vector<std::set<int>> dom(n);
    for (int i = 0; i < n; ++i) dom[i] = reach[i] ? all : std::set<int>{i};
    dom[entry] = {entry};
    bool changed = true;
    while (changed) {
        changed = false;
        for (int v = 0; v < n; ++v) {
            if (v == entry || !reach[v]) continue;
            std::set<int> acc;
            bool first = true;
            for (int p : pred[v]) {
                if (!reach[p]) continue;
                if (first) {
                    acc = dom[p];
                    first = false;
                } else {
                    std::set<int> inter;
                    std::set_intersection(acc.begin(), acc.end(), dom[p].begin(), dom[p].end(),
                                          std::inserter(inter, inter.begin()));
                    acc = std::move(inter);
                }
            }
            if (first) acc.clear();
            acc.insert(v);
            if (acc != dom[v]) {
                dom[v] = std::move(acc);
                changed = true;
            }
        }
    }
    return dom;
}

std::vector<int> Ricfg::nodesAt(const Location& loc) const {
    std::vector<int> out;
    for (const auto& n : nodes)
        if (n.kind == Icfg::NodeKind::Stmt && n.loc == loc) out.push_back(n.id);
    return out;
}

int Ricfg::firstNodeAt(const Location& loc) const {
    auto v = nodesAt(loc);
    return v.empty() ? -1 : v.front();
}

Ricfg build_ricfg(const Icfg& g, const Program& p, const std::string& topRoutine,
                  const RicfgInputs& in) {
    const Routine* top = p.find(topRoutine);
    if (!top) throw std::runtime_error("build_ricfg: unknown routine " + topRoutine);

    // call closure of the top routine (task callees transitively)
    std::set<std::string> closure{topRoutine};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [node, calleeEntry] : g.callEntry) {
            if (closure.count(g.nodes[node].routine) &&
                !closure.count(g.nodes[calleeEntry].routine)) {
                closure.insert(g.nodes[calleeEntry].routine);
                grew = true;
            }
        }
    }

    std::set<int> universe;
    for (const auto& n : g.nodes)
        if (closure.count(n.routine)) universe.insert(n.id);

    // compact indices for dominator computation over the universe
    std::vector<int> order(universe.begin(), universe.end());
    std::map<int, int> idx;
    for (size_t i = 0; i < order.size(); ++i) idx[order[i]] = static_cast<int>(i);
    std::vector<std::vector<int>> upred(order.size());
    for (int u : order)
        for (int v : g.succ[u])
            if (universe.count(v)) upred[idx[v]].push_back(idx[u]);
    auto dom = dominator_sets(static_cast<int>(order.size()), upred, idx[g.entryOf.at(topRoutine)]);

    auto isRetainedBase = [&](int id) {
        const auto& n = g.nodes[id];
        if (n.kind == Icfg::NodeKind::Entry || n.kind == Icfg::NodeKind::Exit)
            return n.routine == topRoutine;
        if (in.accessLocs.count(n.loc)) return true;
        if (in.itrlLocs.count(n.loc)) return true;
        if (isSyncOp(n.stmt)) return true;
        return false;
    };

    std::set<int> retained;
    for (int id : order)
        if (isRetainedBase(id)) retained.insert(id);

    // branches and calls dominating a retained node
    for (int id : order) {
        const auto& n = g.nodes[id];
        if (retained.count(id)) continue;
        bool isBranch = g.isBranch(id);
        bool isCall = n.stmt && n.stmt->kind == Stmt::Kind::Call;
        if (!isBranch && !isCall) continue;
        for (int r : retained) {
            if (dom[idx[r]].count(idx[id])) {
                retained.insert(id);
                break;
            }
        }
    }

    Ricfg out;
    out.owner = topRoutine;
    out.priority = top->priority;

    std::map<int, int> localId;
    auto addLocal = [&](int origin) {
        const auto& n = g.nodes[origin];
        Ricfg::Node ln;
        ln.id = static_cast<int>(out.nodes.size());
        ln.origin = origin;
        ln.kind = n.kind;
        ln.stmt = n.stmt;
        ln.loc = n.loc;
        ln.unroll = n.unroll;
        ln.routine = n.routine;
        out.nodes.push_back(ln);
        out.succ.emplace_back();
        out.pred.emplace_back();
        localId[origin] = ln.id;
        return ln.id;
    };
    for (int id : order)
        if (retained.count(id)) addLocal(id);
    out.entry = localId.at(g.entryOf.at(topRoutine));
    out.exit = localId.at(g.exitOf.at(topRoutine));

    // collapse pruned chains into direct edges
    for (int u : order) {
        if (!retained.count(u)) continue;
        std::deque<int> work(g.succ[u].begin(), g.succ[u].end());
        std::set<int> seen;
        while (!work.empty()) {
            int v = work.front();
            work.pop_front();
            if (!universe.count(v) || !seen.insert(v).second) continue;
            if (retained.count(v)) {
                int lu = localId[u], lv = localId[v];
                auto& s = out.succ[lu];
                if (std::find(s.begin(), s.end(), lv) == s.end()) {
                    s.push_back(lv);
                    out.pred[lv].push_back(lu);
                }
            } else {
                for (int w : g.succ[v]) work.push_back(w);
            }
        }
    }

    for (int id : order)
        if (!retained.count(id) && g.nodes[id].kind == Icfg::NodeKind::Stmt)
            out.pruned.push_back(g.nodes[id].loc);
    std::sort(out.pruned.begin(), out.pruned.end());
    out.pruned.erase(std::unique(out.pruned.begin(), out.pruned.end()), out.pruned.end());
    return out;
}

Iccfg build_iccfg(const Ricfg& gi, const Ricfg& gj, const Location& wnFirst,
                  const Location& wnSecond) {
    Iccfg out;
    out.gi = gi;
    out.gj = gj;
    int ei = out.gi.firstNodeAt(wnFirst);
    if (ei < 0) throw std::runtime_error("EventNotInGraph: " + wnFirst.str());
    if (out.gj.firstNodeAt(wnSecond) < 0)
        throw std::runtime_error("EventNotInGraph: " + wnSecond.str());
    // source is the node immediately after the first event's access; when the
    // event is a branch there is no unique successor, so the event node itself
    // carries the edge
    const auto& succs = out.gi.succ[ei];
    out.crossFrom = {0, succs.size() == 1 ? succs.front() : ei};
    return out;
}

std::optional<int> Iccfg::distance(IccfgRef from, IccfgRef to) const {
    struct Item {
        IccfgRef r;
        int d;
    };
    std::deque<Item> q{{from, 0}};
    std::set<IccfgRef> seen{from};
    while (!q.empty()) {
        auto [r, d] = q.front();
        q.pop_front();
        if (r == to) return d;
        const Ricfg& g = r.side == 0 ? gi : gj;
        for (int v : g.succ[r.node]) {
            IccfgRef nx{r.side, v};
            if (seen.insert(nx).second) q.push_back({nx, d + 1});
        }
        if (r == crossFrom) {
            IccfgRef nx{1, gj.entry};
            if (seen.insert(nx).second) q.push_back({nx, d + 1});
        }
    }
    return std::nullopt;
}

DomInfo compute_dominators(const Ricfg& g) {
    int exits = 0;
    for (const auto& n : g.nodes)
        if (n.kind == Icfg::NodeKind::Exit) ++exits;
    if (exits != 1) throw std::runtime_error("MultipleExits: normalize first");

    DomInfo d;
    d.dom = dominator_sets(static_cast<int>(g.nodes.size()), g.pred, g.entry);
    d.postdom = dominator_sets(static_cast<int>(g.nodes.size()), g.succ, g.exit);
    return d;
}

std::optional<int> distance(const std::vector<std::vector<int>>& succ, int from, int to) {
    std::deque<std::pair<int, int>> q{{from, 0}};
    std::set<int> seen{from};
    while (!q.empty()) {
        auto [n, dist] = q.front();
        q.pop_front();
        if (n == to) return dist;
        for (int v : succ[n])
            if (seen.insert(v).second) q.push_back({v, dist + 1});
    }
    return std::nullopt;
}

std::optional<int> ricfg_distance(const Ricfg& g, int from, int to) {
    return distance(g.succ, from, to);
}

std::string dump_dot(const Icfg& g) {
    std::ostringstream os;
    os << "digraph icfg {\n";
    for (const auto& n : g.nodes) {
        std::string label = n.kind == Icfg::NodeKind::Entry  ? n.routine + ":entry"
                            : n.kind == Icfg::NodeKind::Exit ? n.routine + ":exit"
                                                             : n.loc.str();
        if (n.unroll > 0) label += "#" + std::to_string(n.unroll);
        os << "  n" << n.id << " [label=\"" << label << "\"];\n";
    }
    for (size_t u = 0; u < g.succ.size(); ++u)
        for (int v : g.succ[u]) os << "  n" << u << " -> n" << v << ";\n";
    os << "}\n";
    return os.str();
}

std::string dump_dot(const Ricfg& g) {
    std::ostringstream os;
    os << "digraph ricfg_" << g.owner << " {\n";
    for (const auto& n : g.nodes) {
        std::string label = n.kind == Icfg::NodeKind::Entry  ? g.owner + ":entry"
                            : n.kind == Icfg::NodeKind::Exit ? g.owner + ":exit"
                                                             : n.loc.str();
        if (n.unroll > 0) label += "#" + std::to_string(n.unroll);
        os << "  n" << n.id << " [label=\"" << label << "\"];\n";
    }
    for (size_t u = 0; u < g.succ.size(); ++u)
        for (int v : g.succ[u]) os << "  n" << u << " -> n" << v << ";\n";
    os << "}\n";
    return os.str();
}

} // namespace irqr
