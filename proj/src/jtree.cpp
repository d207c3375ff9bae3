#include "pbp/jtree.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "pbp/errors.hpp"

namespace pbp {

void UndirectedGraph::add_edge(int u, int v) {
    if (u == v || u < 0 || v < 0 || u >= n || v >= n) throw validation_error("bad undirected edge");
    adj[static_cast<std::size_t>(u)].insert(v);
    adj[static_cast<std::size_t>(v)].insert(u);
}

bool UndirectedGraph::has_edge(int u, int v) const {
    return adj[static_cast<std::size_t>(u)].count(v) > 0;
}

bool UndirectedGraph::connected() const {
    if (n == 0) return false;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (int w : adj[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                ++reached;
                queue.push_back(w);
            }
        }
    }
    return reached == n;
}

std::vector<std::pair<int, int>> UndirectedGraph::edge_list() const {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < n; ++u) {
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (u < v) out.emplace_back(u, v);
        }
    }
    return out;
}

UndirectedGraph moralize(const GraphicalModel& model) {
    UndirectedGraph g(model.n_vars());
    for (const auto& [p, c] : model.edges()) g.add_edge(p, c);
    for (int c = 0; c < model.n_vars(); ++c) {
        const auto& par = model.parents(c);
        for (std::size_t i = 0; i < par.size(); ++i) {
            for (std::size_t j = i + 1; j < par.size(); ++j) {
                if (par[i] != par[j]) g.add_edge(par[i], par[j]);
            }
        }
    }
    return g;
}

bool is_chordal(const UndirectedGraph& g) {
    // Maximum cardinality search followed by the classic one-step check of
    // the resulting ordering (Tarjan & Yannakakis).
    const int n = g.n;
    std::vector<int> weight(static_cast<std::size_t>(n), 0);
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::vector<int> order;           // MCS order (later elements visited later)
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    for (int step = 0; step < n; ++step) {
        int best = -1;
        for (int v = 0; v < n; ++v) {
            if (visited[static_cast<std::size_t>(v)]) continue;
            if (best < 0 || weight[static_cast<std::size_t>(v)] > weight[static_cast<std::size_t>(best)]) {
                best = v;
            }
        }
        visited[static_cast<std::size_t>(best)] = 1;
        pos[static_cast<std::size_t>(best)] = step;
        order.push_back(best);
        for (int w : g.adj[static_cast<std::size_t>(best)]) {
            if (!visited[static_cast<std::size_t>(w)]) ++weight[static_cast<std::size_t>(w)];
        }
    }
    for (int i = 0; i < n; ++i) {
        const int v = order[static_cast<std::size_t>(i)];
        // Earlier-ordered neighbors of v; the latest of them must be adjacent
        // to all the rest.
        int latest = -1;
        for (int w : g.adj[static_cast<std::size_t>(v)]) {
            if (pos[static_cast<std::size_t>(w)] < i &&
                (latest < 0 || pos[static_cast<std::size_t>(w)] > pos[static_cast<std::size_t>(latest)])) {
                latest = w;
            }
        }
        if (latest < 0) continue;
        for (int w : g.adj[static_cast<std::size_t>(v)]) {
            if (pos[static_cast<std::size_t>(w)] < i && w != latest && !g.has_edge(latest, w)) {
                return false;
            }
        }
    }
    return true;
}

Triangulation triangulate(const UndirectedGraph& g) {
    if (!g.connected()) throw validation_error("triangulate requires a connected graph");
    UndirectedGraph filled = g;
    UndirectedGraph work = g;  // vertices get eliminated from this copy
    const int n = g.n;
    std::vector<char> eliminated(static_cast<std::size_t>(n), 0);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));

    auto fill_count = [&](int v) {
        int count = 0;
        const auto& nb = work.adj[static_cast<std::size_t>(v)];
        for (auto it = nb.begin(); it != nb.end(); ++it) {
            auto jt = it;
            for (++jt; jt != nb.end(); ++jt) {
                if (!work.has_edge(*it, *jt)) ++count;
            }
        }
        return count;
    };

    for (int step = 0; step < n; ++step) {
        int best = -1, best_fill = std::numeric_limits<int>::max();
        for (int v = 0; v < n; ++v) {
            if (eliminated[static_cast<std::size_t>(v)]) continue;
            const int f = fill_count(v);
            if (f < best_fill) {
                best_fill = f;
                best = v;
            }
        }
        const auto nb = work.adj[static_cast<std::size_t>(best)];
        for (auto it = nb.begin(); it != nb.end(); ++it) {
            auto jt = it;
            for (++jt; jt != nb.end(); ++jt) {
                if (!work.has_edge(*it, *jt)) {
                    work.add_edge(*it, *jt);
                    filled.add_edge(*it, *jt);
                }
            }
        }
        for (int w : nb) work.adj[static_cast<std::size_t>(w)].erase(best);
        work.adj[static_cast<std::size_t>(best)].clear();
        eliminated[static_cast<std::size_t>(best)] = 1;
        order.push_back(best);
    }
    if (!is_chordal(filled)) throw internal_error("triangulation produced a non-chordal graph");
    return {std::move(filled), std::move(order)};
}

namespace {

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[static_cast<std::size_t>(b)] = a;
        return true;
    }
};

std::vector<int> sorted_intersection(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool is_subset(const std::vector<int>& a, const std::vector<int>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

CliqueTreeDraft build_clique_tree(const Triangulation& tri) {
    const auto& g = tri.graph;
    const int n = g.n;
    std::vector<int> pos(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(tri.elimination_order[static_cast<std::size_t>(i)])] = i;

    // Candidate cliques: each vertex with its not-yet-eliminated neighbors.
    std::vector<std::vector<int>> candidates;
    for (int v : tri.elimination_order) {
        std::vector<int> c{v};
        for (int w : g.adj[static_cast<std::size_t>(v)]) {
            if (pos[static_cast<std::size_t>(w)] > pos[static_cast<std::size_t>(v)]) c.push_back(w);
        }
        std::sort(c.begin(), c.end());
        candidates.push_back(std::move(c));
    }
    // Keep the maximal ones, in discovery order.
    std::vector<std::vector<int>> cliques;
    for (const auto& c : candidates) {
        bool maximal = true;
        for (const auto& other : candidates) {
            if (&other != &c && c.size() < other.size() && is_subset(c, other)) {
                maximal = false;
                break;
            }
            if (&other < &c && other == c) {  // duplicate; keep first
                maximal = false;
                break;
            }
        }
        if (maximal) cliques.push_back(c);
    }

    // Maximum-weight spanning tree over intersection sizes.
    struct Cand {
        int w, i, j;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < static_cast<int>(cliques.size()); ++i) {
        for (int j = i + 1; j < static_cast<int>(cliques.size()); ++j) {
            const int w = static_cast<int>(
                sorted_intersection(cliques[static_cast<std::size_t>(i)], cliques[static_cast<std::size_t>(j)]).size());
            if (w > 0) cands.push_back({w, i, j});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.w != b.w) return a.w > b.w;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    DisjointSet ds(static_cast<int>(cliques.size()));
    std::vector<std::pair<int, int>> edges;
    for (const auto& c : cands) {
        if (ds.unite(c.i, c.j)) edges.emplace_back(c.i, c.j);
    }
    if (edges.size() + 1 != cliques.size()) {
        throw validation_error("clique intersection graph is disconnected");
    }
    if (!running_intersection_holds(cliques, edges)) {
        throw internal_error("running intersection property violated for a chordal input");
    }
    return {std::move(cliques), std::move(edges)};
}

bool running_intersection_holds(const std::vector<std::vector<int>>& cliques,
                                const std::vector<std::pair<int, int>>& edges) {
    const int m = static_cast<int>(cliques.size());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
    for (const auto& [a, b] : edges) {
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    std::set<int> all_vars;
    for (const auto& c : cliques) all_vars.insert(c.begin(), c.end());
    for (int v : all_vars) {
        // The cliques containing v must form a connected subtree.
        std::vector<int> holders;
        for (int i = 0; i < m; ++i) {
            if (std::binary_search(cliques[static_cast<std::size_t>(i)].begin(),
                                   cliques[static_cast<std::size_t>(i)].end(), v)) {
                holders.push_back(i);
            }
        }
        if (holders.empty()) continue;
        std::set<int> holder_set(holders.begin(), holders.end());
        std::set<int> seen{holders[0]};
        std::deque<int> queue{holders[0]};
        while (!queue.empty()) {
            const int c = queue.front();
            queue.pop_front();
            for (int d : adj[static_cast<std::size_t>(c)]) {
                if (holder_set.count(d) && !seen.count(d)) {
                    seen.insert(d);
                    queue.push_back(d);
                }
            }
        }
        if (seen.size() != holder_set.size()) return false;
    }
    return true;
}

namespace {

// Mutable working tree used during construction.
struct WorkTree {
    std::vector<std::vector<int>> members;  // sorted
    std::vector<std::vector<int>> delta;
    std::vector<std::set<int>> adj;
    std::vector<char> alive;

    int add_clique(std::vector<int> m) {
        members.push_back(std::move(m));
        delta.emplace_back();
        adj.emplace_back();
        alive.push_back(1);
        return static_cast<int>(members.size()) - 1;
    }
    void link(int a, int b) {
        adj[static_cast<std::size_t>(a)].insert(b);
        adj[static_cast<std::size_t>(b)].insert(a);
    }
    void unlink(int a, int b) {
        adj[static_cast<std::size_t>(a)].erase(b);
        adj[static_cast<std::size_t>(b)].erase(a);
    }
    int degree(int c) const { return static_cast<int>(adj[static_cast<std::size_t>(c)].size()); }
    int alive_count() const {
        int k = 0;
        for (char a : alive) k += a;
        return k;
    }
};

}  // namespace

int LatentJunctionTree::host_clique(int observable_id) const {
    for (const auto& c : cliques_) {
        if (std::binary_search(c.delta.begin(), c.delta.end(), observable_id)) return c.id;
    }
    throw validation_error("variable is not an associated observable");
}

std::int64_t LatentJunctionTree::alpha_dim(int sep_id) const {
    std::int64_t d = 1;
    for (int v : separator(sep_id).alpha) d *= cardinality(v);
    return d;
}

LatentJunctionTree LatentJunctionTree::from_model(const GraphicalModel& model, std::int64_t beta_cap,
                                                  std::optional<int> root_override) {
    if (beta_cap < 1) throw validation_error("beta cap must be >= 1");
    const auto observables = model.observable_ids();
    if (observables.empty()) throw validation_error("model has no observable variables");

    const auto draft = build_clique_tree(triangulate(moralize(model)));

    WorkTree work;
    for (const auto& c : draft.cliques) work.add_clique(c);
    for (const auto& [a, b] : draft.edges) work.link(a, b);

    auto contains = [&](int c, int v) {
        const auto& m = work.members[static_cast<std::size_t>(c)];
        return std::binary_search(m.begin(), m.end(), v);
    };

    // Associate every observable with one leaf clique; observables that only
    // occur in internal cliques get a pendant leaf attached to their smallest
    // host clique.
    for (int x : observables) {
        int best = -1;
        for (int c = 0; c < static_cast<int>(work.members.size()); ++c) {
            if (work.degree(c) <= 1 && contains(c, x)) {
                if (best < 0 ||
                    work.members[static_cast<std::size_t>(c)].size() < work.members[static_cast<std::size_t>(best)].size()) {
                    best = c;
                }
            }
        }
        if (best >= 0) {
            work.delta[static_cast<std::size_t>(best)].push_back(x);
            continue;
        }
        int host = -1;
        for (int c = 0; c < static_cast<int>(work.members.size()); ++c) {
            if (contains(c, x) &&
                (host < 0 ||
                 work.members[static_cast<std::size_t>(c)].size() < work.members[static_cast<std::size_t>(host)].size())) {
                host = c;
            }
        }
        if (host < 0) throw internal_error("observable missing from every clique");
        std::vector<int> pendant{x};
        for (int v : work.members[static_cast<std::size_t>(host)]) {
            if (model.var(v).role == Role::Latent) pendant.push_back(v);
        }
        std::sort(pendant.begin(), pendant.end());
        const int p = work.add_clique(std::move(pendant));
        work.delta[static_cast<std::size_t>(p)] = {x};
        work.link(host, p);
    }
    for (auto& d : work.delta) std::sort(d.begin(), d.end());

    // Prune leaves that host no observables; repeat until stable.
    for (;;) {
        int victim = -1;
        for (int c = 0; c < static_cast<int>(work.members.size()); ++c) {
            if (work.alive[static_cast<std::size_t>(c)] && work.degree(c) <= 1 &&
                work.delta[static_cast<std::size_t>(c)].empty()) {
                victim = c;
                break;
            }
        }
        if (victim < 0) break;
        if (work.alive_count() == 1) throw internal_error("pruning would remove the last clique");
        work.alive[static_cast<std::size_t>(victim)] = 0;
        const auto nbrs = work.adj[static_cast<std::size_t>(victim)];
        for (int w : nbrs) work.unlink(victim, w);
    }

    // A valid root must be a non-leaf clique. If none exists (one or two
    // cliques), splice in a new clique above: a copy for a single clique, the
    // shared separator set for a pair.
    std::vector<int> alive_ids;
    for (int c = 0; c < static_cast<int>(work.members.size()); ++c) {
        if (work.alive[static_cast<std::size_t>(c)]) alive_ids.push_back(c);
    }
    bool has_nonleaf = false;
    for (int c : alive_ids) {
        if (work.degree(c) >= 2) has_nonleaf = true;
    }
    if (!has_nonleaf) {
        if (alive_ids.size() == 1) {
            const int c = alive_ids[0];
            const int r = work.add_clique(work.members[static_cast<std::size_t>(c)]);
            work.link(r, c);
        } else if (alive_ids.size() == 2) {
            const int a = alive_ids[0], b = alive_ids[1];
            auto inter = sorted_intersection(work.members[static_cast<std::size_t>(a)],
                                             work.members[static_cast<std::size_t>(b)]);
            if (inter.empty()) throw internal_error("adjacent cliques share no variables");
            const int r = work.add_clique(std::move(inter));
            work.unlink(a, b);
            work.link(r, a);
            work.link(r, b);
        } else {
            throw internal_error("tree with >2 cliques but no internal clique");
        }
    }

    // Compact ids, preserving creation order.
    std::vector<int> new_id(work.members.size(), -1);
    std::vector<int> old_of;
    for (int c = 0; c < static_cast<int>(work.members.size()); ++c) {
        if (work.alive[static_cast<std::size_t>(c)]) {
            new_id[static_cast<std::size_t>(c)] = static_cast<int>(old_of.size());
            old_of.push_back(c);
        }
    }
    const int m = static_cast<int>(old_of.size());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c) {
        const int oc = old_of[static_cast<std::size_t>(c)];
        for (int w : work.adj[static_cast<std::size_t>(oc)]) {
            adj[static_cast<std::size_t>(c)].push_back(new_id[static_cast<std::size_t>(w)]);
        }
        std::sort(adj[static_cast<std::size_t>(c)].begin(), adj[static_cast<std::size_t>(c)].end());
    }

    // Root selection: non-leaf clique of minimum eccentricity, lowest id on
    // ties.
    auto bfs_dist = [&](int from) {
        std::vector<int> dist(static_cast<std::size_t>(m), -1);
        std::deque<int> queue{from};
        dist[static_cast<std::size_t>(from)] = 0;
        while (!queue.empty()) {
            const int v = queue.front();
            queue.pop_front();
            for (int w : adj[static_cast<std::size_t>(v)]) {
                if (dist[static_cast<std::size_t>(w)] < 0) {
                    dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
                    queue.push_back(w);
                }
            }
        }
        return dist;
    };
    std::vector<int> candidates;
    for (int c = 0; c < m; ++c) {
        if (adj[static_cast<std::size_t>(c)].size() >= 2) candidates.push_back(c);
    }
    if (candidates.empty()) {
        // Only the spliced one-child configuration reaches this point; the
        // spliced clique is the one without associated observables.
        for (int c = 0; c < m; ++c) {
            if (work.delta[static_cast<std::size_t>(old_of[static_cast<std::size_t>(c)])].empty()) {
                candidates.push_back(c);
            }
        }
    }
    int root = -1;
    if (root_override.has_value()) {
        root = *root_override;
        if (std::find(candidates.begin(), candidates.end(), root) == candidates.end()) {
            throw validation_error("root override must be a non-leaf clique");
        }
    } else {
        int best_ecc = std::numeric_limits<int>::max();
        for (int c : candidates) {
            const auto dist = bfs_dist(c);
            const int ecc = *std::max_element(dist.begin(), dist.end());
            if (ecc < best_ecc) {
                best_ecc = ecc;
                root = c;
            }
        }
    }
    if (root < 0) throw internal_error("no valid root clique");

    LatentJunctionTree tree;
    tree.vars_ = model.variables();
    tree.observables_ = observables;
    tree.beta_cap_ = beta_cap;

    // Rooted orientation.
    std::vector<int> parent(static_cast<std::size_t>(m), -1);
    {
        std::vector<char> seen(static_cast<std::size_t>(m), 0);
        std::deque<int> queue{root};
        seen[static_cast<std::size_t>(root)] = 1;
        while (!queue.empty()) {
            const int v = queue.front();
            queue.pop_front();
            for (int w : adj[static_cast<std::size_t>(v)]) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    parent[static_cast<std::size_t>(w)] = v;
                    queue.push_back(w);
                }
            }
        }
    }

    tree.cliques_.resize(static_cast<std::size_t>(m));
    tree.parent_sep_.assign(static_cast<std::size_t>(m), -1);
    tree.child_seps_.assign(static_cast<std::size_t>(m), {});
    for (int c = 0; c < m; ++c) {
        auto& cl = tree.cliques_[static_cast<std::size_t>(c)];
        cl.id = c;
        cl.members = work.members[static_cast<std::size_t>(old_of[static_cast<std::size_t>(c)])];
        cl.delta = work.delta[static_cast<std::size_t>(old_of[static_cast<std::size_t>(c)])];
    }
    tree.root_ = root;

    // One separator per non-root clique, ids in child-clique order.
    for (int c = 0; c < m; ++c) {
        if (c == root) continue;
        Separator s;
        s.id = static_cast<int>(tree.separators_.size());
        s.child_clique = c;
        s.parent_clique = parent[static_cast<std::size_t>(c)];
        s.members = sorted_intersection(tree.cliques_[static_cast<std::size_t>(c)].members,
                                        tree.cliques_[static_cast<std::size_t>(s.parent_clique)].members);
        if (s.members.empty()) throw internal_error("empty separator");
        tree.parent_sep_[static_cast<std::size_t>(c)] = s.id;
        tree.child_seps_[static_cast<std::size_t>(s.parent_clique)].push_back(s.id);
        tree.separators_.push_back(std::move(s));
    }
    for (auto& cl : tree.cliques_) {
        cl.is_leaf = tree.child_seps_[static_cast<std::size_t>(cl.id)].empty();
        if (!cl.is_leaf && !cl.delta.empty()) throw internal_error("internal clique hosts observables");
    }

    {
        std::vector<std::vector<int>> members;
        std::vector<std::pair<int, int>> edges;
        for (const auto& cl : tree.cliques_) members.push_back(cl.members);
        for (const auto& s : tree.separators_) {
            edges.emplace_back(std::min(s.parent_clique, s.child_clique),
                               std::max(s.parent_clique, s.child_clique));
        }
        if (!running_intersection_holds(members, edges)) {
            throw internal_error("running intersection property violated after tree surgery");
        }
    }

    // Inside/outside observable partition per separator.
    tree.inside_obs_.resize(tree.separators_.size());
    tree.outside_obs_.resize(tree.separators_.size());
    std::vector<std::vector<int>> inside_depth(tree.separators_.size());  // parallel to inside list
    std::vector<std::vector<int>> outside_depth(tree.separators_.size());
    for (const auto& s : tree.separators_) {
        // BFS below the separator (the inside tree).
        std::vector<int> dist(static_cast<std::size_t>(m), -1);
        std::deque<int> queue{s.child_clique};
        dist[static_cast<std::size_t>(s.child_clique)] = 0;
        while (!queue.empty()) {
            const int v = queue.front();
            queue.pop_front();
            for (int sep_id : tree.child_seps_[static_cast<std::size_t>(v)]) {
                const int w = tree.separators_[static_cast<std::size_t>(sep_id)].child_clique;
                dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
                queue.push_back(w);
            }
        }
        auto& in_list = tree.inside_obs_[static_cast<std::size_t>(s.id)];
        auto& in_depth = inside_depth[static_cast<std::size_t>(s.id)];
        auto& out_list = tree.outside_obs_[static_cast<std::size_t>(s.id)];
        auto& out_depth = outside_depth[static_cast<std::size_t>(s.id)];
        // Outside distances: BFS from the parent clique, not crossing s.
        std::vector<int> odist(static_cast<std::size_t>(m), -1);
        std::deque<int> oqueue{s.parent_clique};
        odist[static_cast<std::size_t>(s.parent_clique)] = 0;
        while (!oqueue.empty()) {
            const int v = oqueue.front();
            oqueue.pop_front();
            std::vector<int> nbrs;
            if (tree.parent_sep_[static_cast<std::size_t>(v)] >= 0) {
                nbrs.push_back(
                    tree.separators_[static_cast<std::size_t>(tree.parent_sep_[static_cast<std::size_t>(v)])].parent_clique);
            }
            for (int sep_id : tree.child_seps_[static_cast<std::size_t>(v)]) {
                if (sep_id == s.id) continue;
                nbrs.push_back(tree.separators_[static_cast<std::size_t>(sep_id)].child_clique);
            }
            for (int w : nbrs) {
                if (odist[static_cast<std::size_t>(w)] < 0) {
                    odist[static_cast<std::size_t>(w)] = odist[static_cast<std::size_t>(v)] + 1;
                    oqueue.push_back(w);
                }
            }
        }
        for (int x : tree.observables_) {
            const int host = tree.host_clique(x);
            if (dist[static_cast<std::size_t>(host)] >= 0) {
                in_list.push_back(x);
                in_depth.push_back(dist[static_cast<std::size_t>(host)]);
            } else {
                out_list.push_back(x);
                out_depth.push_back(odist[static_cast<std::size_t>(host)]);
            }
        }
    }

    // Core groups and evidence sets.
    for (auto& s : tree.separators_) {
        const auto& in_list = tree.inside_obs_[static_cast<std::size_t>(s.id)];
        const auto& in_depth = inside_depth[static_cast<std::size_t>(s.id)];
        if (in_list.empty()) throw internal_error("separator with no inside observables survived pruning");
        if (tree.cliques_[static_cast<std::size_t>(s.child_clique)].is_leaf) {
            // Leaf separator: the core group is the whole delta of the leaf,
            // which the leaf tensor and the query readout range over.
            s.alpha = tree.cliques_[static_cast<std::size_t>(s.child_clique)].delta;
        } else {
            std::vector<int> idx(in_list.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(), [&](int a, int b) {
                if (in_depth[static_cast<std::size_t>(a)] != in_depth[static_cast<std::size_t>(b)]) {
                    return in_depth[static_cast<std::size_t>(a)] < in_depth[static_cast<std::size_t>(b)];
                }
                return in_list[static_cast<std::size_t>(a)] < in_list[static_cast<std::size_t>(b)];
            });
            std::int64_t need = 1;
            for (int v : s.members) need *= tree.cardinality(v);
            std::int64_t have = 1;
            for (int i : idx) {
                s.alpha.push_back(in_list[static_cast<std::size_t>(i)]);
                have *= tree.cardinality(in_list[static_cast<std::size_t>(i)]);
                if (have >= need) break;
            }
            if (have < need) {
                tree.warnings_.push_back("separator " + std::to_string(s.id) +
                                         ": inside observables cannot reach separator cardinality (" +
                                         std::to_string(have) + " < " + std::to_string(need) + ")");
            }
        }
        const auto& out_list = tree.outside_obs_[static_cast<std::size_t>(s.id)];
        const auto& out_depth = outside_depth[static_cast<std::size_t>(s.id)];
        std::vector<int> idx(out_list.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (out_depth[static_cast<std::size_t>(a)] != out_depth[static_cast<std::size_t>(b)]) {
                return out_depth[static_cast<std::size_t>(a)] < out_depth[static_cast<std::size_t>(b)];
            }
            return out_list[static_cast<std::size_t>(a)] < out_list[static_cast<std::size_t>(b)];
        });
        std::int64_t have = 1;
        for (int i : idx) {
            const int card = tree.cardinality(out_list[static_cast<std::size_t>(i)]);
            if (have > beta_cap / card) break;
            have *= card;
            s.beta.push_back(out_list[static_cast<std::size_t>(i)]);
        }
    }

    return tree;
}

std::uint64_t LatentJunctionTree::hash() const {
    std::ostringstream os;
    os << "cap=" << beta_cap_ << ";root=" << root_ << ";";
    for (const auto& v : vars_) {
        os << "v" << v.id << ":" << v.cardinality << (v.role == Role::Observable ? "o" : "h") << ";";
    }
    for (const auto& c : cliques_) {
        os << "c" << c.id << "[";
        for (int v : c.members) os << v << ",";
        os << "]d[";
        for (int v : c.delta) os << v << ",";
        os << "];";
    }
    for (const auto& s : separators_) {
        os << "s" << s.id << "(" << s.parent_clique << ">" << s.child_clique << ")[";
        for (int v : s.members) os << v << ",";
        os << "]a[";
        for (int v : s.alpha) os << v << ",";
        os << "]b[";
        for (int v : s.beta) os << v << ",";
        os << "];";
    }
    const std::string str = os.str();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : str) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace pbp
