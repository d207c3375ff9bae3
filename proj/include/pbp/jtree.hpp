#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pbp/model.hpp"

namespace pbp {

struct UndirectedGraph {
    int n = 0;
    std::vector<std::set<int>> adj;

    explicit UndirectedGraph(int n_vertices) : n(n_vertices), adj(static_cast<std::size_t>(n_vertices)) {}
    void add_edge(int u, int v);
    bool has_edge(int u, int v) const;
    bool connected() const;
    std::vector<std::pair<int, int>> edge_list() const;  // (u < v), sorted
};

// Undirected skeleton plus marriages between co-parents of every child.
UndirectedGraph moralize(const GraphicalModel& model);

struct Triangulation {
    UndirectedGraph graph;
    std::vector<int> elimination_order;
};

// Greedy min-fill triangulation, ties broken by lowest vertex id. The result
// is checked chordal before returning.
Triangulation triangulate(const UndirectedGraph& g);

// Maximum-cardinality-search chordality test.
bool is_chordal(const UndirectedGraph& g);

struct CliqueTreeDraft {
    std::vector<std::vector<int>> cliques;   // sorted member lists, discovery order
    std::vector<std::pair<int, int>> edges;  // spanning-tree edges (i < j)
};

// Maximal cliques of a chordal graph joined by a maximum-weight spanning tree
// over intersection sizes (ties by lexicographic clique-id pair).
CliqueTreeDraft build_clique_tree(const Triangulation& tri);

bool running_intersection_holds(const std::vector<std::vector<int>>& cliques,
                                const std::vector<std::pair<int, int>>& edges);

struct Clique {
    int id = 0;
    std::vector<int> members;  // variable ids, sorted
    bool is_leaf = false;      // no children in the rooted tree
    std::vector<int> delta;    // associated observables, sorted; nonempty only on leaves
};

struct Separator {
    int id = 0;
    std::vector<int> members;  // intersection of the adjacent cliques, sorted
    int parent_clique = -1;    // root side
    int child_clique = -1;     // inside-tree side
    std::vector<int> alpha;    // core group, greedy order
    std::vector<int> beta;     // evidence set, greedy order
};

inline constexpr std::int64_t kDefaultBetaCap = 1024;

// Rooted latent junction tree with observable-to-leaf association and
// per-separator core groups / evidence sets. Immutable once built.
class LatentJunctionTree {
public:
    // Full construction pipeline: moralize, triangulate, clique tree, leaf
    // association (with pendant surgery for observables trapped in internal
    // cliques), pruning of observable-free leaves, root selection, and the
    // alpha/beta computations. `root_override` must name a non-leaf clique.
    static LatentJunctionTree from_model(const GraphicalModel& model,
                                         std::int64_t beta_cap = kDefaultBetaCap,
                                         std::optional<int> root_override = std::nullopt);

    const std::vector<Variable>& variables() const { return vars_; }
    int cardinality(int var) const { return vars_[static_cast<std::size_t>(var)].cardinality; }
    const std::vector<int>& observables() const { return observables_; }

    int n_cliques() const { return static_cast<int>(cliques_.size()); }
    const Clique& clique(int id) const { return cliques_[static_cast<std::size_t>(id)]; }
    const std::vector<Clique>& cliques() const { return cliques_; }

    int n_separators() const { return static_cast<int>(separators_.size()); }
    const Separator& separator(int id) const { return separators_[static_cast<std::size_t>(id)]; }
    const std::vector<Separator>& separators() const { return separators_; }

    int root() const { return root_; }
    // -1 for the root clique.
    int parent_separator(int clique_id) const { return parent_sep_[static_cast<std::size_t>(clique_id)]; }
    // Ordered by child clique id.
    const std::vector<int>& child_separators(int clique_id) const {
        return child_seps_[static_cast<std::size_t>(clique_id)];
    }

    bool is_leaf_separator(int sep_id) const {
        return clique(separator(sep_id).child_clique).is_leaf;
    }
    // Separators of the clique directly below `sep_id` (the children through
    // which its inside tree continues); empty for leaf separators.
    const std::vector<int>& child_separators_below(int sep_id) const {
        return child_separators(separator(sep_id).child_clique);
    }

    const std::vector<int>& inside_observables(int sep_id) const {
        return inside_obs_[static_cast<std::size_t>(sep_id)];
    }
    const std::vector<int>& outside_observables(int sep_id) const {
        return outside_obs_[static_cast<std::size_t>(sep_id)];
    }

    // Host leaf clique of an observable.
    int host_clique(int observable_id) const;

    std::int64_t alpha_dim(int sep_id) const;
    std::int64_t beta_cap() const { return beta_cap_; }

    const std::vector<std::string>& warnings() const { return warnings_; }

    // Stable structural hash covering cliques, separators, root, alpha, beta.
    std::uint64_t hash() const;

private:
    LatentJunctionTree() = default;

    std::vector<Variable> vars_;
    std::vector<int> observables_;
    std::vector<Clique> cliques_;
    std::vector<Separator> separators_;
    int root_ = -1;
    std::vector<int> parent_sep_;
    std::vector<std::vector<int>> child_seps_;
    std::vector<std::vector<int>> inside_obs_;
    std::vector<std::vector<int>> outside_obs_;
    std::int64_t beta_cap_ = kDefaultBetaCap;
    std::vector<std::string> warnings_;
};

}  // namespace pbp
