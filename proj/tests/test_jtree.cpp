#include <doctest.h>

#include <algorithm>
#include <set>

#include "pbp/errors.hpp"
#include "pbp/harness.hpp"
#include "pbp/jtree.hpp"
#include "pbp/model.hpp"
#include "testutil.hpp"

using namespace pbp;
using testutil::var;

namespace {

// Independent chordality oracle: repeatedly eliminate a simplicial vertex.
// A graph is chordal iff this succeeds for all vertices.
bool chordal_by_simplicial_elimination(UndirectedGraph g) {
    std::vector<char> gone(static_cast<std::size_t>(g.n), 0);
    for (int step = 0; step < g.n; ++step) {
        int pick = -1;
        for (int v = 0; v < g.n && pick < 0; ++v) {
            if (gone[static_cast<std::size_t>(v)]) continue;
            bool simplicial = true;
            const auto& nb = g.adj[static_cast<std::size_t>(v)];
            for (auto it = nb.begin(); it != nb.end() && simplicial; ++it) {
                auto jt = it;
                for (++jt; jt != nb.end(); ++jt) {
                    if (!g.has_edge(*it, *jt)) {
                        simplicial = false;
                        break;
                    }
                }
            }
            if (simplicial) pick = v;
        }
        if (pick < 0) return false;
        const auto nb = g.adj[static_cast<std::size_t>(pick)];
        for (int w : nb) g.adj[static_cast<std::size_t>(w)].erase(pick);
        g.adj[static_cast<std::size_t>(pick)].clear();
        gone[static_cast<std::size_t>(pick)] = 1;
    }
    return true;
}

std::set<std::pair<int, int>> edge_set(const UndirectedGraph& g) {
    const auto list = g.edge_list();
    return {list.begin(), list.end()};
}

}  // namespace

TEST_CASE("moralizing a chain adds no edges") {
    ModelStructure s;
    s.variables = {var(0, "A", 2, Role::Observable), var(1, "B", 2, Role::Observable),
                   var(2, "C", 2, Role::Observable)};
    s.edges = {{0, 1}, {1, 2}};
    const auto g = moralize(random_model(s, 1));
    CHECK(edge_set(g) == std::set<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("moralizing a v-structure marries the co-parents") {
    ModelStructure s;
    s.variables = {var(0, "A", 2, Role::Observable), var(1, "B", 2, Role::Observable),
                   var(2, "C", 2, Role::Observable)};
    s.edges = {{0, 2}, {1, 2}};
    const auto g = moralize(random_model(s, 1));
    CHECK(edge_set(g) == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}});
}

TEST_CASE("moral graph of the fig4 preset matches the hand enumeration") {
    const auto m = random_model(preset_structure("fig4", 2), 1);
    const auto g = moralize(m);
    // Skeleton edges by name; N's co-parents C and L are already adjacent
    // through the C->L edge, so moralization adds nothing new.
    auto id = [&](const char* n) { return m.id_of(n); };
    std::set<std::pair<int, int>> want;
    auto add = [&](const char* a, const char* b) {
        const int x = id(a), y = id(b);
        want.insert({std::min(x, y), std::max(x, y)});
    };
    add("A", "B"); add("A", "C"); add("B", "F"); add("B", "G"); add("B", "H");
    add("C", "I"); add("C", "L"); add("F", "D"); add("F", "E"); add("I", "J");
    add("I", "K"); add("L", "M"); add("C", "N"); add("L", "N");
    CHECK(edge_set(g) == want);
}

TEST_CASE("triangulating a tree leaves it unchanged") {
    ModelStructure s;
    s.variables = {var(0, "A", 2, Role::Observable), var(1, "B", 2, Role::Observable),
                   var(2, "C", 2, Role::Observable)};
    s.edges = {{0, 1}, {1, 2}};
    const auto g = moralize(random_model(s, 1));
    const auto tri = triangulate(g);
    CHECK(edge_set(tri.graph) == edge_set(g));
}

TEST_CASE("triangulating a 4-cycle adds exactly one chord") {
    UndirectedGraph g(4);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(2, 3);
    g.add_edge(0, 3);
    const auto tri = triangulate(g);
    CHECK(tri.graph.edge_list().size() == 5);
    CHECK(is_chordal(tri.graph));
    // Lowest-id tie-break eliminates vertex 0 first, chording 1-3.
    CHECK(tri.graph.has_edge(1, 3));
}

TEST_CASE("triangulation outputs are chordal by the simplicial-elimination oracle") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto structure = testutil::random_dag_structure(8, seed);
        const auto g = moralize(random_model(structure, seed));
        if (!g.connected()) continue;
        const auto tri = triangulate(g);
        CHECK(is_chordal(tri.graph));
        CHECK(chordal_by_simplicial_elimination(tri.graph));
    }
}

TEST_CASE("triangulate requires a connected graph") {
    UndirectedGraph g(3);
    g.add_edge(0, 1);
    CHECK_THROWS_AS(triangulate(g), validation_error);
}

TEST_CASE("clique tree of a chain") {
    ModelStructure s;
    s.variables = {var(0, "A", 2, Role::Observable), var(1, "B", 2, Role::Observable),
                   var(2, "C", 2, Role::Observable)};
    s.edges = {{0, 1}, {1, 2}};
    const auto draft = build_clique_tree(triangulate(moralize(random_model(s, 1))));
    REQUIRE(draft.cliques.size() == 2);
    std::set<std::vector<int>> got(draft.cliques.begin(), draft.cliques.end());
    CHECK(got == std::set<std::vector<int>>{{0, 1}, {1, 2}});
    REQUIRE(draft.edges.size() == 1);
}

TEST_CASE("a triangle collapses to a single clique") {
    UndirectedGraph g(3);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(0, 2);
    const auto draft = build_clique_tree({g, {0, 1, 2}});
    CHECK(draft.cliques.size() == 1);
    CHECK(draft.cliques[0] == std::vector<int>{0, 1, 2});
    CHECK(draft.edges.empty());
}

TEST_CASE("running intersection property holds on 100 random models") {
    int built = 0;
    for (std::uint64_t seed = 0; built < 100; ++seed) {
        const auto structure = testutil::random_dag_structure(4 + static_cast<int>(seed % 7), seed);
        const auto model = random_model(structure, seed);
        if (!moralize(model).connected()) continue;
        const auto draft = build_clique_tree(triangulate(moralize(model)));
        CHECK(running_intersection_holds(draft.cliques, draft.edges));
        // The full latent junction tree keeps the property after the
        // association and pruning surgery as well.
        const auto tree = LatentJunctionTree::from_model(model);
        std::vector<std::vector<int>> members;
        std::vector<std::pair<int, int>> edges;
        for (const auto& c : tree.cliques()) members.push_back(c.members);
        for (const auto& sep : tree.separators()) {
            edges.emplace_back(std::min(sep.parent_clique, sep.child_clique),
                               std::max(sep.parent_clique, sep.child_clique));
        }
        CHECK(running_intersection_holds(members, edges));
        ++built;
    }
}

TEST_CASE("observable association covers every observable exactly once") {
    for (std::uint64_t seed : {0ULL, 3ULL, 9ULL, 27ULL}) {
        const auto model = random_model(testutil::random_dag_structure(9, seed), seed);
        if (!moralize(model).connected()) continue;
        const auto tree = LatentJunctionTree::from_model(model);
        std::map<int, int> host_count;
        for (const auto& c : tree.cliques()) {
            if (!c.is_leaf) CHECK(c.delta.empty());
            for (int x : c.delta) {
                ++host_count[x];
                CHECK(std::binary_search(c.members.begin(), c.members.end(), x));
            }
        }
        CHECK(host_count.size() == model.observable_ids().size());
        for (const auto& [x, count] : host_count) {
            (void)x;
            CHECK(count == 1);
        }
    }
}

TEST_CASE("HMM-shaped model needs no pendant cliques") {
    // H1 -> H2, H1 -> X1, H2 -> X2: cliques {H1,X1}, {H1,H2}, {H2,X2}.
    ModelStructure s;
    s.variables = {var(0, "H1", 2, Role::Latent), var(1, "H2", 2, Role::Latent),
                   var(2, "X1", 2, Role::Observable), var(3, "X2", 2, Role::Observable)};
    s.edges = {{0, 1}, {0, 2}, {1, 3}};
    const auto tree = LatentJunctionTree::from_model(random_model(s, 1));
    CHECK(tree.n_cliques() == 3);
    for (const auto& c : tree.cliques()) {
        if (c.is_leaf) CHECK(c.delta.size() == 1);
    }
}

TEST_CASE("an observable confined to internal cliques gets a pendant leaf") {
    // X sits between two latents: H1 -> X -> ... every clique containing X
    // also bridges toward both sides, so X ends up internal without surgery.
    ModelStructure s;
    s.variables = {var(0, "H1", 2, Role::Latent), var(1, "X", 2, Role::Observable),
                   var(2, "H2", 2, Role::Latent), var(3, "Y", 2, Role::Observable),
                   var(4, "Z", 2, Role::Observable)};
    s.edges = {{0, 1}, {1, 2}, {0, 3}, {2, 4}};
    const auto model = random_model(s, 1);
    const auto tree = LatentJunctionTree::from_model(model);
    const int host = tree.host_clique(1);
    CHECK(tree.clique(host).is_leaf);
    CHECK(tree.clique(host).delta == std::vector<int>{1});
    // Surgery preserved the running intersection property (checked by the
    // builder) and every observable still has exactly one host.
    for (int x : model.observable_ids()) CHECK(tree.clique(tree.host_clique(x)).is_leaf);
}

TEST_CASE("root selection picks the center and is deterministic") {
    // Chain of three latents with observables at each: the middle clique
    // chain minimizes eccentricity.
    const auto model = random_model(testutil::chain3_structure(), 1);
    const auto t1 = LatentJunctionTree::from_model(model);
    const auto t2 = LatentJunctionTree::from_model(model);
    CHECK(t1.root() == t2.root());
    CHECK(t1.hash() == t2.hash());
    CHECK_FALSE(t1.clique(t1.root()).is_leaf);
    // Center: eccentricity of the chosen root is minimal among non-leaves.
    const auto ecc = [&](int c) {
        // reconstruct adjacency and BFS
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(t1.n_cliques()));
        for (const auto& sep : t1.separators()) {
            adj[static_cast<std::size_t>(sep.parent_clique)].push_back(sep.child_clique);
            adj[static_cast<std::size_t>(sep.child_clique)].push_back(sep.parent_clique);
        }
        std::vector<int> dist(static_cast<std::size_t>(t1.n_cliques()), -1);
        std::vector<int> queue{c};
        dist[static_cast<std::size_t>(c)] = 0;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            for (int w : adj[static_cast<std::size_t>(queue[q])]) {
                if (dist[static_cast<std::size_t>(w)] < 0) {
                    dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(queue[q])] + 1;
                    queue.push_back(w);
                }
            }
        }
        return *std::max_element(dist.begin(), dist.end());
    };
    for (const auto& c : t1.cliques()) {
        if (!c.is_leaf) CHECK(ecc(t1.root()) <= ecc(c.id));
    }
}

TEST_CASE("inside/outside observables partition the observable set") {
    const auto model = random_model(testutil::diamond_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto all = model.observable_ids();
    for (const auto& sep : tree.separators()) {
        const auto& in = tree.inside_observables(sep.id);
        const auto& out = tree.outside_observables(sep.id);
        CHECK(in.size() + out.size() == all.size());
        std::set<int> seen(in.begin(), in.end());
        for (int x : out) CHECK(seen.insert(x).second);
        // Leaf separators: inside equals the leaf's delta.
        if (tree.is_leaf_separator(sep.id)) {
            CHECK(in == tree.clique(sep.child_clique).delta);
        }
    }
}

TEST_CASE("nested separators have nested inside sets") {
    const auto model = random_model(preset_structure("fig4", 2), 4);
    const auto tree = LatentJunctionTree::from_model(model);
    for (const auto& s : tree.separators()) {
        for (int child_sep : tree.child_separators_below(s.id)) {
            const auto& inner = tree.inside_observables(child_sep);
            const auto& outer = tree.inside_observables(s.id);
            CHECK(std::includes(outer.begin(), outer.end(), inner.begin(), inner.end()));
        }
    }
}

TEST_CASE("core group of a leaf separator is the leaf's delta") {
    const auto model = random_model(testutil::chain3_structure(), 5);
    const auto tree = LatentJunctionTree::from_model(model);
    for (const auto& sep : tree.separators()) {
        if (tree.is_leaf_separator(sep.id)) {
            CHECK(sep.alpha == tree.clique(sep.child_clique).delta);
        } else {
            // Binary separator with binary observables: one nearest suffices.
            CHECK(tree.alpha_dim(sep.id) >= 2);
        }
        CHECK_FALSE(sep.alpha.empty());
    }
}

TEST_CASE("a 4-state separator collects two binary observables") {
    // Two latent parents A, B shared by two latent children C, D; the clique
    // tree joins {A,B,C} and {A,B,D} across the 4-state separator {A,B}, and
    // each side carries two binary observables.
    ModelStructure s;
    s.variables = {var(0, "A", 2, Role::Latent),      var(1, "B", 2, Role::Latent),
                   var(2, "C", 2, Role::Latent),      var(3, "D", 2, Role::Latent),
                   var(4, "X1", 2, Role::Observable), var(5, "X2", 2, Role::Observable),
                   var(6, "Y1", 2, Role::Observable), var(7, "Y2", 2, Role::Observable)};
    s.edges = {{0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 4}, {2, 5}, {3, 6}, {3, 7}};
    const auto tree = LatentJunctionTree::from_model(random_model(s, 5));
    bool found = false;
    for (const auto& sep : tree.separators()) {
        if (sep.members == std::vector<int>{0, 1} && !tree.is_leaf_separator(sep.id)) {
            CHECK(sep.alpha.size() == 2);
            CHECK(tree.alpha_dim(sep.id) == 4);
            found = true;
        }
    }
    CHECK(found);
    CHECK(tree.warnings().empty());
}

TEST_CASE("unattainable separator cardinality is recorded as a warning") {
    // 5-state latents, binary observables: the non-leaf separator {H2} needs
    // 5 joint states but its inside observables only offer 2.
    ModelStructure s;
    s.variables = {var(0, "H1", 5, Role::Latent), var(1, "H2", 5, Role::Latent),
                   var(2, "H3", 5, Role::Latent), var(3, "X1", 2, Role::Observable),
                   var(4, "X2", 2, Role::Observable)};
    s.edges = {{0, 1}, {1, 2}, {0, 3}, {2, 4}};
    const auto tree = LatentJunctionTree::from_model(random_model(s, 2));
    CHECK_FALSE(tree.warnings().empty());
}

TEST_CASE("alpha and beta never overlap") {
    for (std::uint64_t seed : {2ULL, 8ULL, 32ULL}) {
        const auto model = random_model(testutil::random_dag_structure(9, seed), seed);
        if (!moralize(model).connected()) continue;
        const auto tree = LatentJunctionTree::from_model(model);
        for (const auto& sep : tree.separators()) {
            std::set<int> a(sep.alpha.begin(), sep.alpha.end());
            for (int b : sep.beta) CHECK(a.count(b) == 0);
        }
    }
}

TEST_CASE("evidence sets respect the cardinality cap and distance order") {
    const auto model = random_model(preset_structure("fig4", 2), 4);
    // A huge cap takes every outside observable.
    const auto big = LatentJunctionTree::from_model(model, 1 << 20);
    for (const auto& sep : big.separators()) {
        CHECK(sep.beta.size() == big.outside_observables(sep.id).size());
    }
    // Cap 2 with binary variables keeps exactly the nearest one.
    const auto small = LatentJunctionTree::from_model(model, 2);
    for (const auto& sep : small.separators()) {
        if (!small.outside_observables(sep.id).empty()) {
            CHECK(sep.beta.size() == 1);
        }
    }
    // Determinism under rebuild.
    const auto again = LatentJunctionTree::from_model(model, 2);
    CHECK(again.hash() == small.hash());
    // Cap changes the hash.
    CHECK(big.hash() != small.hash());
}

TEST_CASE("two-clique trees get a spliced separator root") {
    // Single latent with two observable children: cliques {H,X}, {H,Y}.
    ModelStructure s;
    s.variables = {var(0, "H", 2, Role::Latent), var(1, "X", 2, Role::Observable),
                   var(2, "Y", 2, Role::Observable)};
    s.edges = {{0, 1}, {0, 2}};
    const auto tree = LatentJunctionTree::from_model(random_model(s, 3));
    CHECK(tree.n_cliques() == 3);
    CHECK_FALSE(tree.clique(tree.root()).is_leaf);
    CHECK(tree.clique(tree.root()).members == std::vector<int>{0});
    CHECK(tree.child_separators(tree.root()).size() == 2);
    for (const auto& sep : tree.separators()) CHECK_FALSE(sep.members.empty());
}

TEST_CASE("single-clique models get a copied root") {
    ModelStructure s;
    s.variables = {var(0, "H", 2, Role::Latent), var(1, "X", 3, Role::Observable)};
    s.edges = {{0, 1}};
    const auto tree = LatentJunctionTree::from_model(random_model(s, 3));
    CHECK(tree.n_cliques() == 2);
    CHECK(tree.n_separators() == 1);
    CHECK_FALSE(tree.clique(tree.root()).is_leaf);
    CHECK(tree.clique(tree.separator(0).child_clique).delta == std::vector<int>{1});
}

TEST_CASE("latent-only leaf cliques are pruned") {
    // H2 only dangles off H1; its clique {H1,H2} is an observable-free leaf
    // and must disappear.
    ModelStructure s;
    s.variables = {var(0, "H1", 2, Role::Latent), var(1, "H2", 2, Role::Latent),
                   var(2, "X", 2, Role::Observable)};
    s.edges = {{0, 1}, {0, 2}};
    const auto tree = LatentJunctionTree::from_model(random_model(s, 3));
    for (const auto& c : tree.cliques()) {
        CHECK_FALSE(std::binary_search(c.members.begin(), c.members.end(), 1));
    }
    // In general every surviving leaf hosts at least one observable.
    for (std::uint64_t seed : {1ULL, 4ULL, 16ULL}) {
        const auto model = random_model(testutil::random_dag_structure(8, seed), seed);
        if (!moralize(model).connected()) continue;
        const auto t = LatentJunctionTree::from_model(model);
        for (const auto& c : t.cliques()) {
            CHECK((c.is_leaf ? !c.delta.empty() : c.delta.empty()));
        }
    }
}

TEST_CASE("root overrides are honored and validated") {
    const auto model = random_model(preset_structure("fig4", 2), 4);
    const auto base = LatentJunctionTree::from_model(model);
    int other = -1;
    for (const auto& c : base.cliques()) {
        if (!c.is_leaf && c.id != base.root()) other = c.id;
    }
    REQUIRE(other >= 0);
    const auto rerooted = LatentJunctionTree::from_model(model, kDefaultBetaCap, other);
    CHECK(rerooted.root() == other);
    int leaf = -1;
    for (const auto& c : base.cliques()) {
        if (c.is_leaf) leaf = c.id;
    }
    CHECK_THROWS_AS(LatentJunctionTree::from_model(model, kDefaultBetaCap, leaf), validation_error);
}

TEST_CASE("construction is fully deterministic") {
    const auto model = random_model(preset_structure("fig4", 2), 11);
    const auto a = LatentJunctionTree::from_model(model);
    const auto b = LatentJunctionTree::from_model(model);
    CHECK(a.hash() == b.hash());
    REQUIRE(a.n_separators() == b.n_separators());
    for (int s = 0; s < a.n_separators(); ++s) {
        CHECK(a.separator(s).alpha == b.separator(s).alpha);
        CHECK(a.separator(s).beta == b.separator(s).beta);
    }
}
