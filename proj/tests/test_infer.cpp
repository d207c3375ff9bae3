#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pbp/errors.hpp"
#include "pbp/exact.hpp"
#include "pbp/harness.hpp"
#include "pbp/infer.hpp"
#include "pbp/jtree.hpp"
#include "pbp/learn.hpp"
#include "pbp/model.hpp"
#include "testutil.hpp"

using namespace pbp;
using testutil::var;

namespace {

const LeafTensor& leaf_for(const std::vector<LeafTensor>& lts, int sep) {
    for (const auto& lt : lts) {
        if (lt.separator == sep) return lt;
    }
    throw std::logic_error("no leaf tensor");
}

}  // namespace

TEST_CASE("leaf tensors over a singleton binary core group are the 2x2 identity") {
    const auto model = random_model(testutil::chain3_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto lts = build_leaf_tensors(tree);
    for (const auto& lt : lts) {
        REQUIRE(tree.separator(lt.separator).alpha.size() == 1);
        CHECK(lt.phi.order() == 2);
        CHECK(lt.phi[0] == 1.0);
        CHECK(lt.phi[1] == 0.0);
        CHECK(lt.phi[2] == 0.0);
        CHECK(lt.phi[3] == 1.0);
    }
}

TEST_CASE("every leaf tensor is a one-hot reshaper whose pseudoinverse inverts it exactly") {
    const auto model = random_model(preset_structure("fig4", 2), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    for (const auto& lt : build_leaf_tensors(tree)) {
        // Entries are exactly 0/1 with a single 1 per feature index.
        std::int64_t count = 0;
        for (double v : lt.phi.data()) {
            CHECK((v == 0.0 || v == 1.0));
            count += v == 1.0 ? 1 : 0;
        }
        CHECK(count == tree.alpha_dim(lt.separator));
        // Contract pinv with phi over the variable modes: identity on the
        // feature mode, exactly.
        NamedTensor prod = lt.phi_pinv;
        const auto renamed_phi = renamed(lt.phi, ModeLabel::separator(lt.separator),
                                         ModeLabel::feature("other"));
        for (int v : tree.separator(lt.separator).alpha) {
            // contract one variable mode at a time via matrix mode_multiply
            prod = mode_multiply(prod, marginalize(renamed_phi, [&] {
                                     std::vector<ModeLabel> keep;
                                     for (int w : tree.separator(lt.separator).alpha) {
                                         if (w != v) keep.push_back(ModeLabel::variable(w));
                                     }
                                     return keep;
                                 }()),
                                 ModeLabel::variable(v));
            break;  // multi-mode contraction handled below instead
        }
        // Simpler: flatten both to matrices by feature mode and multiply.
        const std::int64_t d = tree.alpha_dim(lt.separator);
        std::vector<double> eye(static_cast<std::size_t>(d * d), 0.0);
        for (std::int64_t i = 0; i < d; ++i) {
            for (std::int64_t j = 0; j < d; ++j) {
                double dot = 0.0;
                for (std::int64_t k = 0; k < d; ++k) {
                    dot += lt.phi_pinv[k * d + i] * lt.phi[j * d + k];
                }
                eye[static_cast<std::size_t>(i * d + j)] = dot;
            }
        }
        for (std::int64_t i = 0; i < d; ++i) {
            for (std::int64_t j = 0; j < d; ++j) {
                CHECK(eye[static_cast<std::size_t>(i * d + j)] == (i == j ? 1.0 : 0.0));
            }
        }
    }
}

TEST_CASE("leaf messages absorb evidence through the indicators") {
    const auto model = random_model(testutil::chain3_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto lts = build_leaf_tensors(tree);
    int leaf_sep = -1;
    for (int s = 0; s < tree.n_separators(); ++s) {
        if (tree.is_leaf_separator(s)) leaf_sep = s;
    }
    REQUIRE(leaf_sep >= 0);
    const int x = tree.separator(leaf_sep).alpha[0];

    // No evidence: the all-ones vector.
    const auto none = leaf_message(tree, leaf_for(lts, leaf_sep), {});
    CHECK(none.order() == 1);
    CHECK(none.modes()[0].label == ModeLabel::separator(leaf_sep));
    for (double v : none.data()) CHECK(v == 1.0);

    // Full evidence on the leaf: one-hot at the observed state.
    const auto hot = leaf_message(tree, leaf_for(lts, leaf_sep), {{x, 1}});
    CHECK(hot.data()[0] == 0.0);
    CHECK(hot.data()[1] == 1.0);

    // The skip argument withholds that variable's evidence.
    const auto skipped = leaf_message(tree, leaf_for(lts, leaf_sep), {{x, 1}}, x);
    for (double v : skipped.data()) CHECK(v == 1.0);
}

TEST_CASE("partial evidence on a two-variable leaf tensors the indicator with ones") {
    // Observable pair in one leaf: X -> Y with latent co-parent H of Y.
    ModelStructure s;
    s.variables = {var(0, "H", 2, Role::Latent), var(1, "X", 2, Role::Observable),
                   var(2, "Y", 2, Role::Observable), var(3, "Z", 2, Role::Observable)};
    s.edges = {{0, 2}, {1, 2}, {0, 3}};
    const auto model = random_model(s, 3);
    const auto tree = LatentJunctionTree::from_model(model);
    int pair_sep = -1;
    for (int i = 0; i < tree.n_separators(); ++i) {
        if (tree.is_leaf_separator(i) && tree.separator(i).alpha.size() == 2) pair_sep = i;
    }
    REQUIRE(pair_sep >= 0);
    const auto lts = build_leaf_tensors(tree);
    const auto& alpha = tree.separator(pair_sep).alpha;  // {X, Y} sorted
    const auto msg = leaf_message(tree, leaf_for(lts, pair_sep), {{alpha[0], 1}});
    // Hand contraction: indicator(1,2) (x) ones(2), flattened row-major.
    CHECK(msg.data()[0] == 0.0);
    CHECK(msg.data()[1] == 0.0);
    CHECK(msg.data()[2] == 1.0);
    CHECK(msg.data()[3] == 1.0);
}

TEST_CASE("a depth-one tree needs only leaf messages before the root step") {
    const auto model = random_model(testutil::fork_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    CHECK(params.operators.empty());
    MessageStore store;
    const auto lts = build_leaf_tensors(tree);
    for (const auto& c : tree.cliques()) {
        if (!c.is_leaf) continue;
        const int sep = tree.parent_separator(c.id);
        store.put(c.id, tree.separator(sep).parent_clique, leaf_message(tree, leaf_for(lts, sep), {}));
    }
    const auto before = store.size();
    upward_pass(tree, params, store);
    CHECK(store.size() == before);  // nothing to do
    root_messages(tree, params, store);
    CHECK(store.size() == before + tree.child_separators(tree.root()).size());
}

TEST_CASE("upward chaining of two operators equals the explicit two-step contraction") {
    const auto model = random_model(preset_structure("fig4", 2), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const EvidenceMap ev{{model.id_of("G"), 1}, {model.id_of("J"), 0}};
    MessageStore store;
    const auto lts = build_leaf_tensors(tree);
    for (const auto& c : tree.cliques()) {
        if (!c.is_leaf) continue;
        const int sep = tree.parent_separator(c.id);
        store.put(c.id, tree.separator(sep).parent_clique, leaf_message(tree, leaf_for(lts, sep), ev));
    }
    upward_pass(tree, params, store);
    // Pick a non-leaf separator and recompute its upward message by hand.
    for (int s = 0; s < tree.n_separators(); ++s) {
        if (tree.is_leaf_separator(s)) continue;
        const auto& sep = tree.separator(s);
        NamedTensor manual = params.operator_for(s);
        for (int child : tree.child_separators_below(s)) {
            const auto& cs = tree.separator(child);
            manual = mode_multiply(manual, store.at(cs.child_clique, cs.parent_clique),
                                   ModeLabel::separator(child));
        }
        const auto& got = store.at(sep.child_clique, sep.parent_clique);
        CHECK(got.order() == 1);
        CHECK(got.modes()[0].label == ModeLabel::separator(s));
        CHECK(got.modes()[0].extent == tree.alpha_dim(s));
        CHECK(testutil::max_abs_diff(got.data(), manual.data()) < 1e-13);
    }
}

TEST_CASE("root messages with no evidence give marginal expectations; one-hot gives slices") {
    const auto model = random_model(testutil::fork_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const auto root_seps = tree.child_separators(tree.root());
    REQUIRE(root_seps.size() == 3);

    MessageStore store;
    const auto lts = build_leaf_tensors(tree);
    for (const auto& c : tree.cliques()) {
        if (!c.is_leaf) continue;
        const int sep = tree.parent_separator(c.id);
        store.put(c.id, tree.separator(sep).parent_clique, leaf_message(tree, leaf_for(lts, sep), {}));
    }
    root_messages(tree, params, store);
    // With all-ones upward messages, the downward message to child k is the
    // marginal P[alpha(S_k)] from the root tensor / exact joint.
    const auto joint = observable_joint(model);
    for (int k : root_seps) {
        const auto& sep = tree.separator(k);
        const auto& msg = store.at(tree.root(), sep.child_clique);
        CHECK(msg.modes()[0].label == ModeLabel::separator(k));
        std::vector<ModeLabel> drop;
        for (const auto& m : joint.modes()) {
            if (!(m.label == ModeLabel::variable(sep.alpha[0]))) drop.push_back(m.label);
        }
        const auto want = marginalize(joint, drop);
        CHECK(testutil::max_abs_diff(msg.data(), want.data()) < 1e-10);
    }

    // One-hot upward messages slice the root tensor.
    MessageStore hot;
    for (const auto& c : tree.cliques()) {
        if (!c.is_leaf) continue;
        const int sep = tree.parent_separator(c.id);
        hot.put(c.id, tree.separator(sep).parent_clique,
                NamedTensor::one_hot(ModeLabel::separator(sep), tree.alpha_dim(sep), 1));
    }
    root_messages(tree, params, hot);
    const int k0 = root_seps[0];
    const auto& slice = hot.at(tree.root(), tree.separator(k0).child_clique);
    for (std::int64_t i = 0; i < slice.size(); ++i) {
        std::vector<std::int64_t> idx;
        for (int k : root_seps) idx.push_back(k == k0 ? i : 1);
        // root tensor modes follow root_seps order
        CHECK(slice[i] == doctest::Approx(params.root_tensor[params.root_tensor.offset(idx)]));
    }
}

TEST_CASE("a full sweep on a three-level tree matches one monolithic contraction") {
    const auto model = random_model(testutil::sparse_chain_structure(), 9);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    REQUIRE(params.operators.size() == 1);
    const int x1 = model.id_of("X1");
    const EvidenceMap ev{{x1, 1}};

    const PbpEngine engine(tree, params);
    const auto result = engine.query(ev, model.id_of("X3"));

    // Monolithic: contract T with the leaf message on the X1 side, push the
    // result through W, and read out at the X3 leaf directly.
    const auto lts = build_leaf_tensors(tree);
    MessageStore store;
    for (const auto& c : tree.cliques()) {
        if (!c.is_leaf) continue;
        const int sep = tree.parent_separator(c.id);
        store.put(c.id, tree.separator(sep).parent_clique, leaf_message(tree, leaf_for(lts, sep), ev));
    }
    // Identify roles.
    const auto root_seps = tree.child_separators(tree.root());
    int sep_nonleaf = -1, sep_leafside = -1;
    for (int s : root_seps) {
        if (tree.is_leaf_separator(s)) sep_leafside = s;
        else sep_nonleaf = s;
    }
    REQUIRE(sep_nonleaf >= 0);
    REQUIRE(sep_leafside >= 0);
    const int deep_sep = tree.child_separators_below(sep_nonleaf)[0];
    const auto& deep = tree.separator(deep_sep);
    // Upward through W to the root side.
    NamedTensor up = mode_multiply(params.operator_for(sep_nonleaf),
                                   store.at(deep.child_clique, deep.parent_clique),
                                   ModeLabel::separator(deep_sep));
    // Monolithic expression for the downward message into the deep leaf:
    // T x_{leafside} m_leaf x ... then through W.
    NamedTensor down = params.root_tensor;
    down = mode_multiply(down, store.at(tree.separator(sep_leafside).child_clique, tree.root()),
                         ModeLabel::separator(sep_leafside));
    down = mode_multiply(params.operator_for(sep_nonleaf), down, ModeLabel::separator(sep_nonleaf));
    // Readout at the deep leaf.
    const auto& lt = leaf_for(lts, deep_sep);
    NamedTensor u = mode_multiply(lt.phi_pinv, down, ModeLabel::separator(deep_sep));
    NamedTensor v = mode_multiply(lt.phi, store.at(deep.child_clique, deep.parent_clique),
                                  ModeLabel::separator(deep_sep));
    NamedTensor h = hadamard(u, v);
    double total = h.sum();
    std::vector<double> manual(h.data().begin(), h.data().end());
    for (auto& p : manual) p /= total;
    CHECK(testutil::max_abs_diff(result.posterior, manual) < 1e-12);
    (void)up;
}

TEST_CASE("population-learned inference reproduces exact marginals and posteriors") {
    const auto model = random_model(preset_structure("fig4", 2), 7);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const PbpEngine engine(tree, params);
    const ExactInference exact(model);

    // No evidence: marginals.
    for (int q : model.observable_ids()) {
        const auto truth = exact.posterior({}, q);
        const auto est = engine.query({}, q);
        CHECK(testutil::max_abs_diff(truth.probabilities, est.posterior) < 1e-8);
    }
    // The synthetic-benchmark query: D given (g, h, e).
    const int d = model.id_of("D");
    for (int g = 0; g < 2; ++g) {
        for (int h = 0; h < 2; ++h) {
            for (int e = 0; e < 2; ++e) {
                const EvidenceMap ev{{model.id_of("G"), g}, {model.id_of("H"), h}, {model.id_of("E"), e}};
                const auto truth = exact.posterior(ev, d);
                const auto est = engine.query(ev, d);
                CHECK(testutil::max_abs_diff(truth.probabilities, est.posterior) < 1e-8);
                CHECK(est.evidence_probability ==
                      doctest::Approx(exact.evidence_probability(ev)).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("evidence on the query variable returns the one-hot convention") {
    const auto model = random_model(testutil::chain3_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const PbpEngine engine(tree, params);
    const int x1 = model.id_of("X1");
    const auto r = engine.query({{x1, 1}}, x1);
    CHECK(r.posterior == std::vector<double>{0, 1});
    // The query variable's evidence still participates in the evidence
    // probability through the readout Hadamard.
    CHECK(r.evidence_probability ==
          doctest::Approx(exact_evidence_probability(model, {{x1, 1}})).epsilon(1e-10));
}

TEST_CASE("query and evidence validation") {
    const auto model = random_model(testutil::chain3_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const PbpEngine engine(tree, params);
    CHECK_THROWS_AS(engine.query({}, 0), validation_error);          // latent query
    CHECK_THROWS_AS(engine.query({{0, 1}}, 3), validation_error);    // latent evidence
    CHECK_THROWS_AS(engine.query({{3, 9}}, 4), validation_error);    // out of range
}

TEST_CASE("mismatched parameters are rejected by the engine") {
    const auto model = random_model(testutil::chain3_structure(), 3);
    const auto tree = LatentJunctionTree::from_model(model);
    auto params = learn_population(tree, model);
    params.metadata.tree_hash ^= 1;
    CHECK_THROWS_AS(PbpEngine(tree, params), validation_error);
}

TEST_CASE("message schedules only need to be topological") {
    const auto model = random_model(preset_structure("fig4", 2), 5);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const EvidenceMap ev{{model.id_of("G"), 0}, {model.id_of("N"), 1}};

    // Default schedule.
    const PbpEngine engine(tree, params);
    const auto want = engine.query(ev, model.id_of("D"));

    // Alternative: same depth partial order, reversed within levels.
    const auto lts = build_leaf_tensors(tree);
    auto run_with_orders = [&](std::vector<int> up_order, std::vector<int> down_order) {
        MessageStore store;
        for (const auto& c : tree.cliques()) {
            if (!c.is_leaf) continue;
            const int sep = tree.parent_separator(c.id);
            std::optional<int> skip;
            if (c.id == tree.host_clique(model.id_of("D"))) skip = model.id_of("D");
            store.put(c.id, tree.separator(sep).parent_clique,
                      leaf_message(tree, leaf_for(lts, sep), ev, skip));
        }
        upward_pass(tree, params, store, up_order);
        root_messages(tree, params, store);
        downward_pass(tree, params, store, down_order);
        const int qc = tree.host_clique(model.id_of("D"));
        const int qs = tree.parent_separator(qc);
        const auto& lt = leaf_for(lts, qs);
        NamedTensor u = mode_multiply(lt.phi_pinv, store.at(tree.separator(qs).parent_clique, qc),
                                      ModeLabel::separator(qs));
        NamedTensor v = mode_multiply(lt.phi, store.at(qc, tree.separator(qs).parent_clique),
                                      ModeLabel::separator(qs));
        NamedTensor h = hadamard(u, v);
        std::vector<double> p(h.data().begin(), h.data().end());
        const double total = h.sum();
        for (auto& x : p) x /= total;
        return p;
    };

    // Build depth-aware orders: deepest-first (ties descending id) for the
    // upward pass, shallow-first (ties descending id) for the downward pass.
    std::vector<int> depth(static_cast<std::size_t>(tree.n_cliques()), 0);
    std::vector<int> stack{tree.root()};
    while (!stack.empty()) {
        const int c = stack.back();
        stack.pop_back();
        for (int s : tree.child_separators(c)) {
            const int w = tree.separator(s).child_clique;
            depth[static_cast<std::size_t>(w)] = depth[static_cast<std::size_t>(c)] + 1;
            stack.push_back(w);
        }
    }
    std::vector<int> up(static_cast<std::size_t>(tree.n_cliques()));
    for (int i = 0; i < tree.n_cliques(); ++i) up[static_cast<std::size_t>(i)] = i;
    std::vector<int> down = up;
    std::sort(up.begin(), up.end(), [&](int a, int b) {
        if (depth[static_cast<std::size_t>(a)] != depth[static_cast<std::size_t>(b)]) {
            return depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)];
        }
        return a > b;
    });
    std::sort(down.begin(), down.end(), [&](int a, int b) {
        if (depth[static_cast<std::size_t>(a)] != depth[static_cast<std::size_t>(b)]) {
            return depth[static_cast<std::size_t>(a)] < depth[static_cast<std::size_t>(b)];
        }
        return a > b;
    });
    const auto got = run_with_orders(up, down);
    CHECK(testutil::max_abs_diff(got, want.posterior) < 1e-12);
}

TEST_CASE("rebuilding with a different root leaves population posteriors unchanged") {
    const auto model = random_model(preset_structure("fig4", 2), 5);
    const auto base = LatentJunctionTree::from_model(model);
    int other = -1;
    for (const auto& c : base.cliques()) {
        if (!c.is_leaf && c.id != base.root()) other = c.id;
    }
    REQUIRE(other >= 0);
    const auto rebuilt = LatentJunctionTree::from_model(model, kDefaultBetaCap, other);
    const PbpEngine e1(base, learn_population(base, model));
    const PbpEngine e2(rebuilt, learn_population(rebuilt, model));
    const EvidenceMap ev{{model.id_of("G"), 1}, {model.id_of("H"), 1}, {model.id_of("E"), 0}};
    for (int q : model.observable_ids()) {
        if (ev.count(q)) continue;
        const auto a = e1.query(ev, q);
        const auto b = e2.query(ev, q);
        CHECK(testutil::max_abs_diff(a.posterior, b.posterior) < 1e-6);
    }
}

TEST_CASE("finite-sample posteriors stay on the simplex after clamping") {
    const auto model = random_model(preset_structure("fig4", 2), 5);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto data = ancestral_sample(model, 300, 11);
    const auto params = learn(tree, data, {});
    const PbpEngine engine(tree, params);
    Rng rng(9);
    for (int trial = 0; trial < 40; ++trial) {
        EvidenceMap ev;
        for (int x : model.observable_ids()) {
            if (rng.uniform01() < 0.4) ev[x] = rng.uniform01() < 0.5 ? 0 : 1;
        }
        int q = model.observable_ids()[static_cast<std::size_t>(rng.uniform01() * 8)];
        const auto r = engine.query(ev, q);
        if (r.zero_evidence) continue;
        double total = 0.0;
        for (double p : r.posterior) {
            CHECK(p >= 0.0);
            total += p;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("impossible evidence raises the zero-evidence signal") {
    const auto model = testutil::copy_chain_model();
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const PbpEngine engine(tree, params);
    const auto r = engine.query({{0, 0}, {1, 1}}, 1);
    CHECK(r.zero_evidence);
    CHECK(r.posterior.empty());
}

TEST_CASE("evidence probabilities from population parameters are exact and normalized") {
    const auto model = random_model(preset_structure("fig4", 2), 7);
    const auto tree = LatentJunctionTree::from_model(model);
    const auto params = learn_population(tree, model);
    const PbpEngine engine(tree, params);

    // Empty evidence: total mass.
    CHECK(engine.evidence_probability({}).evidence_probability == doctest::Approx(1.0).epsilon(1e-8));

    // Full evidence: the observable joint entry.
    const auto joint = observable_joint(model);
    const auto obs = model.observable_ids();
    EvidenceMap full;
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        full[obs[i]] = static_cast<int>(i % 2);
        idx.push_back(i % 2);
    }
    CHECK(engine.evidence_probability(full).evidence_probability ==
          doctest::Approx(joint[joint.offset(idx)]).epsilon(1e-8));

    // Sum over all complete evidence assignments.
    double total = 0.0;
    std::vector<int> state(obs.size(), 0);
    for (std::int64_t f = 0; f < joint.size(); ++f) {
        EvidenceMap ev;
        for (std::size_t i = 0; i < obs.size(); ++i) ev[obs[i]] = state[i];
        total += engine.evidence_probability(ev).evidence_probability;
        for (int i = static_cast<int>(obs.size()) - 1; i >= 0; --i) {
            if (++state[static_cast<std::size_t>(i)] < 2) break;
            state[static_cast<std::size_t>(i)] = 0;
        }
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
}
