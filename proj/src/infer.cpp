#include "pbp/infer.hpp"

#include <algorithm>
#include <deque>

#include "pbp/errors.hpp"
#include "pbp/features.hpp"

namespace pbp {

namespace {

// Cliques ordered by depth below the root; used to schedule the sweeps.
std::vector<int> depths_from_root(const LatentJunctionTree& tree) {
    std::vector<int> depth(static_cast<std::size_t>(tree.n_cliques()), -1);
    std::deque<int> queue{tree.root()};
    depth[static_cast<std::size_t>(tree.root())] = 0;
    while (!queue.empty()) {
        const int c = queue.front();
        queue.pop_front();
        for (int sep : tree.child_separators(c)) {
            const int w = tree.separator(sep).child_clique;
            depth[static_cast<std::size_t>(w)] = depth[static_cast<std::size_t>(c)] + 1;
            queue.push_back(w);
        }
    }
    return depth;
}

std::vector<int> default_order(const LatentJunctionTree& tree, bool deepest_first) {
    const auto depth = depths_from_root(tree);
    std::vector<int> order(static_cast<std::size_t>(tree.n_cliques()));
    for (int c = 0; c < tree.n_cliques(); ++c) order[static_cast<std::size_t>(c)] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const int da = depth[static_cast<std::size_t>(a)], db = depth[static_cast<std::size_t>(b)];
        if (da != db) return deepest_first ? da > db : da < db;
        return a < b;
    });
    return order;
}

void validate_query_evidence(const LatentJunctionTree& tree, const EvidenceMap& evidence) {
    for (const auto& [id, value] : evidence) {
        if (id < 0 || id >= static_cast<int>(tree.variables().size())) {
            throw validation_error("evidence on unknown variable id");
        }
        const auto& v = tree.variables()[static_cast<std::size_t>(id)];
        if (v.role != Role::Observable) throw validation_error("evidence on latent variable " + v.name);
        if (value < 0 || value >= v.cardinality) {
            throw validation_error("evidence value out of range for " + v.name);
        }
    }
}

}  // namespace

std::vector<LeafTensor> build_leaf_tensors(const LatentJunctionTree& tree) {
    std::vector<LeafTensor> out;
    for (int s = 0; s < tree.n_separators(); ++s) {
        if (!tree.is_leaf_separator(s)) continue;
        const auto& alpha = tree.separator(s).alpha;
        FeatureMap fm(alpha, [&] {
            std::vector<int> cards;
            for (int v : alpha) cards.push_back(tree.cardinality(v));
            return cards;
        }());
        std::vector<Mode> modes;
        modes.push_back({ModeLabel::separator(s), fm.dim()});
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            modes.push_back({ModeLabel::variable(alpha[i]), fm.cardinalities()[i]});
        }
        NamedTensor phi = NamedTensor::zeros(std::move(modes));
        // Fiber along the feature mode at assignment a is theta evaluated at
        // a; with indicator features that is the one-hot at a's own index, so
        // the tensor is the identity reshaped over the variable modes.
        for (std::int64_t a = 0; a < fm.dim(); ++a) phi.at(a * fm.dim() + a) = 1.0;
        const ModeLabel sep_label = ModeLabel::separator(s);
        LeafTensor leaf;
        leaf.separator = s;
        leaf.phi_pinv = pinv(phi, std::span<const ModeLabel>(&sep_label, 1));
        leaf.phi = std::move(phi);
        out.push_back(std::move(leaf));
    }
    return out;
}

NamedTensor leaf_message(const LatentJunctionTree& tree, const LeafTensor& leaf,
                         const EvidenceMap& evidence, std::optional<int> skip) {
    NamedTensor m = leaf.phi_pinv;
    for (int x : tree.separator(leaf.separator).alpha) {
        std::optional<int> observed;
        const auto it = evidence.find(x);
        if (it != evidence.end() && !(skip.has_value() && *skip == x)) observed = it->second;
        m = mode_multiply(m, NamedTensor::from_vector(ModeLabel::variable(x), zeta(tree.cardinality(x), observed)),
                          ModeLabel::variable(x));
    }
    return m;
}

void MessageStore::put(int from, int to, NamedTensor message) {
    messages_[{from, to}] = std::move(message);
}

const NamedTensor& MessageStore::at(int from, int to) const {
    const auto it = messages_.find({from, to});
    if (it == messages_.end()) {
        throw internal_error("missing message " + std::to_string(from) + "->" + std::to_string(to));
    }
    return it->second;
}

bool MessageStore::has(int from, int to) const { return messages_.count({from, to}) > 0; }

void upward_pass(const LatentJunctionTree& tree, const LearnedParams& params, MessageStore& store,
                 std::span<const int> order) {
    std::vector<int> fallback;
    if (order.empty()) {
        fallback = default_order(tree, /*deepest_first=*/true);
        order = fallback;
    }
    for (int c : order) {
        if (c == tree.root() || tree.clique(c).is_leaf) continue;
        const int sep = tree.parent_separator(c);
        NamedTensor m = params.operator_for(sep);
        for (int child_sep : tree.child_separators(c)) {
            const auto& s = tree.separator(child_sep);
            m = mode_multiply(m, store.at(s.child_clique, c), ModeLabel::separator(child_sep));
        }
        store.put(c, tree.separator(sep).parent_clique, std::move(m));
    }
}

void root_messages(const LatentJunctionTree& tree, const LearnedParams& params, MessageStore& store) {
    const int root = tree.root();
    const auto& seps = tree.child_separators(root);
    for (int k : seps) {
        NamedTensor m = params.root_tensor;
        for (int j : seps) {
            if (j == k) continue;
            const auto& s = tree.separator(j);
            m = mode_multiply(m, store.at(s.child_clique, root), ModeLabel::separator(j));
        }
        store.put(root, tree.separator(k).child_clique, std::move(m));
    }
}

void downward_pass(const LatentJunctionTree& tree, const LearnedParams& params, MessageStore& store,
                   std::span<const int> order) {
    std::vector<int> fallback;
    if (order.empty()) {
        fallback = default_order(tree, /*deepest_first=*/false);
        order = fallback;
    }
    for (int c : order) {
        if (c == tree.root() || tree.clique(c).is_leaf) continue;
        const int sep = tree.parent_separator(c);
        const NamedTensor& down = store.at(tree.separator(sep).parent_clique, c);
        for (int k : tree.child_separators(c)) {
            NamedTensor m = mode_multiply(params.operator_for(sep), down, ModeLabel::separator(sep));
            for (int j : tree.child_separators(c)) {
                if (j == k) continue;
                const auto& s = tree.separator(j);
                m = mode_multiply(m, store.at(s.child_clique, c), ModeLabel::separator(j));
            }
            store.put(c, tree.separator(k).child_clique, std::move(m));
        }
    }
}

PbpEngine::PbpEngine(LatentJunctionTree tree, LearnedParams params)
    : tree_(std::move(tree)), params_(std::move(params)), leaf_tensors_(build_leaf_tensors(tree_)) {
    if (params_.metadata.tree_hash != tree_.hash()) {
        throw validation_error("learned parameters were produced for a different tree");
    }
}

const LeafTensor& PbpEngine::leaf_tensor(int separator) const {
    for (const auto& lt : leaf_tensors_) {
        if (lt.separator == separator) return lt;
    }
    throw validation_error("no leaf tensor for separator " + std::to_string(separator));
}

QueryResult PbpEngine::run(const EvidenceMap& evidence, std::optional<int> query_var) const {
    const auto& tree = tree_;
    validate_query_evidence(tree, evidence);

    int query_clique;
    if (query_var.has_value()) {
        if (*query_var < 0 || *query_var >= static_cast<int>(tree.variables().size()) ||
            tree.variables()[static_cast<std::size_t>(*query_var)].role != Role::Observable) {
            throw validation_error("query variable must be observable");
        }
        query_clique = tree.host_clique(*query_var);
    } else {
        // Evidence-probability queries read out at the lowest-id leaf.
        query_clique = -1;
        for (const auto& c : tree.cliques()) {
            if (c.is_leaf) {
                query_clique = c.id;
                break;
            }
        }
        if (query_clique < 0) throw internal_error("tree has no leaf clique");
    }
    const int query_sep = tree.parent_separator(query_clique);

    MessageStore store;
    for (const auto& c : tree.cliques()) {
        if (!c.is_leaf) continue;
        const int sep = tree.parent_separator(c.id);
        std::optional<int> skip;
        if (query_var.has_value() && c.id == query_clique) skip = *query_var;
        store.put(c.id, tree.separator(sep).parent_clique,
                  leaf_message(tree, leaf_tensor(sep), evidence, skip));
    }
    upward_pass(tree, params_, store);
    root_messages(tree, params_, store);
    downward_pass(tree, params_, store);

    const LeafTensor& leaf = leaf_tensor(query_sep);
    const ModeLabel sep_label = ModeLabel::separator(query_sep);
    const NamedTensor& down = store.at(tree.separator(query_sep).parent_clique, query_clique);
    const NamedTensor& up = store.at(query_clique, tree.separator(query_sep).parent_clique);
    NamedTensor u = mode_multiply(leaf.phi_pinv, down, sep_label);
    NamedTensor v = mode_multiply(leaf.phi, up, sep_label);
    NamedTensor h = hadamard(u, v);
    if (query_var.has_value()) {
        // The query variable's own evidence was withheld from the upward
        // message; it re-enters here.
        const auto it = evidence.find(*query_var);
        if (it != evidence.end()) {
            h = factor_product(h, NamedTensor::from_vector(ModeLabel::variable(*query_var),
                                                           zeta(tree.cardinality(*query_var), it->second)));
        }
    }

    QueryResult result;
    const double raw_evidence = h.sum();
    result.evidence_probability = raw_evidence;
    if (raw_evidence < 0.0) {
        result.evidence_probability = 0.0;
        result.clamped = true;
    }

    if (!query_var.has_value()) {
        result.zero_evidence = result.evidence_probability <= 0.0;
        return result;
    }

    std::vector<ModeLabel> rest;
    for (const auto& m : h.modes()) {
        if (!(m.label == ModeLabel::variable(*query_var))) rest.push_back(m.label);
    }
    NamedTensor q = marginalize(h, rest);
    std::vector<double> p(q.data().begin(), q.data().end());
    double total = 0.0;
    for (auto& x : p) {
        if (x < 0.0) {
            x = 0.0;
            result.clamped = true;
        }
        total += x;
    }
    if (total <= 0.0) {
        result.zero_evidence = true;
        return result;
    }
    const auto it = evidence.find(*query_var);
    if (it != evidence.end()) {
        result.posterior = indicator(it->second, tree.cardinality(*query_var));
    } else {
        for (auto& x : p) x /= total;
        result.posterior = std::move(p);
    }
    return result;
}

QueryResult PbpEngine::query(const EvidenceMap& evidence, int query_var) const {
    return run(evidence, query_var);
}

QueryResult PbpEngine::evidence_probability(const EvidenceMap& evidence) const {
    return run(evidence, std::nullopt);
}

QueryResult query_posterior(const LatentJunctionTree& tree, const LearnedParams& params,
                            const EvidenceMap& evidence, int query_var) {
    return PbpEngine(tree, params).query(evidence, query_var);
}

QueryResult evidence_probability(const LatentJunctionTree& tree, const LearnedParams& params,
                                 const EvidenceMap& evidence) {
    return PbpEngine(tree, params).evidence_probability(evidence);
}

}  // namespace pbp
