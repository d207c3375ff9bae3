#include "pbp/exact.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "pbp/errors.hpp"
#include "pbp/features.hpp"
#include "pbp/jtree.hpp"

namespace pbp {

namespace {

NamedTensor cpt_tensor(const GraphicalModel& model, int var) {
    std::vector<Mode> modes;
    for (int p : model.parents(var)) {
        modes.push_back({ModeLabel::variable(p), model.var(p).cardinality});
    }
    modes.push_back({ModeLabel::variable(var), model.var(var).cardinality});
    return NamedTensor(std::move(modes), model.cpt(var));
}

std::vector<double> normalized_or_zero(const NamedTensor& unnorm, bool* zero_evidence) {
    double total = 0.0;
    for (double v : unnorm.data()) total += v;
    if (total <= 0.0) {
        *zero_evidence = true;
        return {};
    }
    *zero_evidence = false;
    std::vector<double> out(unnorm.data().begin(), unnorm.data().end());
    for (auto& v : out) v /= total;
    return out;
}

}  // namespace

SumProductEngine::SumProductEngine(const GraphicalModel& model) : vars_(model.variables()) {
    const auto draft = build_clique_tree(triangulate(moralize(model)));
    cliques_ = draft.cliques;
    neighbors_.assign(cliques_.size(), {});
    for (const auto& [a, b] : draft.edges) {
        neighbors_[static_cast<std::size_t>(a)].push_back(b);
        neighbors_[static_cast<std::size_t>(b)].push_back(a);
    }

    // Assign each variable's CPT to the smallest clique containing its family.
    assignment_clique_.assign(vars_.size(), -1);
    families_.resize(vars_.size());
    for (int v = 0; v < static_cast<int>(vars_.size()); ++v) {
        families_[static_cast<std::size_t>(v)] = model.parents(v);
        families_[static_cast<std::size_t>(v)].push_back(v);
        std::vector<int> family = families_[static_cast<std::size_t>(v)];
        std::sort(family.begin(), family.end());
        int best = -1;
        for (int c = 0; c < static_cast<int>(cliques_.size()); ++c) {
            if (std::includes(cliques_[static_cast<std::size_t>(c)].begin(), cliques_[static_cast<std::size_t>(c)].end(),
                              family.begin(), family.end())) {
                if (best < 0 || cliques_[static_cast<std::size_t>(c)].size() < cliques_[static_cast<std::size_t>(best)].size()) {
                    best = c;
                }
            }
        }
        if (best < 0) throw internal_error("no clique covers a CPT family");
        assignment_clique_[static_cast<std::size_t>(v)] = best;
    }

    // Post-order toward clique 0 for the collect pass.
    parent_.assign(cliques_.size(), -1);
    std::vector<char> seen(cliques_.size(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    std::vector<int> bfs;
    while (!queue.empty()) {
        const int c = queue.front();
        queue.pop_front();
        bfs.push_back(c);
        for (int w : neighbors_[static_cast<std::size_t>(c)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                parent_[static_cast<std::size_t>(w)] = c;
                queue.push_back(w);
            }
        }
    }
    collect_order_.assign(bfs.rbegin(), bfs.rend());

    set_model(model);
}

void SumProductEngine::set_model(const GraphicalModel& model) {
    if (static_cast<int>(vars_.size()) != model.n_vars()) throw validation_error("structure mismatch");
    potentials_.clear();
    for (int c = 0; c < static_cast<int>(cliques_.size()); ++c) {
        std::vector<Mode> modes;
        for (int v : cliques_[static_cast<std::size_t>(c)]) {
            modes.push_back({ModeLabel::variable(v), vars_[static_cast<std::size_t>(v)].cardinality});
        }
        potentials_.push_back(NamedTensor::ones(std::move(modes)));
    }
    for (int v = 0; v < static_cast<int>(vars_.size()); ++v) {
        const int c = assignment_clique_[static_cast<std::size_t>(v)];
        potentials_[static_cast<std::size_t>(c)] =
            factor_product(potentials_[static_cast<std::size_t>(c)], cpt_tensor(model, v));
    }
}

SumProductEngine::Calibration SumProductEngine::calibrate(const EvidenceMap& evidence) const {
    std::vector<NamedTensor> pots = potentials_;
    for (const auto& [v, value] : evidence) {
        if (v < 0 || v >= static_cast<int>(vars_.size())) throw validation_error("evidence on unknown variable");
        const int c = assignment_clique_[static_cast<std::size_t>(v)];
        pots[static_cast<std::size_t>(c)] = factor_product(
            pots[static_cast<std::size_t>(c)],
            NamedTensor::one_hot(ModeLabel::variable(v), vars_[static_cast<std::size_t>(v)].cardinality, value));
    }

    const int m = static_cast<int>(cliques_.size());
    // messages[c][i]: message into clique c from its i-th neighbor.
    std::vector<std::vector<NamedTensor>> messages(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c) {
        messages[static_cast<std::size_t>(c)].resize(neighbors_[static_cast<std::size_t>(c)].size());
    }

    auto neighbor_slot = [&](int c, int nb) {
        const auto& ns = neighbors_[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < ns.size(); ++i) {
            if (ns[i] == nb) return static_cast<int>(i);
        }
        throw internal_error("neighbor slot not found");
    };

    auto send = [&](int from, int to) {
        NamedTensor msg = pots[static_cast<std::size_t>(from)];
        for (std::size_t i = 0; i < neighbors_[static_cast<std::size_t>(from)].size(); ++i) {
            if (neighbors_[static_cast<std::size_t>(from)][i] == to) continue;
            const auto& incoming = messages[static_cast<std::size_t>(from)][i];
            if (incoming.order() > 0 || incoming.size() > 0) msg = factor_product(msg, incoming);
        }
        std::vector<int> sep;
        std::set_intersection(cliques_[static_cast<std::size_t>(from)].begin(),
                              cliques_[static_cast<std::size_t>(from)].end(),
                              cliques_[static_cast<std::size_t>(to)].begin(),
                              cliques_[static_cast<std::size_t>(to)].end(), std::back_inserter(sep));
        std::vector<ModeLabel> drop;
        for (int v : cliques_[static_cast<std::size_t>(from)]) {
            if (!std::binary_search(sep.begin(), sep.end(), v)) drop.push_back(ModeLabel::variable(v));
        }
        messages[static_cast<std::size_t>(to)][static_cast<std::size_t>(neighbor_slot(to, from))] =
            marginalize(msg, drop);
    };

    // Collect toward clique 0, then distribute back out.
    for (int c : collect_order_) {
        if (parent_[static_cast<std::size_t>(c)] >= 0) send(c, parent_[static_cast<std::size_t>(c)]);
    }
    for (auto it = collect_order_.rbegin(); it != collect_order_.rend(); ++it) {
        const int c = *it;
        if (parent_[static_cast<std::size_t>(c)] >= 0) send(parent_[static_cast<std::size_t>(c)], c);
    }

    Calibration cal;
    cal.beliefs.reserve(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c) {
        NamedTensor b = pots[static_cast<std::size_t>(c)];
        for (const auto& incoming : messages[static_cast<std::size_t>(c)]) {
            b = factor_product(b, incoming);
        }
        cal.beliefs.push_back(std::move(b));
    }
    cal.evidence_probability = cal.beliefs[0].sum();
    return cal;
}

PosteriorResult SumProductEngine::posterior(const EvidenceMap& evidence, int query) const {
    if (query < 0 || query >= static_cast<int>(vars_.size())) throw validation_error("unknown query variable");
    const auto cal = calibrate(evidence);
    PosteriorResult result;
    if (cal.evidence_probability <= 0.0) {
        result.zero_evidence = true;
        return result;
    }
    const auto it = evidence.find(query);
    if (it != evidence.end()) {
        result.probabilities = indicator(it->second, vars_[static_cast<std::size_t>(query)].cardinality);
        return result;
    }
    // Belief of any clique containing the query; take the smallest.
    int best = -1;
    for (int c = 0; c < static_cast<int>(cliques_.size()); ++c) {
        if (std::binary_search(cliques_[static_cast<std::size_t>(c)].begin(),
                               cliques_[static_cast<std::size_t>(c)].end(), query)) {
            if (best < 0 ||
                cliques_[static_cast<std::size_t>(c)].size() < cliques_[static_cast<std::size_t>(best)].size()) {
                best = c;
            }
        }
    }
    NamedTensor b = cal.beliefs[static_cast<std::size_t>(best)];
    std::vector<ModeLabel> drop;
    for (int v : cliques_[static_cast<std::size_t>(best)]) {
        if (v != query) drop.push_back(ModeLabel::variable(v));
    }
    b = marginalize(b, drop);
    bool zero = false;
    result.probabilities = normalized_or_zero(b, &zero);
    result.zero_evidence = zero;
    return result;
}

NamedTensor SumProductEngine::family_marginal(const Calibration& cal, int var) const {
    if (cal.evidence_probability <= 0.0) throw numerical_error("family marginal with zero evidence");
    const int c = assignment_clique_[static_cast<std::size_t>(var)];
    const auto& family = families_[static_cast<std::size_t>(var)];  // parents (declared order), then var
    NamedTensor b = cal.beliefs[static_cast<std::size_t>(c)];
    std::vector<ModeLabel> drop;
    for (const auto& mode : b.modes()) {
        if (std::find(family.begin(), family.end(), mode.label.id) == family.end()) {
            drop.push_back(mode.label);
        }
    }
    b = marginalize(b, drop);
    std::vector<ModeLabel> order;
    for (int v : family) order.push_back(ModeLabel::variable(v));
    b = transpose(b, order);
    std::vector<double> data(b.data().begin(), b.data().end());
    for (auto& x : data) x /= cal.evidence_probability;
    return NamedTensor(b.modes(), std::move(data));
}

PosteriorResult sum_product_exact(const GraphicalModel& model, const EvidenceMap& evidence, int query) {
    validate_evidence(model, evidence);
    return SumProductEngine(model).posterior(evidence, query);
}

ExactInference::ExactInference(const GraphicalModel& model)
    : model_(model), joint_(brute_force_joint(model)), engine_(model) {}

double ExactInference::evidence_probability(const EvidenceMap& evidence) const {
    validate_evidence(model_, evidence);
    NamedTensor t = joint_;
    for (const auto& [id, value] : evidence) {
        t = mode_multiply(t, NamedTensor::one_hot(ModeLabel::variable(id), model_.var(id).cardinality, value),
                          ModeLabel::variable(id));
    }
    return t.sum();
}

PosteriorResult ExactInference::posterior(const EvidenceMap& evidence, int query) const {
    validate_evidence(model_, evidence);
    if (query < 0 || query >= model_.n_vars()) throw validation_error("unknown query variable");

    // Path (a): enumeration over the brute-force joint.
    PosteriorResult by_enum;
    {
        NamedTensor t = joint_;
        for (const auto& [id, value] : evidence) {
            t = mode_multiply(t, NamedTensor::one_hot(ModeLabel::variable(id), model_.var(id).cardinality, value),
                              ModeLabel::variable(id));
        }
        if (evidence.count(query)) {
            const double p = t.sum();
            if (p <= 0.0) {
                by_enum.zero_evidence = true;
            } else {
                by_enum.probabilities = indicator(evidence.at(query), model_.var(query).cardinality);
            }
        } else {
            std::vector<ModeLabel> drop;
            for (const auto& m : t.modes()) {
                if (!(m.label == ModeLabel::variable(query))) drop.push_back(m.label);
            }
            NamedTensor v = marginalize(t, drop);
            bool zero = false;
            by_enum.probabilities = normalized_or_zero(v, &zero);
            by_enum.zero_evidence = zero;
        }
    }

    // Path (b): junction-tree sum-product.
    const PosteriorResult by_jt = engine_.posterior(evidence, query);

    if (by_enum.zero_evidence != by_jt.zero_evidence) {
        throw internal_error("exact posterior paths disagree on zero evidence");
    }
    if (!by_enum.zero_evidence) {
        for (std::size_t i = 0; i < by_enum.probabilities.size(); ++i) {
            if (std::abs(by_enum.probabilities[i] - by_jt.probabilities[i]) > 1e-10) {
                throw internal_error("exact posterior paths disagree beyond 1e-10");
            }
        }
    }
    return by_enum;
}

PosteriorResult exact_posterior(const GraphicalModel& model, const EvidenceMap& evidence, int query) {
    return ExactInference(model).posterior(evidence, query);
}

}  // namespace pbp
