#pragma once

#include <vector>

#include "pbp/model.hpp"

namespace pbp {

// Exact junction-tree inference driven by the model's own CPTs. The clique
// tree is built once from the structure; potentials are refilled from the
// current CPTs, so EM can reuse one engine across iterations.
class SumProductEngine {
public:
    explicit SumProductEngine(const GraphicalModel& model);

    // Swap in new CPTs over the identical structure.
    void set_model(const GraphicalModel& model);

    struct Calibration {
        // Unnormalized clique beliefs: belief[c](x) = P[C_vars = x, evidence].
        std::vector<NamedTensor> beliefs;
        double evidence_probability = 0.0;
    };

    // Two-pass sum-product with the evidence absorbed into the potentials.
    Calibration calibrate(const EvidenceMap& evidence) const;

    PosteriorResult posterior(const EvidenceMap& evidence, int query) const;

    // P[{v} u parents(v) | evidence] as a tensor over the family's Variable
    // modes; used for expected counts. Requires nonzero evidence probability.
    NamedTensor family_marginal(const Calibration& cal, int var) const;

    int n_cliques() const { return static_cast<int>(cliques_.size()); }
    const std::vector<int>& clique_members(int c) const { return cliques_[static_cast<std::size_t>(c)]; }

private:
    std::vector<Variable> vars_;
    std::vector<std::vector<int>> cliques_;    // sorted members
    std::vector<std::vector<int>> neighbors_;  // clique adjacency
    std::vector<int> assignment_clique_;       // per variable: clique holding its CPT factor
    std::vector<std::vector<int>> families_;   // per variable: parents (declared order) + itself
    std::vector<NamedTensor> potentials_;      // CPT products per clique
    std::vector<int> collect_order_;           // post-order toward clique 0
    std::vector<int> parent_;                  // toward clique 0
};

// Exact posterior baseline (the known-CPT ground truth).
PosteriorResult sum_product_exact(const GraphicalModel& model, const EvidenceMap& evidence, int query);

// Cached dual-path oracle: enumeration over the brute-force joint and
// junction-tree sum-product, which must agree to 1e-10 on every call.
class ExactInference {
public:
    explicit ExactInference(const GraphicalModel& model);

    PosteriorResult posterior(const EvidenceMap& evidence, int query) const;
    double evidence_probability(const EvidenceMap& evidence) const;

    const NamedTensor& joint() const { return joint_; }

private:
    GraphicalModel model_;
    NamedTensor joint_;
    SumProductEngine engine_;
};

}  // namespace pbp
