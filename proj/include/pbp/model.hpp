#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbp/tensor.hpp"

namespace pbp {

enum class Role { Observable, Latent };

struct Variable {
    int id = 0;
    std::string name;
    int cardinality = 2;
    Role role = Role::Observable;
};

// Model skeleton without parameters: what random_model fills in.
struct ModelStructure {
    std::vector<Variable> variables;                // ids contiguous from 0
    std::vector<std::pair<int, int>> edges;         // (parent, child), declared order
};

// Discrete directed graphical model with conditional probability tables.
// Immutable after construction. CPT rows are indexed by the joint parent
// assignment taken row-major in the declared edge order of the parents.
class GraphicalModel {
public:
    GraphicalModel(std::vector<Variable> variables, std::vector<std::pair<int, int>> edges,
                   std::vector<std::vector<double>> cpts);

    int n_vars() const { return static_cast<int>(vars_.size()); }
    const std::vector<Variable>& variables() const { return vars_; }
    const Variable& var(int id) const { return vars_[static_cast<std::size_t>(id)]; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& parents(int id) const { return parents_[static_cast<std::size_t>(id)]; }

    std::vector<int> observable_ids() const;
    std::vector<int> latent_ids() const;
    int id_of(const std::string& name) const;  // throws if unknown

    // Number of joint parent assignments for variable `id`.
    std::int64_t parent_states(int id) const;
    // CPT row for one parent assignment (row-major over parents in declared
    // edge order); length = cardinality of `id`.
    std::span<const double> cpt_row(int id, std::int64_t parent_index) const;
    const std::vector<double>& cpt(int id) const { return cpts_[static_cast<std::size_t>(id)]; }

    // Variable ids in a topological order of the DAG.
    const std::vector<int>& topo_order() const { return topo_; }

    ModelStructure structure() const;

private:
    std::vector<Variable> vars_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<double>> cpts_;
    std::vector<int> topo_;
};

// Complete joint observations of the observable variables, one row per
// sample; column order matches `columns`.
struct Dataset {
    std::vector<int> columns;             // observable variable ids
    std::vector<std::vector<int>> rows;   // values in [0, cardinality)

    std::int64_t n() const { return static_cast<std::int64_t>(rows.size()); }
    int column_of(int var_id) const;      // throws if the variable has no column
};

// Partial assignment of observable variables: id -> observed value.
using EvidenceMap = std::map<int, int>;

// Draws every CPT row uniformly from the simplex (Dirichlet alpha = 1).
GraphicalModel random_model(const ModelStructure& structure, std::uint64_t seed);

// Ancestral sampling of n complete observable rows; latent values discarded.
Dataset ancestral_sample(const GraphicalModel& model, std::int64_t n, std::uint64_t seed);

inline constexpr std::int64_t kDefaultJointCap = std::int64_t{1} << 24;

// Full joint over all variables as a tensor with one Variable mode per
// variable in id order. Used as the enumeration ground truth.
NamedTensor brute_force_joint(const GraphicalModel& model, std::int64_t cap = kDefaultJointCap);

// Joint over the observable variables only (latents summed out).
NamedTensor observable_joint(const GraphicalModel& model, std::int64_t cap = kDefaultJointCap);

// P[evidence] by summation over the joint.
double exact_evidence_probability(const GraphicalModel& model, const EvidenceMap& evidence);

struct PosteriorResult {
    std::vector<double> probabilities;  // normalized; empty when zero_evidence
    bool zero_evidence = false;
};

// Normalized P[query | evidence], computed two independent ways (enumeration
// over the brute-force joint, and junction-tree sum-product) which must agree
// to 1e-10. Evidence of probability zero yields the zero_evidence signal.
PosteriorResult exact_posterior(const GraphicalModel& model, const EvidenceMap& evidence, int query);

void validate_evidence(const GraphicalModel& model, const EvidenceMap& evidence);

}  // namespace pbp
