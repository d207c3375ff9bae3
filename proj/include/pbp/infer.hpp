#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pbp/jtree.hpp"
#include "pbp/learn.hpp"
#include "pbp/model.hpp"
#include "pbp/tensor.hpp"

namespace pbp {

// Leaf tensor for a leaf separator: fibers along the feature mode enumerate
// the sufficient-statistics vector over all assignments of the leaf's core
// group. With full indicator features this is a one-hot reshaping tensor and
// the cached pseudoinverse equals its transpose exactly.
struct LeafTensor {
    int separator = -1;
    NamedTensor phi;       // modes: (separator feature mode, Variable modes of alpha)
    NamedTensor phi_pinv;  // modes: (Variable modes of alpha, separator feature mode)
};

// One leaf tensor per leaf separator, ascending separator id.
std::vector<LeafTensor> build_leaf_tensors(const LatentJunctionTree& tree);

// Initial upward message from a leaf clique: the pseudoinverse of the leaf
// tensor contracted with the evidence indicators of the leaf's observables.
// `skip` names a variable whose evidence is withheld here (the query-clique
// convention); it re-enters through the readout Hadamard.
NamedTensor leaf_message(const LatentJunctionTree& tree, const LeafTensor& leaf,
                         const EvidenceMap& evidence, std::optional<int> skip = std::nullopt);

// Directed clique-to-clique messages. Each message is a vector on the feature
// mode of the separator crossed.
class MessageStore {
public:
    void put(int from, int to, NamedTensor message);
    const NamedTensor& at(int from, int to) const;  // internal_error when missing
    bool has(int from, int to) const;
    std::size_t size() const { return messages_.size(); }

private:
    std::map<std::pair<int, int>, NamedTensor> messages_;
};

// Message sweeps. `order`, when given, overrides the default deterministic
// schedule with another topological order of the cliques; an invalid order
// trips the missing-message check.
void upward_pass(const LatentJunctionTree& tree, const LearnedParams& params, MessageStore& store,
                 std::span<const int> order = {});
void root_messages(const LatentJunctionTree& tree, const LearnedParams& params, MessageStore& store);
void downward_pass(const LatentJunctionTree& tree, const LearnedParams& params, MessageStore& store,
                   std::span<const int> order = {});

struct QueryResult {
    std::vector<double> posterior;        // simplex vector; empty when zero_evidence
    double evidence_probability = 0.0;
    bool clamped = false;                 // negative estimates were clamped to zero
    bool zero_evidence = false;
};

// Full predictive-belief-propagation inference over learned parameters. The
// engine owns copies of the tree and parameters and caches the leaf tensors
// (with pseudoinverses); individual queries are pure and may run concurrently.
class PbpEngine {
public:
    // Rejects parameters whose recorded tree hash does not match `tree`.
    PbpEngine(LatentJunctionTree tree, LearnedParams params);

    QueryResult query(const EvidenceMap& evidence, int query_var) const;

    // Estimated joint probability of the evidence alone.
    QueryResult evidence_probability(const EvidenceMap& evidence) const;

    const LeafTensor& leaf_tensor(int separator) const;
    const LatentJunctionTree& tree() const { return tree_; }
    const LearnedParams& params() const { return params_; }

private:
    QueryResult run(const EvidenceMap& evidence, std::optional<int> query_var) const;

    LatentJunctionTree tree_;
    LearnedParams params_;
    std::vector<LeafTensor> leaf_tensors_;
};

QueryResult query_posterior(const LatentJunctionTree& tree, const LearnedParams& params,
                            const EvidenceMap& evidence, int query_var);
QueryResult evidence_probability(const LatentJunctionTree& tree, const LearnedParams& params,
                                 const EvidenceMap& evidence);

}  // namespace pbp
