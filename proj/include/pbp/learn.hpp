#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbp/features.hpp"
#include "pbp/jtree.hpp"
#include "pbp/model.hpp"
#include "pbp/tensor.hpp"

namespace pbp {

struct RegressionConfig {
    // Ridge strengths for the Stage-1 and Stage-2 regressions; must be finite
    // and non-negative when set. Unset means the default 1e-3 * N, resolved
    // against the dataset size at fit time.
    std::optional<double> lambda1;
    std::optional<double> lambda2;

    double resolve_lambda1(std::int64_t n) const { return lambda1.value_or(1e-3 * static_cast<double>(n)); }
    double resolve_lambda2(std::int64_t n) const { return lambda2.value_or(1e-3 * static_cast<double>(n)); }
};

struct LearnMetadata {
    std::uint64_t tree_hash = 0;
    std::uint64_t seed = 0;      // dataset seed when the caller knows it
    std::string generator;       // RNG behind that seed
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::int64_t n = 0;          // training sample count; 0 for population
    bool population = false;
    double wallclock_seconds = 0.0;
    std::vector<std::string> warnings;
};

// The alternative parametrization: one operator tensor per non-leaf separator
// plus the root tensor.
struct LearnedParams {
    struct Operator {
        int separator = -1;
        NamedTensor w;  // modes: (separator feature mode, one mode per child separator)
    };
    std::vector<Operator> operators;  // ascending separator id
    NamedTensor root_tensor;          // one mode per separator adjacent to the root
    LearnMetadata metadata;

    const NamedTensor& operator_for(int separator) const;
};

// Stage-1 regression output. With full-indicator evidence features the ridge
// normal equations are diagonal, so fitted values are constant within each
// eta cell; predictions are stored per cell together with each sample's cell.
struct S1Result {
    FeatureMap eta;
    std::int64_t target_dim = 0;
    std::vector<std::int64_t> cell_of_sample;
    std::vector<double> cell_weight;                    // sample count (or probability mass) per cell
    std::vector<std::vector<double>> cell_prediction;   // fitted value per cell

    std::span<const double> prediction(std::int64_t sample) const {
        return cell_prediction[static_cast<std::size_t>(cell_of_sample[static_cast<std::size_t>(sample)])];
    }
};

// Stage 1A: ridge regression of theta^S[alpha(S)] on eta^S[beta(S)];
// estimates E[theta^S | eta^S] per sample.
S1Result s1a_regress(const Dataset& data, const LatentJunctionTree& tree, int separator,
                     const RegressionConfig& config);

// Stage 1B: the same regression with the vectorized outer product of the
// child separators' theta vectors as the target.
S1Result s1b_regress(const Dataset& data, const LatentJunctionTree& tree, int separator,
                     const RegressionConfig& config);

// Stage 2: linear regression from the S1A predictions to the S1B predictions,
// reshaped to the (K+1)-mode operator tensor for the separator.
NamedTensor s2_regress(const LatentJunctionTree& tree, int separator, const S1Result& s1a,
                       const S1Result& s1b, const RegressionConfig& config, std::int64_t n,
                       std::vector<std::string>* warnings = nullptr);

// Empirical mean of the outer product of the root-adjacent separators' theta
// vectors.
NamedTensor root_tensor(const Dataset& data, const LatentJunctionTree& tree);

// Full Two-Stage Regression over the tree: one operator per non-leaf
// separator plus the root tensor. Deterministic given inputs.
LearnedParams learn(const LatentJunctionTree& tree, const Dataset& data,
                    const RegressionConfig& config = {});

// Exact-expectation backend for the infinite-data limit: every empirical
// moment is replaced by an expectation enumerated from the model's observable
// joint, and the regressions run without ridge.
class PopulationOracle {
public:
    PopulationOracle(const GraphicalModel& model, const LatentJunctionTree& tree);

    const NamedTensor& observable_joint() const { return joint_; }

    // Exact analogue of s1a_regress / s1b_regress: per beta-cell conditional
    // expectations weighted by the cell probability.
    S1Result s1a(int separator) const;
    S1Result s1b(int separator) const;
    NamedTensor root_tensor() const;

private:
    S1Result conditional_expectation(int separator, bool child_targets) const;

    const LatentJunctionTree* tree_;
    NamedTensor joint_;           // over observable Variable modes, id order
    std::vector<int> obs_ids_;
};

// Infinite-data limit of learn(): the population-consistent parameters.
LearnedParams learn_population(const LatentJunctionTree& tree, const GraphicalModel& model);

}  // namespace pbp
