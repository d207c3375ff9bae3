#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pbp {

// Row-major index map over an ordered list of discrete variables: the
// bijection between complete assignments and positions in the indicator
// feature vector. The first variable is the most significant digit. An empty
// map has dimension 1 (the constant feature).
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(std::vector<int> var_ids, std::vector<int> cardinalities);

    const std::vector<int>& var_ids() const { return var_ids_; }
    const std::vector<int>& cardinalities() const { return cards_; }
    std::int64_t dim() const { return dim_; }
    bool empty() const { return var_ids_.empty(); }

    std::int64_t index_of(std::span<const int> values) const;
    std::vector<int> assignment_of(std::int64_t index) const;

private:
    std::vector<int> var_ids_;
    std::vector<int> cards_;
    std::int64_t dim_ = 1;
};

// One-hot vector e_x of the given length (0-based states throughout).
std::vector<double> indicator(int value, int cardinality);

// Sufficient-statistics feature vector of a complete assignment: the
// vectorized outer product of the per-variable indicators, i.e. a one-hot
// vector of length fm.dim().
std::vector<double> sufficient_stats(const FeatureMap& fm, std::span<const int> values);

// Evidence feature vector over beta(S); the same indicator construction, and
// the constant vector [1] when the map is empty.
std::vector<double> evidence_features(const FeatureMap& fm, std::span<const int> values);

// Evidence indicator: all-ones when unobserved, e_x when observed as x.
std::vector<double> zeta(int cardinality, std::optional<int> observed);

}  // namespace pbp
