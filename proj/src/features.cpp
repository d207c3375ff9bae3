#include "pbp/features.hpp"

#include "pbp/errors.hpp"

namespace pbp {

FeatureMap::FeatureMap(std::vector<int> var_ids, std::vector<int> cardinalities)
    : var_ids_(std::move(var_ids)), cards_(std::move(cardinalities)) {
    if (var_ids_.size() != cards_.size()) throw validation_error("FeatureMap: id/cardinality mismatch");
    for (int c : cards_) {
        if (c < 1) throw validation_error("FeatureMap: cardinality < 1");
        dim_ *= c;
    }
}

std::int64_t FeatureMap::index_of(std::span<const int> values) const {
    if (values.size() != var_ids_.size()) throw validation_error("FeatureMap: incomplete assignment");
    std::int64_t idx = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0 || values[i] >= cards_[i]) {
            throw validation_error("FeatureMap: value out of range");
        }
        idx = idx * cards_[i] + values[i];
    }
    return idx;
}

std::vector<int> FeatureMap::assignment_of(std::int64_t index) const {
    if (index < 0 || index >= dim_) throw validation_error("FeatureMap: index out of range");
    std::vector<int> values(var_ids_.size());
    for (int i = static_cast<int>(var_ids_.size()) - 1; i >= 0; --i) {
        values[static_cast<std::size_t>(i)] = static_cast<int>(index % cards_[static_cast<std::size_t>(i)]);
        index /= cards_[static_cast<std::size_t>(i)];
    }
    return values;
}

std::vector<double> indicator(int value, int cardinality) {
    if (cardinality < 1) throw validation_error("indicator: cardinality < 1");
    if (value < 0 || value >= cardinality) throw validation_error("indicator: value out of range");
    std::vector<double> v(static_cast<std::size_t>(cardinality), 0.0);
    v[static_cast<std::size_t>(value)] = 1.0;
    return v;
}

std::vector<double> sufficient_stats(const FeatureMap& fm, std::span<const int> values) {
    std::vector<double> v(static_cast<std::size_t>(fm.dim()), 0.0);
    v[static_cast<std::size_t>(fm.index_of(values))] = 1.0;
    return v;
}

std::vector<double> evidence_features(const FeatureMap& fm, std::span<const int> values) {
    return sufficient_stats(fm, values);
}

std::vector<double> zeta(int cardinality, std::optional<int> observed) {
    if (observed.has_value()) return indicator(*observed, cardinality);
    return std::vector<double>(static_cast<std::size_t>(cardinality), 1.0);
}

}  // namespace pbp
