#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pbp {

enum class ModeKind { Separator, Variable, Feature };

// Semantic label attached to a tensor mode. All tensor operations are driven
// by these labels rather than by mode positions.
struct ModeLabel {
    ModeKind kind = ModeKind::Feature;
    int id = -1;       // Separator / Variable
    std::string tag;   // Feature

    static ModeLabel separator(int sep_id) { return {ModeKind::Separator, sep_id, {}}; }
    static ModeLabel variable(int var_id) { return {ModeKind::Variable, var_id, {}}; }
    static ModeLabel feature(std::string t) { return {ModeKind::Feature, -1, std::move(t)}; }

    friend bool operator==(const ModeLabel&, const ModeLabel&) = default;

    // Compact display/serialization form: "sep:3", "var:0", "feat:xy".
    std::string str() const;
    static ModeLabel parse(const std::string& s);
};

struct Mode {
    ModeLabel label;
    std::int64_t extent = 0;
};

// Dense multi-way array with labeled modes, stored row-major in the order of
// the mode list. Immutable after construction aside from the private fill
// helpers used by the builders in this library; all public operations are
// pure functions returning new tensors.
class NamedTensor {
public:
    NamedTensor() = default;

    // Validates: extents >= 1, pairwise-distinct labels, data length equal to
    // the product of extents, and all entries finite.
    NamedTensor(std::vector<Mode> modes, std::vector<double> data);

    static NamedTensor zeros(std::vector<Mode> modes);
    static NamedTensor ones(std::vector<Mode> modes);
    static NamedTensor scalar(double value);
    static NamedTensor from_vector(const ModeLabel& label, std::vector<double> values);
    static NamedTensor one_hot(const ModeLabel& label, std::int64_t extent, std::int64_t index);

    int order() const { return static_cast<int>(modes_.size()); }
    const std::vector<Mode>& modes() const { return modes_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    bool has_mode(const ModeLabel& label) const { return mode_index(label) >= 0; }
    int mode_index(const ModeLabel& label) const;  // -1 when absent
    std::int64_t extent(const ModeLabel& label) const;

    std::span<const double> data() const { return data_; }
    double operator[](std::int64_t flat) const { return data_[static_cast<std::size_t>(flat)]; }
    double& at(std::int64_t flat) { return data_[static_cast<std::size_t>(flat)]; }

    double sum() const;

    // Flat offset of a full multi-index given in stored mode order.
    std::int64_t offset(std::span<const std::int64_t> index) const;

private:
    std::vector<Mode> modes_;
    std::vector<double> data_;
};

// result modes = modes(a) ++ modes(b); entry (i,j) = a[i] * b[j].
// Rejects inputs sharing a mode label, naming the duplicate.
NamedTensor outer_product(const NamedTensor& a, const NamedTensor& b);

// Contracts `t` with `m` along `label`. `m` must be a vector carrying mode
// `label` (the mode is eliminated from the result) or a matrix with modes
// (label, other) in either stored order (`label` is replaced by `other`,
// keeping its position in `t`).
NamedTensor mode_multiply(const NamedTensor& t, const NamedTensor& m, const ModeLabel& label);

// Entrywise product. Inputs must carry identical mode sets; stored order may
// differ, alignment is by label. Result uses a's mode order.
NamedTensor hadamard(const NamedTensor& a, const NamedTensor& b);

// Fuses the listed modes (in the declared order, row-major) into a single
// mode named `fused`. The fused mode becomes the leading mode of the result,
// followed by the remaining modes in their original order.
NamedTensor vectorize(const NamedTensor& t, std::span<const ModeLabel> labels, const ModeLabel& fused);
// Same, with an auto-derived Feature label "vec(l1,l2,...)".
NamedTensor vectorize(const NamedTensor& t, std::span<const ModeLabel> labels);

// Inverse of vectorize: splits mode `fused` into `parts` (row-major). The new
// modes take the fused mode's position.
NamedTensor devectorize(const NamedTensor& t, const ModeLabel& fused, std::span<const Mode> parts);

// Moore-Penrose pseudoinverse of the matrix obtained by flattening
// `row_labels` to rows and the remaining modes to columns. Singular values
// below max(rows, cols) * eps * sigma_max are treated as zero. The result
// carries the column modes first and the row modes last, so contracting it
// against the original row modes acts as the pseudoinverse map.
NamedTensor pinv(const NamedTensor& t, std::span<const ModeLabel> row_labels);

// Reorders stored modes; purely a layout change.
NamedTensor transpose(const NamedTensor& t, std::span<const ModeLabel> new_order);

// Product in the sum-product sense: result modes are the union of the input
// modes (a's order first, then b's extras); entries multiply, with each input
// broadcast over the modes it lacks.
NamedTensor factor_product(const NamedTensor& a, const NamedTensor& b);

// Sums out the listed modes.
NamedTensor marginalize(const NamedTensor& t, std::span<const ModeLabel> labels);

// Returns t with one mode relabeled (extent unchanged).
NamedTensor renamed(const NamedTensor& t, const ModeLabel& from, const ModeLabel& to);

}  // namespace pbp
