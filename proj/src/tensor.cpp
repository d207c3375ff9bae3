#include "pbp/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pbp/errors.hpp"

namespace pbp {

namespace {

std::vector<std::int64_t> strides_of(const std::vector<Mode>& modes) {
    std::vector<std::int64_t> s(modes.size(), 1);
    for (int i = static_cast<int>(modes.size()) - 2; i >= 0; --i) {
        s[i] = s[i + 1] * modes[i + 1].extent;
    }
    return s;
}

std::int64_t numel_of(const std::vector<Mode>& modes) {
    std::int64_t n = 1;
    for (const auto& m : modes) n *= m.extent;
    return n;
}

}  // namespace

std::string ModeLabel::str() const {
    switch (kind) {
        case ModeKind::Separator: return "sep:" + std::to_string(id);
        case ModeKind::Variable: return "var:" + std::to_string(id);
        case ModeKind::Feature: return "feat:" + tag;
    }
    return "?";
}

ModeLabel ModeLabel::parse(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw validation_error("bad mode label: " + s);
    const std::string head = s.substr(0, colon);
    const std::string rest = s.substr(colon + 1);
    if (head == "feat") return ModeLabel::feature(rest);
    int id = 0;
    try {
        id = std::stoi(rest);
    } catch (const std::exception&) {
        throw validation_error("bad mode label id: " + s);
    }
    if (head == "sep") return ModeLabel::separator(id);
    if (head == "var") return ModeLabel::variable(id);
    throw validation_error("bad mode label kind: " + s);
}

NamedTensor::NamedTensor(std::vector<Mode> modes, std::vector<double> data)
    : modes_(std::move(modes)), data_(std::move(data)) {
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (modes_[i].extent < 1) {
            throw validation_error("tensor mode " + modes_[i].label.str() + " has extent < 1");
        }
        for (std::size_t j = i + 1; j < modes_.size(); ++j) {
            if (modes_[i].label == modes_[j].label) {
                throw validation_error("duplicate mode label " + modes_[i].label.str());
            }
        }
    }
    if (static_cast<std::int64_t>(data_.size()) != numel_of(modes_)) {
        throw validation_error("tensor data length does not match extents");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw validation_error("tensor entry is not finite");
    }
}

NamedTensor NamedTensor::zeros(std::vector<Mode> modes) {
    const auto n = numel_of(modes);
    return NamedTensor(std::move(modes), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

NamedTensor NamedTensor::ones(std::vector<Mode> modes) {
    const auto n = numel_of(modes);
    return NamedTensor(std::move(modes), std::vector<double>(static_cast<std::size_t>(n), 1.0));
}

NamedTensor NamedTensor::scalar(double value) { return NamedTensor({}, {value}); }

NamedTensor NamedTensor::from_vector(const ModeLabel& label, std::vector<double> values) {
    const auto n = static_cast<std::int64_t>(values.size());
    return NamedTensor({{label, n}}, std::move(values));
}

NamedTensor NamedTensor::one_hot(const ModeLabel& label, std::int64_t extent, std::int64_t index) {
    if (index < 0 || index >= extent) throw validation_error("one_hot index out of range");
    std::vector<double> v(static_cast<std::size_t>(extent), 0.0);
    v[static_cast<std::size_t>(index)] = 1.0;
    return NamedTensor({{label, extent}}, std::move(v));
}

int NamedTensor::mode_index(const ModeLabel& label) const {
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (modes_[i].label == label) return static_cast<int>(i);
    }
    return -1;
}

std::int64_t NamedTensor::extent(const ModeLabel& label) const {
    const int i = mode_index(label);
    if (i < 0) throw validation_error("tensor has no mode " + label.str());
    return modes_[static_cast<std::size_t>(i)].extent;
}

double NamedTensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

std::int64_t NamedTensor::offset(std::span<const std::int64_t> index) const {
    if (index.size() != modes_.size()) throw validation_error("multi-index order mismatch");
    std::int64_t flat = 0;
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (index[i] < 0 || index[i] >= modes_[i].extent) {
            throw validation_error("multi-index out of range on mode " + modes_[i].label.str());
        }
        flat = flat * modes_[i].extent + index[i];
    }
    return flat;
}

NamedTensor outer_product(const NamedTensor& a, const NamedTensor& b) {
    for (const auto& m : b.modes()) {
        if (a.has_mode(m.label)) {
            throw validation_error("outer_product: duplicate mode label " + m.label.str());
        }
    }
    std::vector<Mode> modes = a.modes();
    modes.insert(modes.end(), b.modes().begin(), b.modes().end());
    std::vector<double> data(static_cast<std::size_t>(a.size() * b.size()));
    const auto bn = b.size();
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double av = a[i];
        for (std::int64_t j = 0; j < bn; ++j) {
            data[static_cast<std::size_t>(i * bn + j)] = av * b[j];
        }
    }
    return NamedTensor(std::move(modes), std::move(data));
}

NamedTensor mode_multiply(const NamedTensor& t, const NamedTensor& m, const ModeLabel& label) {
    const int pos = t.mode_index(label);
    if (pos < 0) throw validation_error("mode_multiply: tensor has no mode " + label.str());
    if (m.order() != 1 && m.order() != 2) {
        throw validation_error("mode_multiply: multiplier must be a vector or matrix");
    }
    const int mpos = m.mode_index(label);
    if (mpos < 0) throw validation_error("mode_multiply: multiplier has no mode " + label.str());
    const std::int64_t k = t.modes()[static_cast<std::size_t>(pos)].extent;
    if (m.modes()[static_cast<std::size_t>(mpos)].extent != k) {
        throw validation_error("mode_multiply: extent mismatch on mode " + label.str());
    }

    // Decompose t's layout around the contracted mode.
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < pos; ++i) outer *= t.modes()[static_cast<std::size_t>(i)].extent;
    for (int i = pos + 1; i < t.order(); ++i) inner *= t.modes()[static_cast<std::size_t>(i)].extent;

    if (m.order() == 1) {
        std::vector<Mode> modes;
        modes.reserve(static_cast<std::size_t>(t.order() - 1));
        for (int i = 0; i < t.order(); ++i) {
            if (i != pos) modes.push_back(t.modes()[static_cast<std::size_t>(i)]);
        }
        std::vector<double> out(static_cast<std::size_t>(outer * inner), 0.0);
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t v = 0; v < k; ++v) {
                const double w = m[v];
                if (w == 0.0) continue;
                const std::int64_t base = (o * k + v) * inner;
                double* dst = out.data() + o * inner;
                for (std::int64_t in = 0; in < inner; ++in) dst[in] += t[base + in] * w;
            }
        }
        return NamedTensor(std::move(modes), std::move(out));
    }

    // Matrix case: label is replaced in place by the matrix's other mode.
    const int opos = 1 - mpos;
    const Mode other = m.modes()[static_cast<std::size_t>(opos)];
    if (t.has_mode(other.label)) {
        throw validation_error("mode_multiply: result would duplicate mode " + other.label.str());
    }
    const std::int64_t w_ext = other.extent;
    std::vector<Mode> modes = t.modes();
    modes[static_cast<std::size_t>(pos)] = other;
    std::vector<double> out(static_cast<std::size_t>(outer * w_ext * inner), 0.0);
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t v = 0; v < k; ++v) {
            const std::int64_t tbase = (o * k + v) * inner;
            for (std::int64_t w = 0; w < w_ext; ++w) {
                // m is stored (label, other) or (other, label).
                const double mv = (mpos == 0) ? m[v * w_ext + w] : m[w * k + v];
                if (mv == 0.0) continue;
                double* dst = out.data() + (o * w_ext + w) * inner;
                for (std::int64_t in = 0; in < inner; ++in) dst[in] += t[tbase + in] * mv;
            }
        }
    }
    return NamedTensor(std::move(modes), std::move(out));
}

NamedTensor transpose(const NamedTensor& t, std::span<const ModeLabel> new_order) {
    if (static_cast<int>(new_order.size()) != t.order()) {
        throw validation_error("transpose: mode count mismatch");
    }
    std::vector<int> src(new_order.size());
    std::vector<Mode> modes(new_order.size());
    for (std::size_t i = 0; i < new_order.size(); ++i) {
        const int j = t.mode_index(new_order[i]);
        if (j < 0) throw validation_error("transpose: unknown mode " + new_order[i].str());
        src[i] = j;
        modes[i] = t.modes()[static_cast<std::size_t>(j)];
    }
    for (std::size_t i = 0; i < src.size(); ++i) {
        for (std::size_t j = i + 1; j < src.size(); ++j) {
            if (src[i] == src[j]) throw validation_error("transpose: repeated mode");
        }
    }
    const auto old_strides = strides_of(t.modes());
    std::vector<double> out(static_cast<std::size_t>(t.size()));
    std::vector<std::int64_t> idx(modes.size(), 0);
    for (std::int64_t flat = 0; flat < t.size(); ++flat) {
        std::int64_t old_flat = 0;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            old_flat += idx[i] * old_strides[static_cast<std::size_t>(src[i])];
        }
        out[static_cast<std::size_t>(flat)] = t[old_flat];
        for (int i = static_cast<int>(modes.size()) - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < modes[static_cast<std::size_t>(i)].extent) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return NamedTensor(std::move(modes), std::move(out));
}

NamedTensor hadamard(const NamedTensor& a, const NamedTensor& b) {
    if (a.order() != b.order()) throw validation_error("hadamard: mode sets differ");
    std::vector<ModeLabel> order;
    order.reserve(a.modes().size());
    for (const auto& m : a.modes()) {
        if (!b.has_mode(m.label) || b.extent(m.label) != m.extent) {
            throw validation_error("hadamard: mode mismatch on " + m.label.str());
        }
        order.push_back(m.label);
    }
    const NamedTensor bb = transpose(b, order);
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    for (std::int64_t i = 0; i < a.size(); ++i) out[static_cast<std::size_t>(i)] = a[i] * bb[i];
    return NamedTensor(a.modes(), std::move(out));
}

NamedTensor vectorize(const NamedTensor& t, std::span<const ModeLabel> labels, const ModeLabel& fused) {
    if (labels.empty()) throw validation_error("vectorize: no modes listed");
    std::vector<ModeLabel> order(labels.begin(), labels.end());
    std::int64_t fused_extent = 1;
    for (const auto& l : labels) {
        const int i = t.mode_index(l);
        if (i < 0) throw validation_error("vectorize: unknown mode " + l.str());
        fused_extent *= t.modes()[static_cast<std::size_t>(i)].extent;
    }
    std::vector<Mode> rest;
    for (const auto& m : t.modes()) {
        if (std::find(order.begin(), order.end(), m.label) == order.end()) {
            rest.push_back(m);
            order.push_back(m.label);
        }
    }
    NamedTensor perm = transpose(t, order);
    std::vector<Mode> modes;
    modes.push_back({fused, fused_extent});
    modes.insert(modes.end(), rest.begin(), rest.end());
    std::vector<double> data(perm.data().begin(), perm.data().end());
    return NamedTensor(std::move(modes), std::move(data));
}

NamedTensor vectorize(const NamedTensor& t, std::span<const ModeLabel> labels) {
    std::string tag = "vec(";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) tag += ",";
        tag += labels[i].str();
    }
    tag += ")";
    return vectorize(t, labels, ModeLabel::feature(tag));
}

NamedTensor devectorize(const NamedTensor& t, const ModeLabel& fused, std::span<const Mode> parts) {
    const int pos = t.mode_index(fused);
    if (pos < 0) throw validation_error("devectorize: unknown mode " + fused.str());
    std::int64_t prod = 1;
    for (const auto& p : parts) prod *= p.extent;
    if (prod != t.modes()[static_cast<std::size_t>(pos)].extent) {
        throw validation_error("devectorize: extents do not factor the fused mode");
    }
    std::vector<Mode> modes;
    for (int i = 0; i < t.order(); ++i) {
        if (i == pos) {
            modes.insert(modes.end(), parts.begin(), parts.end());
        } else {
            modes.push_back(t.modes()[static_cast<std::size_t>(i)]);
        }
    }
    std::vector<double> data(t.data().begin(), t.data().end());
    return NamedTensor(std::move(modes), std::move(data));
}

namespace {

// Detects an exact 0/1 matrix with a single 1 per row and per column. For
// such matrices the pseudoinverse is the transpose, exactly.
bool is_exact_permutation(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) return false;
    std::vector<int> col_seen(static_cast<std::size_t>(m.cols()), 0);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        int ones = 0;
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            if (v == 1.0) {
                ++ones;
                if (++col_seen[static_cast<std::size_t>(c)] > 1) return false;
            } else if (v != 0.0) {
                return false;
            }
        }
        if (ones != 1) return false;
    }
    return true;
}

}  // namespace

NamedTensor pinv(const NamedTensor& t, std::span<const ModeLabel> row_labels) {
    std::vector<ModeLabel> order(row_labels.begin(), row_labels.end());
    if (order.empty()) throw validation_error("pinv: empty row bipartition");
    std::vector<Mode> row_modes, col_modes;
    std::int64_t rows = 1, cols = 1;
    for (const auto& l : order) {
        const int i = t.mode_index(l);
        if (i < 0) throw validation_error("pinv: unknown mode " + l.str());
        row_modes.push_back(t.modes()[static_cast<std::size_t>(i)]);
        rows *= t.modes()[static_cast<std::size_t>(i)].extent;
    }
    for (const auto& m : t.modes()) {
        if (std::find(order.begin(), order.end(), m.label) == order.end()) {
            col_modes.push_back(m);
            cols *= m.extent;
            order.push_back(m.label);
        }
    }
    if (col_modes.empty()) throw validation_error("pinv: empty column bipartition");
    const NamedTensor perm = transpose(t, order);

    Eigen::MatrixXd M(rows, cols);
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) M(r, c) = perm[r * cols + c];
    }

    Eigen::MatrixXd P;
    if (is_exact_permutation(M)) {
        P = M.transpose();
    } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const double smax = sv.size() > 0 ? sv(0) : 0.0;
        const double tol =
            static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * smax;
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (sv(i) > tol) inv(i) = 1.0 / sv(i);
        }
        P = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    }

    std::vector<Mode> modes = col_modes;
    modes.insert(modes.end(), row_modes.begin(), row_modes.end());
    std::vector<double> data(static_cast<std::size_t>(rows * cols));
    for (std::int64_t c = 0; c < cols; ++c) {
        for (std::int64_t r = 0; r < rows; ++r) data[static_cast<std::size_t>(c * rows + r)] = P(c, r);
    }
    return NamedTensor(std::move(modes), std::move(data));
}

NamedTensor factor_product(const NamedTensor& a, const NamedTensor& b) {
    std::vector<Mode> modes = a.modes();
    for (const auto& m : b.modes()) {
        const int i = a.mode_index(m.label);
        if (i < 0) {
            modes.push_back(m);
        } else if (a.modes()[static_cast<std::size_t>(i)].extent != m.extent) {
            throw validation_error("factor_product: extent mismatch on " + m.label.str());
        }
    }
    const auto out_strides = strides_of(modes);
    std::vector<std::int64_t> a_stride(modes.size(), 0), b_stride(modes.size(), 0);
    const auto as = strides_of(a.modes());
    const auto bs = strides_of(b.modes());
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const int ai = a.mode_index(modes[i].label);
        if (ai >= 0) a_stride[i] = as[static_cast<std::size_t>(ai)];
        const int bi = b.mode_index(modes[i].label);
        if (bi >= 0) b_stride[i] = bs[static_cast<std::size_t>(bi)];
    }
    const std::int64_t n = numel_of(modes);
    std::vector<double> out(static_cast<std::size_t>(n));
    std::vector<std::int64_t> idx(modes.size(), 0);
    for (std::int64_t flat = 0; flat < n; ++flat) {
        std::int64_t af = 0, bf = 0;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            af += idx[i] * a_stride[i];
            bf += idx[i] * b_stride[i];
        }
        out[static_cast<std::size_t>(flat)] = a[af] * b[bf];
        for (int i = static_cast<int>(modes.size()) - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < modes[static_cast<std::size_t>(i)].extent) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return NamedTensor(std::move(modes), std::move(out));
}

NamedTensor marginalize(const NamedTensor& t, std::span<const ModeLabel> labels) {
    NamedTensor cur = t;
    for (const auto& l : labels) {
        const std::int64_t k = cur.extent(l);
        cur = mode_multiply(cur, NamedTensor::ones({{l, k}}), l);
    }
    return cur;
}

NamedTensor renamed(const NamedTensor& t, const ModeLabel& from, const ModeLabel& to) {
    const int i = t.mode_index(from);
    if (i < 0) throw validation_error("renamed: unknown mode " + from.str());
    if (!(from == to) && t.has_mode(to)) throw validation_error("renamed: mode exists " + to.str());
    std::vector<Mode> modes = t.modes();
    modes[static_cast<std::size_t>(i)].label = to;
    std::vector<double> data(t.data().begin(), t.data().end());
    return NamedTensor(std::move(modes), std::move(data));
}

}  // namespace pbp
