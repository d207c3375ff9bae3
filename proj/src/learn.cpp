#include "pbp/learn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <set>

#include "pbp/errors.hpp"

namespace pbp {

namespace {

constexpr std::int64_t kTargetDimCap = std::int64_t{1} << 22;

FeatureMap map_over(const LatentJunctionTree& tree, const std::vector<int>& vars) {
    std::vector<int> cards;
    cards.reserve(vars.size());
    for (int v : vars) cards.push_back(tree.cardinality(v));
    return FeatureMap(vars, std::move(cards));
}

// Column lookup for a variable list, resolved once per regression.
std::vector<int> columns_for(const Dataset& data, const std::vector<int>& vars) {
    std::vector<int> cols;
    cols.reserve(vars.size());
    for (int v : vars) cols.push_back(data.column_of(v));
    return cols;
}

std::int64_t cell_index(const FeatureMap& fm, const std::vector<int>& cols, const std::vector<int>& row) {
    std::int64_t idx = 0;
    const auto& cards = fm.cardinalities();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const int value = row[static_cast<std::size_t>(cols[i])];
        if (value < 0 || value >= cards[i]) throw validation_error("dataset value out of range");
        idx = idx * cards[i] + value;
    }
    return idx;
}

// Joint target layout for S1B: row-major over the child separators' alpha
// feature indices, in child order.
struct ChildLayout {
    std::vector<FeatureMap> maps;
    std::vector<std::vector<int>> cols;
    std::int64_t dim = 1;
};

ChildLayout child_layout(const Dataset* data, const LatentJunctionTree& tree, int separator) {
    ChildLayout layout;
    for (int child_sep : tree.child_separators_below(separator)) {
        auto fm = map_over(tree, tree.separator(child_sep).alpha);
        if (layout.dim > kTargetDimCap / fm.dim()) {
            throw validation_error("stage-1B target dimension exceeds the supported size");
        }
        layout.dim *= fm.dim();
        if (data != nullptr) layout.cols.push_back(columns_for(*data, fm.var_ids()));
        layout.maps.push_back(std::move(fm));
    }
    return layout;
}

void require_nonleaf(const LatentJunctionTree& tree, int separator) {
    if (separator < 0 || separator >= tree.n_separators()) throw validation_error("unknown separator");
    if (tree.is_leaf_separator(separator)) {
        throw validation_error("separator " + std::to_string(separator) + " has no child separators");
    }
}

double checked_lambda(double lambda) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw validation_error("ridge strength must be finite and non-negative");
    }
    return lambda;
}

S1Result finish_cells(FeatureMap eta, std::int64_t target_dim, std::vector<std::int64_t> cell_of_sample,
                      std::vector<double> weight, std::vector<std::vector<double>> sums, double lambda1,
                      int separator) {
    S1Result result;
    result.eta = std::move(eta);
    result.target_dim = target_dim;
    result.cell_of_sample = std::move(cell_of_sample);
    result.cell_weight = std::move(weight);
    result.cell_prediction = std::move(sums);
    if (lambda1 == 0.0 && result.eta.dim() > 1) {
        int used = 0;
        for (double w : result.cell_weight) used += w > 0.0 ? 1 : 0;
        if (used <= 1 && !result.cell_of_sample.empty()) {
            throw numerical_error("stage-1 design has zero variance with lambda1 = 0 at separator " +
                                  std::to_string(separator));
        }
    }
    // Ridge with an unpenalized intercept: the penalty acts on the centered
    // component, so cell means shrink toward the unconditional mean rather
    // than toward zero. With indicator features the normal equations stay
    // diagonal per cell.
    std::vector<double> grand_mean(static_cast<std::size_t>(target_dim), 0.0);
    if (lambda1 > 0.0) {
        double total = 0.0;
        for (std::size_t b = 0; b < result.cell_prediction.size(); ++b) {
            total += result.cell_weight[b];
            for (std::int64_t i = 0; i < target_dim; ++i) {
                grand_mean[static_cast<std::size_t>(i)] += result.cell_prediction[b][static_cast<std::size_t>(i)];
            }
        }
        if (total > 0.0) {
            for (auto& g : grand_mean) g /= total;
        }
    }
    for (std::size_t b = 0; b < result.cell_prediction.size(); ++b) {
        const double denom = result.cell_weight[b] + lambda1;
        if (denom > 0.0) {
            for (std::int64_t i = 0; i < target_dim; ++i) {
                auto& v = result.cell_prediction[b][static_cast<std::size_t>(i)];
                v = (v + lambda1 * grand_mean[static_cast<std::size_t>(i)]) / denom;
            }
        }
    }
    return result;
}

S1Result empirical_s1(const Dataset& data, const LatentJunctionTree& tree, int separator,
                      const RegressionConfig& config, bool child_targets) {
    require_nonleaf(tree, separator);
    if (data.n() < 1) throw validation_error("empty dataset");
    const auto& sep = tree.separator(separator);
    FeatureMap eta = map_over(tree, sep.beta);
    const auto eta_cols = columns_for(data, sep.beta);

    FeatureMap alpha = map_over(tree, sep.alpha);
    std::vector<int> alpha_cols;
    ChildLayout children;
    std::int64_t target_dim = 0;
    if (child_targets) {
        children = child_layout(&data, tree, separator);
        target_dim = children.dim;
    } else {
        alpha_cols = columns_for(data, sep.alpha);
        target_dim = alpha.dim();
    }

    std::vector<double> weight(static_cast<std::size_t>(eta.dim()), 0.0);
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(eta.dim()),
                                          std::vector<double>(static_cast<std::size_t>(target_dim), 0.0));
    std::vector<std::int64_t> cell_of_sample(static_cast<std::size_t>(data.n()));
    for (std::int64_t d = 0; d < data.n(); ++d) {
        const auto& row = data.rows[static_cast<std::size_t>(d)];
        const std::int64_t b = cell_index(eta, eta_cols, row);
        cell_of_sample[static_cast<std::size_t>(d)] = b;
        weight[static_cast<std::size_t>(b)] += 1.0;
        std::int64_t t = 0;
        if (child_targets) {
            for (std::size_t k = 0; k < children.maps.size(); ++k) {
                t = t * children.maps[k].dim() + cell_index(children.maps[k], children.cols[k], row);
            }
        } else {
            t = cell_index(alpha, alpha_cols, row);
        }
        sums[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)] += 1.0;
    }
    return finish_cells(std::move(eta), target_dim, std::move(cell_of_sample), std::move(weight),
                        std::move(sums), checked_lambda(config.resolve_lambda1(data.n())), separator);
}

}  // namespace

const NamedTensor& LearnedParams::operator_for(int separator) const {
    for (const auto& op : operators) {
        if (op.separator == separator) return op.w;
    }
    throw validation_error("no operator for separator " + std::to_string(separator));
}

S1Result s1a_regress(const Dataset& data, const LatentJunctionTree& tree, int separator,
                     const RegressionConfig& config) {
    return empirical_s1(data, tree, separator, config, /*child_targets=*/false);
}

S1Result s1b_regress(const Dataset& data, const LatentJunctionTree& tree, int separator,
                     const RegressionConfig& config) {
    return empirical_s1(data, tree, separator, config, /*child_targets=*/true);
}

NamedTensor s2_regress(const LatentJunctionTree& tree, int separator, const S1Result& s1a,
                       const S1Result& s1b, const RegressionConfig& config, std::int64_t n,
                       std::vector<std::string>* warnings) {
    require_nonleaf(tree, separator);
    if (s1a.cell_weight.size() != s1b.cell_weight.size()) {
        throw validation_error("stage-2 inputs disagree on the eta cells");
    }
    const std::int64_t d_in = s1a.target_dim;
    const std::int64_t d_out = s1b.target_dim;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d_in, d_in);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d_in, d_out);
    Eigen::VectorXd x(d_in), y(d_out);
    for (std::size_t b = 0; b < s1a.cell_weight.size(); ++b) {
        const double w = s1a.cell_weight[b];
        if (w <= 0.0) continue;
        if (s1b.cell_weight[b] != w) throw validation_error("stage-2 inputs disagree on cell weights");
        for (std::int64_t i = 0; i < d_in; ++i) x(i) = s1a.cell_prediction[b][static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < d_out; ++j) y(j) = s1b.cell_prediction[b][static_cast<std::size_t>(j)];
        G.noalias() += w * x * x.transpose();
        H.noalias() += w * x * y.transpose();
    }
    const double lambda2 = checked_lambda(config.resolve_lambda2(n));
    Eigen::MatrixXd X;
    if (lambda2 > 0.0) {
        X = (G + lambda2 * Eigen::MatrixXd::Identity(d_in, d_in)).ldlt().solve(H);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
        if (cod.rank() < d_in && warnings != nullptr) {
            warnings->push_back("separator " + std::to_string(separator) +
                                ": rank-deficient stage-2 design; using the minimum-norm solution");
        }
        X = cod.solve(H);
    }

    std::vector<Mode> modes;
    modes.push_back({ModeLabel::separator(separator), d_in});
    for (int child_sep : tree.child_separators_below(separator)) {
        modes.push_back({ModeLabel::separator(child_sep), tree.alpha_dim(child_sep)});
    }
    std::vector<double> data(static_cast<std::size_t>(d_in * d_out));
    for (std::int64_t i = 0; i < d_in; ++i) {
        for (std::int64_t j = 0; j < d_out; ++j) data[static_cast<std::size_t>(i * d_out + j)] = X(i, j);
    }
    return NamedTensor(std::move(modes), std::move(data));
}

NamedTensor root_tensor(const Dataset& data, const LatentJunctionTree& tree) {
    if (data.n() < 1) throw validation_error("empty dataset");
    const auto& root_seps = tree.child_separators(tree.root());
    std::vector<Mode> modes;
    std::vector<FeatureMap> maps;
    std::vector<std::vector<int>> cols;
    std::int64_t dim = 1;
    for (int sep : root_seps) {
        auto fm = map_over(tree, tree.separator(sep).alpha);
        if (dim > kTargetDimCap / fm.dim()) {
            throw validation_error("root tensor dimension exceeds the supported size");
        }
        dim *= fm.dim();
        modes.push_back({ModeLabel::separator(sep), fm.dim()});
        cols.push_back(columns_for(data, fm.var_ids()));
        maps.push_back(std::move(fm));
    }
    NamedTensor t = NamedTensor::zeros(std::move(modes));
    const double inc = 1.0 / static_cast<double>(data.n());
    for (const auto& row : data.rows) {
        std::int64_t flat = 0;
        for (std::size_t k = 0; k < maps.size(); ++k) {
            flat = flat * maps[k].dim() + cell_index(maps[k], cols[k], row);
        }
        t.at(flat) += inc;
    }
    return t;
}

LearnedParams learn(const LatentJunctionTree& tree, const Dataset& data, const RegressionConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    LearnedParams params;
    for (int s = 0; s < tree.n_separators(); ++s) {
        if (tree.is_leaf_separator(s)) continue;
        const auto a = s1a_regress(data, tree, s, config);
        const auto b = s1b_regress(data, tree, s, config);
        params.operators.push_back(
            {s, s2_regress(tree, s, a, b, config, data.n(), &params.metadata.warnings)});
    }
    params.root_tensor = root_tensor(data, tree);
    params.metadata.tree_hash = tree.hash();
    params.metadata.lambda1 = config.resolve_lambda1(data.n());
    params.metadata.lambda2 = config.resolve_lambda2(data.n());
    params.metadata.n = data.n();
    params.metadata.population = false;
    params.metadata.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return params;
}

PopulationOracle::PopulationOracle(const GraphicalModel& model, const LatentJunctionTree& tree)
    : tree_(&tree), joint_(::pbp::observable_joint(model)), obs_ids_(model.observable_ids()) {
    if (static_cast<int>(tree.variables().size()) != model.n_vars()) {
        throw validation_error("tree does not belong to the model");
    }
    for (const auto& v : model.variables()) {
        const auto& tv = tree.variables()[static_cast<std::size_t>(v.id)];
        if (tv.cardinality != v.cardinality || tv.role != v.role) {
            throw validation_error("tree does not belong to the model");
        }
    }
}

S1Result PopulationOracle::conditional_expectation(int separator, bool child_targets) const {
    const auto& tree = *tree_;
    require_nonleaf(tree, separator);
    const auto& sep = tree.separator(separator);
    FeatureMap eta = map_over(tree, sep.beta);
    FeatureMap alpha = map_over(tree, sep.alpha);
    ChildLayout children;
    std::int64_t target_dim = alpha.dim();
    if (child_targets) {
        children = child_layout(nullptr, tree, separator);
        target_dim = children.dim;
    }

    // Position of each variable within the observable joint's mode order.
    std::vector<int> obs_pos(tree.variables().size(), -1);
    for (std::size_t i = 0; i < obs_ids_.size(); ++i) obs_pos[static_cast<std::size_t>(obs_ids_[i])] = static_cast<int>(i);

    std::vector<double> weight(static_cast<std::size_t>(eta.dim()), 0.0);
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(eta.dim()),
                                          std::vector<double>(static_cast<std::size_t>(target_dim), 0.0));

    std::vector<int> assign(obs_ids_.size(), 0);
    const auto& modes = joint_.modes();
    auto value_of = [&](int var) { return assign[static_cast<std::size_t>(obs_pos[static_cast<std::size_t>(var)])]; };
    auto index_under = [&](const FeatureMap& fm) {
        std::int64_t idx = 0;
        for (std::size_t i = 0; i < fm.var_ids().size(); ++i) {
            idx = idx * fm.cardinalities()[i] + value_of(fm.var_ids()[i]);
        }
        return idx;
    };
    for (std::int64_t flat = 0; flat < joint_.size(); ++flat) {
        const double p = joint_[flat];
        if (p > 0.0) {
            const std::int64_t b = index_under(eta);
            std::int64_t t = 0;
            if (child_targets) {
                for (const auto& fm : children.maps) t = t * fm.dim() + index_under(fm);
            } else {
                t = index_under(alpha);
            }
            weight[static_cast<std::size_t>(b)] += p;
            sums[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)] += p;
        }
        for (int i = static_cast<int>(assign.size()) - 1; i >= 0; --i) {
            if (++assign[static_cast<std::size_t>(i)] < modes[static_cast<std::size_t>(i)].extent) break;
            assign[static_cast<std::size_t>(i)] = 0;
        }
    }
    return finish_cells(std::move(eta), target_dim, {}, std::move(weight), std::move(sums),
                        /*lambda1=*/0.0, separator);
}

S1Result PopulationOracle::s1a(int separator) const { return conditional_expectation(separator, false); }
S1Result PopulationOracle::s1b(int separator) const { return conditional_expectation(separator, true); }

NamedTensor PopulationOracle::root_tensor() const {
    const auto& tree = *tree_;
    const auto& root_seps = tree.child_separators(tree.root());
    std::vector<Mode> modes;
    std::vector<FeatureMap> maps;
    for (int sep : root_seps) {
        auto fm = map_over(tree, tree.separator(sep).alpha);
        modes.push_back({ModeLabel::separator(sep), fm.dim()});
        maps.push_back(std::move(fm));
    }
    NamedTensor t = NamedTensor::zeros(std::move(modes));

    std::vector<int> obs_pos(tree.variables().size(), -1);
    for (std::size_t i = 0; i < obs_ids_.size(); ++i) obs_pos[static_cast<std::size_t>(obs_ids_[i])] = static_cast<int>(i);
    std::vector<int> assign(obs_ids_.size(), 0);
    const auto& jmodes = joint_.modes();
    for (std::int64_t flat = 0; flat < joint_.size(); ++flat) {
        const double p = joint_[flat];
        if (p > 0.0) {
            std::int64_t out = 0;
            for (const auto& fm : maps) {
                std::int64_t idx = 0;
                for (std::size_t i = 0; i < fm.var_ids().size(); ++i) {
                    idx = idx * fm.cardinalities()[i] +
                          assign[static_cast<std::size_t>(obs_pos[static_cast<std::size_t>(fm.var_ids()[i])])];
                }
                out = out * fm.dim() + idx;
            }
            t.at(out) += p;
        }
        for (int i = static_cast<int>(assign.size()) - 1; i >= 0; --i) {
            if (++assign[static_cast<std::size_t>(i)] < jmodes[static_cast<std::size_t>(i)].extent) break;
            assign[static_cast<std::size_t>(i)] = 0;
        }
    }
    return t;
}

LearnedParams learn_population(const LatentJunctionTree& tree, const GraphicalModel& model) {
    const auto start = std::chrono::steady_clock::now();
    const PopulationOracle oracle(model, tree);
    const RegressionConfig no_ridge{0.0, 0.0};
    LearnedParams params;
    for (int s = 0; s < tree.n_separators(); ++s) {
        if (tree.is_leaf_separator(s)) continue;
        const auto a = oracle.s1a(s);
        const auto b = oracle.s1b(s);
        params.operators.push_back(
            {s, s2_regress(tree, s, a, b, no_ridge, 0, &params.metadata.warnings)});
    }
    params.root_tensor = oracle.root_tensor();
    params.metadata.tree_hash = tree.hash();
    params.metadata.lambda1 = 0.0;
    params.metadata.lambda2 = 0.0;
    params.metadata.n = 0;
    params.metadata.population = true;
    params.metadata.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return params;
}

}  // namespace pbp
