#include "pbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pbp/errors.hpp"
#include "pbp/rng.hpp"

namespace pbp {

namespace {

std::vector<int> toposort(int n, const std::vector<std::vector<int>>& parents) {
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        for (int p : parents[static_cast<std::size_t>(c)]) {
            children[static_cast<std::size_t>(p)].push_back(c);
            ++indeg[static_cast<std::size_t>(c)];
        }
    }
    // Kahn's algorithm, smallest id first for determinism.
    std::set<int> ready;
    for (int i = 0; i < n; ++i) {
        if (indeg[static_cast<std::size_t>(i)] == 0) ready.insert(i);
    }
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    while (!ready.empty()) {
        const int v = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(v);
        for (int c : children[static_cast<std::size_t>(v)]) {
            if (--indeg[static_cast<std::size_t>(c)] == 0) ready.insert(c);
        }
    }
    if (static_cast<int>(order.size()) != n) throw validation_error("edge set is cyclic");
    return order;
}

}  // namespace

GraphicalModel::GraphicalModel(std::vector<Variable> variables, std::vector<std::pair<int, int>> edges,
                               std::vector<std::vector<double>> cpts)
    : vars_(std::move(variables)), edges_(std::move(edges)), cpts_(std::move(cpts)) {
    const int n = static_cast<int>(vars_.size());
    if (n == 0) throw validation_error("model has no variables");
    std::set<std::string> names;
    for (int i = 0; i < n; ++i) {
        const auto& v = vars_[static_cast<std::size_t>(i)];
        if (v.id != i) throw validation_error("variable ids must be contiguous from 0");
        if (v.cardinality < 2) throw validation_error("variable " + v.name + " has cardinality < 2");
        if (!names.insert(v.name).second) throw validation_error("duplicate variable name " + v.name);
    }
    parents_.assign(static_cast<std::size_t>(n), {});
    for (const auto& [p, c] : edges_) {
        if (p < 0 || p >= n || c < 0 || c >= n || p == c) throw validation_error("bad edge");
        parents_[static_cast<std::size_t>(c)].push_back(p);
    }
    topo_ = toposort(n, parents_);
    if (static_cast<int>(cpts_.size()) != n) throw validation_error("one CPT per variable required");
    for (int i = 0; i < n; ++i) {
        const auto expected = parent_states(i) * vars_[static_cast<std::size_t>(i)].cardinality;
        const auto& cpt = cpts_[static_cast<std::size_t>(i)];
        if (static_cast<std::int64_t>(cpt.size()) != expected) {
            throw validation_error("CPT size mismatch for variable " + vars_[static_cast<std::size_t>(i)].name);
        }
        for (std::int64_t r = 0; r < parent_states(i); ++r) {
            double row_sum = 0.0;
            for (double p : cpt_row(i, r)) {
                if (!(p >= 0.0)) throw validation_error("negative CPT entry");
                row_sum += p;
            }
            if (std::abs(row_sum - 1.0) > 1e-12) {
                throw validation_error("CPT row does not sum to 1 for variable " +
                                       vars_[static_cast<std::size_t>(i)].name);
            }
        }
    }
}

std::vector<int> GraphicalModel::observable_ids() const {
    std::vector<int> out;
    for (const auto& v : vars_) {
        if (v.role == Role::Observable) out.push_back(v.id);
    }
    return out;
}

std::vector<int> GraphicalModel::latent_ids() const {
    std::vector<int> out;
    for (const auto& v : vars_) {
        if (v.role == Role::Latent) out.push_back(v.id);
    }
    return out;
}

int GraphicalModel::id_of(const std::string& name) const {
    for (const auto& v : vars_) {
        if (v.name == name) return v.id;
    }
    throw validation_error("unknown variable name " + name);
}

std::int64_t GraphicalModel::parent_states(int id) const {
    std::int64_t s = 1;
    for (int p : parents_[static_cast<std::size_t>(id)]) s *= vars_[static_cast<std::size_t>(p)].cardinality;
    return s;
}

std::span<const double> GraphicalModel::cpt_row(int id, std::int64_t parent_index) const {
    const int card = vars_[static_cast<std::size_t>(id)].cardinality;
    const auto& cpt = cpts_[static_cast<std::size_t>(id)];
    return {cpt.data() + parent_index * card, static_cast<std::size_t>(card)};
}

ModelStructure GraphicalModel::structure() const { return {vars_, edges_}; }

int Dataset::column_of(int var_id) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == var_id) return static_cast<int>(i);
    }
    throw validation_error("dataset has no column for variable id " + std::to_string(var_id));
}

GraphicalModel random_model(const ModelStructure& structure, std::uint64_t seed) {
    // Validation of the structure (including acyclicity) happens inside the
    // GraphicalModel constructor; build parent lists first to size the CPTs.
    const int n = static_cast<int>(structure.variables.size());
    std::vector<std::vector<int>> parents(static_cast<std::size_t>(n));
    for (const auto& [p, c] : structure.edges) {
        if (p < 0 || p >= n || c < 0 || c >= n) throw validation_error("bad edge");
        parents[static_cast<std::size_t>(c)].push_back(p);
    }
    Rng rng(seed);
    std::vector<std::vector<double>> cpts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::int64_t rows = 1;
        for (int p : parents[static_cast<std::size_t>(i)]) {
            rows *= structure.variables[static_cast<std::size_t>(p)].cardinality;
        }
        const int card = structure.variables[static_cast<std::size_t>(i)].cardinality;
        auto& cpt = cpts[static_cast<std::size_t>(i)];
        cpt.reserve(static_cast<std::size_t>(rows * card));
        for (std::int64_t r = 0; r < rows; ++r) {
            const auto row = rng.simplex_uniform(card);
            cpt.insert(cpt.end(), row.begin(), row.end());
        }
    }
    return GraphicalModel(structure.variables, structure.edges, std::move(cpts));
}

Dataset ancestral_sample(const GraphicalModel& model, std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw validation_error("ancestral_sample: n must be >= 1");
    Rng rng(seed);
    const auto obs = model.observable_ids();
    Dataset ds;
    ds.columns = obs;
    ds.rows.reserve(static_cast<std::size_t>(n));
    std::vector<int> assign(static_cast<std::size_t>(model.n_vars()), 0);
    for (std::int64_t d = 0; d < n; ++d) {
        for (int v : model.topo_order()) {
            std::int64_t pidx = 0;
            for (int p : model.parents(v)) {
                pidx = pidx * model.var(p).cardinality + assign[static_cast<std::size_t>(p)];
            }
            assign[static_cast<std::size_t>(v)] = rng.categorical(model.cpt_row(v, pidx));
        }
        std::vector<int> row;
        row.reserve(obs.size());
        for (int v : obs) row.push_back(assign[static_cast<std::size_t>(v)]);
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

NamedTensor brute_force_joint(const GraphicalModel& model, std::int64_t cap) {
    std::int64_t total = 1;
    std::vector<Mode> modes;
    for (const auto& v : model.variables()) {
        if (total > cap / v.cardinality) throw validation_error("joint state space exceeds cap");
        total *= v.cardinality;
        modes.push_back({ModeLabel::variable(v.id), v.cardinality});
    }
    NamedTensor joint = NamedTensor::zeros(modes);
    std::vector<int> assign(static_cast<std::size_t>(model.n_vars()), 0);
    for (std::int64_t flat = 0; flat < total; ++flat) {
        std::int64_t rem = flat;
        for (int i = model.n_vars() - 1; i >= 0; --i) {
            const int card = model.var(i).cardinality;
            assign[static_cast<std::size_t>(i)] = static_cast<int>(rem % card);
            rem /= card;
        }
        double p = 1.0;
        for (int v = 0; v < model.n_vars(); ++v) {
            std::int64_t pidx = 0;
            for (int par : model.parents(v)) {
                pidx = pidx * model.var(par).cardinality + assign[static_cast<std::size_t>(par)];
            }
            p *= model.cpt_row(v, pidx)[static_cast<std::size_t>(assign[static_cast<std::size_t>(v)])];
        }
        joint.at(flat) = p;
    }
    return joint;
}

NamedTensor observable_joint(const GraphicalModel& model, std::int64_t cap) {
    NamedTensor joint = brute_force_joint(model, cap);
    std::vector<ModeLabel> latents;
    for (int id : model.latent_ids()) latents.push_back(ModeLabel::variable(id));
    return marginalize(joint, latents);
}

void validate_evidence(const GraphicalModel& model, const EvidenceMap& evidence) {
    for (const auto& [id, value] : evidence) {
        if (id < 0 || id >= model.n_vars()) throw validation_error("evidence on unknown variable id");
        const auto& v = model.var(id);
        if (v.role != Role::Observable) throw validation_error("evidence on latent variable " + v.name);
        if (value < 0 || value >= v.cardinality) {
            throw validation_error("evidence value out of range for " + v.name);
        }
    }
}

double exact_evidence_probability(const GraphicalModel& model, const EvidenceMap& evidence) {
    validate_evidence(model, evidence);
    NamedTensor t = brute_force_joint(model);
    for (const auto& [id, value] : evidence) {
        t = mode_multiply(t, NamedTensor::one_hot(ModeLabel::variable(id), model.var(id).cardinality, value),
                          ModeLabel::variable(id));
    }
    std::vector<ModeLabel> rest;
    for (const auto& m : t.modes()) rest.push_back(m.label);
    return marginalize(t, rest).data()[0];
}

}  // namespace pbp
