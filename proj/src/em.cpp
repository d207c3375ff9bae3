#include "pbp/em.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "pbp/errors.hpp"
#include "pbp/exact.hpp"
#include "pbp/rng.hpp"

namespace pbp {

namespace {

struct WeightedRow {
    EvidenceMap evidence;
    double count = 0.0;
};

std::vector<WeightedRow> group_rows(const Dataset& data) {
    std::map<std::vector<int>, double> counts;
    for (const auto& row : data.rows) counts[row] += 1.0;
    std::vector<WeightedRow> out;
    out.reserve(counts.size());
    for (const auto& [row, count] : counts) {
        WeightedRow wr;
        wr.count = count;
        for (std::size_t i = 0; i < data.columns.size(); ++i) {
            wr.evidence[data.columns[i]] = row[i];
        }
        out.push_back(std::move(wr));
    }
    return out;
}

GraphicalModel m_step(const ModelStructure& structure, const std::vector<NamedTensor>& ess) {
    const int n = static_cast<int>(structure.variables.size());
    std::vector<std::vector<double>> cpts(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        // ess[v] is laid out (parents in declared order, then v), which is
        // exactly the CPT's row-major layout.
        const auto& t = ess[static_cast<std::size_t>(v)];
        const int card = structure.variables[static_cast<std::size_t>(v)].cardinality;
        const std::int64_t rows = t.size() / card;
        std::vector<double> cpt(static_cast<std::size_t>(t.size()));
        for (std::int64_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (int x = 0; x < card; ++x) total += t[r * card + x];
            for (int x = 0; x < card; ++x) {
                cpt[static_cast<std::size_t>(r * card + x)] =
                    total > 0.0 ? t[r * card + x] / total : 1.0 / card;
            }
        }
        cpts[static_cast<std::size_t>(v)] = std::move(cpt);
    }
    return GraphicalModel(structure.variables, structure.edges, std::move(cpts));
}

}  // namespace

EMResult em_learn(const ModelStructure& structure, const Dataset& data, const EMConfig& config) {
    if (config.restarts < 1) throw validation_error("EM needs at least one restart");
    if (config.tolerance <= 0.0) throw validation_error("EM tolerance must be positive");
    if (data.n() < 1) throw validation_error("empty dataset");
    const auto start = std::chrono::steady_clock::now();
    const auto rows = group_rows(data);

    GraphicalModel model0 = random_model(structure, split_seed(config.seed, 0));
    SumProductEngine engine(model0);

    std::vector<std::vector<double>> traces;
    std::vector<GraphicalModel> fitted;
    for (int r = 0; r < config.restarts; ++r) {
        GraphicalModel model = r == 0 ? model0 : random_model(structure, split_seed(config.seed, r));
        std::vector<double> trace;
        for (int iter = 0; iter < config.max_iterations; ++iter) {
            engine.set_model(model);
            std::vector<NamedTensor> ess;
            for (int v = 0; v < model.n_vars(); ++v) {
                std::vector<Mode> modes;
                for (int p : model.parents(v)) {
                    modes.push_back({ModeLabel::variable(p), model.var(p).cardinality});
                }
                modes.push_back({ModeLabel::variable(v), model.var(v).cardinality});
                ess.push_back(NamedTensor::zeros(std::move(modes)));
            }
            double ll = 0.0;
            for (const auto& wr : rows) {
                const auto cal = engine.calibrate(wr.evidence);
                if (cal.evidence_probability <= 0.0) {
                    throw numerical_error("EM encountered a zero-probability training row");
                }
                ll += wr.count * std::log(cal.evidence_probability);
                for (int v = 0; v < model.n_vars(); ++v) {
                    const NamedTensor fam = engine.family_marginal(cal, v);
                    auto& acc = ess[static_cast<std::size_t>(v)];
                    for (std::int64_t i = 0; i < fam.size(); ++i) acc.at(i) += wr.count * fam[i];
                }
            }
            trace.push_back(ll);
            if (iter > 0) {
                const double prev = trace[trace.size() - 2];
                if (std::abs(ll - prev) <= config.tolerance * std::max(1.0, std::abs(prev))) break;
            }
            model = m_step(structure, ess);
        }
        traces.push_back(std::move(trace));
        fitted.push_back(std::move(model));
    }

    int best = 0;
    for (int r = 1; r < config.restarts; ++r) {
        if (traces[static_cast<std::size_t>(r)].back() > traces[static_cast<std::size_t>(best)].back()) {
            best = r;
        }
    }
    EMResult result{std::move(fitted[static_cast<std::size_t>(best)]), std::move(traces), best, 0.0, 0.0};
    result.best_log_likelihood = result.traces[static_cast<std::size_t>(best)].back();
    result.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace pbp
