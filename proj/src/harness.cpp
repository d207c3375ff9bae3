#include "pbp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pbp/errors.hpp"
#include "pbp/infer.hpp"
#include "pbp/jtree.hpp"
#include "pbp/rng.hpp"

namespace pbp {

using nlohmann::json;

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw validation_error("kl_divergence: length mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        kl += p[i] * std::log(p[i] / std::max(q[i], 1e-12));
    }
    return kl;
}

ModelStructure preset_structure(const std::string& name, int cardinality) {
    if (cardinality < 2) throw validation_error("preset cardinality must be >= 2");
    if (name != "fig4") throw validation_error("unknown preset: " + name);
    // A two-level latent hierarchy over 14 binary-by-default variables.
    // Latents: A, B, C, F, I, L. Observables: D, E, G, H, J, K, M, N, with N
    // sharing the parents C and L.
    const std::vector<std::pair<std::string, Role>> spec_vars = {
        {"A", Role::Latent},     {"B", Role::Latent},     {"C", Role::Latent},
        {"D", Role::Observable}, {"E", Role::Observable}, {"F", Role::Latent},
        {"G", Role::Observable}, {"H", Role::Observable}, {"I", Role::Latent},
        {"J", Role::Observable}, {"K", Role::Observable}, {"L", Role::Latent},
        {"M", Role::Observable}, {"N", Role::Observable}};
    ModelStructure s;
    for (int i = 0; i < static_cast<int>(spec_vars.size()); ++i) {
        s.variables.push_back({i, spec_vars[static_cast<std::size_t>(i)].first, cardinality,
                               spec_vars[static_cast<std::size_t>(i)].second});
    }
    auto id = [&](const char* n) {
        for (const auto& v : s.variables) {
            if (v.name == n) return v.id;
        }
        throw internal_error("preset variable lookup");
    };
    const std::vector<std::pair<const char*, const char*>> edges = {
        {"A", "B"}, {"A", "C"}, {"B", "F"}, {"B", "G"}, {"B", "H"}, {"C", "I"}, {"C", "L"},
        {"F", "D"}, {"F", "E"}, {"I", "J"}, {"I", "K"}, {"L", "M"}, {"C", "N"}, {"L", "N"}};
    for (const auto& [p, c] : edges) s.edges.emplace_back(id(p), id(c));
    return s;
}

KlSummary average_query_kl(const ExactInference& exact, const GraphicalModel& model,
                           const QuerySpec& spec, const PosteriorEstimator& estimator) {
    if (spec.query < 0 || spec.query >= model.n_vars() ||
        model.var(spec.query).role != Role::Observable) {
        throw validation_error("query variable must be observable");
    }
    for (int v : spec.evidence_vars) {
        if (v < 0 || v >= model.n_vars() || model.var(v).role != Role::Observable) {
            throw validation_error("evidence variables must be observable");
        }
        if (v == spec.query) throw validation_error("query variable cannot be in the evidence set");
    }
    std::int64_t realizations = 1;
    for (int v : spec.evidence_vars) realizations *= model.var(v).cardinality;

    KlSummary summary;
    double total = 0.0;
    std::vector<int> values(spec.evidence_vars.size(), 0);
    for (std::int64_t r = 0; r < realizations; ++r) {
        EvidenceMap ev;
        for (std::size_t i = 0; i < spec.evidence_vars.size(); ++i) ev[spec.evidence_vars[i]] = values[i];
        if (exact.evidence_probability(ev) <= 0.0) {
            ++summary.skipped;
        } else {
            const auto truth = exact.posterior(ev, spec.query);
            std::vector<double> estimate = estimator(ev);
            if (estimate.empty()) {
                estimate.assign(truth.probabilities.size(), 0.0);
            }
            total += kl_divergence(truth.probabilities, estimate);
            ++summary.evaluated;
        }
        for (int i = static_cast<int>(values.size()) - 1; i >= 0; --i) {
            if (++values[static_cast<std::size_t>(i)] <
                model.var(spec.evidence_vars[static_cast<std::size_t>(i)]).cardinality) {
                break;
            }
            values[static_cast<std::size_t>(i)] = 0;
        }
    }
    summary.avg_kl = summary.evaluated > 0 ? total / summary.evaluated : 0.0;
    return summary;
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ExperimentSpec spec;
        spec.model_file = j.at("model").get<std::string>();
        spec.sizes = j.at("sizes").get<std::vector<std::int64_t>>();
        if (spec.sizes.empty()) throw validation_error("experiment sizes must be nonempty");
        for (std::size_t i = 0; i < spec.sizes.size(); ++i) {
            if (spec.sizes[i] < 1 || (i > 0 && spec.sizes[i] <= spec.sizes[i - 1])) {
                throw validation_error("experiment sizes must be positive and ascending");
            }
        }
        spec.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
        spec.algorithms = j.value("algorithms", std::vector<std::string>{"pbp", "em"});
        for (const auto& a : spec.algorithms) {
            if (a != "pbp" && a != "em") throw validation_error("unknown algorithm: " + a);
        }
        spec.query_name = j.at("query").at("query").get<std::string>();
        spec.evidence_names = j.at("query").at("evidence").get<std::vector<std::string>>();
        if (j.contains("lambda1")) spec.regression.lambda1 = j.at("lambda1").get<double>();
        if (j.contains("lambda2")) spec.regression.lambda2 = j.at("lambda2").get<double>();
        spec.beta_cap = j.value("beta_cap", std::int64_t{1024});
        if (j.contains("em")) {
            const auto& e = j.at("em");
            spec.em.restarts = e.value("restarts", 10);
            spec.em.max_iterations = e.value("max_iterations", 200);
            spec.em.tolerance = e.value("tolerance", 1e-6);
        }
        spec.out_csv = j.value("out_csv", "");
        spec.out_json = j.value("out_json", "");
        return spec;
    } catch (const json::exception& e) {
        throw validation_error(std::string("bad experiment spec: ") + e.what());
    }
}

namespace {

QuerySpec resolve_query(const GraphicalModel& model, const std::string& query,
                        const std::vector<std::string>& evidence) {
    QuerySpec qs;
    qs.query = model.id_of(query);
    for (const auto& name : evidence) qs.evidence_vars.push_back(model.id_of(name));
    return qs;
}

}  // namespace

std::vector<CellResult> run_experiment(const ExperimentSpec& spec, const GraphicalModel& model) {
    const QuerySpec query = resolve_query(model, spec.query_name, spec.evidence_names);
    const ExactInference exact(model);
    const LatentJunctionTree tree = LatentJunctionTree::from_model(model, spec.beta_cap);
    std::vector<CellResult> rows;
    for (std::size_t ni = 0; ni < spec.sizes.size(); ++ni) {
        const std::int64_t n = spec.sizes[ni];
        for (std::uint64_t seed : spec.seeds) {
            const std::uint64_t data_seed = split_seed(seed, static_cast<std::uint64_t>(n));
            const Dataset data = ancestral_sample(model, n, data_seed);
            for (const auto& algorithm : spec.algorithms) {
                CellResult row;
                row.algorithm = algorithm;
                row.n = n;
                row.seed = seed;
                try {
                    if (algorithm == "pbp") {
                        LearnedParams params = learn(tree, data, spec.regression);
                        params.metadata.seed = data_seed;
                        params.metadata.generator = kGeneratorName;
                        row.train_seconds = params.metadata.wallclock_seconds;
                        const PbpEngine engine(tree, params);
                        const auto summary =
                            average_query_kl(exact, model, query, [&](const EvidenceMap& ev) {
                                return engine.query(ev, query.query).posterior;
                            });
                        row.avg_kl = summary.avg_kl;
                        row.skipped = summary.skipped;
                    } else {
                        EMConfig em = spec.em;
                        em.seed = split_seed(data_seed, 1);
                        const EMResult fit = em_learn(model.structure(), data, em);
                        row.train_seconds = fit.wallclock_seconds;
                        const ExactInference em_infer(fit.model);
                        const auto summary =
                            average_query_kl(exact, model, query, [&](const EvidenceMap& ev) {
                                const auto p = em_infer.posterior(ev, query.query);
                                return p.zero_evidence ? std::vector<double>{} : p.probabilities;
                            });
                        row.avg_kl = summary.avg_kl;
                        row.skipped = summary.skipped;
                    }
                } catch (const std::exception& e) {
                    row.failed = true;
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

std::vector<CellResult> em_wallclock_and_quality(const GraphicalModel& model, const QuerySpec& query,
                                                 const std::vector<std::int64_t>& sizes,
                                                 std::uint64_t seed, const EMConfig& config) {
    const ExactInference exact(model);
    std::vector<CellResult> rows;
    for (std::int64_t n : sizes) {
        const std::uint64_t data_seed = split_seed(seed, static_cast<std::uint64_t>(n));
        const Dataset data = ancestral_sample(model, n, data_seed);
        EMConfig em = config;
        em.seed = split_seed(data_seed, 1);
        const EMResult fit = em_learn(model.structure(), data, em);
        const ExactInference em_infer(fit.model);
        const auto summary = average_query_kl(exact, model, query, [&](const EvidenceMap& ev) {
            const auto p = em_infer.posterior(ev, query.query);
            return p.zero_evidence ? std::vector<double>{} : p.probabilities;
        });
        rows.push_back({"em", n, seed, summary.avg_kl, summary.skipped, fit.wallclock_seconds, false, ""});
    }
    return rows;
}

std::string results_csv(std::span<const CellResult> rows) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "algorithm,N,seed,avg_kl,skipped,train_seconds\n";
    for (const auto& r : rows) {
        os << r.algorithm << "," << r.n << "," << r.seed << ",";
        if (r.failed) {
            os << "nan";
        } else {
            os << r.avg_kl;
        }
        os << "," << r.skipped << "," << r.train_seconds << "\n";
    }
    return os.str();
}

std::string results_json(std::span<const CellResult> rows) {
    json jrows = json::array();
    for (const auto& r : rows) {
        jrows.push_back({{"algorithm", r.algorithm},
                         {"N", r.n},
                         {"seed", std::to_string(r.seed)},
                         {"avg_kl", r.failed ? json() : json(r.avg_kl)},
                         {"skipped", r.skipped},
                         {"train_seconds", r.train_seconds},
                         {"failed", r.failed},
                         {"error", r.error}});
    }
    // Two-panel summary: average quality and training time per (algorithm, N).
    std::map<std::pair<std::string, std::int64_t>, std::pair<double, int>> kl_acc;
    std::map<std::pair<std::string, std::int64_t>, std::pair<double, int>> time_acc;
    for (const auto& r : rows) {
        if (r.failed) continue;
        auto& k = kl_acc[{r.algorithm, r.n}];
        k.first += r.avg_kl;
        k.second += 1;
        auto& t = time_acc[{r.algorithm, r.n}];
        t.first += r.train_seconds;
        t.second += 1;
    }
    json quality = json::array();
    for (const auto& [key, acc] : kl_acc) {
        quality.push_back({{"algorithm", key.first}, {"N", key.second}, {"avg_kl", acc.first / acc.second}});
    }
    json time_panel = json::array();
    for (const auto& [key, acc] : time_acc) {
        time_panel.push_back(
            {{"algorithm", key.first}, {"N", key.second}, {"train_seconds", acc.first / acc.second}});
    }
    return json{{"rows", jrows}, {"panels", {{"quality", quality}, {"time", time_panel}}}}.dump(2);
}

}  // namespace pbp
