#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbp/em.hpp"
#include "pbp/exact.hpp"
#include "pbp/learn.hpp"
#include "pbp/model.hpp"

namespace pbp {

// KL(p_exact || q_estimated): sum p log(p/q) with 0 log 0 = 0 and q floored
// at 1e-12 before the ratio.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Built-in benchmark structures addressable from the CLI. "fig4" is a
// 14-variable directed model with 6 latent and 8 observable variables.
ModelStructure preset_structure(const std::string& name, int cardinality = 2);

struct QuerySpec {
    int query = -1;
    std::vector<int> evidence_vars;
};

struct KlSummary {
    double avg_kl = 0.0;
    int evaluated = 0;
    int skipped = 0;  // zero-probability evidence realizations
};

// Posterior estimate for one evidence realization; an empty vector means the
// estimator signalled zero evidence (scored against the floored KL).
using PosteriorEstimator = std::function<std::vector<double>(const EvidenceMap&)>;

// Averages KL(exact || estimated) of the query posterior over every joint
// realization of the evidence variables, skipping realizations the true model
// gives probability zero.
KlSummary average_query_kl(const ExactInference& exact, const GraphicalModel& model,
                           const QuerySpec& spec, const PosteriorEstimator& estimator);

struct ExperimentSpec {
    std::string model_file;
    std::vector<std::int64_t> sizes;        // positive, ascending
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> algorithms;    // subset of {"pbp", "em"}
    std::string query_name;
    std::vector<std::string> evidence_names;
    RegressionConfig regression;
    std::int64_t beta_cap = 1024;
    EMConfig em;
    std::string out_csv;
    std::string out_json;
};

ExperimentSpec experiment_spec_from_json(const std::string& text);

struct CellResult {
    std::string algorithm;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    double avg_kl = 0.0;
    int skipped = 0;
    double train_seconds = 0.0;
    bool failed = false;
    std::string error;
};

// One (algorithm, N, seed) sweep over the grid. Datasets are shared between
// algorithms within a cell; failures are recorded per row and the sweep
// continues.
std::vector<CellResult> run_experiment(const ExperimentSpec& spec, const GraphicalModel& model);

// Per-N EM training cost and inference quality, measured over all restarts
// combined and evaluated with the same KL protocol as the main sweep.
std::vector<CellResult> em_wallclock_and_quality(const GraphicalModel& model, const QuerySpec& query,
                                                 const std::vector<std::int64_t>& sizes,
                                                 std::uint64_t seed, const EMConfig& config);

std::string results_csv(std::span<const CellResult> rows);
// Rows plus the two-panel summary (quality and training time per N).
std::string results_json(std::span<const CellResult> rows);

}  // namespace pbp
