#pragma once

#include <cstdint>
#include <vector>

#include "pbp/model.hpp"

namespace pbp {

struct EMConfig {
    int restarts = 10;
    int max_iterations = 200;
    double tolerance = 1e-6;  // relative log-likelihood change
    std::uint64_t seed = 0;
};

struct EMResult {
    GraphicalModel model;                      // fitted CPTs of the best restart
    std::vector<std::vector<double>> traces;   // per restart: log-likelihood per iteration
    int best_restart = -1;
    double best_log_likelihood = 0.0;
    double wallclock_seconds = 0.0;            // all restarts combined
};

// Standard EM over a fixed structure: per restart, Dirichlet(1) CPT
// initialization from a split seed, exact-inference E-steps, row-normalized
// M-steps, iterated until the relative log-likelihood change falls under the
// tolerance. Returns the restart with the highest final log-likelihood.
EMResult em_learn(const ModelStructure& structure, const Dataset& data, const EMConfig& config);

}  // namespace pbp
