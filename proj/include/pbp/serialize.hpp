#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pbp/infer.hpp"
#include "pbp/jtree.hpp"
#include "pbp/learn.hpp"
#include "pbp/model.hpp"
#include "pbp/tensor.hpp"

namespace pbp {

// Provenance block attached to generated files.
struct SeedInfo {
    std::uint64_t seed = 0;
    std::string generator;
};

// Tensor wire format: {"modes": [{"label": "...", "extent": n}], "data": [...]}
// with the data in row-major order of the mode list.
std::string tensor_to_json(const NamedTensor& t);
NamedTensor tensor_from_json(const std::string& text);

// Model file: variables, edges, and per-variable flattened CPTs whose parent
// axes follow the declared edge order.
std::string model_to_json(const GraphicalModel& model, std::optional<SeedInfo> seed = std::nullopt);
GraphicalModel model_from_json(const std::string& text);

// Structure file: a model file without the cpts block.
ModelStructure structure_from_json(const std::string& text);

// Dataset CSV: header row of observable names (declaration order), 0-based
// integer states.
std::string dataset_to_csv(const GraphicalModel& model, const Dataset& data);
Dataset dataset_from_csv(const GraphicalModel& model, const std::string& text);

std::string params_to_json(const LearnedParams& params);
LearnedParams params_from_json(const std::string& text);

// Debug dump of the junction tree (cliques, separators, root, alpha, beta).
std::string tree_to_json(const LatentJunctionTree& tree);

std::string query_result_to_json(const GraphicalModel& model, const EvidenceMap& evidence,
                                 int query_var, const QueryResult& result, const LearnMetadata& meta);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace pbp
