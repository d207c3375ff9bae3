// pbp: generate models, sample datasets, learn the observable-only
// parametrization, answer posterior queries, and run KL evaluation sweeps.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pbp/errors.hpp"
#include "pbp/harness.hpp"
#include "pbp/infer.hpp"
#include "pbp/jtree.hpp"
#include "pbp/learn.hpp"
#include "pbp/model.hpp"
#include "pbp/rng.hpp"
#include "pbp/serialize.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

pbp::EvidenceMap parse_evidence(const pbp::GraphicalModel& model, const std::string& text) {
    pbp::EvidenceMap ev;
    if (text.empty()) return ev;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto comma = text.find(',', pos);
        const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw pbp::validation_error("bad evidence item: " + item);
        const std::string name = item.substr(0, eq);
        int value = 0;
        try {
            value = std::stoi(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw pbp::validation_error("bad evidence value in: " + item);
        }
        ev[model.id_of(name)] = value;
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return ev;
}

struct Options {
    std::string structure_file;
    std::string preset;
    int cardinality = 2;
    std::uint64_t seed = 0;
    std::string model_file;
    std::string data_file;
    std::string params_file;
    std::string spec_file;
    std::string evidence;
    std::string query;
    std::string out;
    std::string dump_tree;
    std::int64_t n = 0;
    double lambda1 = -1.0;
    double lambda2 = -1.0;
    std::int64_t beta_cap = pbp::kDefaultBetaCap;
};

int cmd_gen_model(const Options& opt) {
    pbp::ModelStructure structure;
    if (!opt.preset.empty()) {
        structure = pbp::preset_structure(opt.preset, opt.cardinality);
    } else if (!opt.structure_file.empty()) {
        structure = pbp::structure_from_json(pbp::read_file(opt.structure_file));
    } else {
        throw pbp::validation_error("gen-model needs --preset or --structure");
    }
    const auto model = pbp::random_model(structure, opt.seed);
    const auto text = pbp::model_to_json(model, pbp::SeedInfo{opt.seed, pbp::kGeneratorName});
    if (opt.out.empty()) {
        std::cout << text << "\n";
    } else {
        pbp::write_file(opt.out, text);
    }
    return 0;
}

int cmd_sample(const Options& opt) {
    const auto model = pbp::model_from_json(pbp::read_file(opt.model_file));
    const auto data = pbp::ancestral_sample(model, opt.n, opt.seed);
    const auto text = pbp::dataset_to_csv(model, data);
    if (opt.out.empty()) {
        std::cout << text;
    } else {
        pbp::write_file(opt.out, text);
    }
    return 0;
}

int cmd_learn(const Options& opt) {
    const auto model = pbp::model_from_json(pbp::read_file(opt.model_file));
    const auto data = pbp::dataset_from_csv(model, pbp::read_file(opt.data_file));
    const auto tree = pbp::LatentJunctionTree::from_model(model, opt.beta_cap);
    if (!opt.dump_tree.empty()) pbp::write_file(opt.dump_tree, pbp::tree_to_json(tree));
    pbp::RegressionConfig config;
    if (opt.lambda1 >= 0.0) config.lambda1 = opt.lambda1;
    if (opt.lambda2 >= 0.0) config.lambda2 = opt.lambda2;
    auto params = pbp::learn(tree, data, config);
    params.metadata.seed = opt.seed;
    params.metadata.generator = pbp::kGeneratorName;
    const auto text = pbp::params_to_json(params);
    if (opt.out.empty()) {
        std::cout << text << "\n";
    } else {
        pbp::write_file(opt.out, text);
    }
    return 0;
}

int cmd_infer(const Options& opt) {
    const auto model = pbp::model_from_json(pbp::read_file(opt.model_file));
    const auto params = pbp::params_from_json(pbp::read_file(opt.params_file));
    const auto tree = pbp::LatentJunctionTree::from_model(model, opt.beta_cap);
    if (!opt.dump_tree.empty()) pbp::write_file(opt.dump_tree, pbp::tree_to_json(tree));
    const pbp::PbpEngine engine(tree, params);  // refuses mismatched tree hashes
    const auto evidence = parse_evidence(model, opt.evidence);
    const int query = model.id_of(opt.query);
    const auto result = engine.query(evidence, query);
    const auto text = pbp::query_result_to_json(model, evidence, query, result, params.metadata);
    std::cout << text << "\n";
    if (!opt.out.empty()) pbp::write_file(opt.out, text);
    return result.zero_evidence ? kExitNumerical : 0;
}

int cmd_experiment(const Options& opt) {
    auto spec = pbp::experiment_spec_from_json(pbp::read_file(opt.spec_file));
    if (!opt.out.empty()) spec.out_csv = opt.out;
    const auto model = pbp::model_from_json(pbp::read_file(spec.model_file));
    const auto rows = pbp::run_experiment(spec, model);
    const auto csv = pbp::results_csv(rows);
    if (spec.out_csv.empty()) {
        std::cout << csv;
    } else {
        pbp::write_file(spec.out_csv, csv);
    }
    const std::string json_path =
        !spec.out_json.empty() ? spec.out_json : (spec.out_csv.empty() ? "" : spec.out_csv + ".json");
    if (!json_path.empty()) pbp::write_file(json_path, pbp::results_json(rows));
    for (const auto& r : rows) {
        if (r.failed) std::cerr << "cell failed: " << r.algorithm << " N=" << r.n << ": " << r.error << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive belief propagation for discrete latent-variable graphical models"};
    app.require_subcommand(1);
    Options opt;

    auto* gen = app.add_subcommand("gen-model", "Generate a model with random CPTs");
    gen->add_option("--preset", opt.preset, "Built-in structure (fig4)");
    gen->add_option("--structure", opt.structure_file, "Structure JSON file");
    gen->add_option("--cardinality", opt.cardinality, "State count for preset variables");
    gen->add_option("--seed", opt.seed, "RNG seed");
    gen->add_option("--out", opt.out, "Output model JSON path");

    auto* sample = app.add_subcommand("sample", "Draw i.i.d. observable rows from a model");
    sample->add_option("--model", opt.model_file, "Model JSON")->required();
    sample->add_option("--n", opt.n, "Sample count")->required();
    sample->add_option("--seed", opt.seed, "RNG seed");
    sample->add_option("--out", opt.out, "Output CSV path");

    auto* learn = app.add_subcommand("learn", "Two-stage regression over the latent junction tree");
    learn->add_option("--model", opt.model_file, "Model JSON (structure source)")->required();
    learn->add_option("--data", opt.data_file, "Training CSV")->required();
    learn->add_option("--lambda1", opt.lambda1, "Stage-1 ridge (default 1e-3*N)");
    learn->add_option("--lambda2", opt.lambda2, "Stage-2 ridge (default 1e-3*N)");
    learn->add_option("--beta-cap", opt.beta_cap, "Evidence-set cardinality cap");
    learn->add_option("--seed", opt.seed, "Dataset seed recorded in metadata");
    learn->add_option("--dump-tree", opt.dump_tree, "Write the junction tree JSON here");
    learn->add_option("--out", opt.out, "Output params JSON path");

    auto* infer = app.add_subcommand("infer", "Posterior query with learned parameters");
    infer->add_option("--params", opt.params_file, "Learned params JSON")->required();
    infer->add_option("--model", opt.model_file, "Model JSON (structure source)")->required();
    infer->add_option("--evidence", opt.evidence, "Comma list, e.g. G=1,H=0");
    infer->add_option("--query", opt.query, "Query variable name")->required();
    infer->add_option("--beta-cap", opt.beta_cap, "Evidence-set cardinality cap");
    infer->add_option("--dump-tree", opt.dump_tree, "Write the junction tree JSON here");
    infer->add_option("--out", opt.out, "Also write the result JSON here");

    auto* experiment = app.add_subcommand("experiment", "KL evaluation sweep over training sizes");
    experiment->add_option("--spec", opt.spec_file, "Experiment spec JSON")->required();
    experiment->add_option("--out", opt.out, "Override the CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_model(opt);
        if (sample->parsed()) return cmd_sample(opt);
        if (learn->parsed()) return cmd_learn(opt);
        if (infer->parsed()) return cmd_infer(opt);
        if (experiment->parsed()) return cmd_experiment(opt);
    } catch (const pbp::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const pbp::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
