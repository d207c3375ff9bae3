#include "pbp/serialize.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pbp/errors.hpp"

namespace pbp {

using nlohmann::json;

namespace {

json tensor_json(const NamedTensor& t) {
    json modes = json::array();
    for (const auto& m : t.modes()) {
        modes.push_back({{"label", m.label.str()}, {"extent", m.extent}});
    }
    json data = json::array();
    for (double v : t.data()) data.push_back(v);
    return json{{"modes", modes}, {"data", data}};
}

NamedTensor tensor_from(const json& j) {
    std::vector<Mode> modes;
    for (const auto& m : j.at("modes")) {
        modes.push_back({ModeLabel::parse(m.at("label").get<std::string>()), m.at("extent").get<std::int64_t>()});
    }
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    return NamedTensor(std::move(modes), std::move(data));
}

json metadata_json(const LearnMetadata& m) {
    return json{{"tree_hash", std::to_string(m.tree_hash)},
                {"seed", std::to_string(m.seed)},
                {"generator", m.generator},
                {"lambda1", m.lambda1},
                {"lambda2", m.lambda2},
                {"n", m.n},
                {"population", m.population},
                {"wallclock_seconds", m.wallclock_seconds},
                {"warnings", m.warnings}};
}

}  // namespace

std::string tensor_to_json(const NamedTensor& t) { return tensor_json(t).dump(); }

NamedTensor tensor_from_json(const std::string& text) {
    try {
        return tensor_from(json::parse(text));
    } catch (const json::exception& e) {
        throw validation_error(std::string("bad tensor JSON: ") + e.what());
    }
}

std::string model_to_json(const GraphicalModel& model, std::optional<SeedInfo> seed) {
    json vars = json::array();
    for (const auto& v : model.variables()) {
        vars.push_back({{"name", v.name},
                        {"cardinality", v.cardinality},
                        {"observable", v.role == Role::Observable}});
    }
    json edges = json::array();
    for (const auto& [p, c] : model.edges()) edges.push_back({p, c});
    json cpts = json::object();
    for (const auto& v : model.variables()) cpts[v.name] = model.cpt(v.id);
    json out{{"variables", vars}, {"edges", edges}, {"cpts", cpts}};
    if (seed.has_value()) {
        out["metadata"] = {{"seed", std::to_string(seed->seed)}, {"generator", seed->generator}};
    }
    return out.dump(2);
}

GraphicalModel model_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        std::vector<Variable> vars;
        int id = 0;
        for (const auto& v : j.at("variables")) {
            Variable var;
            var.id = id++;
            var.name = v.at("name").get<std::string>();
            var.cardinality = v.at("cardinality").get<int>();
            var.role = v.at("observable").get<bool>() ? Role::Observable : Role::Latent;
            vars.push_back(std::move(var));
        }
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw validation_error("bad edge entry");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        std::vector<std::vector<double>> cpts(vars.size());
        const auto& jc = j.at("cpts");
        for (const auto& v : vars) {
            if (!jc.contains(v.name)) throw validation_error("missing CPT for variable " + v.name);
            cpts[static_cast<std::size_t>(v.id)] = jc.at(v.name).get<std::vector<double>>();
        }
        return GraphicalModel(std::move(vars), std::move(edges), std::move(cpts));
    } catch (const json::exception& e) {
        throw validation_error(std::string("bad model JSON: ") + e.what());
    }
}

ModelStructure structure_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ModelStructure s;
        int id = 0;
        for (const auto& v : j.at("variables")) {
            Variable var;
            var.id = id++;
            var.name = v.at("name").get<std::string>();
            var.cardinality = v.at("cardinality").get<int>();
            var.role = v.at("observable").get<bool>() ? Role::Observable : Role::Latent;
            s.variables.push_back(std::move(var));
        }
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw validation_error("bad edge entry");
            s.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        return s;
    } catch (const json::exception& e) {
        throw validation_error(std::string("bad structure JSON: ") + e.what());
    }
}

std::string dataset_to_csv(const GraphicalModel& model, const Dataset& data) {
    std::ostringstream os;
    for (std::size_t i = 0; i < data.columns.size(); ++i) {
        if (i) os << ",";
        os << model.var(data.columns[i]).name;
    }
    os << "\n";
    for (const auto& row : data.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ",";
            os << row[i];
        }
        os << "\n";
    }
    return os.str();
}

Dataset dataset_from_csv(const GraphicalModel& model, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw validation_error("empty dataset CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Dataset ds;
    {
        std::istringstream header(line);
        std::string name;
        while (std::getline(header, name, ',')) ds.columns.push_back(model.id_of(name));
    }
    for (int c : ds.columns) {
        if (model.var(c).role != Role::Observable) {
            throw validation_error("dataset column " + model.var(c).name + " is not observable");
        }
    }
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row_stream(line);
        std::string cell;
        std::vector<int> row;
        while (std::getline(row_stream, cell, ',')) {
            try {
                row.push_back(std::stoi(cell));
            } catch (const std::exception&) {
                throw validation_error("bad dataset value: " + cell);
            }
        }
        if (row.size() != ds.columns.size()) throw validation_error("dataset row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i) {
            const auto& v = model.var(ds.columns[i]);
            if (row[i] < 0 || row[i] >= v.cardinality) {
                throw validation_error("dataset value out of range for " + v.name);
            }
        }
        ds.rows.push_back(std::move(row));
    }
    if (ds.rows.empty()) throw validation_error("dataset CSV has no rows");
    return ds;
}

std::string params_to_json(const LearnedParams& params) {
    json ops = json::array();
    for (const auto& op : params.operators) {
        ops.push_back({{"separator", op.separator}, {"tensor", tensor_json(op.w)}});
    }
    json out{{"format", "pbp-params-v1"},
             {"metadata", metadata_json(params.metadata)},
             {"root_tensor", tensor_json(params.root_tensor)},
             {"operators", ops}};
    return out.dump();
}

LearnedParams params_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "pbp-params-v1") throw validation_error("unknown params format");
        LearnedParams params;
        const auto& m = j.at("metadata");
        params.metadata.tree_hash = std::stoull(m.at("tree_hash").get<std::string>());
        params.metadata.seed = std::stoull(m.at("seed").get<std::string>());
        params.metadata.generator = m.at("generator").get<std::string>();
        params.metadata.lambda1 = m.at("lambda1").get<double>();
        params.metadata.lambda2 = m.at("lambda2").get<double>();
        params.metadata.n = m.at("n").get<std::int64_t>();
        params.metadata.population = m.at("population").get<bool>();
        params.metadata.wallclock_seconds = m.at("wallclock_seconds").get<double>();
        params.metadata.warnings = m.at("warnings").get<std::vector<std::string>>();
        params.root_tensor = tensor_from(j.at("root_tensor"));
        for (const auto& op : j.at("operators")) {
            params.operators.push_back({op.at("separator").get<int>(), tensor_from(op.at("tensor"))});
        }
        return params;
    } catch (const json::exception& e) {
        throw validation_error(std::string("bad params JSON: ") + e.what());
    }
}

std::string tree_to_json(const LatentJunctionTree& tree) {
    json vars = json::array();
    for (const auto& v : tree.variables()) {
        vars.push_back({{"id", v.id},
                        {"name", v.name},
                        {"cardinality", v.cardinality},
                        {"observable", v.role == Role::Observable}});
    }
    json cliques = json::array();
    for (const auto& c : tree.cliques()) {
        cliques.push_back({{"id", c.id}, {"members", c.members}, {"leaf", c.is_leaf}, {"delta", c.delta}});
    }
    json seps = json::array();
    for (const auto& s : tree.separators()) {
        seps.push_back({{"id", s.id},
                        {"members", s.members},
                        {"parent", s.parent_clique},
                        {"child", s.child_clique},
                        {"alpha", s.alpha},
                        {"beta", s.beta}});
    }
    json out{{"root", tree.root()},         {"cliques", cliques},
             {"separators", seps},          {"beta_cap", tree.beta_cap()},
             {"hash", std::to_string(tree.hash())}, {"variables", vars},
             {"warnings", tree.warnings()}};
    return out.dump(2);
}

std::string query_result_to_json(const GraphicalModel& model, const EvidenceMap& evidence,
                                 int query_var, const QueryResult& result, const LearnMetadata& meta) {
    json ev = json::object();
    for (const auto& [id, value] : evidence) ev[model.var(id).name] = value;
    json out{{"query", model.var(query_var).name},
             {"evidence", ev},
             {"posterior", result.posterior},
             {"evidence_probability", result.evidence_probability},
             {"clamped", result.clamped},
             {"zero_evidence", result.zero_evidence},
             {"metadata", metadata_json(meta)}};
    return out.dump(2);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot read file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write file " + path);
    out << content;
}

}  // namespace pbp
