#include "spheres/checkpoint.hpp"

#include "spheres/error.hpp"

#include <fstream>
#include <vector>

namespace spheres {

using nlohmann::json;

namespace {

json to_array(const double* data, Eigen::Index count) { return std::vector<double>(data, data + count); }

Vector vector_from(const json& j, Eigen::Index expected, const char* what) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != expected) {
        throw FormatError(std::string("checkpoint: field '") + what + "' has " + std::to_string(values.size()) +
                          " entries, expected " + std::to_string(expected));
    }
    return Eigen::Map<const Vector>(values.data(), expected);
}

Matrix matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
    const Vector flat = vector_from(j, rows * cols, what);
    return Eigen::Map<const Matrix>(flat.data(), rows, cols);
}

}  // namespace

json checkpoint_to_json(const Model& model, const SphereConfig& config, std::uint64_t step, const json& meta) {
    json doc;
    doc["format"] = "spheres.checkpoint";
    doc["version"] = kCheckpointVersion;
    doc["family"] = to_string(model.family());
    doc["config"] = {{"n", config.n}, {"radius", config.radius}, {"seed", config.seed}};
    doc["step"] = step;
    doc["meta"] = meta;
    if (const auto* quad = dynamic_cast<const QuadraticModel*>(&model)) {
        const QuadraticNet& net = quad->net();
        doc["quadratic"] = {{"n", net.input_dim()},
                            {"hidden", net.hidden()},
                            {"w1", to_array(net.w1.data(), net.w1.size())},
                            {"w", net.w},
                            {"b", net.b}};
    } else if (const auto* mlp = dynamic_cast<const MlpModel*>(&model)) {
        const MlpNet& net = mlp->net();
        json layers = json::array();
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            const BatchNormParams& bn = net.norms[l];
            layers.push_back({{"weight", to_array(net.weights[l].data(), net.weights[l].size())},
                              {"gamma", to_array(bn.gamma.data(), bn.gamma.size())},
                              {"beta", to_array(bn.beta.data(), bn.beta.size())},
                              {"running_mean", to_array(bn.running_mean.data(), bn.running_mean.size())},
                              {"running_var", to_array(bn.running_var.data(), bn.running_var.size())}});
        }
        doc["mlp"] = {{"n", net.input_dim},
                      {"hidden", net.hidden},
                      {"momentum", net.momentum},
                      {"epsilon", net.epsilon},
                      {"layers", std::move(layers)},
                      {"readout", {{"weight", to_array(net.readout.data(), net.readout.size())},
                                   {"bias", net.readout_bias}}}};
    } else {
        throw Error("checkpoint_to_json: unknown model type");
    }
    return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "spheres.checkpoint") {
            throw FormatError("checkpoint: not a spheres checkpoint");
        }
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError("checkpoint: unsupported version " + std::to_string(version));
        }
        Checkpoint out;
        const json& cfg = doc.at("config");
        out.config.n = cfg.at("n").get<std::size_t>();
        out.config.radius = cfg.at("radius").get<double>();
        out.config.seed = cfg.at("seed").get<std::uint64_t>();
        out.step = doc.value("step", std::uint64_t{0});
        out.meta = doc.value("meta", json::object());

        const Family family = family_from_string(doc.at("family").get<std::string>());
        if (family == Family::Quadratic) {
            const json& q = doc.at("quadratic");
            QuadraticNet net;
            const auto n = q.at("n").get<Eigen::Index>();
            const auto h = q.at("hidden").get<Eigen::Index>();
            net.w1 = matrix_from(q.at("w1"), h, n, "w1");
            net.w = q.at("w").get<double>();
            net.b = q.at("b").get<double>();
            out.model = std::make_unique<QuadraticModel>(std::move(net));
        } else {
            const json& m = doc.at("mlp");
            MlpNet net;
            net.input_dim = m.at("n").get<std::size_t>();
            net.hidden = m.at("hidden").get<std::vector<std::size_t>>();
            net.momentum = m.at("momentum").get<double>();
            net.epsilon = m.at("epsilon").get<double>();
            const json& layers = m.at("layers");
            if (layers.size() != net.hidden.size()) throw FormatError("checkpoint: layer count mismatch");
            auto fan_in = static_cast<Eigen::Index>(net.input_dim);
            for (std::size_t l = 0; l < net.hidden.size(); ++l) {
                const auto width = static_cast<Eigen::Index>(net.hidden[l]);
                const json& layer = layers[l];
                net.weights.push_back(matrix_from(layer.at("weight"), width, fan_in, "weight"));
                BatchNormParams bn{vector_from(layer.at("gamma"), width, "gamma"),
                                   vector_from(layer.at("beta"), width, "beta"),
                                   vector_from(layer.at("running_mean"), width, "running_mean"),
                                   vector_from(layer.at("running_var"), width, "running_var")};
                if ((bn.running_var.array() <= 0.0).any()) {
                    throw FormatError("checkpoint: running variances must be positive");
                }
                net.norms.push_back(std::move(bn));
                fan_in = width;
            }
            net.readout = vector_from(m.at("readout").at("weight"), fan_in, "readout.weight");
            net.readout_bias = m.at("readout").at("bias").get<double>();
            out.model = std::make_unique<MlpModel>(std::move(net));
        }
        return out;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed document: ") + e.what());
    } catch (const DomainError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const SphereConfig& config,
                     std::uint64_t step, const json& meta) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("checkpoint: cannot write " + path.string());
    os << checkpoint_to_json(model, config, step, meta).dump() << '\n';
    if (!os) throw FormatError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("checkpoint: cannot open " + path.string());
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint: " + path.string() + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(doc);
}

}  // namespace spheres
