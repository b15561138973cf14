#include "permpoint/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "permpoint/errors.hpp"

namespace permpoint {

std::string checkpoint_to_json(const NetworkParams& net, const CheckpointMeta& meta) {
    net.validate();
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const Layer& layer : net.layers) {
        nlohmann::json jl;
        auto rows = nlohmann::json::array();
        for (std::size_t r = 0; r < layer.weights.rows; ++r) {
            auto row = nlohmann::json::array();
            for (std::size_t c = 0; c < layer.weights.cols; ++c)
                row.push_back(layer.weights.at(r, c));
            rows.push_back(std::move(row));
        }
        jl["weights"] = std::move(rows);
        jl["bias"] = layer.bias.entries;
        jl["activation"] = to_string(layer.activation);
        j["layers"].push_back(std::move(jl));
    }
    nlohmann::json m;
    if (meta.seed) m["seed"] = *meta.seed;
    if (!meta.note.empty()) m["note"] = meta.note;
    j["meta"] = std::move(m);
    return j.dump(2);
}

void save_checkpoint(const NetworkParams& net, const std::filesystem::path& path,
                     const CheckpointMeta& meta) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(net, meta) << "\n";
}

LoadedCheckpoint checkpoint_from_json(const std::string& text) {
    LoadedCheckpoint result;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint json: ") + e.what());
    }
    try {
        for (const auto& jl : j.at("layers")) {
            Layer layer;
            const auto& rows = jl.at("weights");
            layer.weights.rows = rows.size();
            layer.weights.cols = rows.empty() ? 0 : rows.front().size();
            for (const auto& row : rows) {
                if (row.size() != layer.weights.cols)
                    throw FormatError("checkpoint: ragged weight matrix");
                for (const auto& v : row)
                    layer.weights.entries.push_back(v.get<double>());
            }
            layer.bias.entries = jl.at("bias").get<std::vector<double>>();
            layer.activation = activation_from_string(jl.at("activation").get<std::string>());
            result.net.layers.push_back(std::move(layer));
        }
        if (j.contains("meta")) {
            const auto& m = j["meta"];
            if (m.contains("seed")) result.meta.seed = m["seed"].get<std::uint64_t>();
            if (m.contains("note")) result.meta.note = m["note"].get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint json: ") + e.what());
    }
    try {
        result.net.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return result;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_json(buf.str());
}

}  // namespace permpoint
