// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "glcanet/optim.hpp"

namespace glcanet {

inline constexpr const char* kCheckpointFormat = "glcanet-checkpoint";
inline constexpr int kCheckpointVersion = 1;

template <class T>
struct Checkpoint {
    ModelConfig model;
    AdamConfig adam;
    ModelParams<T> params;
    AdamState<T> state;
};

template <class T>
nlohmann::json checkpoint_to_json(const ModelConfig& model, const AdamConfig& adam, ModelParams<T>& params,
                                  const AdamState<T>& state) {
    nlohmann::json tensors = nlohmann::json::array();
    const auto named = params.named();
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& t = *named[i].tensor;
        nlohmann::json entry = {{"name", named[i].name},
                                {"shape", t.shape()},
                                {"data", std::vector<T>(t.data().begin(), t.data().end())}};
        if (i < state.m.size()) {
            entry["adam_m"] = state.m[i];
            entry["adam_v"] = state.v[i];
        }
        tensors.push_back(std::move(entry));
    }
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"config", to_json(model)},
            {"optimizer",
             {{"step", state.step},
              {"lr_global", adam.lr_global},
              {"lr_local", adam.lr_local},
              {"beta1", adam.beta1},
              {"beta2", adam.beta2},
              {"eps", adam.eps}}},
            {"params", tensors}};
}

/// Rebuilds a checkpoint. Parameter names, order and shapes must match what
/// the stored config produces; anything else is a DataError.
template <class T>
Checkpoint<T> checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw DataError("not a glcanet checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw DataError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
        }
        Checkpoint<T> ck;
        ck.model = model_config_from_json(j.at("config"));
        ck.model.validate();
        const auto& o = j.at("optimizer");
        ck.adam.lr_global = o.at("lr_global").get<double>();
        ck.adam.lr_local = o.at("lr_local").get<double>();
        ck.adam.beta1 = o.at("beta1").get<double>();
        ck.adam.beta2 = o.at("beta2").get<double>();
        ck.adam.eps = o.at("eps").get<double>();
        ck.state.step = o.at("step").get<std::uint64_t>();

        Rng unused(0);
        ck.params = ModelParams<T>::init(ck.model, unused);
        auto named = ck.params.named();
        const auto& stored = j.at("params");
        if (stored.size() != named.size()) {
            throw DataError("checkpoint has " + std::to_string(stored.size()) + " tensors, config expects "
                            + std::to_string(named.size()));
        }
        for (std::size_t i = 0; i < named.size(); ++i) {
            const auto& e = stored[i];
            const auto name = e.at("name").get<std::string>();
            if (name != named[i].name) throw DataError("checkpoint tensor " + name + " where " + named[i].name + " expected");
            const auto shape = e.at("shape").get<Shape>();
            if (shape != named[i].tensor->shape()) {
                throw DataError("checkpoint tensor " + name + " has shape " + shape_str(shape) + ", expected "
                                + shape_str(named[i].tensor->shape()));
            }
            const auto data = e.at("data").get<std::vector<T>>();
            *named[i].tensor = Tensor<T>(shape, std::span<const T>(data));
            const std::size_t n = named[i].tensor->numel();
            auto moment = [&](const char* key) {
                auto values = e.contains(key) ? e.at(key).get<std::vector<T>>() : std::vector<T>(n, T(0));
                if (values.size() != n) throw DataError(std::string("checkpoint ") + key + " size mismatch for " + name);
                return values;
            };
            ck.state.m.push_back(moment("adam_m"));
            ck.state.v.push_back(moment("adam_v"));
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint config invalid: ") + e.what());
    }
}

template <class T>
void save_checkpoint(const std::string& path, const ModelConfig& model, const AdamConfig& adam, ModelParams<T>& params,
                     const AdamState<T>& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out << checkpoint_to_json(model, adam, params, state).dump() << '\n';
    if (!out) throw DataError("failed writing checkpoint " + path);
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json<T>(j);
}

} // namespace glcanet
