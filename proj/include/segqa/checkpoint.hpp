#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "segqa/errors.hpp"
#include "segqa/model.hpp"
#include "segqa/nn.hpp"
#include "segqa/optim.hpp"

namespace segqa::nn {

// Checkpoint layout: magic "SEGC1", u64 little-endian JSON header length,
// the JSON header, then all tensors concatenated as little-endian float32.
// The header lists tensor names, shapes and element offsets, the model
// config, and optionally the optimizer state.

template <class T>
inline void save_checkpoint(const std::string& path, const SegErrorModel<T>& model,
                            ad::Optimizer<T>* optimizer = nullptr,
                            nlohmann::json extra_meta = {}) {
    nlohmann::json header;
    header["format"] = "SEGC1";
    header["dtype"] = "f32";
    header["variant"] = to_string(model.config().variant);
    header["config"] = model.config().to_json();
    for (auto& [key, val] : extra_meta.items()) header[key] = val;

    std::vector<float> payload;
    nlohmann::json tensors = nlohmann::json::array();
    auto add_tensor = [&](const std::string& name, const ad::Shape& shape,
                          const std::vector<T>& data) {
        nlohmann::json t;
        t["name"] = name;
        t["shape"] = shape;
        t["offset"] = payload.size();
        t["numel"] = data.size();
        tensors.push_back(t);
        for (T v : data) payload.push_back(float(v));
    };

    for (const auto& [name, tensor] : model.store().params())
        add_tensor(name, tensor.shape(), tensor.data());
    for (const auto& [name, tensor] : model.store().buffers())
        add_tensor("buffer." + name, tensor.shape(), tensor.data());

    if (optimizer) {
        nlohmann::json opt;
        opt["kind"] = optimizer->kind();
        opt["step_count"] = optimizer->step_count();
        opt["lr"] = double(optimizer->lr());
        for (auto& [sname, vec] : optimizer->state_buffers())
            add_tensor("optimizer." + sname, {int(vec->size())}, *vec);
        header["optimizer"] = opt;
    }
    header["tensors"] = tensors;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    std::string hj = header.dump();
    uint64_t hlen = hj.size();
    os.write("SEGC1", 5);
    os.write(reinterpret_cast<const char*>(&hlen), 8);
    os.write(hj.data(), std::streamsize(hj.size()));
    os.write(reinterpret_cast<const char*>(payload.data()),
             std::streamsize(payload.size() * sizeof(float)));
    if (!os) throw IoError("write failed: " + path);
}

struct CheckpointFile {
    nlohmann::json header;
    std::vector<float> payload;

    static CheckpointFile read(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot open: " + path);
        char magic[5];
        is.read(magic, 5);
        if (is.gcount() != 5 || std::memcmp(magic, "SEGC1", 5) != 0)
            throw IoError("not a checkpoint file: " + path);
        uint64_t hlen = 0;
        is.read(reinterpret_cast<char*>(&hlen), 8);
        if (is.gcount() != 8) throw IoError("truncated checkpoint header length");
        std::string hj(hlen, '\0');
        is.read(hj.data(), std::streamsize(hlen));
        if (uint64_t(is.gcount()) != hlen) throw IoError("truncated checkpoint header");

        CheckpointFile f;
        try {
            f.header = nlohmann::json::parse(hj);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed checkpoint header: " + std::string(e.what()));
        }
        std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                                std::istreambuf_iterator<char>());
        if (bytes.size() % sizeof(float) != 0) throw IoError("truncated checkpoint payload");
        f.payload.resize(bytes.size() / sizeof(float));
        std::memcpy(f.payload.data(), bytes.data(), bytes.size());
        return f;
    }

    const float* tensor_data(const std::string& name, int64_t expected_numel) const {
        for (const auto& t : header.at("tensors")) {
            if (t.at("name") != name) continue;
            if (int64_t(t.at("numel")) != expected_numel)
                throw ShapeMismatchError("checkpoint tensor " + name + " has " +
                                         std::to_string(int64_t(t.at("numel"))) +
                                         " elements, expected " + std::to_string(expected_numel));
            size_t off = t.at("offset");
            if (off + size_t(expected_numel) > payload.size())
                throw IoError("checkpoint payload too short for tensor " + name);
            return payload.data() + off;
        }
        throw IoError("checkpoint tensor not found: " + name);
    }

    bool has_tensor(const std::string& name) const {
        for (const auto& t : header.at("tensors"))
            if (t.at("name") == name) return true;
        return false;
    }
};

// Fills a model's parameters and buffers from a checkpoint. The model must
// have been built from the same config (shapes are verified).
template <class T>
inline void load_model_state(const CheckpointFile& ckpt, SegErrorModel<T>& model) {
    auto fill = [&](const std::string& name, Tensor<T>& tensor) {
        const float* src = ckpt.tensor_data(name, tensor.numel());
        auto& dst = tensor.data();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] = T(src[i]);
    };
    for (auto& [name, tensor] : const_cast<std::vector<std::pair<std::string, Tensor<T>>>&>(
             model.store().params()))
        fill(name, tensor);
    for (auto& [name, tensor] : const_cast<std::vector<std::pair<std::string, Tensor<T>>>&>(
             model.store().buffers()))
        fill("buffer." + name, tensor);
}

template <class T>
inline SegErrorModel<T> load_model(const CheckpointFile& ckpt) {
    ModelConfig cfg = ModelConfig::from_json(ckpt.header.at("config"));
    SegErrorModel<T> model(cfg);
    load_model_state(ckpt, model);
    return model;
}

template <class T>
inline void load_optimizer_state(const CheckpointFile& ckpt, ad::Optimizer<T>& opt) {
    if (!ckpt.header.contains("optimizer")) throw IoError("checkpoint has no optimizer state");
    const auto& oj = ckpt.header.at("optimizer");
    if (oj.at("kind") != opt.kind())
        throw IoError("optimizer kind mismatch: checkpoint has " + std::string(oj.at("kind")));
    for (auto& [sname, vec] : opt.state_buffers()) {
        const float* src = ckpt.tensor_data("optimizer." + sname, int64_t(vec->size()));
        for (size_t i = 0; i < vec->size(); ++i) (*vec)[i] = T(src[i]);
    }
    opt.set_lr(T(double(oj.at("lr"))));
    opt.set_step_count(int64_t(oj.at("step_count")));
}

}  // namespace segqa::nn
