// Self-describing binary checkpoint: magic + version, the encoder
// configuration as JSON, then named shape-tagged float32 tensors in
// row-major order. Loading rejects version or shape mismatches.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "absa/digest.hpp"
#include "absa/encoder.hpp"
#include "absa/error.hpp"

namespace absa {

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = {{"layers", c.layers},
         {"hidden", c.hidden},
         {"heads", c.heads},
         {"ffn_size", c.ffn_size},
         {"max_positions", c.max_positions},
         {"vocab_size", c.vocab_size},
         {"dropout_rate", c.dropout_rate},
         {"bypass_pooler", c.bypass_pooler},
         {"mask_refinement_80_10_10", c.mask_refinement_80_10_10}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
    j.at("layers").get_to(c.layers);
    j.at("hidden").get_to(c.hidden);
    j.at("heads").get_to(c.heads);
    j.at("ffn_size").get_to(c.ffn_size);
    j.at("max_positions").get_to(c.max_positions);
    j.at("vocab_size").get_to(c.vocab_size);
    j.at("dropout_rate").get_to(c.dropout_rate);
    c.bypass_pooler = j.value("bypass_pooler", false);
    c.mask_refinement_80_10_10 = j.value("mask_refinement_80_10_10", false);
}

struct NamedTensor {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;
};

struct Checkpoint {
    EncoderConfig config;
    nlohmann::json meta;  // full JSON header (encoder config + any head metadata)
    std::map<std::string, NamedTensor> tensors;
};

inline constexpr char kCheckpointMagic[8] = {'A', 'B', 'S', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) &
                                              0xffu);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    require(static_cast<bool>(in), "checkpoint: truncated file");
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    return static_cast<T>(value);
}

inline void write_f32_array(std::ostream& out, const float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        write_le<std::uint32_t>(out, bits);
    }
}

inline void read_f32_array(std::istream& in, float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = read_le<std::uint32_t>(in);
        std::memcpy(&data[i], &bits, 4);
    }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "checkpoint: cannot open '", path, "' for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    nlohmann::json meta = ckpt.meta;
    meta["encoder"] = ckpt.config;
    const std::string header = meta.dump();
    detail::write_le<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    detail::write_le<std::uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, tensor] : ckpt.tensors) {
        detail::write_le<std::uint64_t>(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dims.size()));
        std::uint64_t count = 1;
        for (auto d : tensor.dims) {
            detail::write_le<std::uint64_t>(out, d);
            count *= d;
        }
        require(count == tensor.data.size(), "checkpoint: tensor '", name, "' has ",
                tensor.data.size(), " values but shape implies ", count);
        detail::write_f32_array(out, tensor.data.data(), tensor.data.size());
    }
    require(out.good(), "checkpoint: write to '", path, "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "checkpoint: cannot open '", path, "'");
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    require(in.good() && std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
            "checkpoint: '", path, "' is not a checkpoint file");
    const auto version = detail::read_le<std::uint32_t>(in);
    require(version == kCheckpointVersion, "checkpoint: unsupported version ", version,
            " (expected ", kCheckpointVersion, ")");
    const auto header_size = detail::read_le<std::uint64_t>(in);
    std::string header(header_size, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_size));
    require(in.good(), "checkpoint: truncated header");
    Checkpoint ckpt;
    try {
        ckpt.meta = nlohmann::json::parse(header);
        ckpt.config = ckpt.meta.at("encoder").get<EncoderConfig>();
    } catch (const nlohmann::json::exception& e) {
        fail("checkpoint: bad config header: ", e.what());
    }
    const auto n_tensors = detail::read_le<std::uint64_t>(in);
    for (std::uint64_t t = 0; t < n_tensors; ++t) {
        const auto name_size = detail::read_le<std::uint64_t>(in);
        std::string name(name_size, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_size));
        require(in.good(), "checkpoint: truncated tensor name");
        NamedTensor tensor;
        const auto ndims = detail::read_le<std::uint32_t>(in);
        std::uint64_t count = 1;
        for (std::uint32_t d = 0; d < ndims; ++d) {
            tensor.dims.push_back(detail::read_le<std::uint64_t>(in));
            count *= tensor.dims.back();
        }
        tensor.data.resize(count);
        detail::read_f32_array(in, tensor.data.data(), count);
        ckpt.tensors.emplace(std::move(name), std::move(tensor));
    }
    return ckpt;
}

// ---- encoder params <-> checkpoint tensors ----

inline Checkpoint checkpoint_from_params(const EncoderParams& params,
                                         const EncoderConfig& config) {
    Checkpoint ckpt;
    ckpt.config = config;
    for_each_param(params, [&](const std::string& name, const auto& tensor) {
        NamedTensor t;
        using TensorType = std::decay_t<decltype(tensor)>;
        if constexpr (TensorType::ColsAtCompileTime == 1) {
            t.dims = {static_cast<std::uint64_t>(tensor.size())};
        } else {
            t.dims = {static_cast<std::uint64_t>(tensor.rows()),
                      static_cast<std::uint64_t>(tensor.cols())};
        }
        t.data.assign(tensor.data(), tensor.data() + tensor.size());
        ckpt.tensors.emplace(name, std::move(t));
    });
    return ckpt;
}

inline EncoderParams params_from_checkpoint(const Checkpoint& ckpt) {
    ckpt.config.validate();
    EncoderParams params = init_encoder_params<float>(ckpt.config, 0);
    for_each_param(params, [&](const std::string& name, auto& tensor) {
        auto it = ckpt.tensors.find(name);
        require(it != ckpt.tensors.end(), "checkpoint: missing tensor '", name, "'");
        const NamedTensor& t = it->second;
        using TensorType = std::decay_t<decltype(tensor)>;
        if constexpr (TensorType::ColsAtCompileTime == 1) {
            require(t.dims.size() == 1 &&
                        t.dims[0] == static_cast<std::uint64_t>(tensor.size()),
                    "checkpoint: tensor '", name, "' shape mismatch");
        } else {
            require(t.dims.size() == 2 &&
                        t.dims[0] == static_cast<std::uint64_t>(tensor.rows()) &&
                        t.dims[1] == static_cast<std::uint64_t>(tensor.cols()),
                    "checkpoint: tensor '", name, "' shape mismatch");
        }
        std::memcpy(tensor.data(), t.data.data(), t.data.size() * sizeof(float));
    });
    return params;
}

// SHA-256 over names, shapes, and raw scalar bytes in traversal order; the
// freeze-contract witness.
template <class S>
std::string params_fingerprint(const EncoderParamsT<S>& params) {
    Sha256 hash;
    for_each_param(params, [&](const std::string& name, const auto& tensor) {
        hash.update(name.data(), name.size());
        const std::uint64_t rows = static_cast<std::uint64_t>(tensor.rows());
        const std::uint64_t cols = static_cast<std::uint64_t>(tensor.cols());
        hash.update(&rows, sizeof(rows));
        hash.update(&cols, sizeof(cols));
        hash.update(tensor.data(), static_cast<std::size_t>(tensor.size()) * sizeof(S));
    });
    return hash.finish_hex();
}

}  // namespace absa
