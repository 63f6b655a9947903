// SPDX-License-Identifier: Apache-2.0
#include "snnconv/netspec.hpp"

#include "snnconv/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace snnconv {

static_assert(std::endian::native == std::endian::little,
              "weight blobs are little-endian float32; big-endian hosts need byte swapping");

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<float> read_f32_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("netspec", "cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (bytes % sizeof(float) != 0) {
        throw InputError("netspec", path.string() + ": size " + std::to_string(bytes) +
                                        " is not a multiple of 4 bytes");
    }
    std::vector<float> data(bytes / sizeof(float));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    return data;
}

void write_f32_file(const fs::path& path, std::span<const float> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("netspec", "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size_bytes()));
}

namespace {

json read_json(const fs::path& path, const std::string& module) {
    std::ifstream in(path);
    if (!in) {
        throw InputError(module, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(module, "malformed JSON in " + path.string() + ": " + e.what());
    }
}

// Sequential reader over the weight blob; reports shortfalls against the layer being read.
class BlobCursor {
public:
    explicit BlobCursor(std::vector<float> data) : data_(std::move(data)) {}

    std::vector<float> take(std::size_t n, std::size_t layer) {
        if (remaining() < n) {
            throw InputError("netspec", "weight blob length mismatch at layer " + std::to_string(layer) +
                                            ": need " + std::to_string(n) + " floats, " +
                                            std::to_string(remaining()) + " remain");
        }
        std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                               data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::vector<float> data_;
    std::size_t pos_ = 0;
};

} // namespace

NetworkSpec load_model(const fs::path& manifest_path) {
    const json m = read_json(manifest_path, "netspec");
    NetworkSpec net;
    std::vector<float> blob_data;
    try {
        const auto& shape = m.at("input_shape");
        if (!shape.is_array() || shape.size() != 3) {
            throw InputError("netspec", "malformed manifest: input_shape must be [height, width, channels]");
        }
        net.input_shape = {shape[2].get<std::size_t>(), shape[0].get<std::size_t>(),
                           shape[1].get<std::size_t>()};
        net.alpha = m.value("alpha", 0.01f);

        const fs::path blob = manifest_path.parent_path() /
                              m.value("weights", manifest_path.stem().string() + ".bin");
        blob_data = read_f32_file(blob);

        const auto& layers = m.at("layers");
        if (!layers.is_array()) {
            throw InputError("netspec", "malformed manifest: layers must be an array");
        }
        BlobCursor cursor(std::move(blob_data));
        Shape3 in = net.input_shape;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const json& j = layers[i];
            LayerSpec L;
            L.kind = parse_layer_kind(j.at("kind").get<std::string>());
            L.out_channels = j.value("out_ch", std::size_t{0});
            L.kernel = j.value("kernel", std::size_t{1});
            L.stride = j.value("stride", std::size_t{1});
            L.padding = parse_padding(j.value("padding", std::string("valid")));
            L.activation = parse_activation(j.value(
                "activation", std::string(L.kind == LayerKind::maxpool2d ? "none" : "leaky_relu")));
            const bool has_bn = j.value("has_batchnorm", false);
            if (L.kind == LayerKind::maxpool2d && has_bn) {
                throw InputError("netspec", "layer " + std::to_string(i) + ": maxpool layers carry no batchnorm");
            }

            if (j.contains("in_ch")) {
                const auto declared = j.at("in_ch").get<std::size_t>();
                const std::size_t actual = L.kind == LayerKind::dense ? in.size() : in.channels;
                if (declared != actual && !(L.kind == LayerKind::dense && declared == in.channels)) {
                    throw InputError("netspec", "layer " + std::to_string(i) + ": in_ch " +
                                                    std::to_string(declared) +
                                                    " is incompatible with previous output " +
                                                    in.to_string());
                }
            }

            L.in_shape = in;
            if (L.has_weights()) {
                if (L.out_channels == 0) {
                    throw InputError("netspec", "layer " + std::to_string(i) + ": out_ch must be positive");
                }
                L.weights = cursor.take(L.weight_count(), i);
                L.bias = cursor.take(L.out_channels, i);
                if (has_bn) {
                    BatchNorm bn;
                    bn.gamma = cursor.take(L.out_channels, i);
                    bn.beta = cursor.take(L.out_channels, i);
                    bn.mean = cursor.take(L.out_channels, i);
                    bn.variance = cursor.take(L.out_channels, i);
                    bn.epsilon = j.value("bn_eps", 1e-3f);
                    L.batchnorm = std::move(bn);
                }
            }
            in = output_shape_for(L, in);
            if (in.size() == 0) {
                throw InputError("netspec", "layer " + std::to_string(i) + ": window " +
                                                std::to_string(L.kernel) + " does not fit input " +
                                                L.in_shape.to_string());
            }
            net.layers.push_back(std::move(L));
        }
        if (cursor.remaining() != 0) {
            throw InputError("netspec", "weight blob length mismatch at layer " +
                                            std::to_string(layers.empty() ? 0 : layers.size() - 1) +
                                            ": " + std::to_string(cursor.remaining()) +
                                            " trailing floats");
        }
    } catch (const json::exception& e) {
        throw InputError("netspec", "malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    net.resolve();
    return net;
}

void save_model(const NetworkSpec& net, const fs::path& manifest_path) {
    const std::string blob_name = manifest_path.stem().string() + ".bin";
    json m;
    m["input_shape"] = {net.input_shape.height, net.input_shape.width, net.input_shape.channels};
    m["alpha"] = net.alpha;
    m["weights"] = blob_name;
    m["layers"] = json::array();
    std::vector<float> blob;
    for (const LayerSpec& L : net.layers) {
        json j;
        j["kind"] = to_string(L.kind);
        j["in_ch"] = L.in_shape.channels;
        j["out_ch"] = L.out_channels;
        j["kernel"] = L.kernel;
        j["stride"] = L.stride;
        j["padding"] = to_string(L.padding);
        j["has_batchnorm"] = L.batchnorm.has_value();
        j["activation"] = to_string(L.activation);
        if (L.batchnorm) j["bn_eps"] = L.batchnorm->epsilon;
        m["layers"].push_back(j);

        blob.insert(blob.end(), L.weights.begin(), L.weights.end());
        blob.insert(blob.end(), L.bias.begin(), L.bias.end());
        if (L.batchnorm) {
            const BatchNorm& bn = *L.batchnorm;
            for (const auto* v : {&bn.gamma, &bn.beta, &bn.mean, &bn.variance}) {
                blob.insert(blob.end(), v->begin(), v->end());
            }
        }
    }
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) {
        throw InputError("netspec", "cannot write " + manifest_path.string());
    }
    out << m.dump(2) << '\n';
    write_f32_file(manifest_path.parent_path() / blob_name, blob);
}

Tensor load_input(const fs::path& path, const Shape3& shape) {
    std::vector<float> data = read_f32_file(path);
    if (data.size() != shape.size()) {
        throw InputError("netspec", path.string() + " holds " + std::to_string(data.size()) +
                                        " floats, expected " + std::to_string(shape.size()) +
                                        " for shape " + shape.to_string());
    }
    return Tensor({shape.channels, shape.height, shape.width}, std::move(data));
}

void save_input(const Tensor& t, const fs::path& path) { write_f32_file(path, t.data()); }

void write_activation_dump(const fs::path& dir, const std::vector<std::vector<Tensor>>& per_input) {
    fs::create_directories(dir);
    json index;
    index["inputs"] = per_input.size();
    index["tensors"] = json::array();
    std::vector<float> blob;
    for (std::size_t n = 0; n < per_input.size(); ++n) {
        for (std::size_t l = 0; l < per_input[n].size(); ++l) {
            const Tensor& t = per_input[n][l];
            index["tensors"].push_back(
                {{"input", n}, {"layer", l}, {"shape", t.shape()}, {"offset", blob.size()}, {"count", t.size()}});
            blob.insert(blob.end(), t.data().begin(), t.data().end());
        }
    }
    std::ofstream out(dir / "activations.json", std::ios::trunc);
    out << index.dump(2) << '\n';
    write_f32_file(dir / "activations.f32", blob);
}

std::vector<std::vector<Tensor>> read_activation_dump(const fs::path& dir) {
    const json index = read_json(dir / "activations.json", "netspec");
    const std::vector<float> blob = read_f32_file(dir / "activations.f32");
    std::vector<std::vector<Tensor>> result(index.at("inputs").get<std::size_t>());
    for (const json& e : index.at("tensors")) {
        const auto n = e.at("input").get<std::size_t>();
        const auto offset = e.at("offset").get<std::size_t>();
        const auto count = e.at("count").get<std::size_t>();
        if (n >= result.size() || offset + count > blob.size()) {
            throw InputError("netspec", "activation dump index out of range in " + dir.string());
        }
        std::vector<float> data(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                                blob.begin() + static_cast<std::ptrdiff_t>(offset + count));
        result[n].emplace_back(e.at("shape").get<std::vector<std::size_t>>(), std::move(data));
    }
    return result;
}

} // namespace snnconv
