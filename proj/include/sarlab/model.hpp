#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarlab/geom.hpp"
#include "sarlab/nn/graph.hpp"
#include "sarlab/nn/tensor.hpp"
#include "sarlab/rng.hpp"

namespace sarlab {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

// Maps an aspect angle in [0, 2 pi) to one of the pose head's bins.
inline int pose_bin(double theta, int bins = 180) {
    const double w = wrap_angle(theta);
    int b = static_cast<int>(w / kTwoPi * bins);
    if (b >= bins) b = bins - 1;  // guards the wrap_angle(2 pi - eps) edge
    return b;
}

// Feature extractor + classifier head + optional pose head.
//
// Features: five conv/ReLU stages C(16,20,1,0) C(32,3,2,1) C(64,3,2,1)
// C(128,3,2,1) C(256,3,2,1) followed by a global average pool, taking a
// 1 x 160 x 160 image through 16x141x141, 32x71x71, 64x36x36,
// 128x18x18, 256x9x9 to a 256-vector. Each head is L(64)+ReLU followed
// by a linear layer to 4 classes or 180 pose bins.
template <typename T>
class AtrModel {
public:
    static constexpr int kInputSize = 160;
    static constexpr int kFeatureDim = 256;
    static constexpr int kNumClasses = 4;
    static constexpr int kPoseBins = 180;
    static constexpr int kHeadHidden = 64;

    AtrModel() = default;

    AtrModel(bool with_pose_head, Rng& rng) {
        const int channels[] = {1, 16, 32, 64, 128, 256};
        const nn::ConvSpec specs[] = {
            {16, 20, 1, 0}, {32, 3, 2, 1}, {64, 3, 2, 1}, {128, 3, 2, 1}, {256, 3, 2, 1}};
        for (int i = 0; i < 5; ++i) {
            ConvLayer layer;
            layer.spec = specs[i];
            const std::size_t cin = channels[i];
            const std::size_t k = specs[i].kernel;
            layer.weight = init_tensor({std::size_t(specs[i].out_channels), cin, k, k}, cin * k * k, rng,
                                       "features.conv" + std::to_string(i) + ".weight");
            if (i == 0) {
                // center each first-layer filter: log-magnitude images
                // carry a large flat background level, and a DC-blind
                // first layer starts from the target structure instead
                const std::size_t filt = cin * k * k;
                for (int c = 0; c < specs[i].out_channels; ++c) {
                    T* w = layer.weight.data() + std::size_t(c) * filt;
                    T mean = 0;
                    for (std::size_t j = 0; j < filt; ++j) mean += w[j];
                    mean /= static_cast<T>(filt);
                    for (std::size_t j = 0; j < filt; ++j) w[j] -= mean;
                }
            }
            layer.bias = zero_tensor({std::size_t(specs[i].out_channels)},
                                     "features.conv" + std::to_string(i) + ".bias");
            convs_.push_back(layer);
        }
        init_head(classifier_, kNumClasses, "classifier", rng);
        if (with_pose_head) {
            pose_ = Head{};
            init_head(*pose_, kPoseBins, "pose", rng);
        }
    }

    bool has_pose_head() const { return pose_.has_value(); }
    int num_classes() const { return kNumClasses; }

    // Deep copy with fresh parameter storages (values copied, gradients
    // independent); workers accumulate into clones during training.
    AtrModel clone() const {
        Rng dummy(0);
        AtrModel out(has_pose_head(), dummy);
        const auto src = parameters();
        auto dst = out.parameters();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i].values() = src[i].values();
        return out;
    }

    // --- forward pieces ---------------------------------------------------

    nn::Tensor<T> features(nn::Graph<T>& g, nn::Tensor<T> image) const {
        if (image.shape() != std::vector<std::size_t>{1, kInputSize, kInputSize})
            throw std::invalid_argument("model: input must be 1 x 160 x 160");
        nn::Tensor<T> x = image;
        for (const ConvLayer& layer : convs_) x = g.relu(g.conv2d(x, layer.weight, layer.bias, layer.spec));
        return g.global_avg_pool(x);
    }

    nn::Tensor<T> class_logits(nn::Graph<T>& g, nn::Tensor<T> h) const {
        return head_logits(g, classifier_, h);
    }

    nn::Tensor<T> pose_logits(nn::Graph<T>& g, nn::Tensor<T> h) const {
        if (!pose_) throw std::logic_error("model: no pose head");
        return head_logits(g, *pose_, h);
    }

    // classifier interface used by the attacks
    nn::Tensor<T> forward_logits(nn::Graph<T>& g, nn::Tensor<T> image) const {
        return class_logits(g, features(g, image));
    }

    std::vector<std::size_t> input_shape() const { return {1, kInputSize, kInputSize}; }

    // plain inference: class probabilities without gradient tracking
    std::vector<T> predict_probs(std::span<const T> image) const {
        nn::Graph<T> g(false);
        nn::Tensor<T> x = g.input(input_shape(), image);
        nn::Tensor<T> probs = g.softmax(forward_logits(g, x));
        return probs.values();
    }

    int predict_class(std::span<const T> image) const {
        const std::vector<T> p = predict_probs(image);
        return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }

    std::vector<T> predict_pose_probs(std::span<const T> image) const {
        nn::Graph<T> g(false);
        nn::Tensor<T> x = g.input(input_shape(), image);
        nn::Tensor<T> probs = g.softmax(pose_logits(g, features(g, x)));
        return probs.values();
    }

    // --- parameters ---------------------------------------------------------

    std::vector<nn::Tensor<T>> parameters() const {
        std::vector<nn::Tensor<T>> out;
        for (const ConvLayer& l : convs_) {
            out.push_back(l.weight);
            out.push_back(l.bias);
        }
        append_head(out, classifier_);
        if (pose_) append_head(out, *pose_);
        return out;
    }

    std::vector<nn::Tensor<T>> feature_parameters() const {
        std::vector<nn::Tensor<T>> out;
        for (const ConvLayer& l : convs_) {
            out.push_back(l.weight);
            out.push_back(l.bias);
        }
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.size();
        return n;
    }

    std::size_t feature_parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : feature_parameters()) n += p.size();
        return n;
    }

    // --- checkpoints ----------------------------------------------------------
    //
    // Self-describing container: magic, JSON header listing tensor
    // names/roles/shapes and the architecture, then raw float32
    // little-endian values in header order.

    void save(const std::filesystem::path& path) const {
        nlohmann::json header;
        header["format"] = 1;
        header["input_size"] = kInputSize;
        header["num_classes"] = kNumClasses;
        header["pose_bins"] = kPoseBins;
        header["has_pose_head"] = has_pose_head();
        nlohmann::json tensors = nlohmann::json::array();
        const auto params = parameters();
        for (const auto& p : params) {
            nlohmann::json t;
            t["name"] = p.name();
            t["role"] = role_of(p.name());
            t["shape"] = p.shape();
            tensors.push_back(t);
        }
        header["tensors"] = tensors;
        const std::string hs = header.dump();

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
        out.write(kMagic, 8);
        const std::uint64_t len = hs.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        std::vector<float> buf;
        for (const auto& p : params) {
            buf.assign(p.values().begin(), p.values().end());
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
        if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
    }

    static AtrModel load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
        char magic[8];
        in.read(magic, 8);
        if (!in || std::string(magic, 8) != kMagic)
            throw std::runtime_error("checkpoint: bad magic in " + path.string());
        std::uint64_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string hs(len, '\0');
        in.read(hs.data(), static_cast<std::streamsize>(len));
        const nlohmann::json header = nlohmann::json::parse(hs);
        if (header.at("input_size") != kInputSize || header.at("num_classes") != kNumClasses)
            throw std::runtime_error("checkpoint: architecture mismatch");

        Rng dummy(0);
        AtrModel model(header.at("has_pose_head").get<bool>(), dummy);
        auto params = model.parameters();
        const auto& tensors = header.at("tensors");
        if (tensors.size() != params.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
        std::vector<float> buf;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
            if (shape != params[i].shape()) throw std::runtime_error("checkpoint: tensor shape mismatch");
            buf.resize(params[i].size());
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size() * sizeof(float)));
            if (!in) throw std::runtime_error("checkpoint: truncated data in " + path.string());
            for (std::size_t j = 0; j < buf.size(); ++j) params[i].data()[j] = static_cast<T>(buf[j]);
        }
        return model;
    }

private:
    struct ConvLayer {
        nn::Tensor<T> weight, bias;
        nn::ConvSpec spec;
    };
    struct Head {
        nn::Tensor<T> w1, b1, w2, b2;
    };

    static constexpr const char* kMagic = "SARLABCK";

    static std::string role_of(const std::string& name) {
        if (name.rfind("features.", 0) == 0) return "feature";
        if (name.rfind("pose.", 0) == 0) return "pose";
        return "classifier";
    }

    static nn::Tensor<T> zero_tensor(std::vector<std::size_t> shape, std::string name) {
        nn::Tensor<T> t = nn::Tensor<T>::zeros(std::move(shape));
        t.mark_parameter(std::move(name));
        return t;
    }

    static nn::Tensor<T> init_tensor(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng,
                                     std::string name) {
        nn::Tensor<T> t = nn::Tensor<T>::zeros(std::move(shape));
        // uniform scaled by receptive-field fan-in, with the ReLU gain
        // so activation variance is preserved through the stack
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
        t.mark_parameter(std::move(name));
        return t;
    }

    void init_head(Head& head, int out_dim, const std::string& prefix, Rng& rng) {
        head.w1 = init_tensor({kHeadHidden, kFeatureDim}, kFeatureDim, rng, prefix + ".linear1.weight");
        head.b1 = zero_tensor({kHeadHidden}, prefix + ".linear1.bias");
        head.w2 = init_tensor({std::size_t(out_dim), kHeadHidden}, kHeadHidden, rng, prefix + ".linear2.weight");
        head.b2 = zero_tensor({std::size_t(out_dim)}, prefix + ".linear2.bias");
    }

    nn::Tensor<T> head_logits(nn::Graph<T>& g, const Head& head, nn::Tensor<T> h) const {
        return g.linear(g.relu(g.linear(h, head.w1, head.b1)), head.w2, head.b2);
    }

    static void append_head(std::vector<nn::Tensor<T>>& out, const Head& head) {
        out.push_back(head.w1);
        out.push_back(head.b1);
        out.push_back(head.w2);
        out.push_back(head.b2);
    }

    std::vector<ConvLayer> convs_;
    Head classifier_;
    std::optional<Head> pose_;
};

}  // namespace sarlab
