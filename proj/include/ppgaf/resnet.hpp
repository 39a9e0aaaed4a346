// ============================================================================
// 1-D residual classifier. Presets:
//   TINY: 4 residual blocks, widths 8-16-32-64 (the desk-scale workhorse)
//   R18 / R34: conventional stage layouts at widths 64-128-256-512
// Stem is a kernel-7 stride-2 convolution followed by a 3/2 max pool; blocks
// use kernel-3 convolutions with stride-2 stage transitions and projection
// shortcuts. The latent map F(x) is the global-average-pooled output of the
// last block; the head maps it to 2 logits.
// ============================================================================

#pragma once
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgaf/layers.hpp"

namespace ppgaf {

struct ArchSpec {
    std::string preset = "TINY";  // TINY | R18 | R34 | R101 (spec only)
    bool use_batchnorm = true;
    size_t num_classes = 2;

    std::vector<size_t> widths;        // per stage
    std::vector<size_t> blocks;        // residual blocks per stage
    size_t stem_width = 0;

    static ArchSpec make(const std::string& preset, bool use_batchnorm = true) {
        ArchSpec s;
        s.preset = preset;
        s.use_batchnorm = use_batchnorm;
        if (preset == "TINY") {
            s.widths = {8, 16, 32, 64};
            s.blocks = {1, 1, 1, 1};
            s.stem_width = 8;
        } else if (preset == "R18") {
            s.widths = {64, 128, 256, 512};
            s.blocks = {2, 2, 2, 2};
            s.stem_width = 64;
        } else if (preset == "R34") {
            s.widths = {64, 128, 256, 512};
            s.blocks = {3, 4, 6, 3};
            s.stem_width = 64;
        } else if (preset == "R101") {
            // architecture spec only; not an acceptance target
            s.widths = {64, 128, 256, 512};
            s.blocks = {3, 4, 23, 3};
            s.stem_width = 64;
        } else {
            throw ConfigError("unknown model preset: " + preset);
        }
        return s;
    }

    size_t latent_dim() const { return widths.back(); }

    nlohmann::json to_json() const {
        return {{"preset", preset}, {"use_batchnorm", use_batchnorm}, {"num_classes", num_classes}};
    }

    static ArchSpec from_json(const nlohmann::json& j) {
        ArchSpec s = make(j.at("preset").get<std::string>(), j.at("use_batchnorm").get<bool>());
        s.num_classes = j.at("num_classes").get<size_t>();
        return s;
    }
};

template <typename T>
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(size_t in_ch, size_t out_ch, size_t stride, bool use_bn)
        : use_bn_(use_bn), downsample_(stride != 1 || in_ch != out_ch) {
        conv1_ = Conv1d<T>(in_ch, out_ch, 3, stride, 1, /*bias=*/!use_bn);
        conv2_ = Conv1d<T>(out_ch, out_ch, 3, 1, 1, /*bias=*/!use_bn);
        if (use_bn_) {
            bn1_.emplace(out_ch);
            bn2_.emplace(out_ch);
        }
        if (downsample_) {
            proj_ = Conv1d<T>(in_ch, out_ch, 1, stride, 0, /*bias=*/!use_bn);
            if (use_bn_) bn_proj_.emplace(out_ch);
        }
    }

    void init(Rng& rng) {
        conv1_.init_he(rng);
        conv2_.init_he(rng);
        if (proj_) proj_->init_he(rng);
    }

    size_t out_len(size_t lin) const { return conv1_.out_len(lin); }
    size_t out_ch() const { return conv2_.out_ch(); }

    std::vector<T> forward(const std::vector<T>& x, size_t B, size_t lin, bool train) {
        const size_t lout = out_len(lin);
        std::vector<T> h = conv1_.forward(x, B, lin, train);
        if (bn1_) h = bn1_->forward(h, B, lout, train);
        h = relu1_.forward(h, train);
        h = conv2_.forward(h, B, lout, train);
        if (bn2_) h = bn2_->forward(h, B, lout, train);

        std::vector<T> sc;
        if (downsample_) {
            sc = proj_->forward(x, B, lin, train);
            if (bn_proj_) sc = bn_proj_->forward(sc, B, lout, train);
        } else {
            sc = x;
        }
        for (size_t i = 0; i < h.size(); ++i) h[i] += sc[i];
        return relu2_.forward(h, train);
    }

    // Returns dx. Parameter gradients accumulate into the layers.
    std::vector<T> backward(const std::vector<T>& dy) {
        std::vector<T> d = relu2_.backward(dy);
        // d splits into the residual path and the shortcut
        std::vector<T> d_main = d;
        if (bn2_) d_main = bn2_->backward(d_main);
        d_main = conv2_.backward(d_main);
        d_main = relu1_.backward(d_main);
        if (bn1_) d_main = bn1_->backward(d_main);
        std::vector<T> dx = conv1_.backward(d_main);

        if (downsample_) {
            std::vector<T> d_sc = d;
            if (bn_proj_) d_sc = bn_proj_->backward(d_sc);
            d_sc = proj_->backward(d_sc);
            for (size_t i = 0; i < dx.size(); ++i) dx[i] += d_sc[i];
        } else {
            for (size_t i = 0; i < dx.size(); ++i) dx[i] += d[i];
        }
        return dx;
    }

    void zero_grad() {
        conv1_.zero_grad();
        conv2_.zero_grad();
        if (bn1_) bn1_->zero_grad();
        if (bn2_) bn2_->zero_grad();
        if (proj_) proj_->zero_grad();
        if (bn_proj_) bn_proj_->zero_grad();
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        conv1_.collect(prefix + ".conv1", out);
        if (bn1_) bn1_->collect(prefix + ".bn1", out);
        conv2_.collect(prefix + ".conv2", out);
        if (bn2_) bn2_->collect(prefix + ".bn2", out);
        if (proj_) proj_->collect(prefix + ".proj", out);
        if (bn_proj_) bn_proj_->collect(prefix + ".bn_proj", out);
    }

private:
    Conv1d<T> conv1_, conv2_;
    std::optional<BatchNorm1d<T>> bn1_, bn2_;
    std::optional<Conv1d<T>> proj_;
    std::optional<BatchNorm1d<T>> bn_proj_;
    ReLU<T> relu1_, relu2_;
    bool use_bn_ = true;
    bool downsample_ = false;
};

template <typename T>
struct ForwardOut {
    std::vector<T> logits;   // (B, num_classes)
    std::vector<T> latents;  // (B, latent_dim), global-average-pooled
};

template <typename T>
class Classifier {
public:
    Classifier() = default;
    explicit Classifier(const ArchSpec& spec) : spec_(spec) {
        stem_ = Conv1d<T>(1, spec.stem_width, 7, 2, 3, /*bias=*/!spec.use_batchnorm);
        if (spec.use_batchnorm) stem_bn_.emplace(spec.stem_width);
        pool_ = MaxPool1d<T>(3, 2, 1);
        size_t in_ch = spec.stem_width;
        for (size_t s = 0; s < spec.widths.size(); ++s) {
            for (size_t b = 0; b < spec.blocks[s]; ++b) {
                const size_t stride = (b == 0 && s > 0) ? 2 : 1;
                blocks_.emplace_back(in_ch, spec.widths[s], stride, spec.use_batchnorm);
                in_ch = spec.widths[s];
            }
        }
        head_ = Dense<T>(spec.latent_dim(), spec.num_classes);
    }

    void init(uint64_t seed) {
        Rng rng(derive_seed(seed, 0xC1A55));
        stem_.init_he(rng);
        for (auto& b : blocks_) b.init(rng);
        head_.init_he(rng);
    }

    const ArchSpec& spec() const { return spec_; }

    ForwardOut<T> forward(const std::vector<T>& x, size_t B, size_t L, bool train) {
        if (x.size() != B * L) throw ShapeError("classifier: expected (B, 1, L) input");
        std::vector<T> h = stem_.forward(x, B, L, train);
        size_t len = stem_.out_len(L);
        if (stem_bn_) h = stem_bn_->forward(h, B, len, train);
        h = stem_relu_.forward(h, train);
        h = pool_.forward(h, B, spec_.stem_width, len, train);
        len = pool_.out_len(len);
        for (auto& blk : blocks_) {
            h = blk.forward(h, B, len, train);
            len = blk.out_len(len);
        }
        last_len_ = len;
        ForwardOut<T> out;
        out.latents = gap_.forward(h, B, spec_.latent_dim(), len, train);
        out.logits = head_.forward(out.latents, B, train);
        return out;
    }

    // dlogits: gradient w.r.t. logits; dlatents_extra: additional gradient
    // flowing directly into the latent map (the cluster-consistency terms).
    void backward(const std::vector<T>& dlogits, const std::vector<T>* dlatents_extra = nullptr) {
        std::vector<T> dlat = head_.backward(dlogits);
        if (dlatents_extra) {
            if (dlatents_extra->size() != dlat.size())
                throw ShapeError("classifier: dlatents size mismatch");
            for (size_t i = 0; i < dlat.size(); ++i) dlat[i] += (*dlatents_extra)[i];
        }
        std::vector<T> d = gap_.backward(dlat);
        for (size_t i = blocks_.size(); i-- > 0;) d = blocks_[i].backward(d);
        d = pool_.backward(d);
        d = stem_relu_.backward(d);
        if (stem_bn_) d = stem_bn_->backward(d);
        stem_.backward(d);
    }

    void zero_grad() {
        stem_.zero_grad();
        if (stem_bn_) stem_bn_->zero_grad();
        for (auto& b : blocks_) b.zero_grad();
        head_.zero_grad();
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        stem_.collect("stem", out);
        if (stem_bn_) stem_bn_->collect("stem_bn", out);
        for (size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].collect("block" + std::to_string(i), out);
        head_.collect("head", out);
        return out;
    }

    Dense<T>& head() { return head_; }

private:
    ArchSpec spec_;
    Conv1d<T> stem_;
    std::optional<BatchNorm1d<T>> stem_bn_;
    ReLU<T> stem_relu_;
    MaxPool1d<T> pool_;
    std::vector<ResBlock<T>> blocks_;
    GlobalAvgPool<T> gap_;
    Dense<T> head_;
    size_t last_len_ = 0;
};

}  // namespace ppgaf
