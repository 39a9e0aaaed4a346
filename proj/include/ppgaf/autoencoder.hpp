// ============================================================================
// Convolutional autoencoder used only to structure the latent space before
// clustering. Encoder: three strided convolutions + dense bottleneck.
// Decoder mirrors it with nearest-neighbor upsampling to the recorded
// per-stage lengths, so decode(encode(x)) always restores the input shape.
// ============================================================================

#pragma once
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgaf/layers.hpp"

namespace ppgaf {

struct AeSpec {
    size_t input_len = 0;
    size_t latent_dim = 64;

    nlohmann::json to_json() const {
        return {{"input_len", input_len}, {"latent_dim", latent_dim}};
    }
    static AeSpec from_json(const nlohmann::json& j) {
        AeSpec s;
        s.input_len = j.at("input_len").get<size_t>();
        s.latent_dim = j.at("latent_dim").get<size_t>();
        return s;
    }
};

template <typename T>
class Autoencoder {
public:
    Autoencoder() = default;
    explicit Autoencoder(const AeSpec& spec) : spec_(spec) {
        if (spec.input_len < 64) throw ConfigError("autoencoder: input_len too short");
        enc1_ = Conv1d<T>(1, 8, 7, 4, 3);
        enc2_ = Conv1d<T>(8, 16, 5, 4, 2);
        enc3_ = Conv1d<T>(16, 32, 5, 4, 2);
        l0_ = spec.input_len;
        l1_ = enc1_.out_len(l0_);
        l2_ = enc2_.out_len(l1_);
        l3_ = enc3_.out_len(l2_);
        enc_fc_ = Dense<T>(32 * l3_, spec.latent_dim);
        dec_fc_ = Dense<T>(spec.latent_dim, 32 * l3_);
        dec1_ = Conv1d<T>(32, 16, 5, 1, 2);
        dec2_ = Conv1d<T>(16, 8, 5, 1, 2);
        dec3_ = Conv1d<T>(8, 1, 7, 1, 3);
    }

    void init(uint64_t seed) {
        Rng rng(derive_seed(seed, 0xAE));
        enc1_.init_he(rng);
        enc2_.init_he(rng);
        enc3_.init_he(rng);
        enc_fc_.init_he(rng);
        dec_fc_.init_he(rng);
        dec1_.init_he(rng);
        dec2_.init_he(rng);
        dec3_.init_he(rng);
    }

    const AeSpec& spec() const { return spec_; }

    // (B, 1, input_len) -> (B, latent_dim)
    std::vector<T> encode(const std::vector<T>& x, size_t B, bool train) {
        if (x.size() != B * l0_) throw ShapeError("autoencoder: input length mismatch");
        std::vector<T> h = enc1_.forward(x, B, l0_, train);
        h = erelu1_.forward(h, train);
        h = enc2_.forward(h, B, l1_, train);
        h = erelu2_.forward(h, train);
        h = enc3_.forward(h, B, l2_, train);
        h = erelu3_.forward(h, train);
        return enc_fc_.forward(h, B, train);
    }

    // (B, latent_dim) -> (B, 1, input_len)
    std::vector<T> decode(const std::vector<T>& z, size_t B, bool train) {
        std::vector<T> h = dec_fc_.forward(z, B, train);
        h = drelu0_.forward(h, train);
        h = up1_.forward(h, B, 32, l3_, l2_, train);
        h = dec1_.forward(h, B, l2_, train);
        h = drelu1_.forward(h, train);
        h = up2_.forward(h, B, 16, l2_, l1_, train);
        h = dec2_.forward(h, B, l1_, train);
        h = drelu2_.forward(h, train);
        h = up3_.forward(h, B, 8, l1_, l0_, train);
        return dec3_.forward(h, B, l0_, train);
    }

    std::vector<T> forward(const std::vector<T>& x, size_t B, bool train) {
        return decode(encode(x, B, train), B, train);
    }

    // Full reverse pass from the reconstruction gradient.
    void backward(const std::vector<T>& drecon) {
        std::vector<T> d = dec3_.backward(drecon);
        d = up3_.backward(d);
        d = drelu2_.backward(d);
        d = dec2_.backward(d);
        d = up2_.backward(d);
        d = drelu1_.backward(d);
        d = dec1_.backward(d);
        d = up1_.backward(d);
        d = drelu0_.backward(d);
        d = dec_fc_.backward(d);
        d = enc_fc_.backward(d);
        d = erelu3_.backward(d);
        d = enc3_.backward(d);
        d = erelu2_.backward(d);
        d = enc2_.backward(d);
        d = erelu1_.backward(d);
        enc1_.backward(d);
    }

    void zero_grad() {
        enc1_.zero_grad();
        enc2_.zero_grad();
        enc3_.zero_grad();
        enc_fc_.zero_grad();
        dec_fc_.zero_grad();
        dec1_.zero_grad();
        dec2_.zero_grad();
        dec3_.zero_grad();
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        enc1_.collect("enc1", out);
        enc2_.collect("enc2", out);
        enc3_.collect("enc3", out);
        enc_fc_.collect("enc_fc", out);
        dec_fc_.collect("dec_fc", out);
        dec1_.collect("dec1", out);
        dec2_.collect("dec2", out);
        dec3_.collect("dec3", out);
        return out;
    }

private:
    AeSpec spec_;
    Conv1d<T> enc1_, enc2_, enc3_, dec1_, dec2_, dec3_;
    Dense<T> enc_fc_, dec_fc_;
    ReLU<T> erelu1_, erelu2_, erelu3_, drelu0_, drelu1_, drelu2_;
    NearestUpsample<T> up1_, up2_, up3_;
    size_t l0_ = 0, l1_ = 0, l2_ = 0, l3_ = 0;
};

}  // namespace ppgaf
