// ============================================================================
// Embeddings (one latent vector per dataset record, order-aligned with the
// manifest) and the EMB1 container: magic "EMB1", u32-LE header length,
// JSON header {n, dim}, f32-LE row-major matrix.
// ============================================================================

#pragma once
#include <string>
#include <vector>

#include "ppgaf/autoencoder.hpp"
#include "ppgaf/dataset.hpp"

namespace ppgaf {

struct Embedding {
    size_t n = 0;
    size_t dim = 0;
    std::vector<float> data;  // row-major (n, dim)

    const float* row(size_t i) const { return data.data() + i * dim; }
};

void write_emb1(const std::string& path, const Embedding& emb);
Embedding read_emb1(const std::string& path);

// Eval-mode encoder outputs for every record, in manifest order.
Embedding embed(Autoencoder<float>& ae, const Dataset& ds, size_t batch_size = 256);

}  // namespace ppgaf
