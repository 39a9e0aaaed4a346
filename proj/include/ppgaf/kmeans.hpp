// ============================================================================
// K-means over embeddings: k-means++ initialization, Lloyd iterations until
// the centroid shift drops below tol, empty clusters re-seeded to the point
// farthest from its assigned centroid. Assignment parallelizes over points;
// centroid updates reduce in fixed index order, so fits are deterministic.
// ============================================================================

#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ppgaf/embedding.hpp"

namespace ppgaf {

struct ClusterModel {
    size_t m = 0;                    // cluster count
    size_t dim = 0;
    std::vector<double> centroids;   // row-major (m, dim)
    double inertia = 0.0;            // sum of squared distances to assigned centroids
    uint64_t seed = 0;

    const double* centroid(size_t c) const { return centroids.data() + c * dim; }
};

struct KmeansOptions {
    size_t max_iter = 300;
    double tol = 1e-6;
};

ClusterModel kmeans(const Embedding& emb, size_t m, uint64_t seed,
                    const KmeansOptions& opts = {});

// Nearest centroid per row; ties broken by the lowest cluster id.
std::vector<int> assign(const ClusterModel& cm, const Embedding& emb);

void write_cluster_model(const std::string& path, const ClusterModel& cm);
ClusterModel read_cluster_model(const std::string& path);

}  // namespace ppgaf
