#include "ppgaf/kmeans.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ppgaf/errors.hpp"
#include "ppgaf/kernels.hpp"
#include "ppgaf/rng.hpp"
#include "ppgaf/util.hpp"

namespace ppgaf {

using nlohmann::json;

namespace {

double sq_dist(const float* p, const double* c, size_t d) {
    double acc = 0.0;
    for (size_t k = 0; k < d; ++k) {
        const double diff = static_cast<double>(p[k]) - c[k];
        acc += diff * diff;
    }
    return acc;
}

// k-means++ seeding: first centroid uniform, then D^2 sampling.
std::vector<double> init_plus_plus(const Embedding& emb, size_t m, Rng& rng) {
    const size_t n = emb.n, d = emb.dim;
    std::vector<double> centroids(m * d);
    std::vector<double> best_d2(n, 0.0);

    size_t first = static_cast<size_t>(rng.below(n));
    for (size_t k = 0; k < d; ++k) centroids[k] = emb.row(first)[k];

    for (size_t i = 0; i < n; ++i) best_d2[i] = sq_dist(emb.row(i), centroids.data(), d);

    for (size_t c = 1; c < m; ++c) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) total += best_d2[i];
        size_t pick;
        if (total <= 0.0) {
            pick = static_cast<size_t>(rng.below(n));  // all points coincide
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += best_d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        double* cp = centroids.data() + c * d;
        for (size_t k = 0; k < d; ++k) cp[k] = emb.row(pick)[k];
        for (size_t i = 0; i < n; ++i)
            best_d2[i] = std::min(best_d2[i], sq_dist(emb.row(i), cp, d));
    }
    return centroids;
}

}  // namespace

ClusterModel kmeans(const Embedding& emb, size_t m, uint64_t seed, const KmeansOptions& opts) {
    const size_t n = emb.n, d = emb.dim;
    if (m < 2) throw ConfigError("kmeans: M must be >= 2");
    if (n < m)
        throw TooFewPoints("kmeans: " + std::to_string(n) + " points for M=" + std::to_string(m));
    for (float v : emb.data)
        if (!std::isfinite(v)) throw NumericError("kmeans: non-finite embedding value");

    Rng rng(derive_seed(seed, 0x4B4D));
    ClusterModel cm;
    cm.m = m;
    cm.dim = d;
    cm.seed = seed;
    cm.centroids = init_plus_plus(emb, m, rng);

    std::vector<int> labels(n, -1);
    std::vector<double> dist2(n, 0.0);
    double prev_inertia = -1.0;

    for (size_t iter = 0; iter < opts.max_iter; ++iter) {
        kernels::nearest_centroid(emb.data.data(), n, d, cm.centroids.data(), m, labels.data(),
                                  dist2.data());

        double inertia = 0.0;
        for (size_t i = 0; i < n; ++i) inertia += dist2[i];
        // Lloyd monotonicity: inertia never increases between iterations
        // (tiny slack for floating-point noise).
        if (prev_inertia >= 0.0 && inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia))
            throw NumericError("kmeans: inertia increased across a Lloyd iteration");
        prev_inertia = inertia;

        // centroid update in fixed point order
        std::vector<double> sums(m * d, 0.0);
        std::vector<size_t> counts(m, 0);
        for (size_t i = 0; i < n; ++i) {
            const float* p = emb.row(i);
            double* s = sums.data() + static_cast<size_t>(labels[i]) * d;
            for (size_t k = 0; k < d; ++k) s[k] += p[k];
            ++counts[static_cast<size_t>(labels[i])];
        }

        // empty clusters: re-seed to the point farthest from its centroid
        for (size_t c = 0; c < m; ++c) {
            if (counts[c] > 0) continue;
            size_t far = 0;
            double far_d = -1.0;
            for (size_t i = 0; i < n; ++i)
                if (dist2[i] > far_d) {
                    far_d = dist2[i];
                    far = i;
                }
            const float* p = emb.row(far);
            double* s = sums.data() + c * d;
            for (size_t k = 0; k < d; ++k) s[k] = p[k];
            counts[c] = 1;
            dist2[far] = 0.0;  // don't pick the same point for two empty clusters
        }

        double shift2 = 0.0;
        for (size_t c = 0; c < m; ++c) {
            double* cp = cm.centroids.data() + c * d;
            const double* s = sums.data() + c * d;
            for (size_t k = 0; k < d; ++k) {
                const double nv = s[k] / static_cast<double>(counts[c]);
                const double diff = nv - cp[k];
                shift2 += diff * diff;
                cp[k] = nv;
            }
        }
        if (std::sqrt(shift2) < opts.tol) break;
    }

    kernels::nearest_centroid(emb.data.data(), n, d, cm.centroids.data(), m, labels.data(),
                              dist2.data());
    cm.inertia = 0.0;
    for (size_t i = 0; i < n; ++i) cm.inertia += dist2[i];
    return cm;
}

std::vector<int> assign(const ClusterModel& cm, const Embedding& emb) {
    if (emb.dim != cm.dim) throw ShapeError("assign: embedding dim != cluster model dim");
    std::vector<int> labels(emb.n);
    kernels::nearest_centroid(emb.data.data(), emb.n, emb.dim, cm.centroids.data(), cm.m,
                              labels.data(), nullptr);
    return labels;
}

void write_cluster_model(const std::string& path, const ClusterModel& cm) {
    json j;
    j["M"] = cm.m;
    j["dim"] = cm.dim;
    json rows = json::array();
    for (size_t c = 0; c < cm.m; ++c) {
        json row = json::array();
        for (size_t k = 0; k < cm.dim; ++k) row.push_back(cm.centroids[c * cm.dim + k]);
        rows.push_back(std::move(row));
    }
    j["centroids"] = std::move(rows);
    j["inertia"] = cm.inertia;
    j["seed"] = cm.seed;
    const std::string s = j.dump(2);
    write_file_bytes(path, s.data(), s.size());
}

ClusterModel read_cluster_model(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw IoError("cluster model: invalid JSON in " + path + ": " + e.what());
    }
    ClusterModel cm;
    cm.m = j.at("M").get<size_t>();
    cm.dim = j.at("dim").get<size_t>();
    cm.inertia = j.at("inertia").get<double>();
    cm.seed = j.at("seed").get<uint64_t>();
    cm.centroids.reserve(cm.m * cm.dim);
    for (const auto& row : j.at("centroids"))
        for (const auto& v : row) cm.centroids.push_back(v.get<double>());
    if (cm.centroids.size() != cm.m * cm.dim)
        throw IoError("cluster model: centroid matrix shape mismatch in " + path);
    return cm;
}

}  // namespace ppgaf
