// The OpenMP kernels must match the serial reference bit for bit: work is
// split over disjoint output slices and reductions keep the reference's
// accumulation order.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ppgaf/kernels.hpp"
#include "ppgaf/rng.hpp"
#include "nn_test_utils.hpp"

using namespace ppgaf;
using nn_test::random_vec;

namespace {

struct ConvShape {
    size_t B, Cin, Lin, Cout, K, stride, pad;
};

const ConvShape kShapes[] = {
    {1, 1, 16, 1, 3, 1, 1}, {2, 3, 33, 4, 3, 1, 1},  {3, 2, 40, 5, 7, 2, 3},
    {4, 8, 64, 8, 3, 2, 1}, {2, 4, 17, 6, 1, 1, 0},  {5, 1, 301, 8, 7, 4, 3},
};

}  // namespace

TEST_CASE("conv1d forward: OpenMP equals serial bit for bit") {
    Rng rng(1);
    for (const auto& s : kShapes) {
        auto x = random_vec<float>(s.B * s.Cin * s.Lin, rng);
        auto w = random_vec<float>(s.Cout * s.Cin * s.K, rng);
        auto bias = random_vec<float>(s.Cout, rng);
        const size_t lout = kernels::conv_out_len(s.Lin, s.K, s.stride, s.pad);
        std::vector<float> y_omp(s.B * s.Cout * lout), y_ser(y_omp.size());
        kernels::conv1d_forward(x.data(), s.B, s.Cin, s.Lin, w.data(), bias.data(), s.Cout, s.K,
                                s.stride, s.pad, y_omp.data(), lout);
        kernels::serial::conv1d_forward(x.data(), s.B, s.Cin, s.Lin, w.data(), bias.data(), s.Cout,
                                        s.K, s.stride, s.pad, y_ser.data(), lout);
        CHECK(y_omp == y_ser);
    }
}

TEST_CASE("conv1d backward input: OpenMP equals serial bit for bit") {
    Rng rng(2);
    for (const auto& s : kShapes) {
        auto w = random_vec<float>(s.Cout * s.Cin * s.K, rng);
        const size_t lout = kernels::conv_out_len(s.Lin, s.K, s.stride, s.pad);
        auto dy = random_vec<float>(s.B * s.Cout * lout, rng);
        std::vector<float> dx_omp(s.B * s.Cin * s.Lin), dx_ser(dx_omp.size());
        kernels::conv1d_backward_input(dy.data(), s.B, s.Cout, lout, w.data(), s.Cin, s.K, s.stride,
                                       s.pad, dx_omp.data(), s.Lin);
        kernels::serial::conv1d_backward_input(dy.data(), s.B, s.Cout, lout, w.data(), s.Cin, s.K,
                                               s.stride, s.pad, dx_ser.data(), s.Lin);
        CHECK(dx_omp == dx_ser);
    }
}

TEST_CASE("conv1d backward params: OpenMP equals serial bit for bit") {
    Rng rng(3);
    for (const auto& s : kShapes) {
        auto x = random_vec<float>(s.B * s.Cin * s.Lin, rng);
        const size_t lout = kernels::conv_out_len(s.Lin, s.K, s.stride, s.pad);
        auto dy = random_vec<float>(s.B * s.Cout * lout, rng);
        std::vector<float> dw_omp(s.Cout * s.Cin * s.K, 0.0f), dw_ser(dw_omp.size(), 0.0f);
        std::vector<float> db_omp(s.Cout, 0.0f), db_ser(s.Cout, 0.0f);
        kernels::conv1d_backward_params(dy.data(), s.B, s.Cout, lout, x.data(), s.Cin, s.Lin, s.K,
                                        s.stride, s.pad, dw_omp.data(), db_omp.data());
        kernels::serial::conv1d_backward_params(dy.data(), s.B, s.Cout, lout, x.data(), s.Cin,
                                                s.Lin, s.K, s.stride, s.pad, dw_ser.data(),
                                                db_ser.data());
        CHECK(dw_omp == dw_ser);
        CHECK(db_omp == db_ser);
    }
}

TEST_CASE("pairwise cluster sums and backward: OpenMP equals serial") {
    Rng rng(4);
    for (size_t trial = 0; trial < 10; ++trial) {
        const size_t B = 3 + rng.below(48);
        const size_t D = 1 + rng.below(16);
        auto latents = random_vec<float>(B * D, rng);
        std::vector<int> ids(B);
        for (auto& c : ids) c = static_cast<int>(rng.below(1 + trial % 5));

        double i_omp, e_omp, i_ser, e_ser;
        size_t pi_omp, pe_omp, pi_ser, pe_ser;
        kernels::pairwise_cluster_sums(latents.data(), B, D, ids.data(), &i_omp, &e_omp, &pi_omp,
                                       &pe_omp);
        kernels::serial::pairwise_cluster_sums(latents.data(), B, D, ids.data(), &i_ser, &e_ser,
                                               &pi_ser, &pe_ser);
        CHECK(i_omp == i_ser);
        CHECK(e_omp == e_ser);
        CHECK(pi_omp == pi_ser);
        CHECK(pe_omp == pe_ser);

        std::vector<float> g_omp(B * D, 0.0f), g_ser(B * D, 0.0f);
        kernels::pairwise_cluster_backward(latents.data(), B, D, ids.data(), 0.31, -0.17,
                                           g_omp.data());
        kernels::serial::pairwise_cluster_backward(latents.data(), B, D, ids.data(), 0.31, -0.17,
                                                   g_ser.data());
        CHECK(g_omp == g_ser);
    }
}

TEST_CASE("nearest centroid assignment: OpenMP equals serial") {
    Rng rng(5);
    const size_t N = 257, D = 9, M = 6;
    auto pts = random_vec<float>(N * D, rng);
    auto cent = random_vec<double>(M * D, rng);
    std::vector<int> a_omp(N), a_ser(N);
    std::vector<double> d_omp(N), d_ser(N);
    kernels::nearest_centroid(pts.data(), N, D, cent.data(), M, a_omp.data(), d_omp.data());
    kernels::serial::nearest_centroid(pts.data(), N, D, cent.data(), M, a_ser.data(), d_ser.data());
    CHECK(a_omp == a_ser);
    CHECK(d_omp == d_ser);
}

TEST_CASE("cluster pair sums match a brute-force oracle on random batches") {
    // independent re-implementation of the ordered double sums
    Rng rng(6);
    for (size_t trial = 0; trial < 100; ++trial) {
        const size_t B = 2 + rng.below(15);   // <= 16 points
        const size_t D = 1 + rng.below(3);
        auto latents = random_vec<float>(B * D, rng);
        std::vector<int> ids(B);
        for (auto& c : ids) c = static_cast<int>(rng.below(4));

        double intra = 0.0, inter = 0.0;
        for (size_t i = 0; i < B; ++i)
            for (size_t j = 0; j < B; ++j) {
                if (i == j) continue;
                double d2 = 0.0;
                for (size_t k = 0; k < D; ++k) {
                    const double diff = static_cast<double>(latents[i * D + k]) -
                                        static_cast<double>(latents[j * D + k]);
                    d2 += diff * diff;
                }
                if (ids[i] == ids[j])
                    intra += std::sqrt(d2);
                else
                    inter += std::sqrt(d2);
            }

        double i_got, e_got;
        size_t pi, pe;
        kernels::pairwise_cluster_sums(latents.data(), B, D, ids.data(), &i_got, &e_got, &pi, &pe);
        CHECK(i_got == doctest::Approx(intra).epsilon(1e-9));
        CHECK(e_got == doctest::Approx(inter).epsilon(1e-9));
    }
}
