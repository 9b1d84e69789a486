// SPDX-License-Identifier: Apache-2.0
// Fuses a 4x4 global token grid with one 32x32 patch of a 64x64 image.

#include <cstdio>

#include "glcanet/attention.hpp"

using namespace glcanet;

int main() {
    Rng rng(7);
    const std::size_t d = 4;
    const auto grid = plan_grid(64, 64, 32, 8);

    // Four global cells per side, a 2x2 local map for patch 0.
    TokenSeq<double> global = to_tokens(uniform_tensor<double>({d, 4, 4}, -1, 1, rng), TokenOrigin::global);
    TokenSeq<double> local = to_tokens(uniform_tensor<double>({d, 2, 2}, -1, 1, rng), TokenOrigin::local_patch, 0);

    const auto w_g = AttentionWeights<double>::init(d, d, d, rng);
    const auto w_l = AttentionWeights<double>::init(d, d, d, rng);
    const auto mask = build_patch_mask(grid, 0, 4, 4, local.size());

    const auto fused = glca_fuse_tokens(global, local, w_g, w_l, &mask);
    std::printf("patches: %zu\n", grid.origins.size());
    std::printf("fused global %zux%zu, fused local %zux%zu\n", fused.global.dim(0), fused.global.dim(1),
                fused.local.dim(0), fused.local.dim(1));
    std::printf("visible global cells for patch 0:");
    for (std::size_t j = 0; j < mask.cols(); ++j) std::printf(" %d", mask.allowed(0, j) ? 1 : 0);
    std::printf("\n");
}
