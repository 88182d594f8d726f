// Copyright 2026 The RegionEdit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "regionedit/mask_compositor.hpp"
#include "test_util.hpp"

using namespace regionedit;
using testutil::Gen;

namespace {

BinaryRaster raster(int h, int w, std::vector<std::uint8_t> v) { return BinaryRaster(h, w, std::move(v)); }

std::vector<MaskSpec> random_masks(Gen& g, int h, int w, int n, bool distinct_orders) {
    std::vector<int> orders(n);
    std::iota(orders.begin(), orders.end(), 1);
    std::shuffle(orders.begin(), orders.end(), g.engine());
    std::vector<MaskSpec> masks;
    for (int i = 0; i < n; ++i) {
        const int order = distinct_orders ? orders[i] : g.uniform(0, 2);
        masks.push_back({g.mask(h, w), order, g.uniform(1, n), i + 1});
    }
    return masks;
}

}  // namespace

TEST(Composite, HigherOrderWinsOnOverlap) {
    const auto left   = raster(2, 2, {1, 0, 1, 0});
    const auto bottom = raster(2, 2, {0, 0, 1, 1});
    const auto clm    = composite({{left, 1, 1, 1}, {bottom, 2, 2, 2}});
    EXPECT_EQ(clm.labels.data(), (std::vector<int>{1, 0, 2, 2}));
    EXPECT_EQ(clm.groups.data(), (std::vector<int>{1, 0, 2, 2}));
}

TEST(Composite, SingleFullMaskLabelsEverything) {
    const auto clm = composite({{BinaryRaster(3, 5, 1), 0, 1, 1}});
    for (int v : clm.labels.data()) EXPECT_EQ(v, 1);
}

TEST(Composite, EqualOrdersGoToLaterMask) {
    const auto full = BinaryRaster(2, 2, 1);
    const auto clm  = composite({{full, 3, 1, 1}, {full, 3, 1, 2}});
    for (int v : clm.labels.data()) EXPECT_EQ(v, 2);
}

TEST(Composite, RandomFourByFourMatchesPerPixelScan) {
    Gen g(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto masks = random_masks(g, 4, 4, 3, true);
        EXPECT_EQ(composite(masks).labels, testutil::brute_force_labels(masks)) << "trial " << trial;
    }
}

TEST(Composite, DuplicateOrdersMatchPerPixelScan) {
    Gen g(12);
    for (int trial = 0; trial < 50; ++trial) {
        const auto masks = random_masks(g, 5, 3, g.uniform(1, 5), false);
        EXPECT_EQ(composite(masks).labels, testutil::brute_force_labels(masks));
    }
}

TEST(Composite, PromptIndexBindingIsRespected) {
    const auto a   = raster(1, 2, {1, 0});
    const auto b   = raster(1, 2, {0, 1});
    const auto clm = composite({{a, 0, 5, 2}, {b, 0, 7, 1}});
    EXPECT_EQ(clm.labels.data(), (std::vector<int>{2, 1}));
    EXPECT_EQ(clm.group_of, (std::vector<int>{0, 7, 5}));
}

TEST(Composite, RejectsBadInput) {
    EXPECT_THROW(composite({}), InvalidInput);
    EXPECT_THROW(composite({{BinaryRaster(2, 2), 0, 1, 1}, {BinaryRaster(2, 3), 0, 1, 2}}), InvalidInput);
    EXPECT_THROW(composite({{BinaryRaster(2, 2, 2), 0, 1, 1}}), InvalidInput);
    EXPECT_THROW(composite({{BinaryRaster(2, 2), 0, 1, 2}}), InvalidInput);
    EXPECT_THROW(composite({{BinaryRaster(2, 2), 0, 1, 1}, {BinaryRaster(2, 2), 0, 1, 1}}), InvalidInput);
    EXPECT_THROW(composite({{BinaryRaster(2, 2), 0, 0, 1}}), InvalidInput);
}

TEST(CompositeProperty, OrderDominanceUnderPermutation) {
    Gen g(21);
    for (int trial = 0; trial < 100; ++trial) {
        auto masks      = random_masks(g, 6, 6, g.uniform(1, 5), true);
        const auto base = composite(masks);
        std::shuffle(masks.begin(), masks.end(), g.engine());
        const auto permuted = composite(masks);
        EXPECT_EQ(base.labels, permuted.labels);
        EXPECT_EQ(base.groups, permuted.groups);
        EXPECT_EQ(base.group_of, permuted.group_of);
    }
}

TEST(CompositeProperty, AddingAMaskNeverUncoversAPixel) {
    Gen g(22);
    for (int trial = 0; trial < 100; ++trial) {
        auto masks       = random_masks(g, 6, 7, g.uniform(1, 4), false);
        const auto small = composite(masks);
        masks.push_back({g.mask(6, 7), g.uniform(-2, 3), 1, static_cast<int>(masks.size()) + 1});
        const auto large = composite(masks);
        for (size_t p = 0; p < small.labels.size(); ++p) {
            if (small.labels[p] > 0) {
                EXPECT_GT(large.labels[p], 0);
            }
        }
    }
}

TEST(CompositeProperty, LabelsStayInRange) {
    Gen g(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int n      = g.uniform(1, 6);
        const auto masks = random_masks(g, 8, 8, n, false);
        const auto pyr   = build_pyramid(composite(masks), {{8, 8}, {4, 4}, {2, 2}, {1, 1}});
        for (const auto& level : pyr.levels) {
            for (int v : level.labels.data()) {
                EXPECT_GE(v, 0);
                EXPECT_LE(v, n);
            }
        }
    }
}

TEST(Pyramid, AllBackgroundStaysBackground) {
    const auto clm = composite({{BinaryRaster(8, 8, 0), 0, 1, 1}});
    for (const auto& l : build_pyramid(clm, {{4, 4}, {2, 2}, {1, 1}}).levels) {
        for (int v : l.labels.data()) EXPECT_EQ(v, 0);
        for (int v : l.coverage.data()) EXPECT_EQ(v, 0);
    }
}

TEST(Pyramid, ThinMaskSurvivesInCoverage) {
    BinaryRaster m(8, 8, 0);
    m(3, 5)          = 1;
    const auto pyr   = build_pyramid(composite({{m, 0, 1, 1}}), {{1, 1}});
    const auto& cell = pyr.at({1, 1});
    EXPECT_EQ(cell.labels(0, 0), 0);
    EXPECT_EQ(cell.coverage(0, 0), 1);
}

TEST(Pyramid, SixteenBySixteenTwoRegionsMatchesCellScan) {
    Gen g(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<MaskSpec> masks{{g.mask(16, 16, 0.3), 1, 1, 1}, {g.mask(16, 16, 0.3), 2, 2, 2}};
        const auto clm   = composite(masks);
        const auto pyr   = build_pyramid(clm, {{4, 4}});
        const auto& lvl  = pyr.at({4, 4});
        for (int cy = 0; cy < 4; ++cy) {
            for (int cx = 0; cx < 4; ++cx) {
                int counts[3] = {0, 0, 0};
                for (int y = 0; y < 4; ++y) {
                    for (int x = 0; x < 4; ++x) ++counts[clm.labels(cy * 4 + y, cx * 4 + x)];
                }
                // Mask 2 has the higher order, then mask 1, then background.
                int expected = 2;
                if (counts[1] > counts[expected]) expected = 1;
                if (counts[0] > counts[expected]) expected = 0;
                EXPECT_EQ(lvl.labels(cy, cx), expected);
                EXPECT_EQ(lvl.groups(cy, cx), expected);
                EXPECT_EQ(lvl.coverage(cy, cx), counts[0] < 16 ? 1 : 0);
            }
        }
    }
}

TEST(Pyramid, MajorityTieGoesToHigherOrder) {
    // Two background pixels outvote one pixel of each region.
    const auto a   = raster(2, 2, {1, 0, 0, 0});
    const auto b   = raster(2, 2, {0, 1, 0, 0});
    const auto pyr = build_pyramid(composite({{a, 5, 1, 1}, {b, 3, 1, 2}}), {{1, 1}});
    EXPECT_EQ(pyr.at({1, 1}).labels(0, 0), 0);

    // Two against two: the higher order takes the cell.
    const auto c    = raster(2, 2, {1, 1, 0, 0});
    const auto d    = raster(2, 2, {0, 0, 1, 1});
    const auto pyr2 = build_pyramid(composite({{c, 5, 1, 1}, {d, 3, 1, 2}}), {{1, 1}});
    EXPECT_EQ(pyr2.at({1, 1}).labels(0, 0), 1);
}

TEST(Pyramid, RejectsNonDividingResolution) {
    const auto clm = composite({{BinaryRaster(8, 8, 1), 0, 1, 1}});
    EXPECT_THROW(build_pyramid(clm, {{3, 3}}), InvalidInput);
    EXPECT_THROW(build_pyramid(clm, {{0, 8}}), InvalidInput);
    EXPECT_THROW((void)build_pyramid(clm, {{4, 4}}).at({2, 2}), InvalidInput);
}

TEST(PyramidProperty, CoverageIsMaxPoolOfRegions) {
    Gen g(41);
    for (int trial = 0; trial < 200; ++trial) {
        const auto masks = random_masks(g, 16, 16, g.uniform(1, 3), false);
        const auto clm = composite(masks);
        for (const auto& lvl : build_pyramid(clm, {{16, 16}, {8, 8}, {4, 4}, {2, 2}, {1, 1}}).levels) {
            const int f = 16 / lvl.res.height;
            for (int cy = 0; cy < lvl.res.height; ++cy) {
                for (int cx = 0; cx < lvl.res.width; ++cx) {
                    bool any = false;
                    for (int y = 0; y < f; ++y) {
                        for (int x = 0; x < f; ++x) any = any || clm.labels(cy * f + y, cx * f + x) > 0;
                    }
                    EXPECT_EQ(lvl.coverage(cy, cx) == 1, any);
                }
            }
        }
    }
}

TEST(RegionRasters, SplitsLabels) {
    const auto clm = composite({{raster(2, 2, {1, 0, 1, 0}), 1, 1, 1}, {raster(2, 2, {0, 0, 1, 1}), 2, 2, 2}});
    const auto rs  = region_rasters(clm);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_EQ(rs[0].data(), (std::vector<std::uint8_t>{1, 0, 0, 0}));
    EXPECT_EQ(rs[1].data(), (std::vector<std::uint8_t>{0, 0, 1, 1}));
}

TEST(RegionRasters, AllBackgroundGivesEmptyRasters) {
    const auto clm = composite({{BinaryRaster(3, 3, 0), 0, 1, 1}, {BinaryRaster(3, 3, 0), 0, 1, 2}});
    for (const auto& r : region_rasters(clm)) {
        for (auto v : r.data()) EXPECT_EQ(v, 0);
    }
}

TEST(RegionRasters, RandomMapsPartitionTheCoveredArea) {
    Gen g(51);
    for (int trial = 0; trial < 100; ++trial) {
        const auto clm = composite(random_masks(g, 8, 8, g.uniform(1, 5), false));
        const auto rs  = region_rasters(clm);
        for (size_t p = 0; p < clm.labels.size(); ++p) {
            int sum = 0;
            for (size_t k = 0; k < rs.size(); ++k) {
                sum += rs[k][p];
                EXPECT_EQ(rs[k][p] == 1, clm.labels[p] == static_cast<int>(k) + 1);
            }
            EXPECT_EQ(sum, clm.labels[p] > 0 ? 1 : 0);
        }
    }
}

TEST(Binarize, ThresholdIsStrictlyAbove127) {
    Raster<std::uint8_t> gray(1, 4, std::vector<std::uint8_t>{0, 127, 128, 255});
    EXPECT_EQ(binarize(gray).data(), (std::vector<std::uint8_t>{0, 0, 1, 1}));
}
