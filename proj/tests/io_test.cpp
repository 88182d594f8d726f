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

#include <filesystem>

#include <gtest/gtest.h>

#include "regionedit/pair_spec.hpp"
#include "regionedit/png_io.hpp"
#include "test_util.hpp"

using namespace regionedit;

TEST(PairSpec, ParsesAllFields) {
    const auto p = parse_pair_spec("masks/a.png:make it red:2:5");
    EXPECT_EQ(p.mask_path, "masks/a.png");
    EXPECT_EQ(p.prompt, "make it red");
    EXPECT_EQ(p.order, 2);
    EXPECT_EQ(p.group, 5);
}

TEST(PairSpec, GroupIsOptional) {
    const auto p = parse_pair_spec("a.png:add a hat:-1");
    EXPECT_EQ(p.order, -1);
    EXPECT_FALSE(p.group.has_value());
}

TEST(PairSpec, PromptMayContainColonsAndQuotes) {
    const auto p = parse_pair_spec("a.png:\"ratio 3:4 frame\":1");
    EXPECT_EQ(p.prompt, "ratio 3:4 frame");
    EXPECT_EQ(p.order, 1);
    EXPECT_FALSE(p.group.has_value());
    const auto q = parse_pair_spec("a.png:time: noon:0:2");
    EXPECT_EQ(q.prompt, "time: noon");
    EXPECT_EQ(q.group, 2);
}

TEST(PairSpec, EmptyPromptIsAllowed) {
    const auto p = parse_pair_spec("a.png::3");
    EXPECT_EQ(p.prompt, "");
    EXPECT_EQ(p.order, 3);
}

TEST(PairSpec, RejectsMalformed) {
    EXPECT_THROW(parse_pair_spec("a.png:prompt"), InvalidInput);
    EXPECT_THROW(parse_pair_spec("a.png:prompt:high"), InvalidInput);
    EXPECT_THROW(parse_pair_spec(":prompt:1"), InvalidInput);
    EXPECT_THROW(parse_pair_spec("a.png:prompt:1:0"), InvalidInput);
}

TEST(Png, RgbRoundTrip) {
    testutil::Gen g(1);
    const Image img = g.image(24, 16);
    const auto bytes = png::encode_rgb(img);
    EXPECT_EQ(png::decode_rgb(bytes), img);
}

TEST(Png, MaskRoundTripMatchesRaster) {
    testutil::Gen g(2);
    const BinaryRaster m = g.mask(17, 9);
    EXPECT_EQ(png::decode_mask(png::encode_mask(m)), m);
}

TEST(Png, GrayThresholdOnDecode) {
    Raster<std::uint8_t> gray(1, 3, std::vector<std::uint8_t>{127, 128, 200});
    EXPECT_EQ(png::decode_mask(png::encode_gray(gray)).data(), (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(Png, ColorMaskIsReadAsLuminance) {
    Image img(2, 1);
    img.at(0, 1, 0) = img.at(0, 1, 1) = img.at(0, 1, 2) = 255;
    EXPECT_EQ(png::decode_mask(png::encode_rgb(img)).data(), (std::vector<std::uint8_t>{0, 1}));
}

TEST(Png, FileRoundTripAndErrors) {
    const auto path = std::filesystem::temp_directory_path() / "regionedit_io_test.png";
    const Image img = testutil::gradient_image(8, 8);
    png::write_rgb(path, img);
    EXPECT_EQ(png::read_rgb(path), img);
    std::filesystem::remove(path);
    EXPECT_THROW(png::read_rgb(path), InvalidInput);
    EXPECT_THROW(png::decode_rgb(png::Bytes{1, 2, 3}), InvalidInput);
}

TEST(Png, BundledSampleMasksAreBinary) {
    const auto dir = testutil::source_dir() / "data" / "sample_cases" / "overlap";
    const auto m   = png::read_mask(dir / "mask0.png");
    EXPECT_EQ(m.resolution(), (Resolution{64, 64}));
    EXPECT_EQ(m(20, 20), 1);
    EXPECT_EQ(m(60, 60), 0);
}
