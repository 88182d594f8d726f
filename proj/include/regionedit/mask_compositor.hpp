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

#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "regionedit/common.hpp"

namespace regionedit {

/// One user mask bound to one prompt.
struct MaskSpec {
    BinaryRaster raster;  // 1 = inside
    int order        = 0;  // z-order; higher wins on overlap
    int group_id     = 1;  // self-attention group, >= 1
    int prompt_index = 1;  // 1-based
};

/// Order-resolved region labels. Label k is the region of prompt k; 0 is background.
struct CompositeLabelMap {
    LabelRaster labels;
    LabelRaster groups;
    std::vector<int> group_of;  // indexed by label, group_of[0] == 0
    std::vector<int> priority;  // indexed by label, priority[0] == -1; larger wins

    [[nodiscard]] int regions() const { return static_cast<int>(group_of.size()) - 1; }
    [[nodiscard]] Resolution resolution() const { return labels.resolution(); }
};

struct PyramidLevel {
    Resolution res;
    LabelRaster labels;
    LabelRaster groups;
    BinaryRaster coverage;  // 1 where any source pixel of the cell is in a region
};

struct LabelPyramid {
    std::vector<PyramidLevel> levels;

    [[nodiscard]] const PyramidLevel* find(Resolution r) const {
        for (const auto& l : levels) {
            if (l.res == r) return &l;
        }
        return nullptr;
    }
    [[nodiscard]] const PyramidLevel& at(Resolution r) const {
        if (const auto* l = find(r)) return *l;
        throw InvalidInput("label pyramid has no level at " + r.str());
    }
};

namespace detail {

inline void validate_masks(const std::vector<MaskSpec>& masks) {
    if (masks.empty()) throw InvalidInput("at least one mask is required");
    const Resolution res = masks.front().raster.resolution();
    const int n          = static_cast<int>(masks.size());
    std::vector<bool> seen(n + 1, false);
    for (size_t i = 0; i < masks.size(); ++i) {
        const auto& m = masks[i];
        if (m.raster.resolution() != res) {
            throw InvalidInput("mask " + std::to_string(i) + " is " + m.raster.resolution().str() +
                               ", expected " + res.str());
        }
        if (std::any_of(m.raster.data().begin(), m.raster.data().end(), [](auto v) { return v > 1; })) {
            throw InvalidInput("mask " + std::to_string(i) + " is not binary");
        }
        if (m.prompt_index < 1 || m.prompt_index > n) {
            throw InvalidInput("mask " + std::to_string(i) + " prompt_index " +
                               std::to_string(m.prompt_index) + " outside [1, " + std::to_string(n) + "]");
        }
        if (seen[m.prompt_index]) {
            throw InvalidInput("prompt_index " + std::to_string(m.prompt_index) + " bound to more than one mask");
        }
        seen[m.prompt_index] = true;
        if (m.group_id < 1) {
            throw InvalidInput("mask " + std::to_string(i) + " group_id must be >= 1");
        }
    }
}

}  // namespace detail

/// Resolve overlapping masks into a single label map. Higher order wins, ties go
/// to the later mask in the list.
inline CompositeLabelMap composite(const std::vector<MaskSpec>& masks) {
    detail::validate_masks(masks);
    const int n          = static_cast<int>(masks.size());
    const Resolution res = masks.front().raster.resolution();

    std::vector<int> by_priority(n);
    std::iota(by_priority.begin(), by_priority.end(), 0);
    std::stable_sort(by_priority.begin(), by_priority.end(),
                     [&](int a, int b) { return masks[a].order < masks[b].order; });

    CompositeLabelMap clm;
    clm.labels = LabelRaster(res.height, res.width, 0);
    clm.groups = LabelRaster(res.height, res.width, 0);
    clm.group_of.assign(n + 1, 0);
    clm.priority.assign(n + 1, -1);

    // Paint lowest priority first so later strokes overwrite.
    for (int rank = 0; rank < n; ++rank) {
        const MaskSpec& m            = masks[by_priority[rank]];
        clm.group_of[m.prompt_index] = m.group_id;
        clm.priority[m.prompt_index] = rank;
        for (size_t p = 0; p < m.raster.size(); ++p) {
            if (m.raster[p]) {
                clm.labels[p] = m.prompt_index;
                clm.groups[p] = m.group_id;
            }
        }
    }
    return clm;
}

/// Downsample a label map to each requested resolution. Coverage is max-pooled,
/// labels are majority-voted with ties going to the higher-priority label.
inline LabelPyramid build_pyramid(const CompositeLabelMap& clm, const std::vector<Resolution>& resolutions) {
    const Resolution src = clm.resolution();
    const int n          = clm.regions();
    LabelPyramid pyramid;
    for (const Resolution& r : resolutions) {
        if (r.height <= 0 || r.width <= 0 || src.height % r.height != 0 || src.width % r.width != 0) {
            throw InvalidInput("pyramid resolution " + r.str() + " does not evenly divide " + src.str());
        }
        if (pyramid.find(r)) continue;
        const int fy = src.height / r.height;
        const int fx = src.width / r.width;

        PyramidLevel level{r, LabelRaster(r.height, r.width, 0), LabelRaster(r.height, r.width, 0),
                           BinaryRaster(r.height, r.width, 0)};
        std::vector<int> counts(n + 1);
        for (int cy = 0; cy < r.height; ++cy) {
            for (int cx = 0; cx < r.width; ++cx) {
                std::fill(counts.begin(), counts.end(), 0);
                for (int y = cy * fy; y < (cy + 1) * fy; ++y) {
                    for (int x = cx * fx; x < (cx + 1) * fx; ++x) {
                        ++counts[clm.labels(y, x)];
                    }
                }
                int best = 0;
                for (int k = 1; k <= n; ++k) {
                    if (counts[k] > counts[best] ||
                        (counts[k] == counts[best] && clm.priority[k] > clm.priority[best])) {
                        best = k;
                    }
                }
                level.labels(cy, cx)   = best;
                level.groups(cy, cx)   = clm.group_of[best];
                level.coverage(cy, cx) = counts[0] < fy * fx ? 1 : 0;
            }
        }
        pyramid.levels.push_back(std::move(level));
    }
    return pyramid;
}

/// One binary raster per region; pairwise disjoint, union is the covered area.
inline std::vector<BinaryRaster> region_rasters(const CompositeLabelMap& clm) {
    const Resolution r = clm.resolution();
    std::vector<BinaryRaster> out(clm.regions(), BinaryRaster(r.height, r.width, 0));
    for (size_t p = 0; p < clm.labels.size(); ++p) {
        const int k = clm.labels[p];
        if (k > 0) out[k - 1][p] = 1;
    }
    return out;
}

/// Threshold a grayscale raster: value > threshold is inside.
inline BinaryRaster binarize(const Raster<std::uint8_t>& gray, int threshold = 127) {
    BinaryRaster out(gray.height(), gray.width(), 0);
    for (size_t p = 0; p < gray.size(); ++p) out[p] = gray[p] > threshold ? 1 : 0;
    return out;
}

}  // namespace regionedit
