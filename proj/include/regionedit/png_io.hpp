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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <png.h>

#include "regionedit/common.hpp"
#include "regionedit/mask_compositor.hpp"

namespace regionedit::png {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const Bytes& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("failed writing " + path.string());
}

namespace detail {

inline Bytes decode(const Bytes& data, std::uint32_t format, int& width, int& height) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, data.data(), data.size())) {
        throw InvalidInput(std::string("not a readable PNG: ") + img.message);
    }
    img.format = format;
    Bytes pixels(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw InvalidInput(std::string("PNG decode failed: ") + img.message);
    }
    width  = static_cast<int>(img.width);
    height = static_cast<int>(img.height);
    return pixels;
}

inline Bytes encode(const std::uint8_t* pixels, int width, int height, std::uint32_t format) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width   = static_cast<png_uint_32>(width);
    img.height  = static_cast<png_uint_32>(height);
    img.format  = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(img, size, 0, pixels, 0, nullptr)) {
        throw InvalidInput(std::string("PNG sizing failed: ") + img.message);
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw InvalidInput(std::string("PNG encode failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

}  // namespace detail

inline Image decode_rgb(const Bytes& data) {
    Image image;
    image.pixels = detail::decode(data, PNG_FORMAT_RGB, image.width, image.height);
    return image;
}

/// Any PNG flattened to 8-bit grayscale.
inline Raster<std::uint8_t> decode_gray(const Bytes& data) {
    int w = 0, h = 0;
    auto px = detail::decode(data, PNG_FORMAT_GRAY, w, h);
    return Raster<std::uint8_t>(h, w, std::move(px));
}

/// Grayscale > 127 is inside.
inline BinaryRaster decode_mask(const Bytes& data) { return binarize(decode_gray(data), 127); }

inline Bytes encode_rgb(const Image& image) {
    return detail::encode(image.pixels.data(), image.width, image.height, PNG_FORMAT_RGB);
}

inline Bytes encode_gray(const Raster<std::uint8_t>& gray) {
    return detail::encode(gray.data().data(), gray.width(), gray.height(), PNG_FORMAT_GRAY);
}

/// 0/255 export of a binary mask.
inline Bytes encode_mask(const BinaryRaster& mask) {
    Raster<std::uint8_t> gray(mask.height(), mask.width(), 0);
    for (size_t p = 0; p < mask.size(); ++p) gray[p] = mask[p] ? 255 : 0;
    return encode_gray(gray);
}

inline Image read_rgb(const std::filesystem::path& p) { return decode_rgb(read_file(p)); }
inline BinaryRaster read_mask(const std::filesystem::path& p) { return decode_mask(read_file(p)); }
inline void write_rgb(const std::filesystem::path& p, const Image& image) { write_file(p, encode_rgb(image)); }

}  // namespace regionedit::png
