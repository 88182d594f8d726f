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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace regionedit {

/// Caller supplied something malformed: bad dimensions, empty lists, bad indices.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A model backend could not load, ran out of capacity, or produced garbage.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Resolution {
    int height = 0;
    int width  = 0;

    [[nodiscard]] int pixels() const { return height * width; }
    friend bool operator==(const Resolution&, const Resolution&) = default;
    friend auto operator<=>(const Resolution&, const Resolution&) = default;

    [[nodiscard]] std::string str() const {
        return std::to_string(height) + "x" + std::to_string(width);
    }
};

/// Dense row-major 2-D grid. Used for masks, label maps and group maps.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int height, int width, T fill = T{})
        : height_(height), width_(width), data_(static_cast<size_t>(height) * width, fill) {
        if (height < 0 || width < 0) {
            throw InvalidInput("raster dimensions must be non-negative");
        }
    }
    Raster(int height, int width, std::vector<T> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (data_.size() != static_cast<size_t>(height) * width) {
            throw InvalidInput("raster data size does not match " + std::to_string(height) + "x" +
                               std::to_string(width));
        }
    }

    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] Resolution resolution() const { return {height_, width_}; }
    [[nodiscard]] size_t size() const { return data_.size(); }

    T& operator()(int y, int x) { return data_[static_cast<size_t>(y) * width_ + x]; }
    const T& operator()(int y, int x) const { return data_[static_cast<size_t>(y) * width_ + x]; }
    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    [[nodiscard]] const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int height_ = 0;
    int width_  = 0;
    std::vector<T> data_;
};

using BinaryRaster = Raster<std::uint8_t>;
using LabelRaster  = Raster<int>;

/// 8-bit interleaved RGB image.
struct Image {
    int width  = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

    std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    [[nodiscard]] std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    [[nodiscard]] Resolution resolution() const { return {height, width}; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Spatial latent: one row per cell (row-major over height x width), one column per channel.
struct Latent {
    Resolution res;
    Matrix values;

    Latent() = default;
    Latent(Resolution r, int channels) : res(r), values(Matrix::Zero(r.pixels(), channels)) {}
    Latent(Resolution r, Matrix m) : res(r), values(std::move(m)) {
        if (values.rows() != r.pixels()) {
            throw InvalidInput("latent rows do not match resolution " + r.str());
        }
    }

    [[nodiscard]] int channels() const { return static_cast<int>(values.cols()); }
    [[nodiscard]] bool same_shape(const Latent& o) const {
        return res == o.res && values.cols() == o.values.cols();
    }
    [[nodiscard]] bool all_finite() const { return values.allFinite(); }
};

}  // namespace regionedit
