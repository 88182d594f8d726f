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

#include <cctype>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "regionedit/backend.hpp"
#include "regionedit/prompt_packer.hpp"

// Deterministic desk-scale backend: exact codec, hashed text embeddings, and a
// small two-level network whose attention sites are real softmax attention.

namespace regionedit::toy {

inline constexpr int kBlock       = 8;
inline constexpr int kChannels    = kBlock * kBlock * 3;  // 192
inline constexpr int kPadToken    = 0;
inline constexpr int kSotToken    = 49406;
inline constexpr int kEotToken    = 49407;
inline constexpr int kVocabSize   = 49405;
inline constexpr int kMaxContent  = kTokensPerPrompt - 2;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// N(0, scale^2) matrix fully determined by (seed, tag).
inline Matrix seeded_normal(std::uint64_t seed, std::uint64_t tag, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
    std::mt19937_64 gen(splitmix64(seed ^ splitmix64(tag)));
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(gen);
    return m;
}

/// Space-to-depth: each 8x8 RGB block becomes one 192-channel latent cell,
/// values mapped to [-1, 1]. decode(encode(x)) == x for every 8-bit image.
class ToyCodec : public LatentCodec {
public:
    Latent encode(const Image& image) override {
        if (image.width % kBlock != 0 || image.height % kBlock != 0 || image.width == 0 || image.height == 0) {
            throw InvalidInput("toy codec needs dimensions divisible by 8, got " + image.resolution().str());
        }
        const Resolution res{image.height / kBlock, image.width / kBlock};
        Latent z(res, kChannels);
        for (int cy = 0; cy < res.height; ++cy) {
            for (int cx = 0; cx < res.width; ++cx) {
                const int cell = cy * res.width + cx;
                for (int dy = 0; dy < kBlock; ++dy) {
                    for (int dx = 0; dx < kBlock; ++dx) {
                        for (int c = 0; c < 3; ++c) {
                            const int ch = (dy * kBlock + dx) * 3 + c;
                            z.values(cell, ch) =
                                image.at(cy * kBlock + dy, cx * kBlock + dx, c) / 127.5 - 1.0;
                        }
                    }
                }
            }
        }
        return z;
    }

    Image decode(const Latent& z) override {
        if (z.channels() != kChannels) throw InvalidInput("toy codec expects 192 latent channels");
        Image image(z.res.width * kBlock, z.res.height * kBlock);
        for (int cy = 0; cy < z.res.height; ++cy) {
            for (int cx = 0; cx < z.res.width; ++cx) {
                const int cell = cy * z.res.width + cx;
                for (int dy = 0; dy < kBlock; ++dy) {
                    for (int dx = 0; dx < kBlock; ++dx) {
                        for (int c = 0; c < 3; ++c) {
                            const double v = (z.values(cell, (dy * kBlock + dx) * 3 + c) + 1.0) * 127.5;
                            const double clamped = std::isfinite(v) ? std::clamp(std::round(v), 0.0, 255.0) : 0.0;
                            image.at(cy * kBlock + dy, cx * kBlock + dx, c) = static_cast<std::uint8_t>(clamped);
                        }
                    }
                }
            }
        }
        return image;
    }
};

/// Whitespace tokenizer over a hashed vocabulary. A token's embedding depends
/// only on (token id, position).
class ToyTextEncoder : public TextEncoder {
public:
    explicit ToyTextEncoder(std::uint64_t seed = 0, int width = 32) : seed_(seed), width_(width) {}

    struct Tokens {
        std::vector<int> ids;  // always 77
        bool truncated = false;
    };

    static std::vector<std::string> words(std::string_view prompt) {
        std::string lowered(prompt);
        for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        std::istringstream in(lowered);
        std::vector<std::string> out;
        for (std::string w; in >> w;) out.push_back(w);
        return out;
    }

    static int word_id(std::string_view word) { return 1 + static_cast<int>(fnv1a(word) % kVocabSize); }

    static Tokens tokenize(std::string_view prompt) {
        const auto ws = words(prompt);
        Tokens t;
        t.ids.push_back(kSotToken);
        for (const auto& w : ws) {
            if (static_cast<int>(t.ids.size()) - 1 == kMaxContent) {
                t.truncated = true;
                break;
            }
            t.ids.push_back(word_id(w));
        }
        t.ids.push_back(kEotToken);
        t.ids.resize(kTokensPerPrompt, kPadToken);
        return t;
    }

    PromptEmbedding encode(std::string_view prompt) override {
        const Tokens t = tokenize(prompt);
        PromptEmbedding e;
        e.truncated = t.truncated;
        e.matrix.resize(kTokensPerPrompt, width_);
        e.roles.resize(kTokensPerPrompt);
        bool after_eot = false;
        for (int p = 0; p < kTokensPerPrompt; ++p) {
            const int id = t.ids[p];
            e.matrix.row(p) = token_vector(id) + position_vector(p);
            if (p == 0) e.roles[p] = TokenRole::Sot;
            else if (after_eot) e.roles[p] = TokenRole::Pad;
            else if (id == kEotToken) {
                e.roles[p] = TokenRole::Eot;
                after_eot  = true;
            } else e.roles[p] = TokenRole::Content;
        }
        return e;
    }

    [[nodiscard]] int width() const override { return width_; }
    [[nodiscard]] std::string identity() const override {
        return "toy-text-encoder(seed=" + std::to_string(seed_) + ",d=" + std::to_string(width_) + ")";
    }

    [[nodiscard]] Eigen::RowVectorXd token_vector(int id) const {
        return seeded_normal(seed_, 0x70000000ULL + static_cast<std::uint64_t>(id), 1, width_).row(0);
    }

private:
    [[nodiscard]] Eigen::RowVectorXd position_vector(int pos) const {
        return seeded_normal(seed_, 0x50000000ULL + static_cast<std::uint64_t>(pos), 1, width_, 0.25).row(0);
    }

    std::uint64_t seed_;
    int width_;
};

/// Two attention levels (latent resolution and half of it), each with one
/// self-attention and one cross-attention site reading the same input.
/// The clean-latent estimate mixes the image latent with the attention
/// features; the returned noise estimate is consistent with it.
class ToyDenoiser : public DenoiserAdapter {
public:
    static constexpr int kLevels       = 2;
    static constexpr double kImageMix  = 0.5;

    explicit ToyDenoiser(std::uint64_t seed = 0, int model_width = 32, int text_width = 32)
        : seed_(seed), d_(model_width), text_d_(text_width) {
        const double in_scale = 1.0 / std::sqrt(2.0 * kChannels);
        const double d_scale  = 1.0 / std::sqrt(static_cast<double>(d_));
        const double t_scale  = 1.0 / std::sqrt(static_cast<double>(text_d_));
        w_in_                 = seeded_normal(seed_, 1, 2 * kChannels, d_, 2.0 * in_scale);
        w_out_                = seeded_normal(seed_, 2, d_, kChannels, 1.5 * d_scale);
        for (int l = 0; l < kLevels; ++l) {
            const std::uint64_t base = 100 + 10 * static_cast<std::uint64_t>(l);
            Level lv;
            lv.self_q  = seeded_normal(seed_, base + 0, d_, d_, 1.5 * d_scale);
            lv.self_k  = seeded_normal(seed_, base + 1, d_, d_, 1.5 * d_scale);
            lv.self_v  = seeded_normal(seed_, base + 2, d_, d_, d_scale);
            lv.cross_q = seeded_normal(seed_, base + 3, d_, d_, 1.5 * d_scale);
            lv.cross_k = seeded_normal(seed_, base + 4, text_d_, d_, 1.5 * t_scale);
            lv.cross_v = seeded_normal(seed_, base + 5, text_d_, d_, 2.0 * t_scale);
            levels_.push_back(std::move(lv));
        }
    }

    [[nodiscard]] std::vector<AttentionSite> attention_sites(Resolution latent) const override {
        std::vector<AttentionSite> sites;
        for (int l = 0; l < kLevels; ++l) {
            const Resolution r{latent.height >> l, latent.width >> l};
            const std::string prefix = "level" + std::to_string(l);
            sites.push_back({prefix + ".self", AttentionKind::Self, r});
            sites.push_back({prefix + ".cross", AttentionKind::Cross, r});
        }
        return sites;
    }

    Latent predict(const DenoiseInput& in, const HookSet& hooks) override {
        const Resolution res = in.noisy.res;
        if (res.height % (1 << (kLevels - 1)) != 0 || res.width % (1 << (kLevels - 1)) != 0) {
            throw InvalidInput("toy denoiser needs an even latent size, got " + res.str());
        }
        if (in.noisy.channels() != kChannels || !in.noisy.same_shape(in.image_latent)) {
            throw InvalidInput("toy denoiser expects matching 192-channel latents");
        }
        if (in.conditioning.matrix.cols() != text_d_) throw InvalidInput("conditioning width mismatch");
        const double ab = in.ctx.alpha_bar;
        if (!(ab < 1.0) || !(ab > 0.0)) throw InvalidInput("toy denoiser needs 0 < abar < 1");

        Matrix x(res.pixels(), 2 * kChannels);
        x << in.noisy.values, in.image_latent.values;
        Matrix h = x * w_in_;
        for (int j = 0; j < d_; ++j) h.col(j).array() += 0.5 * std::sin(std::log1p(in.ctx.sigma) * (j + 1));

        const auto sites = attention_sites(res);
        Matrix features  = h;
        for (int l = 0; l < kLevels; ++l) {
            const int f        = 1 << l;
            const Matrix pooled = avg_pool(h, res, f);
            const Level& lv    = levels_[l];
            const Matrix& text = in.conditioning.matrix;
            Matrix mixed       = hooked_attention(sites[2 * l], in.ctx, pooled * lv.self_q, pooled * lv.self_k,
                                                  pooled * lv.self_v, hooks);
            mixed += hooked_attention(sites[2 * l + 1], in.ctx, pooled * lv.cross_q, text * lv.cross_k,
                                      text * lv.cross_v, hooks);
            features += upsample(mixed, res, f);
        }
        const Matrix out = (features * w_out_).array().tanh().matrix();
        const Matrix x0  = kImageMix * in.image_latent.values + (1.0 - kImageMix) * out;
        return Latent(res, (in.noisy.values - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab));
    }

    [[nodiscard]] std::string identity() const override {
        return "toy-denoiser(seed=" + std::to_string(seed_) + ",d=" + std::to_string(d_) + ")";
    }

private:
    struct Level {
        Matrix self_q, self_k, self_v, cross_q, cross_k, cross_v;
    };

    static Matrix avg_pool(const Matrix& m, Resolution res, int f) {
        if (f == 1) return m;
        const Resolution r{res.height / f, res.width / f};
        Matrix out = Matrix::Zero(r.pixels(), m.cols());
        for (int y = 0; y < res.height; ++y) {
            for (int x = 0; x < res.width; ++x) {
                out.row((y / f) * r.width + x / f) += m.row(y * res.width + x);
            }
        }
        return out / static_cast<double>(f * f);
    }

    static Matrix upsample(const Matrix& m, Resolution res, int f) {
        if (f == 1) return m;
        const int cw = res.width / f;
        Matrix out(res.pixels(), m.cols());
        for (int y = 0; y < res.height; ++y) {
            for (int x = 0; x < res.width; ++x) out.row(y * res.width + x) = m.row((y / f) * cw + x / f);
        }
        return out;
    }

    std::uint64_t seed_;
    int d_;
    int text_d_;
    Matrix w_in_, w_out_;
    std::vector<Level> levels_;
};

inline Backend make_backend(std::uint64_t seed = 0) {
    Backend b;
    b.name     = "toy";
    b.denoiser = std::make_unique<ToyDenoiser>(seed);
    b.codec    = std::make_unique<ToyCodec>();
    b.encoder  = std::make_unique<ToyTextEncoder>(seed);
    return b;
}

}  // namespace regionedit::toy
