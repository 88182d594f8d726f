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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regionedit/backend.hpp"
#include "regionedit/toy_backend.hpp"

// Adapter for a pre-trained instruction-editing checkpoint laid out in the
// diffusers directory format. Attention sites are enumerated from the UNet
// config; running the network needs an inference runtime, which this build
// does not link.

namespace regionedit::ip2p {

inline constexpr const char* kModelEnv  = "REGIONEDIT_IP2P_MODEL";
inline constexpr const char* kDeviceEnv = "REGIONEDIT_DEVICE";

inline std::string fetch_instructions(const std::string& where) {
    return "InstructPix2Pix weights not found at '" + where +
           "'. Download a diffusers-format checkpoint (e.g. `huggingface-cli download timbrooks/instruct-pix2pix "
           "--local-dir <dir>`) and point " + std::string(kModelEnv) + " or --model at that directory.";
}

/// Attention layers of a diffusers UNet2DConditionModel, in forward order.
inline std::vector<AttentionSite> enumerate_unet_sites(const nlohmann::json& cfg, Resolution latent) {
    const auto blocks = cfg.value("block_out_channels", std::vector<int>{});
    const auto down   = cfg.value("down_block_types", std::vector<std::string>{});
    const auto up     = cfg.value("up_block_types", std::vector<std::string>{});
    const int layers  = cfg.value("layers_per_block", 2);
    if (blocks.empty() || down.size() != blocks.size() || up.size() != blocks.size()) {
        throw BackendError("unet config is missing block_out_channels / down_block_types / up_block_types");
    }
    const int nblocks = static_cast<int>(blocks.size());
    std::vector<int> depth(nblocks, 1);
    if (cfg.contains("transformer_layers_per_block")) {
        const auto& t = cfg["transformer_layers_per_block"];
        if (t.is_number_integer()) depth.assign(nblocks, t.get<int>());
        else depth = t.get<std::vector<int>>();
    }
    const int shrink = 1 << (nblocks - 1);
    if (latent.height % shrink != 0 || latent.width % shrink != 0) {
        throw InvalidInput("latent " + latent.str() + " is not divisible by " + std::to_string(shrink));
    }

    std::vector<AttentionSite> sites;
    auto add_transformer = [&](const std::string& prefix, int transformers, int d, Resolution r) {
        for (int a = 0; a < transformers; ++a) {
            for (int b = 0; b < d; ++b) {
                const std::string base = prefix + ".attentions." + std::to_string(a) + ".transformer_blocks." +
                                         std::to_string(b);
                sites.push_back({base + ".attn1", AttentionKind::Self, r});
                sites.push_back({base + ".attn2", AttentionKind::Cross, r});
            }
        }
    };
    auto is_cross = [](const std::string& type) { return type.find("CrossAttn") != std::string::npos; };

    for (int i = 0; i < nblocks; ++i) {
        if (!is_cross(down[i])) continue;
        add_transformer("down_blocks." + std::to_string(i), layers, depth[i], {latent.height >> i, latent.width >> i});
    }
    const std::string mid = cfg.value("mid_block_type", std::string("UNetMidBlock2DCrossAttn"));
    if (is_cross(mid)) {
        add_transformer("mid_block", 1, depth.back(),
                        {latent.height >> (nblocks - 1), latent.width >> (nblocks - 1)});
    }
    for (int j = 0; j < nblocks; ++j) {
        if (!is_cross(up[j])) continue;
        const int level = nblocks - 1 - j;
        add_transformer("up_blocks." + std::to_string(j), layers + 1, depth[level],
                        {latent.height >> level, latent.width >> level});
    }
    return sites;
}

class Ip2pDenoiser : public DenoiserAdapter {
public:
    Ip2pDenoiser(std::filesystem::path root, nlohmann::json unet_config)
        : root_(std::move(root)), unet_(std::move(unet_config)) {}

    [[nodiscard]] std::vector<AttentionSite> attention_sites(Resolution latent) const override {
        return enumerate_unet_sites(unet_, latent);
    }

    Latent predict(const DenoiseInput&, const HookSet&) override {
        throw BackendError("checkpoint at '" + root_.string() +
                           "' was validated, but this build has no UNet inference runtime; use --backend toy");
    }

    [[nodiscard]] std::string identity() const override { return "ip2p(" + root_.string() + ")"; }

private:
    std::filesystem::path root_;
    nlohmann::json unet_;
};

class Ip2pCodec : public LatentCodec {
public:
    Latent encode(const Image&) override { throw BackendError("VAE runtime not available in this build"); }
    Image decode(const Latent&) override { throw BackendError("VAE runtime not available in this build"); }
};

class Ip2pTextEncoder : public TextEncoder {
public:
    PromptEmbedding encode(std::string_view) override {
        throw BackendError("CLIP text encoder runtime not available in this build");
    }
    [[nodiscard]] int width() const override { return 768; }
    [[nodiscard]] std::string identity() const override { return "clip-vit-l/14"; }
};

/// Validate a local checkpoint and build adapters for it.
inline Backend real_backend_load(const std::string& model_ref, const std::string& device = "cpu") {
    namespace fs = std::filesystem;
    if (model_ref.empty()) throw BackendError(fetch_instructions("<unset>"));
    const fs::path root(model_ref);
    const fs::path unet_cfg = root / "unet" / "config.json";
    if (!fs::is_directory(root) || !fs::exists(root / "model_index.json") || !fs::exists(unet_cfg)) {
        throw BackendError(fetch_instructions(model_ref));
    }
    if (device != "cpu") {
        throw BackendError("device '" + device + "' is not available; only 'cpu' is supported by this build");
    }
    std::ifstream in(unet_cfg);
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("unreadable " + unet_cfg.string() + ": " + e.what());
    }
    if (cfg.value("in_channels", 0) != 8) {
        throw BackendError("unet in_channels is " + std::to_string(cfg.value("in_channels", 0)) +
                           "; an instruction-editing UNet takes 8 (noisy + image latent)");
    }
    Backend b;
    b.name     = "ip2p";
    b.denoiser = std::make_unique<Ip2pDenoiser>(root, std::move(cfg));
    b.codec    = std::make_unique<Ip2pCodec>();
    b.encoder  = std::make_unique<Ip2pTextEncoder>();
    return b;
}

}  // namespace regionedit::ip2p

namespace regionedit {

/// "toy" or "ip2p". The ip2p model path comes from the argument or REGIONEDIT_IP2P_MODEL.
inline Backend load_backend(const std::string& name, std::uint64_t seed = 0, std::string model_ref = {}) {
    if (name == "toy") return toy::make_backend(seed);
    if (name == "ip2p") {
        if (model_ref.empty()) {
            if (const char* env = std::getenv(ip2p::kModelEnv)) model_ref = env;
        }
        std::string device = "cpu";
        if (const char* env = std::getenv(ip2p::kDeviceEnv)) device = env;
        return ip2p::real_backend_load(model_ref, device);
    }
    throw InvalidInput("unknown backend '" + name + "' (expected toy or ip2p)");
}

}  // namespace regionedit
