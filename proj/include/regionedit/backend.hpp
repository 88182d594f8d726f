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
#include <memory>
#include <string>
#include <vector>

#include "regionedit/attention.hpp"
#include "regionedit/common.hpp"
#include "regionedit/prompt_packer.hpp"

namespace regionedit {

enum class AttentionKind { Cross, Self };

inline const char* kind_name(AttentionKind k) { return k == AttentionKind::Cross ? "cross" : "self"; }

struct AttentionSite {
    std::string id;
    AttentionKind kind = AttentionKind::Self;
    Resolution res;
};

/// The three classifier-free guidance evaluations of an instruction-editing model.
enum class GuidanceBranch {
    Unconditional,  // no image, no text
    ImageOnly,      // image, no text
    ImageAndText,   // image and text
};

inline const char* branch_name(GuidanceBranch b) {
    switch (b) {
        case GuidanceBranch::Unconditional: return "uncond";
        case GuidanceBranch::ImageOnly: return "image";
        case GuidanceBranch::ImageAndText: return "image+text";
    }
    return "?";
}

struct StepContext {
    int step         = 0;
    double alpha_bar = 1.0;
    double sigma     = 0.0;
    GuidanceBranch branch = GuidanceBranch::ImageAndText;
};

/// Called at every attention site of a forward pass. Hooks may add to the
/// pre-softmax logits and may observe the resulting probabilities.
class AttentionHook {
public:
    virtual ~AttentionHook() = default;
    virtual void adjust_logits(const AttentionSite&, const StepContext&, Matrix& /*logits*/) {}
    virtual void observe_probs(const AttentionSite&, const StepContext&, const Matrix& /*probs*/) {}
};

/// Non-owning, applied in order.
using HookSet = std::vector<AttentionHook*>;

/// Attention as performed at a hookable site. With no hooks the logits are
/// used untouched.
inline Matrix hooked_attention(const AttentionSite& site, const StepContext& ctx, const Matrix& q, const Matrix& k,
                               const Matrix& v, const HookSet& hooks) {
    Matrix logits = scaled_scores(q, k);
    for (auto* h : hooks) h->adjust_logits(site, ctx, logits);
    const Matrix probs = softmax_rows(logits);
    for (auto* h : hooks) h->observe_probs(site, ctx, probs);
    return probs * v;
}

struct DenoiseInput {
    const Latent& noisy;
    const Latent& image_latent;
    const PackedConditioning& conditioning;
    StepContext ctx;
};

/// Noise-prediction network contract.
class DenoiserAdapter {
public:
    virtual ~DenoiserAdapter() = default;
    /// Attention sites exercised by one forward pass at the given latent size.
    [[nodiscard]] virtual std::vector<AttentionSite> attention_sites(Resolution latent) const = 0;
    virtual Latent predict(const DenoiseInput& in, const HookSet& hooks) = 0;
    [[nodiscard]] virtual std::string identity() const = 0;
};

/// Image <-> latent. Latents are 8x smaller spatially.
class LatentCodec {
public:
    virtual ~LatentCodec()                         = default;
    virtual Latent encode(const Image& image)      = 0;
    virtual Image decode(const Latent& latent)     = 0;
    [[nodiscard]] virtual int downscale() const { return 8; }
};

struct Backend {
    std::string name;
    std::unique_ptr<DenoiserAdapter> denoiser;
    std::unique_ptr<LatentCodec> codec;
    std::unique_ptr<TextEncoder> encoder;
};

inline const AttentionSite* find_site(const std::vector<AttentionSite>& sites, const std::string& id) {
    auto it = std::find_if(sites.begin(), sites.end(), [&](const auto& s) { return s.id == id; });
    return it == sites.end() ? nullptr : &*it;
}

/// Records the post-softmax matrix of one site.
class ProbeHook : public AttentionHook {
public:
    explicit ProbeHook(std::string site_id) : site_id_(std::move(site_id)) {}
    void observe_probs(const AttentionSite& site, const StepContext&, const Matrix& probs) override {
        if (site.id == site_id_) {
            probs_ = probs;
            ++hits_;
        }
    }
    [[nodiscard]] const Matrix& probs() const { return probs_; }
    [[nodiscard]] int hits() const { return hits_; }

private:
    std::string site_id_;
    Matrix probs_;
    int hits_ = 0;
};

/// Counts how many times each site fires.
class SiteCounter : public AttentionHook {
public:
    void observe_probs(const AttentionSite& site, const StepContext&, const Matrix&) override {
        auto it = std::find(seen_.begin(), seen_.end(), site.id);
        if (it == seen_.end()) seen_.push_back(site.id);
        ++calls_;
    }
    [[nodiscard]] int distinct() const { return static_cast<int>(seen_.size()); }
    [[nodiscard]] int calls() const { return calls_; }

private:
    std::vector<std::string> seen_;
    int calls_ = 0;
};

/// Run one forward pass and return the row-stochastic attention of a site.
inline Matrix probe_attention(DenoiserAdapter& adapter, const std::string& site_id, const DenoiseInput& in,
                              HookSet extra_hooks = {}) {
    const auto sites = adapter.attention_sites(in.noisy.res);
    if (!find_site(sites, site_id)) throw InvalidInput("unknown attention site '" + site_id + "'");
    ProbeHook probe(site_id);
    extra_hooks.push_back(&probe);
    adapter.predict(in, extra_hooks);
    if (probe.hits() == 0) throw BackendError("attention site '" + site_id + "' did not fire");
    return probe.probs();
}

}  // namespace regionedit
