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

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regionedit/attention_control.hpp"
#include "regionedit/backend.hpp"
#include "regionedit/mask_compositor.hpp"
#include "regionedit/prompt_packer.hpp"
#include "regionedit/schedule.hpp"

namespace regionedit {

struct SamplerConfig {
    int steps                     = 50;
    std::optional<int> blend_stop;  // unset: ceil(steps / 10)
    double text_scale             = 7.5;
    double image_scale            = 1.5;
    std::uint64_t seed            = 0;
    AttentionControlConfig control;

    /// Latent blending runs while t > blend_stop.
    [[nodiscard]] int resolved_blend_stop() const { return blend_stop ? *blend_stop : (steps + 9) / 10; }

    void validate() const {
        if (steps < 1 || steps > NoiseSchedule::kTrainSteps) throw InvalidInput("steps must be in [1, 1000]");
        const int s = resolved_blend_stop();
        if (s < 0 || s > steps) throw InvalidInput("blend_stop must be in [0, steps]");
        if (!(text_scale >= 0.0) || !(image_scale >= 0.0)) throw InvalidInput("guidance scales must be >= 0");
        control.validate();
    }
};

inline nlohmann::json to_json(const SamplerConfig& c) {
    return {{"steps", c.steps},
            {"blend_stop", c.resolved_blend_stop()},
            {"text_scale", c.text_scale},
            {"image_scale", c.image_scale},
            {"seed", c.seed},
            {"control", to_json(c.control)}};
}

struct EditPair {
    MaskSpec mask;
    std::string prompt;
};

struct EditRequest {
    Image image;
    std::vector<EditPair> pairs;
    SamplerConfig config;

    void validate() const {
        if (image.width <= 0 || image.height <= 0) throw InvalidInput("image is empty");
        if (pairs.empty()) throw InvalidInput("at least one mask-prompt pair is required");
        for (size_t i = 0; i < pairs.size(); ++i) {
            if (pairs[i].mask.raster.resolution() != image.resolution()) {
                throw InvalidInput("mask " + std::to_string(i) + " is " + pairs[i].mask.raster.resolution().str() +
                                   " but the image is " + image.resolution().str());
            }
        }
        config.validate();
    }

    [[nodiscard]] std::vector<MaskSpec> masks() const {
        std::vector<MaskSpec> out;
        for (size_t i = 0; i < pairs.size(); ++i) {
            out.push_back(pairs[i].mask);
            out.back().prompt_index = static_cast<int>(i) + 1;
        }
        return out;
    }

    [[nodiscard]] std::vector<std::string> prompts() const {
        std::vector<std::string> out;
        for (const auto& p : pairs) out.push_back(p.prompt);
        return out;
    }
};

/// Instruction-editing guidance: uu + s_I (iu - uu) + s_T (it - iu), written
/// so that s_I = s_T = 1 yields it and s_I = s_T = 0 yields uu exactly.
inline Latent cfg_combine(const Latent& eps_uu, const Latent& eps_iu, const Latent& eps_it, double image_scale,
                          double text_scale) {
    if (!eps_uu.same_shape(eps_iu) || !eps_uu.same_shape(eps_it)) {
        throw InvalidInput("guidance branches have mismatched shapes");
    }
    return Latent(eps_uu.res, (1.0 - image_scale) * eps_uu.values + (image_scale - text_scale) * eps_iu.values +
                                  text_scale * eps_it.values);
}

/// Keep z_next inside the mask; outside it, replace with the original latent
/// noised to t-1. No-op once t <= blend_stop.
inline Latent blend(const Latent& z_next, const Latent& z_orig, int t, const BinaryRaster& mask_latent, int blend_stop,
                    const NoiseSchedule& schedule, const NoiseStream& noise) {
    if (t <= blend_stop) return z_next;
    if (!z_next.same_shape(z_orig) || mask_latent.resolution() != z_next.res) {
        throw InvalidInput("blend inputs must share the latent resolution");
    }
    const Latent noised = forward_noise(z_orig, t - 1, schedule, noise);
    Latent out          = z_next;
    for (size_t p = 0; p < mask_latent.size(); ++p) {
        if (!mask_latent[p]) out.values.row(static_cast<Eigen::Index>(p)) = noised.values.row(static_cast<Eigen::Index>(p));
    }
    return out;
}

struct RunObserver {
    std::function<void(int completed, int total)> progress;
    /// After blending, with the latent for step t-1.
    std::function<void(int t, const Latent& z_prev, bool blended)> on_step;
    AttentionDump* dump = nullptr;
    WarningSink warn    = warn_to_stderr;
};

struct RunOptions {
    bool install_control = true;  // false: plain three-branch sampling, no attention control
    RunObserver observer;
};

struct EditStats {
    int denoiser_calls = 0;
    int blend_count    = 0;
    int blend_stop     = 0;
    std::vector<AttentionSite> sites;
    Resolution latent;
    double seconds = 0.0;
};

struct EditResult {
    Image image;
    EditStats stats;
};

/// Single-pass multi-region edit: every prompt is handled in the same
/// denoising loop, so the cost is three network calls per step for any
/// number of regions.
inline EditResult run_edit(const EditRequest& request, Backend& backend, const RunOptions& options = {}) {
    const auto started = std::chrono::steady_clock::now();
    request.validate();
    if (!backend.denoiser || !backend.codec || !backend.encoder) throw BackendError("backend is incomplete");
    const SamplerConfig& cfg = request.config;
    const RunObserver& obs   = options.observer;

    const Latent source_latent = backend.codec->encode(request.image);
    const Resolution latent    = source_latent.res;
    const int channels         = source_latent.channels();

    const auto prompts            = request.prompts();
    const PackedConditioning text = concat_prompts(encode_prompts(prompts, *backend.encoder, obs.warn));
    const PackedConditioning null_text = unconditional_packing(static_cast<int>(prompts.size()), *backend.encoder);

    const CompositeLabelMap clm = composite(request.masks());
    EditStats stats;
    stats.latent     = latent;
    stats.blend_stop = cfg.resolved_blend_stop();
    stats.sites      = backend.denoiser->attention_sites(latent);
    std::vector<Resolution> levels{latent};
    for (const auto& s : stats.sites) levels.push_back(s.res);
    const LabelPyramid pyramid = build_pyramid(clm, levels);
    const BinaryRaster& blend_mask = pyramid.at(latent).coverage;

    std::unique_ptr<ControlledDenoiser> controlled;
    DenoiserAdapter* model = backend.denoiser.get();
    if (options.install_control) {
        controlled = install_hooks(*backend.denoiser, latent, pyramid, text, cfg.control, obs.dump);
        model      = controlled.get();
    }

    const NoiseSchedule schedule = NoiseSchedule::scaled_linear(cfg.steps);
    const NoiseStream noise(cfg.seed);
    const Latent no_image(latent, channels);
    Latent z = noise.draw(cfg.steps, latent, channels);

    auto evaluate = [&](const Latent& image_latent, const PackedConditioning& cond, const StepContext& ctx) {
        ++stats.denoiser_calls;
        try {
            return model->predict(DenoiseInput{z, image_latent, cond, ctx}, {});
        } catch (const InvalidInput&) {
            throw;
        } catch (const std::exception& e) {
            throw BackendError("denoiser failed at step " + std::to_string(ctx.step) + " (" + branch_name(ctx.branch) +
                               "): " + e.what());
        }
    };

    for (int t = cfg.steps; t >= 1; --t) {
        StepContext ctx{t, schedule.alpha_bar(t), schedule.sigma(t), GuidanceBranch::Unconditional};
        const Latent eps_uu = evaluate(no_image, null_text, ctx);
        ctx.branch          = GuidanceBranch::ImageOnly;
        const Latent eps_iu = evaluate(source_latent, null_text, ctx);
        ctx.branch          = GuidanceBranch::ImageAndText;
        const Latent eps_it = evaluate(source_latent, text, ctx);
        const Latent eps    = cfg_combine(eps_uu, eps_iu, eps_it, cfg.image_scale, cfg.text_scale);

        const double ab = schedule.alpha_bar(t), ab_prev = schedule.alpha_bar(t - 1);
        const Matrix x0 = (z.values - std::sqrt(1.0 - ab) * eps.values) / std::sqrt(ab);
        Latent next(latent, std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps.values);
        if (!next.all_finite()) {
            throw BackendError("non-finite latent at step " + std::to_string(t) + " (max |eps| = " +
                               std::to_string(eps.values.cwiseAbs().maxCoeff()) + ")");
        }
        const bool blended = t > stats.blend_stop;
        if (blended) {
            next = blend(next, source_latent, t, blend_mask, stats.blend_stop, schedule, noise);
            ++stats.blend_count;
        }
        z = std::move(next);
        if (obs.on_step) obs.on_step(t, z, blended);
        if (obs.progress) obs.progress(cfg.steps - t + 1, cfg.steps);
    }

    EditResult result{backend.codec->decode(z), std::move(stats)};
    result.stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

/// Resolved configuration written next to an output image.
inline nlohmann::json describe_run(const EditRequest& request, const Backend& backend, const EditStats& stats) {
    nlohmann::json pairs = nlohmann::json::array();
    for (size_t i = 0; i < request.pairs.size(); ++i) {
        const auto& p = request.pairs[i];
        pairs.push_back({{"prompt_index", i + 1}, {"prompt", p.prompt}, {"order", p.mask.order}, {"group", p.mask.group_id}});
    }
    nlohmann::json sites = nlohmann::json::array();
    for (const auto& s : stats.sites) {
        sites.push_back({{"id", s.id}, {"kind", kind_name(s.kind)}, {"resolution", s.res.str()}});
    }
    return {{"backend", backend.name},
            {"denoiser", backend.denoiser ? backend.denoiser->identity() : ""},
            {"text_encoder", backend.encoder ? backend.encoder->identity() : ""},
            {"image", {{"width", request.image.width}, {"height", request.image.height}}},
            {"pairs", pairs},
            {"sampler", to_json(request.config)},
            {"latent", stats.latent.str()},
            {"attention_sites", sites},
            {"denoiser_calls", stats.denoiser_calls},
            {"blend_count", stats.blend_count}};
}

}  // namespace regionedit
