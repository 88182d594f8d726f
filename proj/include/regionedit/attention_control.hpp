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
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regionedit/backend.hpp"
#include "regionedit/mask_compositor.hpp"
#include "regionedit/prompt_packer.hpp"

namespace regionedit {

enum class BackgroundPolicy {
    SotPadOnly,    // background pixels see only SOT/PAD tokens
    Unrestricted,  // background pixels see every token
};

/// Region-restricted attention settings. The three enable flags are independent
/// ablation switches.
struct AttentionControlConfig {
    double boost_weight = 0.3;
    double neg_bias     = 1e4;  // blocked pairs get -neg_bias
    bool enable_cross   = true;
    bool enable_self    = true;
    bool enable_boost   = true;
    BackgroundPolicy background = BackgroundPolicy::SotPadOnly;
    std::vector<Resolution> resolutions;  // empty: every declared site

    void validate() const {
        if (!(neg_bias > 0.0) || !std::isfinite(neg_bias)) throw InvalidInput("neg_bias must be finite and > 0");
        if (!(boost_weight >= 0.0) || !std::isfinite(boost_weight)) throw InvalidInput("boost_weight must be >= 0");
    }

    [[nodiscard]] bool applies_at(Resolution r) const {
        if (resolutions.empty()) return true;
        return std::find(resolutions.begin(), resolutions.end(), r) != resolutions.end();
    }

    [[nodiscard]] bool any_enabled() const { return enable_cross || enable_self; }
};

inline nlohmann::json to_json(const AttentionControlConfig& c) {
    nlohmann::json res = nlohmann::json::array();
    for (const auto& r : c.resolutions) res.push_back(r.str());
    return {{"boost_weight", c.boost_weight},
            {"neg_bias", c.neg_bias},
            {"enable_cross", c.enable_cross},
            {"enable_self", c.enable_self},
            {"enable_boost", c.enable_boost},
            {"background", c.background == BackgroundPolicy::SotPadOnly ? "sot_pad_only" : "unrestricted"},
            {"resolutions", res}};
}

/// Paint-with-words style enhancement: w * log(1 + sigma) * max logit.
inline double boost_schedule(double w, double sigma, double logits_max) {
    if (w == 0.0) return 0.0;
    return w * std::log1p(sigma) * logits_max;
}

/// Pixel-to-token bias, P x 77n. Region-k rows keep span k (boosted on
/// CONTENT/EOT, 0 on SOT/PAD) and block every other span. boost[k-1] is the
/// lift for region k.
inline Matrix build_cross_bias(const LabelRaster& labels, const PackedConditioning& packed,
                               const AttentionControlConfig& cfg, const std::vector<double>& boost) {
    const int pixels = static_cast<int>(labels.size());
    const int tokens = packed.tokens();
    Matrix bias      = Matrix::Zero(pixels, tokens);
    if (!cfg.enable_cross) return bias;

    const double blocked = -cfg.neg_bias;
    const int n          = packed.prompts();
    if (static_cast<int>(boost.size()) != n) throw InvalidInput("need one boost value per prompt");
    const auto owner     = packed.token_owners();
    for (int p = 0; p < pixels; ++p) {
        const int k = labels[p];
        if (k < 0 || k > n) {
            throw InvalidInput("label " + std::to_string(k) + " references a prompt outside [1, " + std::to_string(n) +
                               "]");
        }
        for (int j = 0; j < tokens; ++j) {
            const TokenRole role = packed.roles[j];
            const bool neutral   = role == TokenRole::Sot || role == TokenRole::Pad;
            if (k == 0) {
                if (cfg.background == BackgroundPolicy::SotPadOnly && !neutral) bias(p, j) = blocked;
            } else if (owner[j] != k) {
                bias(p, j) = blocked;
            } else if (!neutral && cfg.enable_boost) {
                bias(p, j) = boost[k - 1];
            }
        }
    }
    return bias;
}

inline Matrix build_cross_bias(const LabelRaster& labels, const PackedConditioning& packed,
                               const AttentionControlConfig& cfg, double boost) {
    return build_cross_bias(labels, packed, cfg, std::vector<double>(packed.prompts(), boost));
}

/// Per-region lift: the schedule applied to the largest logit between a
/// region's pixels and its own span, so one region's prompt never changes
/// another region's bias.
inline std::vector<double> region_boosts(const Matrix& logits, const LabelRaster& labels,
                                         const PackedConditioning& packed, const AttentionControlConfig& cfg,
                                         double sigma) {
    const int n = packed.prompts();
    std::vector<double> top(n, 0.0);
    for (Eigen::Index p = 0; p < logits.rows(); ++p) {
        const int k = labels[p];
        if (k < 1 || k > n) continue;
        const TokenSpan& span = packed.spans[k - 1];
        top[k - 1] = std::max(top[k - 1], logits.row(p).segment(span.begin, span.end - span.begin).maxCoeff());
    }
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) out[k] = boost_schedule(cfg.boost_weight, sigma, top[k]);
    return out;
}

/// Pixel-to-pixel bias, P x P. A region pixel may not attend to pixels of a
/// different group; background is visible to everyone and sees everything.
inline Matrix build_self_bias(const LabelRaster& groups, const AttentionControlConfig& cfg) {
    const int pixels = static_cast<int>(groups.size());
    Matrix bias      = Matrix::Zero(pixels, pixels);
    if (!cfg.enable_self) return bias;
    const double blocked = -cfg.neg_bias;
    for (int q = 0; q < pixels; ++q) {
        const int gq = groups[q];
        if (gq == 0) continue;
        for (int k = 0; k < pixels; ++k) {
            const int gk = groups[k];
            if (gk != 0 && gk != gq) bias(q, k) = blocked;
        }
    }
    return bias;
}

/// Receives per-site summaries; one JSON object per line.
class AttentionDump {
public:
    explicit AttentionDump(std::ostream& os) : os_(os) {}
    void write(const nlohmann::json& record) {
        std::lock_guard lock(mu_);
        os_ << record.dump() << '\n';
    }

private:
    std::ostream& os_;
    std::mutex mu_;
};

/// Wraps a denoiser and biases its attention sites according to the region
/// layout. Cross-attention control acts on the text-conditional branch only;
/// self-attention control acts on every branch.
class ControlledDenoiser : public DenoiserAdapter {
public:
    ControlledDenoiser(DenoiserAdapter& inner, Resolution latent, LabelPyramid pyramid, const PackedConditioning& packed,
                       AttentionControlConfig cfg, AttentionDump* dump = nullptr)
        : inner_(inner), pyramid_(std::move(pyramid)), cfg_(std::move(cfg)), dump_(dump) {
        cfg_.validate();
        layout_.spans = packed.spans;
        layout_.roles = packed.roles;
        for (const auto& site : inner_.attention_sites(latent)) {
            if (!cfg_.applies_at(site.res)) continue;
            const PyramidLevel* level = pyramid_.find(site.res);
            if (!level) {
                throw InvalidInput("attention site '" + site.id + "' at " + site.res.str() +
                                   " has no label pyramid level");
            }
            if (site.kind == AttentionKind::Self && !self_bias_.count(site.res)) {
                self_bias_.emplace(site.res, build_self_bias(level->groups, cfg_));
            }
        }
    }

    [[nodiscard]] std::vector<AttentionSite> attention_sites(Resolution latent) const override {
        return inner_.attention_sites(latent);
    }

    Latent predict(const DenoiseInput& in, const HookSet& hooks) override {
        if (!cfg_.any_enabled()) return inner_.predict(in, hooks);
        Hook hook(*this);
        HookSet all{&hook};
        all.insert(all.end(), hooks.begin(), hooks.end());
        return inner_.predict(in, all);
    }

    [[nodiscard]] std::string identity() const override { return inner_.identity() + "+control"; }

    [[nodiscard]] const AttentionControlConfig& config() const { return cfg_; }
    [[nodiscard]] const LabelPyramid& pyramid() const { return pyramid_; }

private:
    class Hook : public AttentionHook {
    public:
        explicit Hook(ControlledDenoiser& owner) : owner_(owner) {}

        void adjust_logits(const AttentionSite& site, const StepContext& ctx, Matrix& logits) override {
            const auto& cfg = owner_.cfg_;
            last_site_.clear();
            if (!cfg.applies_at(site.res)) return;
            const PyramidLevel& level = owner_.pyramid_.at(site.res);
            if (logits.rows() != level.res.pixels()) {
                throw BackendError("site '" + site.id + "' has " + std::to_string(logits.rows()) +
                                   " queries but the label level has " + std::to_string(level.res.pixels()));
            }
            if (site.kind == AttentionKind::Self) {
                if (!cfg.enable_self) return;
                const Matrix& bias = owner_.self_bias_.at(site.res);
                logits += bias;
                remember(site, bias, 0.0);
            } else {
                if (!cfg.enable_cross || ctx.branch != GuidanceBranch::ImageAndText) return;
                if (logits.cols() != owner_.layout_.tokens()) {
                    throw BackendError("site '" + site.id + "' has " + std::to_string(logits.cols()) +
                                       " keys, expected " + std::to_string(owner_.layout_.tokens()));
                }
                const auto boost = region_boosts(logits, level.labels, owner_.layout_, cfg, ctx.sigma);
                Matrix bias      = build_cross_bias(level.labels, owner_.layout_, cfg, boost);
                logits += bias;
                remember(site, std::move(bias), *std::max_element(boost.begin(), boost.end()));
            }
        }

        void observe_probs(const AttentionSite& site, const StepContext& ctx, const Matrix& probs) override {
            if (!owner_.dump_ || last_site_ != site.id) return;
            const double threshold = -0.5 * owner_.cfg_.neg_bias;
            double leak = 0.0, row_err = 0.0;
            for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                double mass = 0.0;
                for (Eigen::Index c = 0; c < probs.cols(); ++c) {
                    if ((*last_bias_)(r, c) < threshold) mass += probs(r, c);
                }
                leak    = std::max(leak, mass);
                row_err = std::max(row_err, std::abs(probs.row(r).sum() - 1.0));
            }
            const Matrix& b = *last_bias_;
            const double blocked_fraction =
                static_cast<double>((b.array() < threshold).count()) / static_cast<double>(std::max<Eigen::Index>(b.size(), 1));
            owner_.dump_->write({{"step", ctx.step},
                                 {"branch", branch_name(ctx.branch)},
                                 {"site", site.id},
                                 {"kind", kind_name(site.kind)},
                                 {"resolution", site.res.str()},
                                 {"boost", last_boost_},
                                 {"bias_min", b.size() ? b.minCoeff() : 0.0},
                                 {"bias_max", b.size() ? b.maxCoeff() : 0.0},
                                 {"blocked_fraction", blocked_fraction},
                                 {"max_leak_mass", leak},
                                 {"max_row_sum_error", row_err}});
        }

    private:
        void remember(const AttentionSite& site, Matrix bias, double boost) {
            if (!owner_.dump_) return;
            last_site_  = site.id;
            owned_bias_ = std::move(bias);
            last_bias_  = &owned_bias_;
            last_boost_ = boost;
        }

        ControlledDenoiser& owner_;
        std::string last_site_;
        Matrix owned_bias_;
        const Matrix* last_bias_ = nullptr;
        double last_boost_       = 0.0;
    };

    DenoiserAdapter& inner_;
    LabelPyramid pyramid_;
    AttentionControlConfig cfg_;
    AttentionDump* dump_ = nullptr;
    PackedConditioning layout_;  // spans and roles only
    std::map<Resolution, Matrix> self_bias_;
};

/// Install region control on a denoiser for one editing run.
inline std::unique_ptr<ControlledDenoiser> install_hooks(DenoiserAdapter& adapter, Resolution latent,
                                                         const LabelPyramid& pyramid, const PackedConditioning& packed,
                                                         const AttentionControlConfig& cfg,
                                                         AttentionDump* dump = nullptr) {
    return std::make_unique<ControlledDenoiser>(adapter, latent, pyramid, packed, cfg, dump);
}

}  // namespace regionedit
