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

#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "regionedit/sampler.hpp"
#include "regionedit/toy_backend.hpp"
#include "test_util.hpp"

using namespace regionedit;
using testutil::Gen;

namespace {

/// Wraps another denoiser and counts forward passes.
class CountingDenoiser : public DenoiserAdapter {
public:
    explicit CountingDenoiser(std::unique_ptr<DenoiserAdapter> inner) : inner_(std::move(inner)) {}
    [[nodiscard]] std::vector<AttentionSite> attention_sites(Resolution r) const override {
        return inner_->attention_sites(r);
    }
    Latent predict(const DenoiseInput& in, const HookSet& hooks) override {
        ++calls[in.ctx.branch];
        return inner_->predict(in, hooks);
    }
    [[nodiscard]] std::string identity() const override { return inner_->identity(); }

    std::map<GuidanceBranch, int> calls;

private:
    std::unique_ptr<DenoiserAdapter> inner_;
};

/// Returns a fixed value, or throws, from a chosen step on.
class BrokenDenoiser : public DenoiserAdapter {
public:
    BrokenDenoiser(int from_step, bool nan) : from_(from_step), nan_(nan) {}
    [[nodiscard]] std::vector<AttentionSite> attention_sites(Resolution) const override { return {}; }
    Latent predict(const DenoiseInput& in, const HookSet&) override {
        if (in.ctx.step <= from_) {
            if (!nan_) throw std::runtime_error("device lost");
            return Latent(in.noisy.res, Matrix::Constant(in.noisy.values.rows(), in.noisy.values.cols(), NAN));
        }
        return Latent(in.noisy.res, in.noisy.channels());
    }
    [[nodiscard]] std::string identity() const override { return "broken"; }

private:
    int from_;
    bool nan_;
};

Backend with_denoiser(std::unique_ptr<DenoiserAdapter> d) {
    Backend b  = toy::make_backend();
    b.denoiser = std::move(d);
    return b;
}

EditRequest single_full_mask(int steps = 6) {
    EditRequest req;
    req.image = testutil::gradient_image(32, 32);
    req.pairs.push_back({MaskSpec{BinaryRaster(32, 32, 1), 0, 1, 1}, "make it red"});
    req.config.steps = steps;
    return req;
}

}  // namespace

TEST(NoiseSchedule, ScaledLinearInvariants) {
    for (int steps : {1, 10, 50, 1000}) {
        const auto s = NoiseSchedule::scaled_linear(steps);
        ASSERT_EQ(s.steps(), steps);
        EXPECT_EQ(s.alpha_bar(0), 1.0);
        EXPECT_EQ(s.sigma(0), 0.0);
        for (int t = 1; t <= steps; ++t) {
            EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
            EXPECT_GT(s.alpha_bar(t), 0.0);
        }
    }
    // Final training-step value of the scaled-linear schedule.
    EXPECT_NEAR(NoiseSchedule::scaled_linear(50).alpha_bar(50), 0.0046600985, 1e-9);
    EXPECT_THROW(NoiseSchedule::scaled_linear(0), InvalidInput);
    EXPECT_THROW(NoiseSchedule({1.0, 0.5, 0.6}), InvalidInput);
    EXPECT_THROW(NoiseSchedule({0.9, 0.5}), InvalidInput);
}

TEST(NoiseStream, KeyedBySeedAndStep) {
    const NoiseStream a(5), b(5), c(6);
    EXPECT_EQ(a.draw(3, 4, 4), b.draw(3, 4, 4));
    EXPECT_NE(a.draw(3, 4, 4), a.draw(4, 4, 4));
    EXPECT_NE(a.draw(3, 4, 4), c.draw(3, 4, 4));
    (void)a.draw(9, 2, 2);
    EXPECT_EQ(a.draw(3, 4, 4), b.draw(3, 4, 4));
}

TEST(ForwardNoise, EndpointsAndRange) {
    const NoiseSchedule s({1.0, 0.25, 0.0});
    const NoiseStream noise(1);
    const Latent z({2, 2}, Gen(2).matrix(4, 3));
    EXPECT_EQ(forward_noise(z, 0, s, noise).values, z.values);
    EXPECT_EQ(forward_noise(z, 2, s, noise).values, noise.draw(2, 4, 3));
    EXPECT_THROW(forward_noise(z, 3, s, noise), InvalidInput);
    EXPECT_THROW(forward_noise(z, -1, s, noise), InvalidInput);
}

TEST(ForwardNoise, ZeroLatentHasVarianceOneMinusAlphaBar) {
    const NoiseSchedule s({1.0, 0.25});
    const NoiseStream noise(77);
    const Latent z({100, 100}, 1);
    const Latent out = forward_noise(z, 1, s, noise);
    EXPECT_TRUE(out.values.isApprox(std::sqrt(0.75) * noise.draw(1, 10000, 1)));
    const double mean = out.values.mean();
    const double var  = (out.values.array() - mean).square().sum() / (out.values.size() - 1);
    EXPECT_NEAR(var, 0.75, 0.75 * 0.05);
}

TEST(CfgCombine, Endpoints) {
    Gen g(3);
    const Latent uu({2, 3}, g.matrix(6, 4)), iu({2, 3}, g.matrix(6, 4)), it({2, 3}, g.matrix(6, 4));
    EXPECT_EQ(cfg_combine(uu, iu, it, 1.0, 1.0).values, it.values);
    EXPECT_EQ(cfg_combine(uu, iu, it, 0.0, 0.0).values, uu.values);
}

TEST(CfgCombine, MatchesTermByTermFormula) {
    Gen g(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Latent uu({3, 3}, g.matrix(9, 5)), iu({3, 3}, g.matrix(9, 5)), it({3, 3}, g.matrix(9, 5));
        const Latent out = cfg_combine(uu, iu, it, 1.5, 7.5);
        for (Eigen::Index i = 0; i < out.values.size(); ++i) {
            const double u = uu.values.data()[i], a = iu.values.data()[i], b = it.values.data()[i];
            EXPECT_NEAR(out.values.data()[i], u + 1.5 * (a - u) + 7.5 * (b - a), 1e-6);
        }
    }
}

TEST(CfgCombine, RejectsShapeMismatch) {
    const Latent a({2, 2}, 3), b({2, 2}, 4);
    EXPECT_THROW(cfg_combine(a, a, b, 1.0, 1.0), InvalidInput);
}

TEST(Blend, GuardAndMaskCases) {
    Gen g(5);
    const auto s = NoiseSchedule::scaled_linear(10);
    const NoiseStream noise(9);
    const Latent next({2, 3}, g.matrix(6, 4)), orig({2, 3}, g.matrix(6, 4));
    EXPECT_EQ(blend(next, orig, 7, BinaryRaster(2, 3, 1), 1, s, noise).values, next.values);
    EXPECT_EQ(blend(next, orig, 3, BinaryRaster(2, 3, 0), 3, s, noise).values, next.values);

    const NoiseStream replay(9);
    const Latent expected = forward_noise(orig, 6, s, replay);
    EXPECT_EQ(blend(next, orig, 7, BinaryRaster(2, 3, 0), 1, s, noise).values, expected.values);

    BinaryRaster half(2, 3, 0);
    half(0, 0) = half(1, 2) = 1;
    const Latent mixed = blend(next, orig, 7, half, 1, s, noise);
    for (int p = 0; p < 6; ++p) {
        EXPECT_EQ(mixed.values.row(p), half[p] ? next.values.row(p) : expected.values.row(p));
    }
}

TEST(SamplerConfig, DefaultsAndValidation) {
    SamplerConfig c;
    EXPECT_EQ(c.steps, 50);
    EXPECT_EQ(c.resolved_blend_stop(), 5);
    c.steps = 7;
    EXPECT_EQ(c.resolved_blend_stop(), 1);
    c.blend_stop = 8;
    EXPECT_THROW(c.validate(), InvalidInput);
    c.blend_stop = -1;
    EXPECT_THROW(c.validate(), InvalidInput);
    c.blend_stop = 0;
    c.text_scale = -1.0;
    EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(RunEdit, SingleFullMaskZeroBoostEqualsUncontrolledLoop) {
    EditRequest req                 = single_full_mask();
    req.config.control.boost_weight = 0.0;
    Backend a = toy::make_backend(), b = toy::make_backend();
    RunOptions plain;
    plain.install_control = false;
    EXPECT_EQ(run_edit(req, a).image, run_edit(req, b, plain).image);
}

TEST(RunEdit, ThreeCallsPerStepForAnyRegionCount) {
    for (int n : {1, 2, 4}) {
        EditRequest req;
        req.image        = testutil::gradient_image(64, 64);
        req.config.steps = 5;
        for (int i = 0; i < n; ++i) {
            req.pairs.push_back({MaskSpec{testutil::block_mask(64, 64, 16 * i, 0, 16 * i + 16, 64), i, i + 1, i + 1},
                                 "prompt " + std::to_string(i)});
        }
        auto counter      = std::make_unique<CountingDenoiser>(std::make_unique<toy::ToyDenoiser>());
        auto* probe       = counter.get();
        Backend backend   = with_denoiser(std::move(counter));
        const auto result = run_edit(req, backend);
        EXPECT_EQ(result.stats.denoiser_calls, 15) << n;
        for (auto branch : {GuidanceBranch::Unconditional, GuidanceBranch::ImageOnly, GuidanceBranch::ImageAndText}) {
            EXPECT_EQ(probe->calls[branch], 5) << n;
        }
    }
}

TEST(RunEdit, FullBlendingKeepsBackgroundPixels) {
    EditRequest req       = testutil::two_region_request(8);
    req.config.blend_stop = 0;
    Backend backend       = toy::make_backend();
    const auto result     = run_edit(req, backend);
    EXPECT_EQ(result.stats.blend_count, 8);
    int background = 0, changed_inside = 0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            for (int c = 0; c < 3; ++c) {
                if (testutil::in_background_cell(req, y, x)) {
                    ++background;
                    EXPECT_EQ(result.image.at(y, x, c), req.image.at(y, x, c));
                } else if (result.image.at(y, x, c) != req.image.at(y, x, c)) {
                    ++changed_inside;
                }
            }
        }
    }
    EXPECT_GT(background, 0);
    EXPECT_GT(changed_inside, 0);
}

TEST(RunEdit, BlendStopAtTNeverBlends) {
    EditRequest req       = testutil::two_region_request(4);
    req.config.blend_stop = 4;
    Backend backend       = toy::make_backend();
    EXPECT_EQ(run_edit(req, backend).stats.blend_count, 0);
}

TEST(RunEdit, SameRequestSameImage) {
    const EditRequest req = testutil::two_region_request(6);
    Backend a = toy::make_backend(), b = toy::make_backend();
    EXPECT_EQ(run_edit(req, a).image, run_edit(req, b).image);
    EditRequest other = req;
    other.config.seed = 1;
    EXPECT_NE(run_edit(req, a).image, run_edit(other, b).image);
}

TEST(RunEdit, ChangingOnePromptOnlyMovesItsRegion) {
    EditRequest a   = testutil::two_region_request(10);
    EditRequest b   = a;
    b.pairs[1].prompt = "paint a green striped umbrella";
    auto trace = [](const EditRequest& req) {
        std::map<int, Latent> steps;
        RunOptions opt;
        opt.observer.on_step = [&](int t, const Latent& z, bool blended) {
            if (blended) steps[t] = z;
        };
        Backend backend = toy::make_backend();
        run_edit(req, backend, opt);
        return steps;
    };
    const auto ta = trace(a), tb = trace(b);
    ASSERT_EQ(ta.size(), 9u);
    const auto clm      = composite(a.masks());
    const auto& cells   = build_pyramid(clm, {{8, 8}}).levels.front().labels;
    bool region_changed = false;
    for (const auto& [t, za] : ta) {
        const Latent& zb = tb.at(t);
        for (int p = 0; p < za.res.pixels(); ++p) {
            if (cells[p] == 2) {
                region_changed = region_changed || za.values.row(p) != zb.values.row(p);
            } else {
                EXPECT_EQ(za.values.row(p), zb.values.row(p)) << "t=" << t << " cell " << p;
            }
        }
    }
    EXPECT_TRUE(region_changed);
}

TEST(RunEdit, RejectsInvalidRequests) {
    Backend backend = toy::make_backend();
    EditRequest empty;
    empty.image = testutil::gradient_image(32, 32);
    EXPECT_THROW(run_edit(empty, backend), InvalidInput);
    EditRequest wrong = single_full_mask();
    wrong.pairs[0].mask.raster = BinaryRaster(16, 32, 1);
    EXPECT_THROW(run_edit(wrong, backend), InvalidInput);
    EditRequest odd = single_full_mask();
    odd.image       = testutil::gradient_image(36, 32);
    odd.pairs[0].mask.raster = BinaryRaster(32, 36, 1);
    EXPECT_THROW(run_edit(odd, backend), InvalidInput);
}

TEST(RunEdit, BackendFailureReportsStep) {
    Backend backend = with_denoiser(std::make_unique<BrokenDenoiser>(4, false));
    try {
        run_edit(single_full_mask(6), backend);
        FAIL() << "expected a backend error";
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("step 4"), std::string::npos) << e.what();
    }
}

TEST(RunEdit, NonFiniteLatentAborts) {
    Backend backend = with_denoiser(std::make_unique<BrokenDenoiser>(3, true));
    try {
        run_edit(single_full_mask(6), backend);
        FAIL() << "expected a backend error";
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite latent at step 3"), std::string::npos) << e.what();
    }
}

TEST(RunEdit, ProgressIsReportedEveryStep) {
    std::vector<int> seen;
    RunOptions opt;
    opt.observer.progress = [&](int done, int total) {
        EXPECT_EQ(total, 4);
        seen.push_back(done);
    };
    Backend backend = toy::make_backend();
    run_edit(single_full_mask(4), backend, opt);
    EXPECT_EQ(seen, (std::vector<int>{1, 2, 3, 4}));
}

TEST(DescribeRun, RecordsResolvedConfig) {
    EditRequest req = testutil::two_region_request(3);
    Backend backend = toy::make_backend();
    const auto res  = run_edit(req, backend);
    const auto j    = describe_run(req, backend, res.stats);
    EXPECT_EQ(j["sampler"]["steps"], 3);
    EXPECT_EQ(j["sampler"]["blend_stop"], 1);
    EXPECT_EQ(j["denoiser_calls"], 9);
    EXPECT_EQ(j["pairs"].size(), 2u);
    EXPECT_EQ(j["attention_sites"].size(), 4u);
}
