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

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "regionedit/common.hpp"

namespace regionedit {

/// Cumulative signal fractions abar_t for t = 0..T. abar_0 is exactly 1 and
/// the sequence strictly decreases.
class NoiseSchedule {
public:
    static constexpr int kTrainSteps     = 1000;
    static constexpr double kBetaStart   = 0.00085;
    static constexpr double kBetaEnd     = 0.012;

    /// Scaled-linear betas over 1000 training steps, subsampled to T steps.
    static NoiseSchedule scaled_linear(int steps) {
        if (steps < 1 || steps > kTrainSteps) throw InvalidInput("steps must be in [1, 1000]");
        std::vector<double> cumprod(kTrainSteps);
        const double a = std::sqrt(kBetaStart), b = std::sqrt(kBetaEnd);
        double acc     = 1.0;
        for (int i = 0; i < kTrainSteps; ++i) {
            const double s    = a + (b - a) * i / (kTrainSteps - 1);
            acc *= 1.0 - s * s;
            cumprod[i] = acc;
        }
        std::vector<double> abar(steps + 1);
        abar[0] = 1.0;
        for (int t = 1; t <= steps; ++t) abar[t] = cumprod[static_cast<size_t>(t) * kTrainSteps / steps - 1];
        return NoiseSchedule(std::move(abar));
    }

    explicit NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
        if (alpha_bar_.size() < 2) throw InvalidInput("schedule needs at least one step");
        if (std::abs(alpha_bar_[0] - 1.0) > 1e-4) throw InvalidInput("abar_0 must be 1");
        for (size_t t = 1; t < alpha_bar_.size(); ++t) {
            if (!(alpha_bar_[t] < alpha_bar_[t - 1]) || !(alpha_bar_[t] >= 0.0)) {
                throw InvalidInput("abar must strictly decrease within [0, 1]");
            }
        }
    }

    [[nodiscard]] int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    [[nodiscard]] double alpha_bar(int t) const { return alpha_bar_.at(static_cast<size_t>(t)); }
    /// Noise level in variance-exploding units.
    [[nodiscard]] double sigma(int t) const {
        const double ab = alpha_bar(t);
        return std::sqrt((1.0 - ab) / ab);
    }
    [[nodiscard]] const std::vector<double>& values() const { return alpha_bar_; }

private:
    std::vector<double> alpha_bar_;
};

/// Gaussian noise addressed by (seed, t): the draw for a step does not depend
/// on which other steps were drawn before it.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

    [[nodiscard]] Matrix draw(int t, Eigen::Index rows, Eigen::Index cols) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(t), 0x9e3779b9u};
        std::mt19937_64 gen(seq);
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(gen);
        return m;
    }

    [[nodiscard]] Latent draw(int t, Resolution res, int channels) const {
        return Latent(res, draw(t, res.pixels(), channels));
    }

    [[nodiscard]] std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

/// Sample q(z_t | z): sqrt(abar_t) z + sqrt(1 - abar_t) eps.
inline Latent forward_noise(const Latent& z, int t, const NoiseSchedule& schedule, const NoiseStream& noise) {
    if (t < 0 || t > schedule.steps()) {
        throw InvalidInput("step " + std::to_string(t) + " outside [0, " + std::to_string(schedule.steps()) + "]");
    }
    const double ab = schedule.alpha_bar(t);
    if (ab == 1.0) return z;
    const Matrix eps = noise.draw(t, z.values.rows(), z.values.cols());
    if (ab == 0.0) return Latent(z.res, eps);
    return Latent(z.res, std::sqrt(ab) * z.values + std::sqrt(1.0 - ab) * eps);
}

}  // namespace regionedit
