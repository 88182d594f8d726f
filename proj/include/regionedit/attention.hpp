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

#include "regionedit/common.hpp"

namespace regionedit {

/// Row-wise numerically stable softmax.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        out.row(r)     = (logits.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

inline Matrix scaled_scores(const Matrix& q, const Matrix& k) {
    return (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
}

/// softmax(Q K^T / sqrt(d_k) + bias) V
inline Matrix biased_attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& bias) {
    if (q.cols() != k.cols()) throw InvalidInput("Q and K must share d_k");
    if (k.rows() != v.rows()) throw InvalidInput("K and V must have the same number of rows");
    if (bias.rows() != q.rows() || bias.cols() != k.rows()) {
        throw InvalidInput("bias must be " + std::to_string(q.rows()) + "x" + std::to_string(k.rows()));
    }
    if (bias.array().isNaN().any()) throw InvalidInput("bias contains NaN");
    Matrix logits = scaled_scores(q, k);
    logits += bias;
    return softmax_rows(logits) * v;
}

}  // namespace regionedit
