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

#include <functional>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "regionedit/common.hpp"

namespace regionedit {

inline constexpr int kTokensPerPrompt = 77;

enum class TokenRole : std::uint8_t { Sot, Content, Eot, Pad };

inline const char* role_name(TokenRole r) {
    switch (r) {
        case TokenRole::Sot: return "SOT";
        case TokenRole::Content: return "CONTENT";
        case TokenRole::Eot: return "EOT";
        case TokenRole::Pad: return "PAD";
    }
    return "?";
}

/// Fixed-length encoding of one prompt: 77 rows, one role per row.
struct PromptEmbedding {
    Matrix matrix;
    std::vector<TokenRole> roles;
    bool truncated = false;
};

/// Text encoder contract. Encodes a single prompt with no knowledge of any other.
class TextEncoder {
public:
    virtual ~TextEncoder()                                     = default;
    virtual PromptEmbedding encode(std::string_view prompt)    = 0;
    [[nodiscard]] virtual int width() const                    = 0;
    [[nodiscard]] virtual std::string identity() const         = 0;
};

struct TokenSpan {
    int begin = 0;
    int end   = 0;  // exclusive
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// All prompts laid end to end: (77 n) x d, plus the span each prompt occupies.
struct PackedConditioning {
    Matrix matrix;
    std::vector<TokenSpan> spans;
    std::vector<TokenRole> roles;

    [[nodiscard]] int prompts() const { return static_cast<int>(spans.size()); }
    [[nodiscard]] int tokens() const { return static_cast<int>(roles.size()); }
    /// 1-based prompt owning each token position.
    [[nodiscard]] std::vector<int> token_owners() const {
        std::vector<int> owner(roles.size(), 0);
        for (size_t i = 0; i < spans.size(); ++i) {
            for (int t = spans[i].begin; t < spans[i].end && t < static_cast<int>(owner.size()); ++t) {
                owner[t] = static_cast<int>(i) + 1;
            }
        }
        return owner;
    }
};

using WarningSink = std::function<void(const std::string&)>;

inline void warn_to_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

/// Throws InvalidInput unless roles are SOT, CONTENT*, EOT, PAD* over 77 rows.
inline void check_prompt_embedding(const PromptEmbedding& e) {
    if (e.matrix.rows() != kTokensPerPrompt || static_cast<int>(e.roles.size()) != kTokensPerPrompt) {
        throw InvalidInput("prompt embedding must have 77 rows");
    }
    if (e.roles[0] != TokenRole::Sot) throw InvalidInput("prompt embedding must start with SOT");
    int eot = -1;
    for (int i = 1; i < kTokensPerPrompt; ++i) {
        const TokenRole r = e.roles[i];
        if (r == TokenRole::Sot) throw InvalidInput("SOT only allowed at position 0");
        if (eot < 0) {
            if (r == TokenRole::Eot) eot = i;
            else if (r == TokenRole::Pad) throw InvalidInput("PAD before EOT");
        } else if (r != TokenRole::Pad) {
            throw InvalidInput("non-PAD token after EOT");
        }
    }
    if (eot < 0) throw InvalidInput("prompt embedding has no EOT");
}

/// Encode each prompt on its own; the result for prompt i never depends on the others.
inline std::vector<PromptEmbedding> encode_prompts(const std::vector<std::string>& prompts, TextEncoder& encoder,
                                                   const WarningSink& warn = warn_to_stderr) {
    if (prompts.empty()) throw InvalidInput("at least one prompt is required");
    std::vector<PromptEmbedding> out;
    out.reserve(prompts.size());
    for (size_t i = 0; i < prompts.size(); ++i) {
        try {
            out.push_back(encoder.encode(prompts[i]));
        } catch (const std::exception& e) {
            throw BackendError("text encoder failed on prompt " + std::to_string(i + 1) + ": " + e.what());
        }
        check_prompt_embedding(out.back());
        if (out.back().truncated && warn) {
            warn("prompt " + std::to_string(i + 1) + " exceeds " + std::to_string(kTokensPerPrompt) +
                 " tokens and was truncated");
        }
    }
    return out;
}

inline PackedConditioning concat_prompts(const std::vector<PromptEmbedding>& embeddings) {
    if (embeddings.empty()) throw InvalidInput("at least one embedding is required");
    const auto d = embeddings.front().matrix.cols();
    for (size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].matrix.cols() != d) {
            throw InvalidInput("embedding " + std::to_string(i) + " has width " +
                               std::to_string(embeddings[i].matrix.cols()) + ", expected " + std::to_string(d));
        }
        check_prompt_embedding(embeddings[i]);
    }
    const int n = static_cast<int>(embeddings.size());
    PackedConditioning packed;
    packed.matrix.resize(static_cast<Eigen::Index>(n) * kTokensPerPrompt, d);
    packed.roles.reserve(static_cast<size_t>(n) * kTokensPerPrompt);
    for (int i = 0; i < n; ++i) {
        packed.matrix.middleRows(static_cast<Eigen::Index>(i) * kTokensPerPrompt, kTokensPerPrompt) =
            embeddings[i].matrix;
        packed.spans.push_back({i * kTokensPerPrompt, (i + 1) * kTokensPerPrompt});
        packed.roles.insert(packed.roles.end(), embeddings[i].roles.begin(), embeddings[i].roles.end());
    }
    return packed;
}

/// Null conditioning shaped like an n-prompt packing: the empty prompt repeated n times.
inline PackedConditioning unconditional_packing(int n, TextEncoder& encoder) {
    if (n < 1) throw InvalidInput("unconditional packing needs n >= 1");
    const auto empty = encode_prompts({""}, encoder).front();
    return concat_prompts(std::vector<PromptEmbedding>(n, empty));
}

}  // namespace regionedit
