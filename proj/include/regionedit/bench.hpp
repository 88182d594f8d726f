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
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "regionedit/ip2p_backend.hpp"
#include "regionedit/png_io.hpp"
#include "regionedit/sampler.hpp"
#include "regionedit/toy_backend.hpp"

namespace regionedit::bench {

namespace fs = std::filesystem;
using nlohmann::json;

struct CaseEdit {
    fs::path mask;
    std::string prompt;
    int order = 0;
    int group = 1;
};

/// One benchmark sample: an image and its mask-prompt pairs.
struct BenchCase {
    std::string id;
    fs::path dir;
    fs::path image;
    std::vector<CaseEdit> edits;
    json sampler_overrides = json::object();
};

struct CaseError {
    std::string case_dir;
    std::string pointer;  // JSON pointer into case.json
    std::string message;
};

struct CaseSet {
    std::vector<BenchCase> cases;
    std::vector<CaseError> errors;
};

namespace detail {

struct SchemaError {
    std::string pointer;
    std::string message;
};

inline const json& require(const json& obj, const std::string& key, json::value_t type, const std::string& at) {
    if (!obj.contains(key)) throw SchemaError{at + "/" + key, "missing required field"};
    const json& v = obj[key];
    const bool ok = type == json::value_t::number_integer ? v.is_number_integer() : v.type() == type;
    if (!ok) throw SchemaError{at + "/" + key, std::string("expected ") + json(type).type_name()};
    return v;
}

inline Resolution png_size(const fs::path& p) {
    const auto gray = png::decode_gray(png::read_file(p));
    return gray.resolution();
}

inline BenchCase parse_case(const fs::path& dir) {
    json doc;
    {
        std::ifstream in(dir / "case.json");
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw SchemaError{"", std::string("invalid JSON: ") + e.what()};
        }
    }
    if (!doc.is_object()) throw SchemaError{"", "expected an object"};
    BenchCase c;
    c.dir = dir;
    c.id  = require(doc, "id", json::value_t::string, "").get<std::string>();
    if (c.id.empty()) throw SchemaError{"/id", "must be non-empty"};
    c.image = dir / require(doc, "image", json::value_t::string, "").get<std::string>();
    if (!fs::exists(c.image)) throw SchemaError{"/image", "file not found: " + c.image.string()};
    Resolution image_res;
    try {
        image_res = png_size(c.image);
    } catch (const std::exception& e) {
        throw SchemaError{"/image", e.what()};
    }
    const json& edits = require(doc, "edits", json::value_t::array, "");
    if (edits.empty()) throw SchemaError{"/edits", "at least one edit is required"};
    for (size_t i = 0; i < edits.size(); ++i) {
        const std::string at = "/edits/" + std::to_string(i);
        const json& e        = edits[i];
        if (!e.is_object()) throw SchemaError{at, "expected an object"};
        CaseEdit edit;
        edit.mask   = dir / require(e, "mask", json::value_t::string, at).get<std::string>();
        edit.prompt = require(e, "prompt", json::value_t::string, at).get<std::string>();
        edit.order  = require(e, "order", json::value_t::number_integer, at).get<int>();
        edit.group  = e.contains("group") ? require(e, "group", json::value_t::number_integer, at).get<int>()
                                          : static_cast<int>(i) + 1;
        if (edit.group < 1) throw SchemaError{at + "/group", "must be >= 1"};
        if (!fs::exists(edit.mask)) throw SchemaError{at + "/mask", "file not found: " + edit.mask.string()};
        Resolution mask_res;
        try {
            mask_res = png_size(edit.mask);
        } catch (const std::exception& ex) {
            throw SchemaError{at + "/mask", ex.what()};
        }
        if (mask_res != image_res) {
            throw SchemaError{at + "/mask", "mask is " + mask_res.str() + " but image is " + image_res.str()};
        }
        c.edits.push_back(std::move(edit));
    }
    if (doc.contains("sampler")) {
        if (!doc["sampler"].is_object()) throw SchemaError{"/sampler", "expected an object"};
        c.sampler_overrides = doc["sampler"];
    }
    return c;
}

}  // namespace detail

/// Every <dir>/<case>/case.json, validated, sorted by id.
inline CaseSet load_cases(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InvalidInput("case directory not found: " + dir.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "case.json")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    CaseSet set;
    for (const auto& d : dirs) {
        try {
            set.cases.push_back(detail::parse_case(d));
        } catch (const detail::SchemaError& e) {
            set.errors.push_back({d.string(), e.pointer, e.message});
        }
    }
    std::sort(set.cases.begin(), set.cases.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return set;
}

/// Overlay case-level sampler settings (steps, blend_stop, scales, seed).
inline SamplerConfig apply_overrides(SamplerConfig cfg, const json& o) {
    if (o.contains("steps")) cfg.steps = o["steps"].get<int>();
    if (o.contains("blend_stop")) cfg.blend_stop = o["blend_stop"].get<int>();
    if (o.contains("text_scale")) cfg.text_scale = o["text_scale"].get<double>();
    if (o.contains("image_scale")) cfg.image_scale = o["image_scale"].get<double>();
    if (o.contains("seed")) cfg.seed = o["seed"].get<std::uint64_t>();
    return cfg;
}

inline EditRequest to_request(const BenchCase& c, const SamplerConfig& cfg) {
    EditRequest r;
    r.image  = png::read_rgb(c.image);
    r.config = apply_overrides(cfg, c.sampler_overrides);
    for (size_t i = 0; i < c.edits.size(); ++i) {
        const auto& e = c.edits[i];
        r.pairs.push_back({MaskSpec{png::read_mask(e.mask), e.order, e.group, static_cast<int>(i) + 1}, e.prompt});
    }
    return r;
}

/// Multiple instructions are scored as one prompt joined by ", ".
inline std::string scoring_prompt(const BenchCase& c) {
    std::string out;
    for (size_t i = 0; i < c.edits.size(); ++i) {
        if (i) out += ", ";
        out += c.edits[i].prompt;
    }
    return out;
}

/// Image-text adherence metric; higher is better.
class Scorer {
public:
    virtual ~Scorer()                                                    = default;
    [[nodiscard]] virtual std::string name() const                       = 0;
    [[nodiscard]] virtual std::string identity() const                   = 0;
    [[nodiscard]] virtual bool available() const                         = 0;
    virtual double score(const Image& image, const std::string& prompt)  = 0;
};

/// Describes an image as color words and compares bag-of-words embeddings.
class ToyScorer : public Scorer {
public:
    explicit ToyScorer(std::uint64_t seed = 7, int width = 64) : seed_(seed), width_(width) {}

    [[nodiscard]] std::string name() const override { return "toy"; }
    [[nodiscard]] std::string identity() const override {
        return "toy-color-bow(seed=" + std::to_string(seed_) + ",d=" + std::to_string(width_) + ")";
    }
    [[nodiscard]] bool available() const override { return true; }

    /// Color names repeated in proportion to their pixel share (20 slots).
    static std::string describe(const Image& image) {
        struct Named {
            const char* name;
            int r, g, b;
        };
        static constexpr Named palette[] = {{"black", 0, 0, 0},       {"white", 255, 255, 255}, {"gray", 128, 128, 128},
                                            {"red", 220, 30, 30},     {"green", 30, 180, 50},   {"blue", 30, 60, 220},
                                            {"yellow", 240, 220, 40}, {"cyan", 40, 220, 230},   {"magenta", 220, 40, 200},
                                            {"orange", 250, 140, 20}, {"purple", 120, 40, 160}, {"brown", 120, 70, 30}};
        constexpr int kColors = static_cast<int>(std::size(palette));
        std::vector<long> counts(kColors, 0);
        const long total = static_cast<long>(image.width) * image.height;
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                int best = 0;
                long best_d = -1;
                for (int k = 0; k < kColors; ++k) {
                    const long dr = image.at(y, x, 0) - palette[k].r, dg = image.at(y, x, 1) - palette[k].g,
                               db = image.at(y, x, 2) - palette[k].b;
                    const long d = dr * dr + dg * dg + db * db;
                    if (best_d < 0 || d < best_d) {
                        best_d = d;
                        best   = k;
                    }
                }
                ++counts[best];
            }
        }
        std::string out;
        for (int k = 0; k < kColors; ++k) {
            const long slots = total ? std::lround(20.0 * counts[k] / total) : 0;
            for (long s = 0; s < slots; ++s) {
                if (!out.empty()) out += ' ';
                out += palette[k].name;
            }
        }
        return out;
    }

    [[nodiscard]] Vector embed_text(const std::string& text) const {
        Vector v = Vector::Zero(width_);
        for (auto w : toy::ToyTextEncoder::words(text)) {
            w.erase(std::remove_if(w.begin(), w.end(), [](unsigned char ch) { return !std::isalnum(ch); }), w.end());
            if (w.empty()) continue;
            v += toy::seeded_normal(seed_, toy::fnv1a(w), width_, 1);
        }
        return v;
    }

    double score(const Image& image, const std::string& prompt) override {
        const Vector a = embed_text(describe(image));
        const Vector b = embed_text(prompt);
        const double na = a.norm(), nb = b.norm();
        if (na == 0.0 || nb == 0.0) return 0.0;
        return a.dot(b) / (na * nb);
    }

private:
    std::uint64_t seed_;
    int width_;
};

/// Placeholder for a model-based scorer that is not present in this build.
class UnavailableScorer : public Scorer {
public:
    explicit UnavailableScorer(std::string name) : name_(std::move(name)) {}
    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] std::string identity() const override { return name_ + " (unavailable)"; }
    [[nodiscard]] bool available() const override { return false; }
    double score(const Image&, const std::string&) override {
        throw BackendError("scorer '" + name_ + "' is not available");
    }

private:
    std::string name_;
};

inline std::unique_ptr<Scorer> make_scorer(const std::string& name) {
    if (name == "toy") return std::make_unique<ToyScorer>();
    if (name == "clip" || name == "pickscore") return std::make_unique<UnavailableScorer>(name);
    throw InvalidInput("unknown scorer '" + name + "'");
}

using MetricScores = std::map<std::string, std::optional<double>>;

/// Absent metrics are recorded as nullopt.
inline MetricScores score_case(const Image& edited, const BenchCase& c, const std::vector<Scorer*>& scorers) {
    MetricScores out;
    const std::string prompt = scoring_prompt(c);
    for (auto* s : scorers) {
        if (!s->available()) {
            out[s->name()] = std::nullopt;
            continue;
        }
        try {
            out[s->name()] = s->score(edited, prompt);
        } catch (const std::exception&) {
            out[s->name()] = std::nullopt;
        }
    }
    return out;
}

struct MethodConfig {
    std::string name;
    std::string backend      = "toy";
    std::uint64_t backend_seed = 0;
    SamplerConfig sampler;
};

inline json to_json(const MethodConfig& m) {
    return {{"name", m.name}, {"backend", m.backend}, {"backend_seed", m.backend_seed}, {"sampler", to_json(m.sampler)}};
}

inline std::string fingerprint(const json& j) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << toy::fnv1a(j.dump());
    return os.str();
}

/// The four ablation arms: both controls, self off, cross off, boost off.
inline std::vector<MethodConfig> ablation_arms(const MethodConfig& base) {
    std::vector<MethodConfig> arms(4, base);
    arms[0].name                         = "full";
    arms[1].name                         = "no-self";
    arms[1].sampler.control.enable_self  = false;
    arms[2].name                         = "no-cross";
    arms[2].sampler.control.enable_cross = false;
    arms[3].name                         = "no-boost";
    arms[3].sampler.control.enable_boost = false;
    return arms;
}

struct Cell {
    std::string case_id;
    std::string method;
    bool ok = false;
    std::string error;
    MetricScores scores;
    double seconds     = 0.0;
    int denoiser_calls = 0;
    std::optional<Image> edited;
};

struct MetricReport {
    std::vector<std::string> case_ids;
    std::vector<MethodConfig> methods;
    std::vector<std::string> metrics;
    std::map<std::string, std::string> scorer_identity;
    std::vector<Cell> cells;  // case-major
    /// method -> metric -> mean over cases where the metric is present
    std::map<std::string, std::map<std::string, std::optional<double>>> aggregate;

    [[nodiscard]] const Cell& cell(const std::string& case_id, const std::string& method) const {
        for (const auto& c : cells) {
            if (c.case_id == case_id && c.method == method) return c;
        }
        throw InvalidInput("no cell " + case_id + "/" + method);
    }
};

struct BenchOptions {
    int workers      = 1;
    bool keep_images = false;
};

/// Run every (case, method) cell with its own backend instance. Failures are
/// recorded per cell and never stop the sweep.
inline MetricReport run_benchmark(const std::vector<BenchCase>& cases, const std::vector<MethodConfig>& methods,
                                  const std::vector<std::string>& scorer_names = {"toy"},
                                  const BenchOptions& options = {}) {
    if (cases.empty()) throw InvalidInput("benchmark needs at least one case");
    if (methods.empty()) throw InvalidInput("benchmark needs at least one method");

    MetricReport report;
    report.methods = methods;
    report.metrics = scorer_names;
    for (const auto& c : cases) report.case_ids.push_back(c.id);
    for (const auto& name : scorer_names) report.scorer_identity[name] = make_scorer(name)->identity();

    report.cells.resize(cases.size() * methods.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        std::vector<std::unique_ptr<Scorer>> owned;
        std::vector<Scorer*> scorers;
        for (const auto& name : scorer_names) {
            owned.push_back(make_scorer(name));
            scorers.push_back(owned.back().get());
        }
        for (size_t i; (i = next.fetch_add(1)) < report.cells.size();) {
            const BenchCase& c      = cases[i / methods.size()];
            const MethodConfig& m   = methods[i % methods.size()];
            Cell& cell              = report.cells[i];
            cell.case_id            = c.id;
            cell.method             = m.name;
            const auto t0           = std::chrono::steady_clock::now();
            try {
                Backend backend = load_backend(m.backend, m.backend_seed);
                RunOptions run;
                run.observer.warn = nullptr;
                auto result       = run_edit(to_request(c, m.sampler), backend, run);
                cell.scores         = score_case(result.image, c, scorers);
                cell.denoiser_calls = result.stats.denoiser_calls;
                if (options.keep_images) cell.edited = std::move(result.image);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const int nworkers = std::max(1, std::min<int>(options.workers, static_cast<int>(report.cells.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < nworkers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (const auto& m : methods) {
        for (const auto& metric : scorer_names) {
            double sum = 0.0;
            int count  = 0;
            for (const auto& cell : report.cells) {
                if (cell.method != m.name || !cell.ok) continue;
                auto it = cell.scores.find(metric);
                if (it == cell.scores.end() || !it->second) continue;
                sum += *it->second;
                ++count;
            }
            report.aggregate[m.name][metric] = count ? std::optional<double>(sum / count) : std::nullopt;
        }
    }
    return report;
}

inline json to_json(const MetricReport& r) {
    json methods = json::array();
    for (const auto& m : r.methods) {
        json mj           = to_json(m);
        mj["fingerprint"] = fingerprint(mj);
        methods.push_back(mj);
    }
    json cells = json::array();
    for (const auto& c : r.cells) {
        json scores = json::object();
        for (const auto& [k, v] : c.scores) scores[k] = v ? json(*v) : json(nullptr);
        json cj = {{"case", c.case_id}, {"method", c.method}, {"status", c.ok ? "ok" : "failed"},
                   {"scores", scores},  {"seconds", c.seconds}, {"denoiser_calls", c.denoiser_calls}};
        if (!c.ok) cj["error"] = c.error;
        cells.push_back(cj);
    }
    json agg = json::object();
    for (const auto& [method, metrics] : r.aggregate) {
        for (const auto& [metric, v] : metrics) agg[method][metric] = v ? json(*v) : json(nullptr);
    }
    return {{"cases", r.case_ids}, {"metrics", r.metrics}, {"scorers", r.scorer_identity},
            {"methods", methods},  {"cells", cells},       {"aggregate", agg}};
}

/// Metrics as rows, methods as columns, followed by the per-case breakdown.
inline std::string to_markdown(const MetricReport& r) {
    auto fmt = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << *v;
        return os.str();
    };
    std::ostringstream md;
    md << "| metric |";
    for (const auto& m : r.methods) md << ' ' << m.name << " |";
    md << "\n|---|";
    for (size_t i = 0; i < r.methods.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& metric : r.metrics) {
        md << "| " << metric << " |";
        for (const auto& m : r.methods) md << ' ' << fmt(r.aggregate.at(m.name).at(metric)) << " |";
        md << '\n';
    }
    md << "\n| case | method | status |";
    for (const auto& metric : r.metrics) md << ' ' << metric << " |";
    md << " seconds |\n|---|---|---|";
    for (size_t i = 0; i < r.metrics.size(); ++i) md << "---|";
    md << "---|\n";
    for (const auto& c : r.cells) {
        md << "| " << c.case_id << " | " << c.method << " | " << (c.ok ? "ok" : "failed: " + c.error) << " |";
        for (const auto& metric : r.metrics) {
            auto it = c.scores.find(metric);
            md << ' ' << fmt(it == c.scores.end() ? std::nullopt : it->second) << " |";
        }
        md << ' ' << std::fixed << std::setprecision(3) << c.seconds << " |\n";
    }
    return md.str();
}

}  // namespace regionedit::bench
