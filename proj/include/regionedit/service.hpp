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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// clobbers Eigen parameter names.
#include "regionedit/ip2p_backend.hpp"
#include "regionedit/png_io.hpp"
#include "regionedit/sampler.hpp"
#include "regionedit/sha256.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

// HTTP edit service: jobs are queued, executed by a fixed worker pool and
// persisted in a filesystem store (content-addressed blobs plus an
// append-only job index).

namespace regionedit::service {

namespace fs = std::filesystem;
using nlohmann::json;
using Bytes = png::Bytes;

enum class JobState { Queued, Running, Done, Failed };

inline const char* state_name(JobState s) {
    switch (s) {
        case JobState::Queued: return "QUEUED";
        case JobState::Running: return "RUNNING";
        case JobState::Done: return "DONE";
        case JobState::Failed: return "FAILED";
    }
    return "?";
}

inline JobState parse_state(const std::string& s) {
    if (s == "QUEUED") return JobState::Queued;
    if (s == "RUNNING") return JobState::Running;
    if (s == "DONE") return JobState::Done;
    if (s == "FAILED") return JobState::Failed;
    throw std::runtime_error("unknown job state " + s);
}

struct EditJob {
    std::string id;
    std::string fingerprint;
    std::uint64_t seq = 0;
    JobState state    = JobState::Queued;
    std::int64_t created_ms  = 0;
    std::int64_t started_ms  = 0;
    std::int64_t finished_ms = 0;
    std::string request_blob;
    std::string result_blob;
    std::string config_blob;
    std::string error;
    int progress = 0;
    int total    = 0;
};

inline json to_json(const EditJob& j) {
    return {{"id", j.id},
            {"fingerprint", j.fingerprint},
            {"seq", j.seq},
            {"state", state_name(j.state)},
            {"created_ms", j.created_ms},
            {"started_ms", j.started_ms},
            {"finished_ms", j.finished_ms},
            {"request_blob", j.request_blob},
            {"result_blob", j.result_blob},
            {"config_blob", j.config_blob},
            {"error", j.error},
            {"progress", j.progress},
            {"total", j.total}};
}

inline EditJob job_from_json(const json& v) {
    EditJob j;
    j.id           = v.at("id").get<std::string>();
    j.fingerprint  = v.at("fingerprint").get<std::string>();
    j.seq          = v.at("seq").get<std::uint64_t>();
    j.state        = parse_state(v.at("state").get<std::string>());
    j.created_ms   = v.at("created_ms").get<std::int64_t>();
    j.started_ms   = v.at("started_ms").get<std::int64_t>();
    j.finished_ms  = v.at("finished_ms").get<std::int64_t>();
    j.request_blob = v.at("request_blob").get<std::string>();
    j.result_blob  = v.at("result_blob").get<std::string>();
    j.config_blob  = v.at("config_blob").get<std::string>();
    j.error        = v.at("error").get<std::string>();
    j.progress     = v.at("progress").get<int>();
    j.total        = v.at("total").get<int>();
    return j;
}

inline std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

/// Immutable blobs addressed by SHA-256. Writes land via rename, so a blob
/// is either absent or complete.
class BlobStore {
public:
    explicit BlobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    std::string put(const Bytes& bytes) {
        const std::string hash = sha256_of(bytes);
        const fs::path dst     = path(hash);
        if (fs::exists(dst)) return hash;
        const fs::path tmp = root_ / (hash + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
        png::write_file(tmp, bytes);
        fs::rename(tmp, dst);
        return hash;
    }
    std::string put(const std::string& s) { return put(Bytes(s.begin(), s.end())); }

    [[nodiscard]] Bytes get(const std::string& hash) const { return png::read_file(path(hash)); }
    [[nodiscard]] std::string get_text(const std::string& hash) const {
        const Bytes b = get(hash);
        return std::string(b.begin(), b.end());
    }
    [[nodiscard]] bool contains(const std::string& hash) const { return !hash.empty() && fs::exists(path(hash)); }
    [[nodiscard]] fs::path path(const std::string& hash) const { return root_ / hash; }

private:
    fs::path root_;
};

/// Append-only job log; the last record for an id is its current state.
class JobIndex {
public:
    explicit JobIndex(fs::path file) : file_(std::move(file)) {
        if (fs::exists(file_)) {
            std::ifstream in(file_);
            for (std::string line; std::getline(in, line);) {
                if (line.empty()) continue;
                try {
                    EditJob j    = job_from_json(json::parse(line));
                    next_seq_    = std::max(next_seq_, j.seq + 1);
                    jobs_[j.id]  = std::move(j);
                } catch (const std::exception&) {
                    // torn trailing line from a crash mid-write
                }
            }
        }
        out_.open(file_, std::ios::app);
        if (!out_) throw std::runtime_error("cannot open job index " + file_.string());
    }

    void write(const EditJob& job) {
        std::lock_guard lock(mu_);
        jobs_[job.id] = job;
        out_ << to_json(job).dump() << '\n';
        out_.flush();
    }

    void set_progress(const std::string& id, int step, int total) {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) return;
        it->second.progress = std::max(it->second.progress, step);
        it->second.total    = total;
    }

    [[nodiscard]] std::optional<EditJob> get(const std::string& id) const {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] std::vector<EditJob> all() const {
        std::lock_guard lock(mu_);
        std::vector<EditJob> out;
        for (const auto& [_, j] : jobs_) out.push_back(j);
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
        return out;
    }

    std::uint64_t next_seq() {
        std::lock_guard lock(mu_);
        return next_seq_++;
    }

private:
    fs::path file_;
    mutable std::mutex mu_;
    std::map<std::string, EditJob> jobs_;
    std::ofstream out_;
    std::uint64_t next_seq_ = 0;
};

struct ServiceConfig {
    fs::path store             = "regionedit-store";
    int workers                = 1;
    size_t payload_limit       = 16u << 20;
    std::int64_t dedup_ttl_s   = 3600;
    std::string backend        = "toy";
    std::uint64_t backend_seed = 0;
    std::string model_ref;  // ip2p checkpoint directory
    std::string cors_origin = "*";
};

/// Rejected submission; `field` names the offending part, e.g. "masks[1]".
class ValidationError : public InvalidInput {
public:
    ValidationError(std::string field, const std::string& msg) : InvalidInput(msg), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotReady : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SubmitPayload {
    Bytes image;
    std::vector<Bytes> masks;
    std::string request_json;
};

struct SubmitOutcome {
    std::string id;
    bool deduplicated = false;
};

/// Sampler settings from the request's "config" object. Keys mirror the CLI flags.
inline SamplerConfig sampler_from_json(const json& c) {
    SamplerConfig s;
    if (c.is_null()) return s;
    if (!c.is_object()) throw ValidationError("config", "config must be an object");
    try {
        if (c.contains("steps")) s.steps = c["steps"].get<int>();
        if (c.contains("blend_stop")) s.blend_stop = c["blend_stop"].get<int>();
        if (c.contains("text_scale")) s.text_scale = c["text_scale"].get<double>();
        if (c.contains("image_scale")) s.image_scale = c["image_scale"].get<double>();
        if (c.contains("seed")) s.seed = c["seed"].get<std::uint64_t>();
        if (c.contains("boost")) s.control.boost_weight = c["boost"].get<double>();
        if (c.contains("neg_bias")) s.control.neg_bias = c["neg_bias"].get<double>();
        if (c.contains("cross_control")) s.control.enable_cross = c["cross_control"].get<bool>();
        if (c.contains("self_control")) s.control.enable_self = c["self_control"].get<bool>();
        if (c.contains("boost_enabled")) s.control.enable_boost = c["boost_enabled"].get<bool>();
        if (c.contains("background")) {
            const auto b = c["background"].get<std::string>();
            if (b == "sot_pad_only") s.control.background = BackgroundPolicy::SotPadOnly;
            else if (b == "unrestricted") s.control.background = BackgroundPolicy::Unrestricted;
            else throw ValidationError("config.background", "background must be sot_pad_only or unrestricted");
        }
    } catch (const json::exception& e) {
        throw ValidationError("config", e.what());
    }
    try {
        s.validate();
    } catch (const InvalidInput& e) {
        throw ValidationError("config", e.what());
    }
    return s;
}

/// Inverse of sampler_from_json with every field spelled out.
inline json sampler_to_json(const SamplerConfig& s) {
    return {{"steps", s.steps},
            {"blend_stop", s.resolved_blend_stop()},
            {"text_scale", s.text_scale},
            {"image_scale", s.image_scale},
            {"seed", s.seed},
            {"boost", s.control.boost_weight},
            {"neg_bias", s.control.neg_bias},
            {"cross_control", s.control.enable_cross},
            {"self_control", s.control.enable_self},
            {"boost_enabled", s.control.enable_boost},
            {"background", s.control.background == BackgroundPolicy::SotPadOnly ? "sot_pad_only" : "unrestricted"}};
}

class EditService {
public:
    explicit EditService(ServiceConfig cfg)
        : cfg_(std::move(cfg)), blobs_(cfg_.store / "blobs"), index_(cfg_.store / "jobs.jsonl") {
        for (EditJob job : index_.all()) {
            if (job.state == JobState::Running) {
                job.state      = JobState::Queued;
                job.started_ms = 0;
                job.progress   = 0;
                index_.write(job);
            }
            if (job.state == JobState::Queued) queue_.push_back(job.id);
        }
    }

    ~EditService() { stop(); }
    EditService(const EditService&)            = delete;
    EditService& operator=(const EditService&) = delete;

    void start() {
        std::lock_guard lock(mu_);
        if (!workers_.empty()) return;
        stopping_ = false;
        abandon_  = false;
        for (int i = 0; i < std::max(1, cfg_.workers); ++i) workers_.emplace_back([this] { worker_loop(); });
    }

    /// Stop workers. With abandon, an in-flight job is interrupted and left
    /// RUNNING in the index, as after a crash.
    void stop(bool abandon = false) {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
            if (abandon) abandon_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
        workers_.clear();
    }

    SubmitOutcome submit(const SubmitPayload& payload) {
        const Image image = [&] {
            try {
                return png::decode_rgb(payload.image);
            } catch (const std::exception& e) {
                throw ValidationError("image", e.what());
            }
        }();
        json req;
        try {
            req = json::parse(payload.request_json);
        } catch (const json::exception& e) {
            throw ValidationError("request", std::string("invalid JSON: ") + e.what());
        }
        if (!req.is_object() || !req.contains("pairs") || !req["pairs"].is_array() || req["pairs"].empty()) {
            throw ValidationError("request.pairs", "at least one mask-prompt pair is required");
        }
        if (payload.masks.empty()) throw ValidationError("masks", "no mask files were uploaded");

        std::vector<std::string> mask_hashes;
        for (size_t i = 0; i < payload.masks.size(); ++i) {
            const std::string field = "masks[" + std::to_string(i) + "]";
            BinaryRaster m;
            try {
                m = png::decode_mask(payload.masks[i]);
            } catch (const std::exception& e) {
                throw ValidationError(field, e.what());
            }
            if (m.resolution() != image.resolution()) {
                throw ValidationError(field, "mask " + std::to_string(i) + " is " + m.resolution().str() +
                                                 " but the image is " + image.resolution().str());
            }
        }

        json pairs = json::array();
        for (size_t i = 0; i < req["pairs"].size(); ++i) {
            const json& p           = req["pairs"][i];
            const std::string field = "request.pairs[" + std::to_string(i) + "]";
            if (!p.is_object()) throw ValidationError(field, "pair must be an object");
            const int mask  = p.value("mask", static_cast<int>(i));
            if (mask < 0 || mask >= static_cast<int>(payload.masks.size())) {
                throw ValidationError(field + ".mask", "mask index " + std::to_string(mask) + " out of range");
            }
            if (!p.contains("prompt") || !p["prompt"].is_string()) throw ValidationError(field + ".prompt", "prompt is required");
            if (p.contains("order") && !p["order"].is_number_integer()) throw ValidationError(field + ".order", "order must be an integer");
            if (p.contains("group") && !p["group"].is_number_integer()) throw ValidationError(field + ".group", "group must be an integer");
            const int group = p.value("group", static_cast<int>(i) + 1);
            if (group < 1) throw ValidationError(field + ".group", "group must be >= 1");
            pairs.push_back({{"mask", mask}, {"prompt", p["prompt"]}, {"order", p.value("order", static_cast<int>(i))},
                             {"group", group}});
        }
        const SamplerConfig sampler = sampler_from_json(req.value("config", json()));
        check_backend_geometry(image.resolution());

        const std::string image_hash = blobs_.put(payload.image);
        for (const auto& m : payload.masks) mask_hashes.push_back(blobs_.put(m));

        json manifest = {{"image", image_hash},
                         {"masks", mask_hashes},
                         {"pairs", pairs},
                         {"config", sampler_to_json(sampler)},
                         {"backend", cfg_.backend},
                         {"backend_seed", cfg_.backend_seed}};
        const std::string fp = sha256_hex(manifest.dump());

        std::lock_guard lock(mu_);
        const std::int64_t now = now_ms();
        for (const auto& j : index_.all()) {
            if (j.fingerprint == fp && j.state != JobState::Failed && now - j.created_ms <= cfg_.dedup_ttl_s * 1000) {
                return {j.id, true};
            }
        }
        EditJob job;
        job.seq          = index_.next_seq();
        job.fingerprint  = fp;
        job.id           = sha256_hex(fp + ":" + std::to_string(now) + ":" + std::to_string(job.seq)).substr(0, 20);
        job.created_ms   = now;
        job.request_blob = blobs_.put(manifest.dump());
        job.total        = sampler.steps;
        index_.write(job);
        queue_.push_back(job.id);
        cv_.notify_one();
        return {job.id, false};
    }

    [[nodiscard]] std::optional<EditJob> status(const std::string& id) const { return index_.get(id); }

    [[nodiscard]] Bytes result_png(const std::string& id) const { return done_blob(id, &EditJob::result_blob); }
    [[nodiscard]] Bytes result_config(const std::string& id) const { return done_blob(id, &EditJob::config_blob); }

    [[nodiscard]] json capabilities() const {
        json backends = json::array({"toy"});
        if (!cfg_.model_ref.empty() || std::getenv(ip2p::kModelEnv)) backends.push_back("ip2p");
        json sites = json::array();
        try {
            Backend b                = load_backend(cfg_.backend, cfg_.backend_seed, cfg_.model_ref);
            const Resolution latent{64, 64};
            for (const auto& s : b.denoiser->attention_sites(latent)) {
                sites.push_back({{"id", s.id}, {"kind", kind_name(s.kind)}, {"latent_downscale", latent.height / s.res.height}});
            }
        } catch (const std::exception&) {
        }
        return {{"backends", backends},
                {"active_backend", cfg_.backend},
                {"limits", {{"payload_bytes", cfg_.payload_limit}, {"max_steps", NoiseSchedule::kTrainSteps},
                            {"image_multiple", 8 * min_site_downscale()}}},
                {"attention_sites", sites},
                {"workers", cfg_.workers}};
    }

    [[nodiscard]] json health() const {
        int queued = 0, running = 0;
        for (const auto& j : index_.all()) {
            queued += j.state == JobState::Queued;
            running += j.state == JobState::Running;
        }
        return {{"status", "ok"}, {"queued", queued}, {"running", running}};
    }

    [[nodiscard]] const ServiceConfig& config() const { return cfg_; }
    [[nodiscard]] const BlobStore& blobs() const { return blobs_; }

    /// Materialize a stored job's request.
    [[nodiscard]] EditRequest load_request(const EditJob& job) const {
        const json manifest = json::parse(blobs_.get_text(job.request_blob));
        EditRequest r;
        r.image  = png::decode_rgb(blobs_.get(manifest["image"].get<std::string>()));
        r.config = sampler_from_json(manifest["config"]);
        const auto masks = manifest["masks"].get<std::vector<std::string>>();
        for (size_t i = 0; i < manifest["pairs"].size(); ++i) {
            const json& p = manifest["pairs"][i];
            r.pairs.push_back({MaskSpec{png::decode_mask(blobs_.get(masks.at(p["mask"].get<size_t>()))), p["order"].get<int>(),
                                        p["group"].get<int>(), static_cast<int>(i) + 1},
                               p["prompt"].get<std::string>()});
        }
        return r;
    }

private:
    struct Aborted {};

    int min_site_downscale() const {
        try {
            Backend b = load_backend(cfg_.backend, cfg_.backend_seed, cfg_.model_ref);
            int worst = 1;
            const Resolution latent{64, 64};
            for (const auto& s : b.denoiser->attention_sites(latent)) worst = std::max(worst, latent.height / s.res.height);
            return worst;
        } catch (const std::exception&) {
            return 1;
        }
    }

    void check_backend_geometry(Resolution image) const {
        if (image.height % 8 != 0 || image.width % 8 != 0) {
            throw ValidationError("image", "image dimensions must be multiples of 8, got " + image.str());
        }
        const int k = min_site_downscale();
        if ((image.height / 8) % k != 0 || (image.width / 8) % k != 0) {
            throw ValidationError("image", "backend attention levels need dimensions that are multiples of " +
                                               std::to_string(8 * k) + ", got " + image.str());
        }
    }

    Bytes done_blob(const std::string& id, std::string EditJob::*field) const {
        const auto job = index_.get(id);
        if (!job) throw NotFound("unknown job " + id);
        if (job->state != JobState::Done) throw NotReady(std::string("job is ") + state_name(job->state));
        return blobs_.get((*job).*field);
    }

    void worker_loop() {
        for (;;) {
            std::string id;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (stopping_) return;
                id = queue_.front();
                queue_.pop_front();
            }
            run_job(id);
        }
    }

    void run_job(const std::string& id) {
        auto found = index_.get(id);
        if (!found || found->state != JobState::Queued) return;
        EditJob job    = *found;
        job.state      = JobState::Running;
        job.started_ms = now_ms();
        job.progress   = 0;
        index_.write(job);
        try {
            const EditRequest request = load_request(job);
            Backend backend           = load_backend(cfg_.backend, cfg_.backend_seed, cfg_.model_ref);
            RunOptions options;
            options.observer.warn     = nullptr;
            options.observer.progress = [&](int step, int total) {
                index_.set_progress(id, step, total);
                if (abandon_) throw Aborted{};
            };
            const EditResult result = run_edit(request, backend, options);
            const Bytes image       = png::encode_rgb(result.image);
            job.result_blob         = blobs_.put(image);
            job.config_blob         = blobs_.put(describe_run(request, backend, result.stats).dump(2));
            job.state               = JobState::Done;
            job.progress            = request.config.steps;
            job.total               = request.config.steps;
        } catch (const Aborted&) {
            return;
        } catch (const std::exception& e) {
            job.state = JobState::Failed;
            job.error = e.what();
            if (job.error.empty()) job.error = "unknown error";
        }
        job.finished_ms = now_ms();
        index_.write(job);
    }

    ServiceConfig cfg_;
    BlobStore blobs_;
    JobIndex index_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> queue_;
    std::vector<std::thread> workers_;
    bool stopping_ = false;
    std::atomic<bool> abandon_{false};
};

inline json error_envelope(const std::string& code, const std::string& message, json detail = json::object()) {
    return {{"code", code}, {"message", message}, {"detail", std::move(detail)}};
}

inline json job_status_json(const EditJob& j) {
    json out = {{"id", j.id},
                {"state", state_name(j.state)},
                {"progress", {{"step", j.progress}, {"total", j.total}}},
                {"created_ms", j.created_ms},
                {"started_ms", j.started_ms},
                {"finished_ms", j.finished_ms}};
    if (j.state == JobState::Failed) out["error"] = j.error;
    return out;
}

/// REST front end for an EditService.
class HttpFrontend {
public:
    explicit HttpFrontend(EditService& service) : service_(service) { routes(); }
    ~HttpFrontend() { stop(); }

    /// Bind and serve on a background thread; port 0 picks a free port.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Blocking variant for the CLI.
    void serve(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    [[nodiscard]] int port() const { return port_; }

private:
    static void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void routes() {
        const auto& cfg = service_.config();
        server_.set_payload_max_length(cfg.payload_limit);
        server_.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                     {"Access-Control-Allow-Headers", "Content-Type"}});
        server_.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            if (res.status == 413) {
                send_json(res, 413, error_envelope("payload_too_large", "request exceeds the payload limit"));
            } else if (res.status == 404) {
                send_json(res, 404, error_envelope("not_found", "no such endpoint"));
            } else {
                send_json(res, res.status, error_envelope("http_error", "HTTP " + std::to_string(res.status)));
            }
        });

        server_.Get("/v1/healthz", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, service_.health());
        });
        server_.Get("/v1/capabilities", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, service_.capabilities());
        });

        server_.Post("/v1/edits", [this](const httplib::Request& req, httplib::Response& res) {
            if (!req.is_multipart_form_data()) {
                send_json(res, 400, error_envelope("invalid_request", "expected multipart/form-data"));
                return;
            }
            SubmitPayload payload;
            if (!req.has_file("image")) {
                send_json(res, 400, error_envelope("invalid_request", "missing image", {{"field", "image"}}));
                return;
            }
            const auto& image = req.get_file_value("image").content;
            payload.image.assign(image.begin(), image.end());
            auto masks = req.get_file_values("masks");
            if (masks.empty()) masks = req.get_file_values("mask");
            for (const auto& m : masks) payload.masks.emplace_back(m.content.begin(), m.content.end());
            payload.request_json = req.has_file("request") ? req.get_file_value("request").content : "{}";
            try {
                const auto out = service_.submit(payload);
                send_json(res, 202, {{"id", out.id}, {"deduplicated", out.deduplicated}});
            } catch (const ValidationError& e) {
                send_json(res, 400, error_envelope("invalid_request", e.what(), {{"field", e.field()}}));
            } catch (const InvalidInput& e) {
                send_json(res, 400, error_envelope("invalid_request", e.what()));
            }
        });

        server_.Get(R"(/v1/edits/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto job = service_.status(req.matches[1]);
            if (!job) {
                send_json(res, 404, error_envelope("not_found", "unknown job", {{"id", req.matches[1]}}));
                return;
            }
            send_json(res, 200, job_status_json(*job));
        });

        auto artifact = [this](bool image) {
            return [this, image](const httplib::Request& req, httplib::Response& res) {
                try {
                    const Bytes bytes = image ? service_.result_png(req.matches[1]) : service_.result_config(req.matches[1]);
                    res.status        = 200;
                    res.set_content(std::string(bytes.begin(), bytes.end()), image ? "image/png" : "application/json");
                } catch (const NotFound& e) {
                    send_json(res, 404, error_envelope("not_found", e.what()));
                } catch (const NotReady& e) {
                    send_json(res, 409, error_envelope("not_ready", e.what()));
                }
            };
        };
        server_.Get(R"(/v1/edits/([0-9a-f]+)/result)", artifact(true));
        server_.Get(R"(/v1/edits/([0-9a-f]+)/config)", artifact(false));
    }

    EditService& service_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace regionedit::service
