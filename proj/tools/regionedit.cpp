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

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "regionedit/bench_config.hpp"
#include "regionedit/pair_spec.hpp"
#include "regionedit/service.hpp"

namespace fs = std::filesystem;
using namespace regionedit;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitBackend = 3;

Resolution parse_resolution(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw InvalidInput("resolution '" + s + "' must look like HxW");
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

struct EditArgs {
    std::string image, out, backend = "toy", model, dump_attention, background = "sot_pad_only";
    std::vector<std::string> pairs, resolutions;
    SamplerConfig sampler;
    int blend_stop          = -1;
    std::uint64_t backend_seed = 0;
    bool no_cross = false, no_self = false, no_boost = false, dump_roles = false;
};

int run_edit_command(const EditArgs& a) {
    EditRequest request;
    request.image  = png::read_rgb(a.image);
    request.config = a.sampler;
    if (a.blend_stop >= 0) request.config.blend_stop = a.blend_stop;
    auto& control        = request.config.control;
    control.enable_cross = !a.no_cross;
    control.enable_self  = !a.no_self;
    control.enable_boost = !a.no_boost;
    if (a.background == "unrestricted") control.background = BackgroundPolicy::Unrestricted;
    else if (a.background != "sot_pad_only") throw InvalidInput("--background must be sot_pad_only or unrestricted");
    for (const auto& r : a.resolutions) control.resolutions.push_back(parse_resolution(r));

    for (size_t i = 0; i < a.pairs.size(); ++i) {
        const PairSpec spec = parse_pair_spec(a.pairs[i]);
        const int index     = static_cast<int>(i) + 1;
        request.pairs.push_back({MaskSpec{png::read_mask(spec.mask_path), spec.order, spec.group.value_or(index), index},
                                 spec.prompt});
    }

    Backend backend = load_backend(a.backend, a.backend_seed, a.model);

    if (a.dump_roles) {
        const auto packed = concat_prompts(encode_prompts(request.prompts(), *backend.encoder));
        nlohmann::json spans = nlohmann::json::array();
        for (int i = 0; i < packed.prompts(); ++i) {
            std::vector<std::string> roles;
            for (int t = packed.spans[i].begin; t < packed.spans[i].end; ++t) roles.push_back(role_name(packed.roles[t]));
            spans.push_back({{"prompt", request.pairs[i].prompt},
                             {"span", {packed.spans[i].begin, packed.spans[i].end}},
                             {"roles", roles}});
        }
        std::cout << spans.dump(2) << '\n';
    }

    std::ofstream dump_file;
    std::unique_ptr<AttentionDump> dump;
    if (!a.dump_attention.empty()) {
        dump_file.open(a.dump_attention);
        if (!dump_file) throw InvalidInput("cannot write " + a.dump_attention);
        dump = std::make_unique<AttentionDump>(dump_file);
    }
    RunOptions options;
    options.observer.dump     = dump.get();
    options.observer.progress = [](int step, int total) {
        std::cerr << "\rstep " << step << "/" << total << std::flush;
        if (step == total) std::cerr << '\n';
    };
    const EditResult result = run_edit(request, backend, options);

    png::write_rgb(a.out, result.image);
    fs::path sidecar = fs::path(a.out).replace_extension(".json");
    std::ofstream(sidecar) << describe_run(request, backend, result.stats).dump(2) << '\n';
    std::cerr << "wrote " << a.out << " and " << sidecar.string() << " (" << result.stats.denoiser_calls
              << " denoiser calls, " << result.stats.seconds << " s)\n";
    return 0;
}

struct BenchArgs {
    std::string cases, methods, out, images;
    int workers = 0;
};

int run_bench_command(const BenchArgs& a) {
    const auto set = bench::load_cases(a.cases);
    for (const auto& e : set.errors) {
        std::cerr << "case " << e.case_dir << ": " << (e.pointer.empty() ? "/" : e.pointer) << ": " << e.message << '\n';
    }
    if (set.cases.empty()) throw InvalidInput("no valid cases in " + a.cases);
    const auto sweep = bench::load_sweep(a.methods);
    bench::BenchOptions options;
    options.workers     = a.workers > 0 ? a.workers : sweep.workers;
    options.keep_images = !a.images.empty();
    const auto report   = bench::run_benchmark(set.cases, sweep.methods, sweep.scorers, options);

    fs::path json_path = a.out, md_path = a.out;
    if (fs::path(a.out).extension() == ".md") json_path.replace_extension(".json");
    else md_path.replace_extension(".md");
    std::ofstream(json_path) << bench::to_json(report).dump(2) << '\n';
    const std::string md = bench::to_markdown(report);
    std::ofstream(md_path) << md;
    if (!a.images.empty()) {
        fs::create_directories(a.images);
        for (const auto& c : report.cells) {
            if (c.edited) png::write_rgb(fs::path(a.images) / (c.case_id + "." + c.method + ".png"), *c.edited);
        }
    }
    std::cout << md;
    return 0;
}

service::HttpFrontend* g_frontend = nullptr;

int run_serve_command(const service::ServiceConfig& cfg, const std::string& host, int port) {
    service::EditService svc(cfg);
    svc.start();
    service::HttpFrontend http(svc);
    g_frontend = &http;
    std::signal(SIGINT, [](int) {
        if (g_frontend) g_frontend->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_frontend) g_frontend->stop();
    });
    std::cerr << "listening on http://" << host << ":" << port << " (store " << cfg.store.string() << ")\n";
    http.serve(host, port);
    g_frontend = nullptr;
    svc.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-pass multi-region instruction image editing"};
    app.require_subcommand(1);

    EditArgs edit;
    auto* ec = app.add_subcommand("edit", "Edit an image with one or more mask-prompt pairs");
    ec->add_option("--image", edit.image, "Input RGB PNG")->required()->check(CLI::ExistingFile);
    ec->add_option("--pair", edit.pairs, "MASK.png:PROMPT:ORDER[:GROUP], repeatable")->required();
    ec->add_option("--steps", edit.sampler.steps, "Denoising steps T")->default_val(50);
    ec->add_option("--blend-stop", edit.blend_stop, "Blend latents while t > S (default ceil(T/10))");
    ec->add_option("--text-scale", edit.sampler.text_scale, "Text guidance scale")->default_val(7.5);
    ec->add_option("--image-scale", edit.sampler.image_scale, "Image guidance scale")->default_val(1.5);
    ec->add_option("--boost", edit.sampler.control.boost_weight, "Cross-attention boost weight")->default_val(0.3);
    ec->add_option("--neg-bias", edit.sampler.control.neg_bias, "Magnitude of the blocking bias")->default_val(1e4);
    ec->add_option("--seed", edit.sampler.seed, "Noise seed")->default_val(0);
    ec->add_option("--backend", edit.backend, "Model backend")->check(CLI::IsMember({"toy", "ip2p"}))->default_val("toy");
    ec->add_option("--model", edit.model, "Checkpoint directory for --backend ip2p")->envname(ip2p::kModelEnv);
    ec->add_option("--backend-seed", edit.backend_seed, "Toy backend weight seed")->default_val(0);
    ec->add_option("--background", edit.background, "sot_pad_only | unrestricted")->default_val("sot_pad_only");
    ec->add_option("--control-resolution", edit.resolutions, "Restrict control to HxW attention sites, repeatable");
    ec->add_flag("--no-cross-control", edit.no_cross, "Disable cross-attention control");
    ec->add_flag("--no-self-control", edit.no_self, "Disable self-attention control");
    ec->add_flag("--no-boost", edit.no_boost, "Disable cross-attention enhancement");
    ec->add_flag("--dump-roles", edit.dump_roles, "Print token roles of the packed prompts");
    ec->add_option("--dump-attention", edit.dump_attention, "Write per-site attention statistics (JSON lines)");
    ec->add_option("--out", edit.out, "Output PNG; a .json sidecar is written beside it")->required();

    BenchArgs bench_args;
    auto* bc  = app.add_subcommand("bench", "Benchmark harness");
    bc->require_subcommand(1);
    auto* brc = bc->add_subcommand("run", "Run methods over a case directory");
    brc->add_option("--cases", bench_args.cases, "Directory of <case>/case.json")->required();
    brc->add_option("--methods", bench_args.methods, "Sweep YAML")->required()->check(CLI::ExistingFile);
    brc->add_option("--out", bench_args.out, "report.json or report.md (both are written)")->required();
    brc->add_option("--workers", bench_args.workers, "Parallel cells (default from sweep file)");
    brc->add_option("--images", bench_args.images, "Also save edited images here");

    service::ServiceConfig svc;
    std::string host = "127.0.0.1";
    int port         = 8080;
    auto* sc         = app.add_subcommand("serve", "Run the HTTP edit service");
    sc->add_option("--host", host)->envname("REGIONEDIT_HOST")->default_val("127.0.0.1");
    sc->add_option("--port", port)->envname("REGIONEDIT_PORT")->default_val(8080);
    sc->add_option("--store", svc.store, "Job and blob store directory")->envname("REGIONEDIT_STORE")->default_val("regionedit-store");
    sc->add_option("--backend", svc.backend)->envname("REGIONEDIT_BACKEND")->check(CLI::IsMember({"toy", "ip2p"}))->default_val("toy");
    sc->add_option("--model", svc.model_ref)->envname(ip2p::kModelEnv);
    sc->add_option("--workers", svc.workers)->envname("REGIONEDIT_WORKERS")->default_val(1);
    sc->add_option("--payload-limit", svc.payload_limit, "Bytes")->envname("REGIONEDIT_PAYLOAD_LIMIT")->default_val(16u << 20);
    sc->add_option("--dedup-ttl", svc.dedup_ttl_s, "Seconds")->default_val(3600);
    sc->add_option("--cors-origin", svc.cors_origin)->envname("REGIONEDIT_CORS_ORIGIN")->default_val("*");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    try {
        if (*ec) return run_edit_command(edit);
        if (*brc) return run_bench_command(bench_args);
        if (*sc) return run_serve_command(svc, host, port);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBackend;
    }
    return 0;
}
