// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "qgvt/error.hpp"
#include "qgvt/flops.hpp"
#include "qgvt/pipeline.hpp"

namespace qgvt::cli {

namespace {

// Argument problems detected after CLI11 parsing; reported with exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

const std::vector<std::size_t> kDefaultLayers = {12, 14, 16, 18, 20, 22};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, sep)) {
        parts.push_back(part);
    }
    return parts;
}

std::size_t parse_count(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-') {
        throw UsageError("invalid " + what + " '" + text + "'");
    }
    return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_layers(const std::string& text) {
    std::vector<std::size_t> layers;
    for (const auto& p : split(text, ',')) {
        layers.push_back(parse_count(p, "layer index"));
    }
    if (layers.empty()) {
        throw UsageError("empty layer list");
    }
    return layers;
}

std::vector<ScheduleStage> parse_pairs(const std::string& text) {
    std::vector<ScheduleStage> stages;
    for (const auto& p : split(text, ',')) {
        const auto kv = split(p, ':');
        if (kv.size() != 2) {
            throw UsageError("schedule stage '" + p + "' is not layer:keep");
        }
        stages.push_back({parse_count(kv[0], "layer index"), parse_count(kv[1], "keep count")});
    }
    if (stages.empty()) {
        throw UsageError("empty schedule");
    }
    return stages;
}

// --schedule accepts "none", a layer list used with --target, or explicit
// layer:keep pairs.
CompressionSchedule resolve_schedule(std::size_t initial, const std::optional<std::string>& schedule,
                                     const std::optional<std::size_t>& target) {
    try {
        if (schedule && *schedule == "none") {
            if (target) {
                throw UsageError("--target conflicts with --schedule none");
            }
            return CompressionSchedule(initial, {});
        }
        if (schedule && schedule->find(':') != std::string::npos) {
            if (target) {
                throw UsageError("--target conflicts with explicit layer:keep stages");
            }
            return CompressionSchedule(initial, parse_pairs(*schedule));
        }
        if (!target) {
            if (schedule) {
                throw UsageError("a layer list needs --target");
            }
            return CompressionSchedule(initial, {});
        }
        const auto layers = schedule ? parse_layers(*schedule) : kDefaultLayers;
        return build_schedule(initial, *target, layers);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
}

std::string percent(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", ratio * 100.0);
    return buf;
}

EncoderConfig preset_or_usage(const std::string& name) {
    try {
        return EncoderConfig::preset(name);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
}

struct ScheduleArgs {
    std::size_t from = 576;
    std::size_t to = 0;
    std::string layers = "12,14,16,18,20,22";
};

int cmd_schedule(const ScheduleArgs& a, std::ostream& out) {
    CompressionSchedule schedule;
    try {
        schedule = build_schedule(a.from, a.to, parse_layers(a.layers));
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
    out << "# " << schedule.initial() << " -> " << schedule.final_count() << " tokens in "
        << schedule.stages().size() << " stages\n";
    out << "layer\tkeep\n";
    for (const auto& s : schedule.stages()) {
        out << s.layer << '\t' << s.keep << '\n';
    }
    return kExitOk;
}

struct FlopsArgs {
    std::optional<std::string> schedule;
    std::optional<std::size_t> target;
    std::optional<std::size_t> from;
    bool guided = false;
    std::string preset = "vit-l-14";
    std::optional<std::size_t> llm_dim;
    std::optional<std::size_t> llm_layers;
    std::optional<std::size_t> llm_ffn;
    std::optional<std::size_t> text_tokens;
    std::optional<std::string> json_out;
};

int cmd_flops(const FlopsArgs& a, std::ostream& out) {
    const EncoderConfig cfg = preset_or_usage(a.preset);
    const std::size_t initial = a.from.value_or(cfg.token_count());
    if (initial != cfg.token_count()) {
        throw UsageError("--from " + std::to_string(initial) + " does not match preset token count " +
                         std::to_string(cfg.token_count()));
    }
    const auto schedule = resolve_schedule(initial, a.schedule, a.target);
    FlopsReport report;
    try {
        report = encoder_ratio(schedule, cfg, a.guided);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
    const bool with_llm = a.llm_dim || a.llm_layers || a.llm_ffn || a.text_tokens;
    LlmConfig llm;
    llm.dim = a.llm_dim.value_or(llm.dim);
    llm.layers = a.llm_layers.value_or(llm.layers);
    llm.ffn_dim = a.llm_ffn.value_or(llm.ffn_dim);
    llm.text_tokens = a.text_tokens.value_or(llm.text_tokens);
    if (with_llm && (llm.dim == 0 || llm.layers == 0 || llm.ffn_dim == 0)) {
        throw UsageError("LLM dimensions must be positive");
    }

    out << "layer\ttokens\tflops\n";
    for (const auto& l : report.per_layer) {
        out << l.layer << '\t' << l.tokens << '\t' << l.flops << '\n';
    }
    out << "encoder_total\t" << report.encoder_total << '\n';
    out << "baseline_total\t" << report.baseline_total << '\n';
    out << "guidance_overhead\t" << report.guidance_overhead << '\n';
    out << "R\t" << percent(report.ratio) << "%\n";

    nlohmann::json doc = to_json(report);
    if (with_llm) {
        const Flops estimate = pipeline_estimate(schedule.final_count(), report, cfg.dim, llm);
        const auto baseline_schedule = CompressionSchedule(initial, {});
        const Flops baseline =
            pipeline_estimate(initial, encoder_ratio(baseline_schedule, cfg, false), cfg.dim, llm);
        out << "pipeline_estimate\t" << estimate << '\n';
        out << "pipeline_baseline\t" << baseline << '\n';
        out << "pipeline_ratio\t"
            << percent(static_cast<double>(estimate) / static_cast<double>(baseline)) << "%\n";
        doc["pipeline"] = {{"visual_tokens", schedule.final_count()},
                           {"llm", {{"layers", llm.layers}, {"dim", llm.dim}, {"ffn_dim", llm.ffn_dim},
                                    {"text_tokens", llm.text_tokens}}},
                           {"estimate", estimate},
                           {"baseline", baseline}};
    }
    if (a.json_out) {
        std::ofstream f(*a.json_out, std::ios::binary | std::ios::trunc);
        f << doc.dump(2) << '\n';
        if (!f) {
            throw IoError("cannot write '" + *a.json_out + "'");
        }
    }
    return kExitOk;
}

struct GenArgs {
    std::uint64_t seed = 42;
    std::string preset = "vit-l-14";
    std::string out_path;
};

int cmd_gen_weights(const GenArgs& a, std::ostream& out) {
    const EncoderConfig cfg = preset_or_usage(a.preset);
    const TensorArchive archive = gen_synthetic(a.seed, cfg, a.preset);
    save_archive(archive, a.out_path);
    std::size_t values = 0;
    for (const auto& [name, m] : archive.entries()) {
        values += m.size();
    }
    out << "tensors\t" << archive.entries().size() << '\n';
    out << "payload_bytes\t" << values * sizeof(float) << '\n';
    out << "file_bytes\t" << std::filesystem::file_size(a.out_path) << '\n';
    return kExitOk;
}

struct RunArgs {
    std::string image;
    std::optional<std::string> question;
    std::optional<std::string> text_embedding;
    std::string weights;
    std::optional<std::size_t> target;
    std::optional<std::string> layers;
    std::optional<std::string> schedule;
    std::string guidance = "question";
    bool no_recycle = false;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool timings = false;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
    const auto started = std::chrono::steady_clock::now();
    CompressionOptions options;
    if (a.guidance == "question") {
        options.guidance = GuidanceSource::question;
        if (!a.question && !a.text_embedding) {
            throw UsageError("question guidance needs --question or --text-embedding");
        }
    } else if (a.guidance == "image-cls") {
        options.guidance = GuidanceSource::image_cls;
        if (a.text_embedding) {
            throw UsageError("--text-embedding has no effect with --guidance image-cls");
        }
    } else {
        throw UsageError("--guidance must be question or image-cls");
    }
    options.recycle = !a.no_recycle;
    if (a.schedule && (a.layers || a.target)) {
        throw UsageError("--schedule (layer:keep pairs) excludes --layers and --target");
    }
    const auto layer_spec = a.schedule ? a.schedule : a.layers;
    if (a.schedule) {
        parse_pairs(*a.schedule);
    } else if (a.layers) {
        parse_layers(*a.layers);
    }

    // Inputs. Failures from here on are runtime errors (exit 1).
    const TensorArchive archive = load_archive(a.weights);
    const EncoderConfig cfg = EncoderConfig::from_metadata(archive.metadata());
    const EncoderWeights weights(archive, cfg);
    const RgbImage image = read_ppm(a.image);

    CompressionSchedule schedule;
    try {
        if (a.schedule && a.schedule->find(':') == std::string::npos) {
            throw UsageError("--schedule expects layer:keep pairs");
        }
        schedule = resolve_schedule(cfg.token_count(), layer_spec, a.schedule ? std::nullopt
                                                                               : std::optional(a.target.value_or(72)));
        schedule.validate(cfg);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }

    PipelineRequest request;
    request.question = a.question.value_or("");
    request.schedule = schedule;
    request.options = options;
    request.record_timings = a.timings;
    if (options.guidance == GuidanceSource::question) {
        request.text = a.text_embedding ? load_text_embedding(*a.text_embedding)
                                        : toy_text_embed(*a.question, cfg.text_dim, a.seed);
    }
    const PipelineResult result = run_pipeline(image, weights, request);
    write_outputs(result.stats, result.masks, a.out_dir);

    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    out << "final_tokens\t" << result.encoded.tokens.patch_count() << '\n';
    out << "R\t" << percent(result.stats.flops.ratio) << "%\n";
    out << "stages\t" << result.masks.size() << '\n';
    out << "out_dir\t" << a.out_dir << '\n';
    if (a.timings) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", elapsed);
        out << "elapsed_ms\t" << buf << '\n';
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Question-guided visual token compression for ViT encoders", "qgvt"};
    app.require_subcommand(1);

    ScheduleArgs sched_args;
    auto* sched = app.add_subcommand("schedule", "Print a uniform hierarchical compression schedule");
    sched->add_option("--from", sched_args.from, "Initial patch token count")->capture_default_str();
    sched->add_option("--to", sched_args.to, "Final patch token count")->required();
    sched->add_option("--layers", sched_args.layers, "Comma-separated compression layers")->capture_default_str();

    FlopsArgs flops_args;
    auto* flops = app.add_subcommand("flops", "Analytic encoder FLOPs ratio and pipeline estimate");
    flops->add_option("--schedule,--layers", flops_args.schedule,
                      "Layer list (with --target), layer:keep pairs, or 'none'");
    flops->add_option("--target", flops_args.target, "Final patch token count");
    flops->add_option("--from", flops_args.from, "Initial patch token count (defaults to the preset)");
    flops->add_flag("--guided", flops_args.guided, "Include question-guidance overhead");
    flops->add_option("--preset", flops_args.preset, "Encoder preset")->capture_default_str();
    flops->add_option("--llm-dim", flops_args.llm_dim, "LLM hidden size");
    flops->add_option("--llm-layers", flops_args.llm_layers, "LLM layer count");
    flops->add_option("--llm-ffn", flops_args.llm_ffn, "LLM FFN width");
    flops->add_option("--text-tokens", flops_args.text_tokens, "Text tokens in the prompt");
    flops->add_option("--out", flops_args.json_out, "Write the report as JSON to this file");

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen-weights", "Write a deterministic synthetic weight archive");
    gen->add_option("--seed", gen_args.seed, "splitmix64 seed")->capture_default_str();
    gen->add_option("--preset", gen_args.preset, "vit-l-14, vit-tiny-14 or toy")->capture_default_str();
    gen->add_option("--out", gen_args.out_path, "Output .qgvt path")->required();

    RunArgs run_args;
    auto* runc = app.add_subcommand("run", "Encode an image with question-guided compression");
    runc->add_option("--image", run_args.image, "336x336 binary PPM (P6)")->required();
    auto* q = runc->add_option("--question", run_args.question, "User question");
    auto* te = runc->add_option("--text-embedding", run_args.text_embedding, "QGVT archive holding text.cls");
    q->excludes(te);
    runc->add_option("--weights", run_args.weights, "QGVT weight archive")->required();
    runc->add_option("--target", run_args.target, "Final patch token count (default 72)");
    runc->add_option("--layers", run_args.layers, "Compression layers (default 12,14,16,18,20,22)");
    runc->add_option("--schedule", run_args.schedule, "Explicit layer:keep pairs");
    runc->add_option("--guidance", run_args.guidance, "question or image-cls")->capture_default_str();
    runc->add_flag("--no-recycle", run_args.no_recycle, "Discard dropped tokens instead of recycling them");
    runc->add_option("--seed", run_args.seed, "Seed of the toy text embedder")->capture_default_str();
    runc->add_option("--out-dir", run_args.out_dir, "Directory for masks and stats.json")->required();
    runc->add_flag("--timings", run_args.timings, "Record per-phase timings in stats.json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (sched->parsed()) {
            return cmd_schedule(sched_args, out);
        }
        if (flops->parsed()) {
            return cmd_flops(flops_args, out);
        }
        if (gen->parsed()) {
            return cmd_gen_weights(gen_args, out);
        }
        return cmd_run(run_args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace qgvt::cli
