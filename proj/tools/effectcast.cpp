// effectcast: command-line front end for the action-effect pipeline.

#include <cctype>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "effectcast/error.hpp"
#include "effectcast/image_io.hpp"
#include "effectcast/mask_strategy.hpp"
#include "effectcast/prompts.hpp"
#include "effectcast/runner.hpp"
#include "effectcast/sheet.hpp"
#include "effectcast/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace effectcast;

namespace {

struct RunOptions {
    std::string config;
    std::optional<std::string> backend;
    std::optional<std::string> adapter_url;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallelism;
    std::optional<std::string> output;
    std::vector<std::string> narrations;
    std::vector<std::string> verbs;
    std::vector<std::string> nouns;
    std::vector<std::string> strategies;
    std::vector<std::string> prompt_modes;
    std::optional<std::string> completion_script;
    std::vector<std::string> sets;
};

struct MaskOptions {
    std::string strategy = "fixed";
    std::string frame;
    std::string detections;
    std::string segmentations;
    std::optional<std::int64_t> frame_index;
    std::string out;
    std::string out_small;
    double fraction = 2.0 / 3.0;
    double threshold = 0.1;
    int dilation = 0;
    std::string fallback = "error";
    std::optional<std::string> noun_filter;
};

struct PromptOptions {
    std::string mode = "action_phrase";
    std::string action;
    std::string pairs;
    std::uint64_t seed = 0;
    int k = 2;
    int max_tokens = 48;
    double temperature = 0.0;
    std::string narration_id;
    std::string script;
    std::string endpoint;
    std::string model = RemoteClientConfig{}.model;
    std::string credential_env = RemoteClientConfig{}.credential_env;
    bool debug = false;
    bool show_prompt = false;
};

struct SheetOptions {
    std::string manifest;
    std::string narration;
    std::string out;
};

int cmd_run(const RunOptions& o) {
    // Apply --set overrides to the JSON document before it is interpreted, so
    // every config field can be changed from the command line.
    nlohmann::json doc;
    {
        std::ifstream in(o.config);
        if (!in) throw Error(ErrorCode::Config, "cannot open config " + o.config);
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Config, o.config + ": " + e.what());
        }
    }
    for (const auto& assignment : o.sets) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || assignment.empty() || assignment[0] != '/') {
            throw Error(ErrorCode::Config,
                        "--set expects /json/pointer=value, got '" + assignment + "'");
        }
        const std::string text = assignment.substr(eq + 1);
        nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        try {
            doc[nlohmann::json::json_pointer(assignment.substr(0, eq))] = value;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Config, "--set " + assignment + ": " + e.what());
        }
    }
    RunConfig config = parse_run_config(doc.dump(), fs::absolute(o.config).parent_path());
    if (o.backend) {
        if (*o.backend == "mock") {
            config.backend.kind = BackendKind::Mock;
        } else if (*o.backend == "adapter") {
            config.backend.kind = BackendKind::Adapter;
        } else {
            throw Error(ErrorCode::Config, "unknown backend '" + *o.backend + "'");
        }
    }
    if (o.adapter_url) config.backend.adapter.endpoint = *o.adapter_url;
    if (o.seed) config.seed = *o.seed;
    if (o.parallelism) config.parallelism = *o.parallelism;
    if (o.output) config.output_dir = fs::absolute(*o.output);
    if (!o.narrations.empty()) config.filter.narration_ids = o.narrations;
    if (!o.verbs.empty()) config.filter.verbs = o.verbs;
    if (!o.nouns.empty()) config.filter.nouns = o.nouns;
    if (!o.strategies.empty()) {
        config.strategies.clear();
        for (const auto& s : o.strategies) {
            StrategyEntry e;
            e.config.kind = parse_mask_kind(s);
            e.name = s;
            config.strategies.push_back(e);
        }
    }
    if (!o.prompt_modes.empty()) {
        config.prompt_modes.clear();
        for (const auto& m : o.prompt_modes) config.prompt_modes.push_back(parse_prompt_mode(m));
    }
    if (o.completion_script) {
        config.completion.kind = CompletionKind::Scripted;
        config.completion.script = *o.completion_script;
    }

    const RunManifest manifest = run(config);
    const std::size_t errors = manifest.error_count();
    std::cerr << "effectcast: " << manifest.records.size() << " cells, " << errors
              << " with errors, " << manifest.timing.backend_calls << " backend calls, "
              << manifest.timing.cache_hits << " cache hits\n"
              << "manifest: " << (config.output_dir / "manifest.json").string() << "\n";
    for (const auto& r : manifest.records) {
        if (!r.error) continue;
        std::cerr << "  " << r.narration_id << " / " << r.strategy << " / " << r.prompt_mode
                  << ": [" << r.error->stage << "/" << r.error->code << "] "
                  << r.error->message << "\n";
    }
    return exit_code_for(manifest);
}

std::optional<std::int64_t> index_from_filename(const fs::path& p) {
    const std::string stem = p.stem().string();
    std::size_t end = stem.size();
    std::size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    if (begin == end) return std::nullopt;
    return std::stoll(stem.substr(begin));
}

int cmd_mask(const MaskOptions& o) {
    MaskStrategyConfig config;
    config.kind = parse_mask_kind(o.strategy);
    config.fixed_fraction = o.fraction;
    config.score_threshold = o.threshold;
    config.dilation_radius = o.dilation;
    config.fallback = parse_fallback(o.fallback);
    config.noun_filter = o.noun_filter;
    config.validate();

    const Frame frame = read_frame(o.frame);
    std::vector<Detection> detections;
    std::vector<SegmentationRegion> regions;
    const bool wants_annotations = !o.detections.empty() || !o.segmentations.empty();
    std::int64_t index = 0;
    if (wants_annotations) {
        const auto inferred = o.frame_index ? o.frame_index : index_from_filename(o.frame);
        if (!inferred) {
            throw Error(ErrorCode::Config,
                        "--frame-index is required when the frame filename has no index");
        }
        index = *inferred;
    }
    if (config.kind == MaskKind::HandObject) {
        if (o.detections.empty()) throw Error(ErrorCode::Config, "hand_object needs --detections");
        detections = load_detections(o.detections, index);
    }
    if (config.kind == MaskKind::Segmentation) {
        if (o.segmentations.empty()) {
            throw Error(ErrorCode::Config, "segmentation needs --segmentations");
        }
        regions = load_segmentations(o.segmentations, index);
    }
    const Mask mask = build_mask(config, dims(frame), detections, regions);
    write_mask(o.out, mask);
    if (!o.out_small.empty()) {
        write_mask(o.out_small, downsample_mask(mask, kBackendSize, kBackendSize));
    }
    std::cout << "coverage " << coverage(mask) << "\n";
    return kExitOk;
}

int cmd_prompt(const PromptOptions& o) {
    PromptSpec spec;
    spec.mode = parse_prompt_mode(o.mode);
    spec.exemplar_count = o.k;
    spec.seed = o.seed;
    spec.max_tokens = o.max_tokens;
    spec.temperature = o.temperature;

    const auto space = o.action.find(' ');
    const std::string verb = o.action.substr(0, space);
    const std::string noun = space == std::string::npos ? std::string{} : o.action.substr(space + 1);
    ActionInstance instance;
    instance.narration_id = o.narration_id;
    instance.verb = verb;
    instance.noun = noun;
    instance.phrase = o.action;
    if (instance.phrase.empty()) throw Error(ErrorCode::Config, "--action must be non-empty");

    if (spec.mode == PromptMode::ActionPhrase) {
        std::cout << passthrough_prompt(instance) << "\n";
        return kExitOk;
    }
    if (o.pairs.empty()) throw Error(ErrorCode::Config, "effect_description needs --pairs");
    const auto pairs = load_pairs(o.pairs);
    const auto fewshot = build_fewshot_prompt(
        pairs, spec.exemplar_count, instance.phrase,
        instance_prompt_seed(spec.seed, instance.narration_id));
    if (o.show_prompt) std::cerr << fewshot << "\n---\n";

    std::unique_ptr<CompletionClient> client;
    if (!o.script.empty()) {
        client = ScriptedCompletionClient::from_file(o.script);
    } else if (!o.endpoint.empty()) {
        RemoteClientConfig rc;
        rc.endpoint = o.endpoint;
        rc.model = o.model;
        rc.credential_env = o.credential_env;
        rc.debug = o.debug;
        client = std::make_unique<RemoteCompletionClient>(rc);
    } else {
        // No client: print the few-shot prompt itself.
        std::cout << fewshot << "\n";
        return kExitOk;
    }
    std::cout << effect_prompt(instance, *client, pairs, spec) << "\n";
    return kExitOk;
}

int cmd_sheet(const SheetOptions& o) {
    const RunManifest manifest = load_manifest(o.manifest);
    const fs::path output_dir = fs::path(o.manifest).parent_path();
    write_frame(o.out, sheet_from_manifest(manifest, output_dir, o.narration));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predict the visual effect of actions with mask-conditioned inpainting"};
    app.set_version_flag("--version", std::string("effectcast ") + kVersion);
    app.require_subcommand(1);

    RunOptions run_opts;
    auto* run_cmd = app.add_subcommand("run", "Run the strategy x prompt-mode matrix");
    run_cmd->add_option("--config", run_opts.config, "Run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--backend", run_opts.backend, "mock | adapter");
    run_cmd->add_option("--adapter-url", run_opts.adapter_url, "Inpainting adapter endpoint");
    run_cmd->add_option("--seed", run_opts.seed, "Global seed");
    run_cmd->add_option("--parallelism", run_opts.parallelism, "Worker count");
    run_cmd->add_option("--output", run_opts.output, "Output directory");
    run_cmd->add_option("--narration", run_opts.narrations, "Only these narration ids");
    run_cmd->add_option("--verb", run_opts.verbs, "Only these verbs");
    run_cmd->add_option("--noun", run_opts.nouns, "Only these nouns");
    run_cmd->add_option("--strategy", run_opts.strategies,
                        "Mask strategies (fixed, hand_object, segmentation)");
    run_cmd->add_option("--prompt-mode", run_opts.prompt_modes,
                        "Prompt modes (action_phrase, effect_description)");
    run_cmd->add_option("--completion-script", run_opts.completion_script,
                        "Scripted completion table (action<TAB>continuation)");
    run_cmd->add_option("--set", run_opts.sets,
                        "Override any config field: /json/pointer=value (value parsed as "
                        "JSON, else taken as a string)");

    MaskOptions mask_opts;
    auto* mask_cmd = app.add_subcommand("mask", "Build one inpainting mask");
    mask_cmd->add_option("--strategy", mask_opts.strategy, "fixed | hand_object | segmentation")
        ->capture_default_str();
    mask_cmd->add_option("--frame", mask_opts.frame, "Start frame image")
        ->required()
        ->check(CLI::ExistingFile);
    mask_cmd->add_option("--detections", mask_opts.detections, "Detections JSON for the video");
    mask_cmd->add_option("--segmentations", mask_opts.segmentations,
                         "Segmentations JSON for the video");
    mask_cmd->add_option("--frame-index", mask_opts.frame_index,
                         "Frame index (default: trailing digits of the frame filename)");
    mask_cmd->add_option("--out", mask_opts.out, "Mask PNG at frame resolution")->required();
    mask_cmd->add_option("--out-64", mask_opts.out_small, "Also write the 64x64 reduction");
    mask_cmd->add_option("--fixed-fraction", mask_opts.fraction, "Fixed mask height fraction")
        ->capture_default_str();
    mask_cmd->add_option("--threshold", mask_opts.threshold, "Score threshold (strict >)")
        ->capture_default_str();
    mask_cmd->add_option("--dilation", mask_opts.dilation, "Chebyshev dilation radius")
        ->capture_default_str();
    mask_cmd->add_option("--fallback", mask_opts.fallback, "error | use_fixed")
        ->capture_default_str();
    mask_cmd->add_option("--noun-filter", mask_opts.noun_filter,
                         "Segmentation: keep only this category");

    PromptOptions prompt_opts;
    auto* prompt_cmd = app.add_subcommand("prompt", "Produce the inpainting text prompt");
    prompt_cmd->add_option("--mode", prompt_opts.mode, "action_phrase | effect_description")
        ->capture_default_str();
    prompt_cmd->add_option("--action", prompt_opts.action, "Action phrase, e.g. \"cut apple\"")
        ->required();
    prompt_cmd->add_option("--pairs", prompt_opts.pairs, "Action-effect pairs TSV");
    prompt_cmd->add_option("--seed", prompt_opts.seed, "Exemplar selection seed")
        ->capture_default_str();
    prompt_cmd->add_option("-k,--exemplars", prompt_opts.k, "Exemplar count")
        ->capture_default_str();
    prompt_cmd->add_option("--max-tokens", prompt_opts.max_tokens)->capture_default_str();
    prompt_cmd->add_option("--temperature", prompt_opts.temperature)->capture_default_str();
    prompt_cmd->add_option("--narration-id", prompt_opts.narration_id,
                           "Narration id mixed into the exemplar seed");
    prompt_cmd->add_option("--script", prompt_opts.script, "Scripted completion table");
    prompt_cmd->add_option("--endpoint", prompt_opts.endpoint, "Completion endpoint URL");
    prompt_cmd->add_option("--model", prompt_opts.model)->capture_default_str();
    prompt_cmd->add_option("--credential-env", prompt_opts.credential_env,
                           "Environment variable holding the API key")
        ->capture_default_str();
    prompt_cmd->add_flag("--debug", prompt_opts.debug, "Log request/response bodies");
    prompt_cmd->add_flag("--show-prompt", prompt_opts.show_prompt,
                         "Echo the few-shot prompt to stderr");

    SheetOptions sheet_opts;
    auto* sheet_cmd = app.add_subcommand("sheet", "Render one contact sheet from a manifest");
    sheet_cmd->add_option("--manifest", sheet_opts.manifest)->required()->check(CLI::ExistingFile);
    sheet_cmd->add_option("--narration", sheet_opts.narration)->required();
    sheet_cmd->add_option("--out", sheet_opts.out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run_opts);
        if (*mask_cmd) return cmd_mask(mask_opts);
        if (*prompt_cmd) return cmd_prompt(prompt_opts);
        if (*sheet_cmd) return cmd_sheet(sheet_opts);
    } catch (const Error& e) {
        std::cerr << "effectcast: " << to_string(e.code()) << ": " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "effectcast: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}
