#include "effectcast/runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <semaphore>
#include <thread>
#include <tuple>

#include "effectcast/error.hpp"
#include "effectcast/hashing.hpp"
#include "effectcast/image_io.hpp"
#include "effectcast/sheet.hpp"
#include "effectcast/version.hpp"
#include "json.hpp"

namespace effectcast {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Runs fn(i) for i in [0, n) on `threads` workers. The first exception is
// rethrown after every worker has stopped.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (count <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(count);
        for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

/// Caps concurrent access to a backend or client; kUnboundedConcurrency
/// disables the cap.
class ConcurrencyGate {
public:
    explicit ConcurrencyGate(int limit)
        : bounded_(limit != kUnboundedConcurrency),
          semaphore_(bounded_ ? std::max(limit, 1) : 1) {}

    template <typename Fn>
    auto run(Fn fn) {
        if (!bounded_) return fn();
        semaphore_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{semaphore_};
        return fn();
    }

private:
    bool bounded_;
    std::counting_semaphore<> semaphore_;
};

template <typename Fn>
auto with_retries(int retries, Fn fn) {
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const Error& e) {
            if (!e.retryable() || attempt >= retries) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(50 * (attempt + 1)));
        }
    }
}

CellError to_cell_error(std::string stage, const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    return {std::move(stage), err ? std::string(to_string(err->code())) : "internal", e.what()};
}

struct InstanceState {
    ActionInstance action;
    std::string dir;  // relative instance directory
    std::optional<FramePair> frames;
    std::optional<CellError> frame_error;
    std::optional<Frame> start64;
    std::vector<std::optional<Mask>> masks;
    std::vector<std::optional<CellError>> mask_errors;
    std::vector<std::optional<std::string>> prompts;
    std::vector<std::optional<CellError>> prompt_errors;
    std::uint64_t inpaint_seed = 0;
};

}  // namespace

std::string sanitize_path_component(std::string_view text) {
    std::string out;
    for (char c : text) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

std::string cache_key(const InpaintRequest& request, const std::string& backend_id) {
    Sha256 h;
    h.update_u64(backend_id.size()).update(backend_id);
    h.update_u64(request.prompt.size()).update(request.prompt);
    h.update_u64(request.seed);
    h.update_u64(static_cast<std::uint64_t>(request.frame.width()));
    h.update_u64(static_cast<std::uint64_t>(request.frame.height()));
    h.update(request.frame.bytes());
    h.update_u64(static_cast<std::uint64_t>(request.mask.width()));
    h.update_u64(static_cast<std::uint64_t>(request.mask.height()));
    h.update(request.mask.bits());
    return h.hex();
}

ResultCache::ResultCache(fs::path root) : root_(std::move(root)) {}

fs::path ResultCache::path_for(const std::string& key) const {
    return root_ / key.substr(0, 2) / (key + ".png");
}

std::optional<InpaintResult> ResultCache::get(const std::string& key) const {
    const fs::path png = path_for(key);
    if (!fs::exists(png)) return std::nullopt;
    InpaintResult result;
    try {
        result.frame = read_frame(png);
    } catch (const Error&) {
        return std::nullopt;  // treat a corrupt entry as a miss; put() overwrites it
    }
    fs::path meta = png;
    meta.replace_extension(".json");
    if (fs::exists(meta)) {
        const auto bytes = read_file(meta);
        result.meta_json.assign(bytes.begin(), bytes.end());
    }
    return result;
}

void ResultCache::put(const std::string& key, const InpaintResult& result) const {
    const fs::path png = path_for(key);
    fs::path meta = png;
    meta.replace_extension(".json");
    write_file_atomic(meta, result.meta_json);
    write_frame(png, result.frame);
}

std::unique_ptr<InpaintBackend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::Mock) return std::make_unique<MockBackend>();
    return std::make_unique<GlideAdapter>(config.adapter);
}

std::unique_ptr<CompletionClient> make_completion_client(const CompletionConfig& config) {
    if (config.kind == CompletionKind::Scripted) {
        if (config.script.empty()) {
            throw Error(ErrorCode::Config, "scripted completion client needs a script file");
        }
        return ScriptedCompletionClient::from_file(config.script);
    }
    return std::make_unique<RemoteCompletionClient>(config.remote);
}

int exit_code_for(const RunManifest& manifest) {
    return manifest.error_count() > 0 ? kExitCellErrors : kExitOk;
}

RunManifest run(const RunConfig& config, const RunHooks& hooks) {
    config.validate();
    RunManifest manifest;
    manifest.tool_version = kVersion;
    manifest.config_json = run_config_to_json(config);
    manifest.timing.started_at = utc_now();

    const fs::path out_dir = config.output_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw Error(ErrorCode::Config, "cannot create output directory " + out_dir.string());
    }

    std::vector<ActionInstance> actions;
    for (auto& a : load_actions(config.dataset.actions)) {
        if (config.filter.accepts(a)) actions.push_back(std::move(a));
    }
    if (actions.empty()) throw Error(ErrorCode::Config, "no action instances selected");
    std::sort(actions.begin(), actions.end(), [](const auto& a, const auto& b) {
        return a.narration_id < b.narration_id;
    });
    for (std::size_t i = 1; i < actions.size(); ++i) {
        if (actions[i].narration_id == actions[i - 1].narration_id) {
            throw Error(ErrorCode::Config, "duplicate narration_id " + actions[i].narration_id);
        }
    }

    const bool needs_effects =
        std::find(config.prompt_modes.begin(), config.prompt_modes.end(),
                  PromptMode::EffectDescription) != config.prompt_modes.end();
    std::vector<ActionEffectPair> pairs;
    std::unique_ptr<CompletionClient> owned_client;
    CompletionClient* client = hooks.completion;
    if (needs_effects) {
        if (config.dataset.pairs.empty()) {
            throw Error(ErrorCode::Config, "effect_description mode needs dataset.pairs");
        }
        pairs = load_pairs(config.dataset.pairs);
        if (client == nullptr) {
            owned_client = make_completion_client(config.completion);
            client = owned_client.get();
        }
    }
    std::unique_ptr<InpaintBackend> owned_backend;
    InpaintBackend* backend = hooks.backend;
    if (backend == nullptr) {
        owned_backend = make_backend(config.backend);
        backend = owned_backend.get();
    }
    const BackendDescriptor backend_desc = backend->descriptor();
    const std::string backend_identity = backend->cache_identity();
    ConcurrencyGate backend_gate(backend_desc.max_concurrency);
    ConcurrencyGate client_gate(client ? client->descriptor().max_concurrency : 1);
    const ResultCache cache(config.effective_cache_dir());

    const std::size_t n_strategies = config.strategies.size();
    const std::size_t n_modes = config.prompt_modes.size();
    const bool needs_detections =
        std::any_of(config.strategies.begin(), config.strategies.end(),
                    [](const auto& s) { return s.config.kind == MaskKind::HandObject; });
    const bool needs_regions =
        std::any_of(config.strategies.begin(), config.strategies.end(),
                    [](const auto& s) { return s.config.kind == MaskKind::Segmentation; });

    // Stage 1: per-instance frames, masks and prompts.
    std::vector<InstanceState> states(actions.size());
    parallel_for(actions.size(), config.parallelism, [&](std::size_t i) {
        InstanceState& st = states[i];
        st.action = actions[i];
        st.dir = "instances/" + sanitize_path_component(st.action.narration_id);
        st.inpaint_seed = mix64(config.seed ^ fnv1a64(st.action.narration_id));
        st.masks.resize(n_strategies);
        st.mask_errors.resize(n_strategies);
        st.prompts.resize(n_modes);
        st.prompt_errors.resize(n_modes);
        const fs::path dir = out_dir / st.dir;

        for (std::size_t m = 0; m < n_modes; ++m) {
            PromptSpec spec = config.prompt;
            spec.mode = config.prompt_modes[m];
            spec.seed = config.seed;
            try {
                std::string text;
                if (spec.mode == PromptMode::ActionPhrase) {
                    text = passthrough_prompt(st.action);
                } else {
                    text = client_gate.run([&] {
                        return with_retries(config.backend.retries, [&] {
                            return make_prompt(st.action, client, pairs, spec);
                        });
                    });
                }
                write_file_atomic(dir / "prompts" / (std::string(to_string(spec.mode)) + ".txt"),
                                  text + "\n");
                st.prompts[m] = std::move(text);
            } catch (const std::exception& e) {
                st.prompt_errors[m] = to_cell_error("prompt", e);
            }
        }

        try {
            st.frames = select_frame_pair(st.action, config.dataset.frames_dir,
                                          config.dataset.naming);
            st.start64 = resize_frame(st.frames->start, kBackendSize, kBackendSize);
            write_frame(dir / "start_64.png", *st.start64);
        } catch (const std::exception& e) {
            st.frame_error = to_cell_error("frames", e);
            return;
        }

        const Dimensions source = dims(st.frames->start);
        std::optional<std::vector<Detection>> detections;
        std::optional<CellError> detection_error;
        std::optional<std::vector<SegmentationRegion>> regions;
        std::optional<CellError> region_error;
        if (needs_detections) {
            try {
                detections = load_detections(
                    config.dataset.detections_dir / (st.action.video_id + ".json"),
                    st.action.start_frame);
            } catch (const std::exception& e) {
                detection_error = to_cell_error("mask", e);
            }
        }
        if (needs_regions) {
            try {
                regions = load_segmentations(
                    config.dataset.segmentations_dir / (st.action.video_id + ".json"),
                    st.action.start_frame);
            } catch (const std::exception& e) {
                region_error = to_cell_error("mask", e);
            }
        }

        for (std::size_t s = 0; s < n_strategies; ++s) {
            const StrategyEntry& strategy = config.strategies[s];
            const MaskKind kind = strategy.config.kind;
            if (kind == MaskKind::HandObject && detection_error) {
                st.mask_errors[s] = detection_error;
                continue;
            }
            if (kind == MaskKind::Segmentation && region_error) {
                st.mask_errors[s] = region_error;
                continue;
            }
            try {
                const Mask full = build_mask(
                    strategy.config, source,
                    detections ? std::span<const Detection>(*detections)
                               : std::span<const Detection>{},
                    regions ? std::span<const SegmentationRegion>(*regions)
                            : std::span<const SegmentationRegion>{});
                const Mask small = downsample_mask(full, kBackendSize, kBackendSize);
                const std::string name = sanitize_path_component(strategy.name);
                write_mask(dir / "masks" / (name + "_source.png"), full);
                write_mask(dir / "masks" / (name + ".png"), small);
                st.masks[s] = small;
            } catch (const std::exception& e) {
                st.mask_errors[s] = to_cell_error("mask", e);
            }
        }
    });

    // Stage 2: one backend request per cell, through the cache.
    const std::size_t n_cells = states.size() * n_strategies * n_modes;
    std::vector<CellRecord> records(n_cells);
    std::vector<std::optional<Frame>> outputs(n_cells);
    std::atomic<std::size_t> backend_calls{0};
    std::atomic<std::size_t> cache_hits{0};
    parallel_for(n_cells, config.parallelism, [&](std::size_t cell) {
        const std::size_t i = cell / (n_strategies * n_modes);
        const std::size_t s = (cell / n_modes) % n_strategies;
        const std::size_t m = cell % n_modes;
        const InstanceState& st = states[i];
        const StrategyEntry& strategy = config.strategies[s];
        CellRecord& r = records[cell];
        r.narration_id = st.action.narration_id;
        r.strategy = strategy.name;
        r.strategy_kind = std::string(to_string(strategy.config.kind));
        r.prompt_mode = std::string(to_string(config.prompt_modes[m]));
        r.backend_id = backend_desc.id;
        r.prompt = st.prompts[m];
        if (st.masks[s]) {
            r.mask_file = st.dir + "/masks/" + sanitize_path_component(strategy.name) + ".png";
            r.mask_coverage = coverage(*st.masks[s]);
        }
        if (st.frame_error) {
            r.error = st.frame_error;
            return;
        }
        if (st.mask_errors[s]) {
            r.error = st.mask_errors[s];
            return;
        }
        if (st.prompt_errors[m]) {
            r.error = st.prompt_errors[m];
            return;
        }

        const auto started = Clock::now();
        try {
            const InpaintRequest request{*st.start64, *st.masks[s], *st.prompts[m],
                                         st.inpaint_seed};
            validate_request(request);
            const std::string key = cache_key(request, backend_identity);
            r.cache_key = key;
            std::optional<InpaintResult> result = cache.get(key);
            if (result) {
                ++cache_hits;
            } else {
                result = backend_gate.run([&] {
                    return with_retries(config.backend.retries, [&] {
                        ++backend_calls;
                        return backend->inpaint(request);
                    });
                });
                if (dims(result->frame) != dims(request.frame)) {
                    throw Error(ErrorCode::MalformedResponse,
                                "backend returned a frame of the wrong size");
                }
                cache.put(key, *result);
            }
            const std::string rel = st.dir + "/outputs/" +
                                    sanitize_path_component(strategy.name) + "__" +
                                    r.prompt_mode + ".png";
            write_frame(out_dir / rel, result->frame);
            r.output_file = rel;
            r.backend_meta = result->meta_json;
            outputs[cell] = std::move(result->frame);
        } catch (const std::exception& e) {
            r.error = to_cell_error("inpaint", e);
        }
        r.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                             started)
                           .count();
    });

    // Stage 3: contact sheets.
    manifest.instances.resize(states.size());
    parallel_for(states.size(), config.parallelism, [&](std::size_t i) {
        const InstanceState& st = states[i];
        InstanceRecord& rec = manifest.instances[i];
        rec.narration_id = st.action.narration_id;
        rec.video_id = st.action.video_id;
        rec.phrase = st.action.phrase;
        rec.start_frame = st.action.start_frame;
        rec.stop_frame = st.action.stop_frame;
        rec.error = st.frame_error;
        if (st.frames) {
            rec.start_file = frame_path(config.dataset.frames_dir, st.action.video_id,
                                        st.action.start_frame, config.dataset.naming)
                                 .string();
            rec.end_file = frame_path(config.dataset.frames_dir, st.action.video_id,
                                      st.action.stop_frame, config.dataset.naming)
                               .string();
        }

        InstanceResults results;
        results.narration_id = st.action.narration_id;
        results.phrase = st.action.phrase;
        for (const auto& s : config.strategies) results.strategies.push_back(s.name);
        for (std::size_t m = 0; m < n_modes; ++m) {
            results.prompt_modes.emplace_back(to_string(config.prompt_modes[m]));
            results.prompts.push_back(st.prompts[m].value_or(""));
        }
        results.masks = st.masks;
        results.cells.assign(n_modes, std::vector<SheetCell>(n_strategies));
        for (std::size_t s = 0; s < n_strategies; ++s) {
            for (std::size_t m = 0; m < n_modes; ++m) {
                const std::size_t cell = (i * n_strategies + s) * n_modes + m;
                SheetCell& c = results.cells[m][s];
                c.output = outputs[cell];
                if (records[cell].error) c.error = records[cell].error->stage + " error";
            }
        }
        const std::string rel = st.dir + "/sheet.png";
        write_frame(out_dir / rel, contact_sheet(results, st.frames));
        rec.sheet_file = rel;
    });

    // Canonical order: instances and cells sorted by (narration_id, strategy,
    // prompt mode) so parallel and serial runs write identical manifests.
    std::sort(records.begin(), records.end(), [](const CellRecord& a, const CellRecord& b) {
        return std::tie(a.narration_id, a.strategy, a.prompt_mode) <
               std::tie(b.narration_id, b.strategy, b.prompt_mode);
    });
    manifest.records = std::move(records);
    manifest.timing.backend_calls = backend_calls.load();
    manifest.timing.cache_hits = cache_hits.load();
    manifest.timing.finished_at = utc_now();
    write_file_atomic(out_dir / "manifest.json", manifest_to_json(manifest));
    return manifest;
}

Frame sheet_from_manifest(const RunManifest& manifest, const fs::path& output_dir,
                          const std::string& narration_id) {
    const auto inst = std::find_if(manifest.instances.begin(), manifest.instances.end(),
                                   [&](const auto& i) { return i.narration_id == narration_id; });
    if (inst == manifest.instances.end()) {
        throw Error(ErrorCode::Config, "manifest has no instance " + narration_id);
    }
    const RunConfig config = parse_run_config(manifest.config_json, {});

    InstanceResults results;
    results.narration_id = narration_id;
    results.phrase = inst->phrase;
    for (const auto& s : config.strategies) results.strategies.push_back(s.name);
    for (PromptMode m : config.prompt_modes) results.prompt_modes.emplace_back(to_string(m));
    results.prompts.assign(config.prompt_modes.size(), "");
    results.masks.assign(config.strategies.size(), std::nullopt);
    results.cells.assign(config.prompt_modes.size(),
                         std::vector<SheetCell>(config.strategies.size()));

    const auto index_of = [](const std::vector<std::string>& v, const std::string& x) {
        return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
    };
    for (const CellRecord& r : manifest.records) {
        if (r.narration_id != narration_id) continue;
        const std::size_t s = index_of(results.strategies, r.strategy);
        const std::size_t m = index_of(results.prompt_modes, r.prompt_mode);
        if (s >= results.strategies.size() || m >= results.prompt_modes.size()) continue;
        if (r.prompt) results.prompts[m] = *r.prompt;
        if (r.mask_file && !results.masks[s]) {
            results.masks[s] = read_mask(output_dir / *r.mask_file);
        }
        SheetCell& c = results.cells[m][s];
        if (r.output_file) c.output = read_frame(output_dir / *r.output_file);
        if (r.error) c.error = r.error->stage + " error";
    }

    std::optional<FramePair> frames;
    if (inst->start_file && inst->end_file) {
        frames = FramePair{read_frame(*inst->start_file), read_frame(*inst->end_file)};
    }
    return contact_sheet(results, frames);
}

}  // namespace effectcast
