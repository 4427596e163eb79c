#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "effectcast/backends.hpp"
#include "effectcast/dataset.hpp"
#include "effectcast/mask_strategy.hpp"
#include "effectcast/prompts.hpp"

namespace effectcast {

struct DatasetPaths {
    std::filesystem::path actions;
    std::filesystem::path frames_dir;
    std::filesystem::path detections_dir;     // <video_id>.json per video
    std::filesystem::path segmentations_dir;  // <video_id>.json per video
    std::filesystem::path pairs;              // needed for effect_description
    FrameNaming naming;
};

struct StrategyEntry {
    std::string name;  // unique within a run; defaults to the kind name
    MaskStrategyConfig config;
};

enum class CompletionKind { Scripted, Remote };

struct CompletionConfig {
    CompletionKind kind = CompletionKind::Scripted;
    std::filesystem::path script;  // scripted: action<TAB>continuation table
    RemoteClientConfig remote;
};

enum class BackendKind { Mock, Adapter };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    GlideAdapterConfig adapter;
    int retries = 2;  // extra attempts after a retryable failure
};

struct InstanceFilter {
    std::vector<std::string> narration_ids;
    std::vector<std::string> verbs;
    std::vector<std::string> nouns;

    bool empty() const { return narration_ids.empty() && verbs.empty() && nouns.empty(); }
    bool accepts(const ActionInstance& a) const;
};

struct RunConfig {
    DatasetPaths dataset;
    std::vector<StrategyEntry> strategies = default_strategies();
    std::vector<PromptMode> prompt_modes = {PromptMode::ActionPhrase,
                                            PromptMode::EffectDescription};
    PromptSpec prompt;  // mode and seed are filled per cell
    CompletionConfig completion;
    BackendConfig backend;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> cache_dir;  // default <output_dir>/cache
    InstanceFilter filter;
    int parallelism = 1;

    static std::vector<StrategyEntry> default_strategies();
    std::filesystem::path effective_cache_dir() const;
    void validate() const;
};

// JSON config file; relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view json_text,
                           const std::filesystem::path& base_dir);
std::string run_config_to_json(const RunConfig& config);

struct CellError {
    std::string stage;  // frames | mask | prompt | inpaint
    std::string code;
    std::string message;
};

/// One (instance, strategy, prompt mode) cell. Paths are relative to the
/// run's output directory.
struct CellRecord {
    std::string narration_id;
    std::string strategy;
    std::string strategy_kind;
    std::string prompt_mode;
    std::optional<std::string> prompt;
    std::optional<std::string> mask_file;
    std::optional<std::string> output_file;
    std::optional<std::string> cache_key;
    std::string backend_id;
    std::int64_t elapsed_ms = 0;
    std::optional<double> mask_coverage;
    std::string backend_meta = "{}";
    std::optional<CellError> error;
};

struct InstanceRecord {
    std::string narration_id;
    std::string video_id;
    std::string phrase;
    std::int64_t start_frame = 0;
    std::int64_t stop_frame = 0;
    std::optional<std::string> start_file;  // dataset frame paths
    std::optional<std::string> end_file;
    std::optional<std::string> sheet_file;  // relative to output dir
    std::optional<CellError> error;
};

struct RunTiming {
    std::string started_at;
    std::string finished_at;
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
};

struct RunManifest {
    std::string tool_version;
    std::string config_json;
    std::vector<InstanceRecord> instances;  // sorted by narration_id
    std::vector<CellRecord> records;  // sorted by (narration_id, strategy, prompt mode)
    RunTiming timing;

    std::size_t error_count() const;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest parse_manifest(std::string_view json_text);
RunManifest load_manifest(const std::filesystem::path& path);

// Strips the fields that legitimately change between otherwise identical
// runs (the timing block and per-cell elapsed_ms).
std::string manifest_without_timing(std::string_view json_text);

/// 256-bit SHA over the length-framed (backend_id, prompt, seed, frame, mask).
std::string cache_key(const InpaintRequest& request, const std::string& backend_id);

/// Content-addressed store of backend outputs: <root>/<2 hex>/<digest>.png
/// plus a <digest>.json sidecar holding backend metadata.
class ResultCache {
public:
    explicit ResultCache(std::filesystem::path root);

    std::filesystem::path path_for(const std::string& key) const;
    std::optional<InpaintResult> get(const std::string& key) const;
    void put(const std::string& key, const InpaintResult& result) const;

private:
    std::filesystem::path root_;
};

/// Injection points for tests and embedders; null members are built from
/// the config.
struct RunHooks {
    InpaintBackend* backend = nullptr;
    CompletionClient* completion = nullptr;
};

std::unique_ptr<InpaintBackend> make_backend(const BackendConfig& config);
std::unique_ptr<CompletionClient> make_completion_client(const CompletionConfig& config);

/// Executes the strategy x prompt-mode matrix over the selected instances
/// and writes <output_dir>/manifest.json last. Per-cell failures become
/// error records; config and load failures throw.
RunManifest run(const RunConfig& config, const RunHooks& hooks = {});

/// Rebuilds one instance's contact sheet from a manifest on disk.
Frame sheet_from_manifest(const RunManifest& manifest,
                          const std::filesystem::path& output_dir,
                          const std::string& narration_id);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitCellErrors = 2;

int exit_code_for(const RunManifest& manifest);

std::string sanitize_path_component(std::string_view text);

}  // namespace effectcast
