#include <fstream>
#include <set>
#include <sstream>

#include "effectcast/error.hpp"
#include "effectcast/runner.hpp"
#include "json.hpp"

namespace effectcast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T field(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("config field '") + key + "': " + e.what());
    }
}

std::vector<std::string> string_list(const json& obj, const char* key) {
    return field<std::vector<std::string>>(obj, key, {});
}

StrategyEntry parse_strategy(const json& j) {
    StrategyEntry entry;
    if (j.is_string()) {
        entry.config.kind = parse_mask_kind(j.get<std::string>());
        entry.name = j.get<std::string>();
        return entry;
    }
    if (!j.is_object()) throw Error(ErrorCode::Config, "strategy must be a string or object");
    MaskStrategyConfig& c = entry.config;
    c.kind = parse_mask_kind(field<std::string>(j, "kind", "fixed"));
    c.fixed_fraction = field(j, "fixed_fraction", c.fixed_fraction);
    c.score_threshold = field(j, "score_threshold", c.score_threshold);
    c.dilation_radius = field(j, "dilation_radius", c.dilation_radius);
    c.fallback = parse_fallback(field<std::string>(j, "fallback", "error"));
    if (j.contains("noun_filter") && !j["noun_filter"].is_null()) {
        c.noun_filter = j["noun_filter"].get<std::string>();
    }
    entry.name = field<std::string>(j, "name", std::string(to_string(c.kind)));
    return entry;
}

json strategy_to_json(const StrategyEntry& s) {
    const MaskStrategyConfig& c = s.config;
    return {{"name", s.name},
            {"kind", to_string(c.kind)},
            {"fixed_fraction", c.fixed_fraction},
            {"score_threshold", c.score_threshold},
            {"dilation_radius", c.dilation_radius},
            {"fallback", to_string(c.fallback)},
            {"noun_filter", c.noun_filter ? json(*c.noun_filter) : json(nullptr)}};
}

json optional_string(const std::optional<std::string>& s) {
    return s ? json(*s) : json(nullptr);
}

std::optional<std::string> read_optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

json error_to_json(const std::optional<CellError>& e) {
    if (!e) return nullptr;
    return {{"stage", e->stage}, {"code", e->code}, {"message", e->message}};
}

std::optional<CellError> error_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return CellError{j.at("stage").get<std::string>(), j.at("code").get<std::string>(),
                     j.at("message").get<std::string>()};
}

}  // namespace

bool InstanceFilter::accepts(const ActionInstance& a) const {
    const auto in = [](const std::vector<std::string>& list, const std::string& v) {
        return list.empty() || std::find(list.begin(), list.end(), v) != list.end();
    };
    return in(narration_ids, a.narration_id) && in(verbs, a.verb) && in(nouns, a.noun);
}

std::vector<StrategyEntry> RunConfig::default_strategies() {
    std::vector<StrategyEntry> out;
    for (MaskKind kind : {MaskKind::Fixed, MaskKind::HandObject, MaskKind::Segmentation}) {
        StrategyEntry e;
        e.name = std::string(to_string(kind));
        e.config.kind = kind;
        out.push_back(e);
    }
    return out;
}

fs::path RunConfig::effective_cache_dir() const {
    return cache_dir ? *cache_dir : output_dir / "cache";
}

void RunConfig::validate() const {
    if (strategies.empty()) throw Error(ErrorCode::Config, "at least one strategy is required");
    if (prompt_modes.empty()) {
        throw Error(ErrorCode::Config, "at least one prompt mode is required");
    }
    std::set<std::string> names;
    for (const auto& s : strategies) {
        if (s.name.empty()) throw Error(ErrorCode::Config, "strategy name must be non-empty");
        if (!names.insert(s.name).second) {
            throw Error(ErrorCode::Config, "duplicate strategy name '" + s.name + "'");
        }
        s.config.validate();
    }
    std::set<PromptMode> modes(prompt_modes.begin(), prompt_modes.end());
    if (modes.size() != prompt_modes.size()) {
        throw Error(ErrorCode::Config, "duplicate prompt mode");
    }
    if (prompt.exemplar_count < 1) throw Error(ErrorCode::Config, "exemplar_count must be >= 1");
    if (prompt.max_tokens < 1) throw Error(ErrorCode::Config, "max_tokens must be >= 1");
    if (prompt.temperature < 0.0) throw Error(ErrorCode::Config, "temperature must be >= 0");
    if (parallelism < 1) throw Error(ErrorCode::Config, "parallelism must be >= 1");
    if (backend.retries < 0) throw Error(ErrorCode::Config, "retries must be >= 0");
    if (output_dir.empty()) throw Error(ErrorCode::Config, "output_dir is required");
    if (dataset.actions.empty()) throw Error(ErrorCode::Config, "dataset.actions is required");
    if (dataset.frames_dir.empty()) {
        throw Error(ErrorCode::Config, "dataset.frames_dir is required");
    }
    if (dataset.naming.digits < 1) throw Error(ErrorCode::Config, "frame_digits must be >= 1");
}

RunConfig parse_run_config(std::string_view text, const fs::path& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::Config, "config: top level must be an object");

    RunConfig c;
    try {
        const json ds = field<json>(j, "dataset", json::object());
        c.dataset.actions = resolve(base, field<std::string>(ds, "actions", ""));
        c.dataset.frames_dir = resolve(base, field<std::string>(ds, "frames_dir", ""));
        c.dataset.detections_dir = resolve(base, field<std::string>(ds, "detections_dir", ""));
        c.dataset.segmentations_dir =
            resolve(base, field<std::string>(ds, "segmentations_dir", ""));
        c.dataset.pairs = resolve(base, field<std::string>(ds, "pairs", ""));
        c.dataset.naming.prefix = field(ds, "frame_prefix", c.dataset.naming.prefix);
        c.dataset.naming.digits = field(ds, "frame_digits", c.dataset.naming.digits);
        c.dataset.naming.extensions =
            field(ds, "frame_extensions", c.dataset.naming.extensions);

        if (j.contains("strategies") && !j["strategies"].is_null()) {
            c.strategies.clear();
            for (const json& s : j["strategies"]) c.strategies.push_back(parse_strategy(s));
        }
        if (j.contains("prompt_modes") && !j["prompt_modes"].is_null()) {
            c.prompt_modes.clear();
            for (const json& m : j["prompt_modes"]) {
                c.prompt_modes.push_back(parse_prompt_mode(m.get<std::string>()));
            }
        }

        const json pr = field<json>(j, "prompt", json::object());
        c.prompt.exemplar_count = field(pr, "exemplar_count", c.prompt.exemplar_count);
        c.prompt.max_tokens = field(pr, "max_tokens", c.prompt.max_tokens);
        c.prompt.temperature = field(pr, "temperature", c.prompt.temperature);

        const json cc = field<json>(j, "completion", json::object());
        const std::string ckind = field<std::string>(cc, "kind", "scripted");
        if (ckind == "scripted") {
            c.completion.kind = CompletionKind::Scripted;
        } else if (ckind == "remote") {
            c.completion.kind = CompletionKind::Remote;
        } else {
            throw Error(ErrorCode::Config, "unknown completion kind '" + ckind + "'");
        }
        c.completion.script = resolve(base, field<std::string>(cc, "script", ""));
        auto& rc = c.completion.remote;
        rc.endpoint = field(cc, "endpoint", rc.endpoint);
        rc.model = field(cc, "model", rc.model);
        rc.credential_env = field(cc, "credential_env", rc.credential_env);
        rc.max_concurrency = field(cc, "max_concurrency", rc.max_concurrency);
        rc.timeout = std::chrono::seconds(field<std::int64_t>(cc, "timeout_s", rc.timeout.count()));
        rc.debug = field(cc, "debug", rc.debug);

        const json bc = field<json>(j, "backend", json::object());
        const std::string bkind = field<std::string>(bc, "id", "mock");
        if (bkind == "mock") {
            c.backend.kind = BackendKind::Mock;
        } else if (bkind == "adapter") {
            c.backend.kind = BackendKind::Adapter;
        } else {
            throw Error(ErrorCode::Config, "unknown backend '" + bkind + "'");
        }
        auto& ac = c.backend.adapter;
        ac.endpoint = field(bc, "endpoint", ac.endpoint);
        if (bc.contains("steps") && !bc["steps"].is_null()) ac.steps = bc["steps"].get<int>();
        if (bc.contains("guidance_scale") && !bc["guidance_scale"].is_null()) {
            ac.guidance_scale = bc["guidance_scale"].get<double>();
        }
        ac.timeout = std::chrono::seconds(field<std::int64_t>(bc, "timeout_s", ac.timeout.count()));
        ac.max_concurrency = field(bc, "max_concurrency", ac.max_concurrency);
        c.backend.retries = field(bc, "retries", c.backend.retries);

        c.seed = field<std::uint64_t>(j, "seed", c.seed);
        c.output_dir = resolve(base, field<std::string>(j, "output_dir", ""));
        if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
            c.cache_dir = resolve(base, j["cache_dir"].get<std::string>());
        }
        const json fl = field<json>(j, "filter", json::object());
        c.filter.narration_ids = string_list(fl, "narration_ids");
        c.filter.verbs = string_list(fl, "verbs");
        c.filter.nouns = string_list(fl, "nouns");
        c.parallelism = field(j, "parallelism", c.parallelism);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Config, "cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), fs::absolute(path).parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
    json strategies = json::array();
    for (const auto& s : c.strategies) strategies.push_back(strategy_to_json(s));
    json modes = json::array();
    for (PromptMode m : c.prompt_modes) modes.push_back(to_string(m));

    json completion = {{"kind", c.completion.kind == CompletionKind::Scripted ? "scripted"
                                                                              : "remote"}};
    if (c.completion.kind == CompletionKind::Scripted) {
        completion["script"] = c.completion.script.string();
    } else {
        const auto& rc = c.completion.remote;
        completion["endpoint"] = rc.endpoint;
        completion["model"] = rc.model;
        completion["credential_env"] = rc.credential_env;
        completion["max_concurrency"] = rc.max_concurrency;
        completion["timeout_s"] = rc.timeout.count();
        completion["debug"] = rc.debug;
    }

    json backend = {{"id", c.backend.kind == BackendKind::Mock ? "mock" : "adapter"},
                    {"retries", c.backend.retries}};
    if (c.backend.kind == BackendKind::Adapter) {
        const auto& ac = c.backend.adapter;
        backend["endpoint"] = ac.endpoint;
        backend["steps"] = ac.steps ? json(*ac.steps) : json(nullptr);
        backend["guidance_scale"] = ac.guidance_scale ? json(*ac.guidance_scale) : json(nullptr);
        backend["timeout_s"] = ac.timeout.count();
        backend["max_concurrency"] = ac.max_concurrency;
    }

    const json j = {
        {"dataset",
         {{"actions", c.dataset.actions.string()},
          {"frames_dir", c.dataset.frames_dir.string()},
          {"detections_dir", c.dataset.detections_dir.string()},
          {"segmentations_dir", c.dataset.segmentations_dir.string()},
          {"pairs", c.dataset.pairs.string()},
          {"frame_prefix", c.dataset.naming.prefix},
          {"frame_digits", c.dataset.naming.digits},
          {"frame_extensions", c.dataset.naming.extensions}}},
        {"strategies", strategies},
        {"prompt_modes", modes},
        {"prompt",
         {{"exemplar_count", c.prompt.exemplar_count},
          {"max_tokens", c.prompt.max_tokens},
          {"temperature", c.prompt.temperature}}},
        {"completion", completion},
        {"backend", backend},
        {"seed", c.seed},
        {"output_dir", c.output_dir.string()},
        {"cache_dir", c.cache_dir ? json(c.cache_dir->string()) : json(nullptr)},
        {"filter",
         {{"narration_ids", c.filter.narration_ids},
          {"verbs", c.filter.verbs},
          {"nouns", c.filter.nouns}}},
        {"parallelism", c.parallelism},
    };
    return j.dump(2);
}

std::size_t RunManifest::error_count() const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [](const CellRecord& r) { return r.error.has_value(); }));
}

std::string manifest_to_json(const RunManifest& m) {
    json instances = json::array();
    for (const auto& i : m.instances) {
        instances.push_back({{"narration_id", i.narration_id},
                             {"video_id", i.video_id},
                             {"phrase", i.phrase},
                             {"start_frame", i.start_frame},
                             {"stop_frame", i.stop_frame},
                             {"start_file", optional_string(i.start_file)},
                             {"end_file", optional_string(i.end_file)},
                             {"sheet_file", optional_string(i.sheet_file)},
                             {"error", error_to_json(i.error)}});
    }
    json records = json::array();
    for (const auto& r : m.records) {
        records.push_back({{"narration_id", r.narration_id},
                           {"strategy", r.strategy},
                           {"strategy_kind", r.strategy_kind},
                           {"prompt_mode", r.prompt_mode},
                           {"prompt", optional_string(r.prompt)},
                           {"mask_file", optional_string(r.mask_file)},
                           {"mask_coverage",
                            r.mask_coverage ? json(*r.mask_coverage) : json(nullptr)},
                           {"output_file", optional_string(r.output_file)},
                           {"cache_key", optional_string(r.cache_key)},
                           {"backend_id", r.backend_id},
                           {"backend_meta", json::parse(r.backend_meta)},
                           {"elapsed_ms", r.elapsed_ms},
                           {"error", error_to_json(r.error)}});
    }
    const json j = {{"tool", "effectcast"},
                    {"tool_version", m.tool_version},
                    {"config", json::parse(m.config_json)},
                    {"summary", {{"cells", m.records.size()}, {"errors", m.error_count()}}},
                    {"instances", instances},
                    {"records", records},
                    {"timing",
                     {{"started_at", m.timing.started_at},
                      {"finished_at", m.timing.finished_at},
                      {"backend_calls", m.timing.backend_calls},
                      {"cache_hits", m.timing.cache_hits}}}};
    return j.dump(2) + "\n";
}

RunManifest parse_manifest(std::string_view text) {
    RunManifest m;
    try {
        const json j = json::parse(text);
        m.tool_version = j.at("tool_version").get<std::string>();
        m.config_json = j.at("config").dump();
        for (const json& i : j.at("instances")) {
            InstanceRecord r;
            r.narration_id = i.at("narration_id").get<std::string>();
            r.video_id = i.at("video_id").get<std::string>();
            r.phrase = i.at("phrase").get<std::string>();
            r.start_frame = i.at("start_frame").get<std::int64_t>();
            r.stop_frame = i.at("stop_frame").get<std::int64_t>();
            r.start_file = read_optional_string(i, "start_file");
            r.end_file = read_optional_string(i, "end_file");
            r.sheet_file = read_optional_string(i, "sheet_file");
            r.error = error_from_json(i.at("error"));
            m.instances.push_back(std::move(r));
        }
        for (const json& c : j.at("records")) {
            CellRecord r;
            r.narration_id = c.at("narration_id").get<std::string>();
            r.strategy = c.at("strategy").get<std::string>();
            r.strategy_kind = c.at("strategy_kind").get<std::string>();
            r.prompt_mode = c.at("prompt_mode").get<std::string>();
            r.prompt = read_optional_string(c, "prompt");
            r.mask_file = read_optional_string(c, "mask_file");
            if (!c.at("mask_coverage").is_null()) r.mask_coverage = c["mask_coverage"].get<double>();
            r.output_file = read_optional_string(c, "output_file");
            r.cache_key = read_optional_string(c, "cache_key");
            r.backend_id = c.at("backend_id").get<std::string>();
            r.backend_meta = c.at("backend_meta").dump();
            r.elapsed_ms = c.at("elapsed_ms").get<std::int64_t>();
            r.error = error_from_json(c.at("error"));
            m.records.push_back(std::move(r));
        }
        const json& t = j.at("timing");
        m.timing.started_at = t.at("started_at").get<std::string>();
        m.timing.finished_at = t.at("finished_at").get<std::string>();
        m.timing.backend_calls = t.at("backend_calls").get<std::size_t>();
        m.timing.cache_hits = t.at("cache_hits").get<std::size_t>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("manifest: ") + e.what());
    }
    return m;
}

RunManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_manifest(text.str());
}

std::string manifest_without_timing(std::string_view text) {
    json j = json::parse(text);
    j.erase("timing");
    for (json& r : j["records"]) r.erase("elapsed_ms");
    return j.dump(2);
}

}  // namespace effectcast
