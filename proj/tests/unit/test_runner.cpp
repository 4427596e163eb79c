#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "effectcast/error.hpp"
#include "effectcast/image_io.hpp"
#include "effectcast/runner.hpp"
#include "fixture_run.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace effectcast;
using nlohmann::json;
namespace fs = std::filesystem;
using testing_support::TempDir;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Validation;
}

// Fails the first `failures` calls with a retryable error, then delegates to
// the mock. Tracks the peak number of concurrent calls.
class FlakyBackend final : public InpaintBackend {
public:
    FlakyBackend(int failures, int max_concurrency, ErrorCode code = ErrorCode::BackendUnavailable)
        : failures_(failures), max_concurrency_(max_concurrency), code_(code) {}

    BackendDescriptor descriptor() const override { return {"flaky", true, max_concurrency_}; }

    InpaintResult inpaint(const InpaintRequest& request) override {
        const int now = ++in_flight_;
        int peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        ++calls_;
        struct Leave {
            std::atomic<int>& n;
            ~Leave() { --n; }
        } leave{in_flight_};
        if (failures_-- > 0) throw Error(code_, "simulated failure");
        auto r = mock_.inpaint(request);
        r.backend_id = "flaky";
        return r;
    }

    int calls() const { return calls_.load(); }
    int peak() const { return peak_.load(); }

private:
    std::atomic<int> failures_;
    int max_concurrency_;
    ErrorCode code_;
    MockBackend mock_;
    std::atomic<int> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("config defaults") {
    const RunConfig c;
    REQUIRE(c.strategies.size() == 3);
    CHECK(c.strategies[0].name == "fixed");
    CHECK(c.strategies[1].config.kind == MaskKind::HandObject);
    CHECK(c.strategies[2].config.kind == MaskKind::Segmentation);
    CHECK(c.prompt_modes ==
          std::vector{PromptMode::ActionPhrase, PromptMode::EffectDescription});
    CHECK(c.parallelism == 1);
    CHECK(c.backend.kind == BackendKind::Mock);
}

TEST_CASE("parse_run_config resolves paths and reads strategy objects") {
    const std::string text = R"({
        "dataset": {"actions": "a.csv", "frames_dir": "/abs/frames", "frame_digits": 6},
        "strategies": ["fixed", {"name": "ho_wide", "kind": "hand_object",
                                 "dilation_radius": 2, "fallback": "use_fixed"}],
        "prompt_modes": ["effect_description"],
        "prompt": {"exemplar_count": 3},
        "backend": {"id": "adapter", "endpoint": "http://localhost:9/inpaint", "steps": 50},
        "seed": 99, "output_dir": "o", "parallelism": 3,
        "filter": {"verbs": ["cut"]}
    })";
    const RunConfig c = parse_run_config(text, "/base");
    CHECK(c.dataset.actions == fs::path("/base/a.csv"));
    CHECK(c.dataset.frames_dir == fs::path("/abs/frames"));
    CHECK(c.dataset.naming.digits == 6);
    REQUIRE(c.strategies.size() == 2);
    CHECK(c.strategies[1].name == "ho_wide");
    CHECK(c.strategies[1].config.dilation_radius == 2);
    CHECK(c.strategies[1].config.fallback == EmptyMaskFallback::UseFixed);
    CHECK(c.prompt_modes == std::vector{PromptMode::EffectDescription});
    CHECK(c.prompt.exemplar_count == 3);
    CHECK(c.backend.kind == BackendKind::Adapter);
    CHECK(c.backend.adapter.steps == 50);
    CHECK(c.seed == 99);
    CHECK(c.output_dir == fs::path("/base/o"));
    CHECK(c.parallelism == 3);
    CHECK(c.filter.verbs == std::vector<std::string>{"cut"});

    // The snapshot parses back to itself.
    const std::string snap = run_config_to_json(c);
    CHECK(run_config_to_json(parse_run_config(snap, "/elsewhere")) == snap);
}

TEST_CASE("invalid configs are config errors") {
    CHECK(code_of([] { parse_run_config("{", "/"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_run_config(R"({"backend": {"id": "dalle"}})", "/"); }) ==
          ErrorCode::Config);
    CHECK(code_of([] { parse_run_config(R"({"strategies": ["blob"]})", "/"); }) ==
          ErrorCode::Config);
    RunConfig c;
    c.output_dir = "/tmp/x";
    c.strategies.clear();
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::Config);
    c = RunConfig{};
    c.output_dir = "/tmp/x";
    c.parallelism = 0;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::Config);
    c = RunConfig{};
    c.output_dir = "/tmp/x";
    c.strategies.push_back(c.strategies.front());
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::Config);
}

TEST_CASE("instance filter") {
    const auto a = make_action_instance("n1", "V", "P", "cut", "apple", 1, 2);
    InstanceFilter f;
    CHECK(f.accepts(a));
    f.verbs = {"add"};
    CHECK_FALSE(f.accepts(a));
    f.verbs = {"cut"};
    f.nouns = {"apple", "lid"};
    CHECK(f.accepts(a));
    f = {};
    f.narration_ids = {"n2"};
    CHECK_FALSE(f.accepts(a));
}

TEST_CASE("cache_key sensitivity") {
    oracle::Random rng(51);
    const InpaintRequest base{rng.frame(64, 64), rng.mask(64, 64), "cut apple", 7};
    const std::string key = cache_key(base, "mock");
    CHECK(key.size() == 64);
    CHECK(cache_key(base, "mock") == key);
    CHECK(cache_key(base, "other") != key);

    std::set<std::string> keys{key};
    InpaintRequest r = base;
    r.seed = 8;
    keys.insert(cache_key(r, "mock"));
    r = base;
    r.frame.bytes()[100] ^= 1;
    keys.insert(cache_key(r, "mock"));
    r = base;
    r.mask.set(3, 3, !r.mask.at(3, 3));
    keys.insert(cache_key(r, "mock"));
    CHECK(keys.size() == 4);

    // Length framing: moving a byte between backend id and prompt changes the key.
    InpaintRequest shifted = base;
    shifted.prompt = "kcut apple";
    CHECK(cache_key(shifted, "moc") != key);
}

TEST_CASE("cache_key has no collisions across one-byte prompt edits of fixture prompts") {
    const Frame frame(64, 64, Rgb{3, 4, 5});
    const Mask mask = rasterize_box({0, 20, 64, 64}, 64, 64);
    std::set<std::string> keys;
    std::size_t n = 0;
    for (std::string prompt :
         {"cut apple", "add chicken", "remove lid", "Apple is cut in half with a knife",
          "After add chicken, there are now chicken in the pot."}) {
        for (std::size_t i = 0; i < prompt.size(); ++i) {
            for (char delta : {1, 2, 32}) {
                std::string p = prompt;
                p[i] = static_cast<char>(p[i] ^ delta);
                keys.insert(cache_key({frame, mask, p, 1}, "mock"));
                ++n;
            }
        }
        keys.insert(cache_key({frame, mask, prompt, 1}, "mock"));
        ++n;
    }
    CHECK(keys.size() == n);
}

TEST_CASE("ResultCache layout and round trip") {
    TempDir dir;
    const ResultCache cache(dir.path());
    const std::string key(64, 'a');
    CHECK(cache.path_for(key) == dir.path() / "aa" / (key + ".png"));
    CHECK_FALSE(cache.get(key).has_value());
    InpaintResult r{Frame(64, 64, Rgb{9, 9, 9}), "mock", 0, R"({"x":1})"};
    cache.put(key, r);
    const auto back = cache.get(key);
    REQUIRE(back.has_value());
    CHECK(back->frame == r.frame);
    CHECK(back->meta_json == r.meta_json);
}

TEST_CASE("run on the fixture: full matrix, artifacts and warm cache") {
    TempDir dir;
    const RunConfig config = testing_support::fixture_config(dir);
    MockBackend mock;
    const RunManifest m = run(config, {&mock, nullptr});
    CHECK(m.records.size() == 18);
    CHECK(m.error_count() == 0);
    CHECK(mock.calls() == 18);
    CHECK(m.timing.backend_calls == 18);
    CHECK(exit_code_for(m) == kExitOk);

    for (const auto& r : m.records) {
        REQUIRE(r.output_file);
        REQUIRE(fs::exists(config.output_dir / *r.output_file));
        REQUIRE(fs::exists(config.output_dir / *r.mask_file));
        REQUIRE(fs::exists(ResultCache(config.effective_cache_dir()).path_for(*r.cache_key)));
        const Frame out = read_frame(config.output_dir / *r.output_file);
        REQUIRE(dims(out) == Dimensions{64, 64});
    }
    for (const auto& i : m.instances) {
        REQUIRE(i.sheet_file);
        REQUIRE(fs::exists(config.output_dir / *i.sheet_file));
        REQUIRE(fs::exists(*i.start_file));
    }
    // Records are sorted by (narration_id, strategy, prompt mode).
    CHECK(std::is_sorted(m.records.begin(), m.records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.narration_id, a.strategy, a.prompt_mode) <
               std::tie(b.narration_id, b.strategy, b.prompt_mode);
    }));

    const auto cut = std::find_if(m.records.begin(), m.records.end(), [](const auto& r) {
        return r.narration_id == "P01_01_12" && r.prompt_mode == "effect_description";
    });
    CHECK(*cut->prompt == "Apple is cut in half with a knife");

    const std::string first = slurp(config.output_dir / "manifest.json");
    CHECK(first.back() == '\n');

    MockBackend warm;
    const RunManifest again = run(config, {&warm, nullptr});
    CHECK(warm.calls() == 0);
    CHECK(again.timing.cache_hits == 18);
    CHECK(manifest_without_timing(slurp(config.output_dir / "manifest.json")) ==
          manifest_without_timing(first));
}

TEST_CASE("manifest round trip") {
    TempDir dir;
    const RunConfig config = testing_support::fixture_config(dir);
    run(config);
    const std::string text = slurp(config.output_dir / "manifest.json");
    CHECK(manifest_to_json(parse_manifest(text)) == text);
    const json stripped = json::parse(manifest_without_timing(text));
    CHECK_FALSE(stripped.contains("timing"));
    CHECK_FALSE(stripped["records"][0].contains("elapsed_ms"));
    CHECK(stripped["summary"]["cells"] == 18);
    CHECK(code_of([] { parse_manifest("{}"); }) == ErrorCode::Parse);
}

TEST_CASE("parallel and serial runs agree") {
    TempDir a, b;
    RunConfig serial = testing_support::fixture_config(a);
    RunConfig parallel = testing_support::fixture_config(b);
    parallel.parallelism = 4;
    const RunManifest ms = run(serial);
    const RunManifest mp = run(parallel);
    REQUIRE(ms.records.size() == mp.records.size());
    for (std::size_t i = 0; i < ms.records.size(); ++i) {
        CHECK(ms.records[i].cache_key == mp.records[i].cache_key);
        CHECK(ms.records[i].output_file == mp.records[i].output_file);
        CHECK(read_frame(serial.output_dir / *ms.records[i].output_file) ==
              read_frame(parallel.output_dir / *mp.records[i].output_file));
    }
}

TEST_CASE("missing detections isolate to hand_object cells of that instance") {
    TempDir dir;
    const RunConfig config = testing_support::fixture_config(dir);
    fs::remove(dir / "data/detections/P02_03.json");
    const RunManifest m = run(config);
    CHECK(m.records.size() == 18);
    CHECK(exit_code_for(m) == kExitCellErrors);
    for (const auto& r : m.records) {
        const bool expect_error = r.narration_id == "P02_03_40" && r.strategy_kind == "hand_object";
        REQUIRE(r.error.has_value() == expect_error);
        if (expect_error) {
            CHECK(r.error->stage == "mask");
            CHECK(r.error->code == "io");
            CHECK_FALSE(r.output_file.has_value());
        }
    }
    CHECK(fs::exists(config.output_dir / "instances/P02_03_40/sheet.png"));
}

TEST_CASE("missing frames and empty masks are per-cell errors") {
    TempDir dir;
    RunConfig config = testing_support::fixture_config(dir);
    fs::remove(dir / "data/frames/P03_05/frame_0000000150.png");
    config.strategies[1].config.score_threshold = 0.96;  // only one hand in P01_01 passes
    const RunManifest m = run(config);
    for (const auto& r : m.records) {
        if (r.narration_id == "P03_05_7") {
            REQUIRE(r.error);
            CHECK(r.error->stage == "frames");
        } else if (r.narration_id == "P02_03_40" && r.strategy_kind == "hand_object") {
            REQUIRE(r.error);
            CHECK(r.error->code == "empty_mask");
        } else {
            CHECK_FALSE(r.error);
        }
    }
    const auto inst = std::find_if(m.instances.begin(), m.instances.end(),
                                   [](const auto& i) { return i.narration_id == "P03_05_7"; });
    CHECK(inst->error.has_value());
}

TEST_CASE("filters select instances") {
    TempDir dir;
    RunConfig config = testing_support::fixture_config(dir);
    config.filter.nouns = {"apple", "lid"};
    const RunManifest m = run(config);
    CHECK(m.records.size() == 12);
    CHECK(m.instances.size() == 2);
    config.filter.nouns = {"nothing"};
    CHECK(code_of([&] { run(config); }) == ErrorCode::Config);
}

TEST_CASE("config and load errors abort the run") {
    TempDir dir;
    RunConfig config = testing_support::fixture_config(dir);
    config.dataset.actions = dir / "missing.csv";
    CHECK(code_of([&] { run(config); }) == ErrorCode::Io);
    TempDir other;
    config = testing_support::fixture_config(other);
    config.dataset.pairs.clear();
    CHECK(code_of([&] { run(config); }) == ErrorCode::Config);
}

TEST_CASE("retries and backend concurrency cap") {
    TempDir dir;
    RunConfig config = testing_support::fixture_config(dir);
    config.parallelism = 4;
    config.backend.retries = 2;

    FlakyBackend flaky(2, 1);
    const RunManifest m = run(config, {&flaky, nullptr});
    CHECK(m.error_count() == 0);
    CHECK(flaky.calls() == 20);
    CHECK(flaky.peak() == 1);

    TempDir dir2;
    RunConfig config2 = testing_support::fixture_config(dir2);
    config2.backend.retries = 1;
    FlakyBackend dead(1000, 2);
    const RunManifest failed = run(config2, {&dead, nullptr});
    CHECK(failed.error_count() == 18);
    CHECK(dead.calls() == 36);
    CHECK(failed.records.front().error->code == "backend_unavailable");

    TempDir dir3;
    RunConfig config3 = testing_support::fixture_config(dir3);
    FlakyBackend bad(1000, 2, ErrorCode::MalformedRequest);
    run(config3, {&bad, nullptr});
    CHECK(bad.calls() == 18);
}

TEST_CASE("every cell of an instance shares one inpainting seed") {
    // The same prompt and mask in two cells would hit one cache entry: verify
    // via a strategy duplicated under another name.
    TempDir dir;
    RunConfig config = testing_support::fixture_config(dir);
    StrategyEntry copy = config.strategies[0];
    copy.name = "fixed_again";
    config.strategies.push_back(copy);
    MockBackend mock;
    const RunManifest m = run(config, {&mock, nullptr});
    CHECK(m.records.size() == 24);
    CHECK(mock.calls() == 18);
    CHECK(m.timing.cache_hits == 6);
}

TEST_CASE("sheet_from_manifest reproduces the run's sheet") {
    TempDir dir;
    const RunConfig config = testing_support::fixture_config(dir);
    const RunManifest m = run(config);
    const RunManifest loaded = load_manifest(config.output_dir / "manifest.json");
    for (const auto& inst : m.instances) {
        CHECK(sheet_from_manifest(loaded, config.output_dir, inst.narration_id) ==
              read_frame(config.output_dir / *inst.sheet_file));
    }
    CHECK(code_of([&] { sheet_from_manifest(loaded, config.output_dir, "nope"); }) ==
          ErrorCode::Config);
}

TEST_CASE("sanitize_path_component") {
    CHECK(sanitize_path_component("P01_01_12") == "P01_01_12");
    CHECK(sanitize_path_component("a/b c") == "a_b_c");
    CHECK(sanitize_path_component("..") == "_..");
    CHECK(sanitize_path_component("") == "_");
}

}  // TEST_SUITE
