#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "effectcast/dataset.hpp"

namespace effectcast {

struct ActionEffectPair {
    std::string action;
    std::string effect;
};

enum class PromptMode { ActionPhrase, EffectDescription };

std::string_view to_string(PromptMode mode);
PromptMode parse_prompt_mode(std::string_view text);

struct PromptSpec {
    PromptMode mode = PromptMode::ActionPhrase;
    int exemplar_count = 2;
    std::uint64_t seed = 0;
    int max_tokens = 48;
    double temperature = 0.0;
};

struct ClientDescriptor {
    std::string id;
    // Identical inputs at temperature 0 give identical continuations.
    bool deterministic = true;
    int max_concurrency = 1;
};

/// Text-completion language model.
class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual ClientDescriptor descriptor() const = 0;
    virtual std::string complete(const std::string& prompt, int max_tokens,
                                 double temperature,
                                 const std::vector<std::string>& stop) = 0;
};

/// Fixed lookup table keyed by the query action (the text after the last
/// "Action:" label in the prompt). Counts calls so tests can observe them.
class ScriptedCompletionClient final : public CompletionClient {
public:
    explicit ScriptedCompletionClient(std::map<std::string, std::string> table);

    // Tab-separated "action<TAB>continuation" lines; "\n" escapes in the
    // continuation become newlines. '#' lines are comments.
    static std::unique_ptr<ScriptedCompletionClient> from_file(const std::filesystem::path& path);

    ClientDescriptor descriptor() const override;
    std::string complete(const std::string& prompt, int max_tokens, double temperature,
                         const std::vector<std::string>& stop) override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::map<std::string, std::string> table_;
    std::atomic<std::size_t> calls_{0};
};

struct RemoteClientConfig {
    std::string endpoint;                  // e.g. http://host:port/v1/completions
    std::string model = "davinci-002";
    std::string credential_env = "EFFECTCAST_LM_API_KEY";
    int max_concurrency = 4;
    std::chrono::seconds timeout{60};
    bool debug = false;                    // log bodies to stderr, key redacted
};

/// OpenAI-style completions endpoint: POST {model, prompt, max_tokens,
/// temperature, stop} and read choices[0].text.
class RemoteCompletionClient final : public CompletionClient {
public:
    explicit RemoteCompletionClient(RemoteClientConfig config);

    ClientDescriptor descriptor() const override;
    std::string complete(const std::string& prompt, int max_tokens, double temperature,
                         const std::vector<std::string>& stop) override;

private:
    RemoteClientConfig config_;
};

// UTF-8 text, one "action<TAB>effect" per line, '#' comment lines ignored.
std::vector<ActionEffectPair> load_pairs(const std::filesystem::path& path);

std::string passthrough_prompt(const ActionInstance& instance);

// Picks k distinct exemplars with a seeded partial Fisher-Yates shuffle and
// renders "Action: a\nEffect: e\n\n" for each, then "Action: q\nEffect:".
std::string build_fewshot_prompt(const std::vector<ActionEffectPair>& pairs, int k,
                                 const std::string& action, std::uint64_t seed);

/// First non-empty line, surrounding whitespace stripped.
std::string parse_effect(std::string_view continuation);

// Exemplar seed for one instance: seed XOR fnv1a64(narration_id).
std::uint64_t instance_prompt_seed(std::uint64_t seed, const std::string& narration_id);

std::string effect_prompt(const ActionInstance& instance, CompletionClient& client,
                          const std::vector<ActionEffectPair>& pairs,
                          const PromptSpec& spec);

// Dispatches on spec.mode; the client is only touched in effect mode.
std::string make_prompt(const ActionInstance& instance, CompletionClient* client,
                        const std::vector<ActionEffectPair>& pairs, const PromptSpec& spec);

}  // namespace effectcast
