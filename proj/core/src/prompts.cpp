#include "effectcast/prompts.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>

#include "effectcast/error.hpp"
#include "effectcast/hashing.hpp"
#include "http_util.hpp"
#include "json.hpp"

namespace effectcast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

std::string_view strip(std::string_view s) {
    const auto first = s.find_first_not_of(kWhitespace);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(kWhitespace);
    return s.substr(first, last - first + 1);
}

std::string truncate_at_stop(std::string text, const std::vector<std::string>& stop) {
    std::size_t cut = text.size();
    for (const auto& s : stop) {
        if (s.empty()) continue;
        cut = std::min(cut, text.find(s));
    }
    text.resize(std::min(cut, text.size()));
    return text;
}

std::string unescape_newlines(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
            out.push_back('\n');
            ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

// Yields (line number, line) for non-comment, non-blank lines split on the
// first tab.
template <typename Fn>
void for_each_tsv_line(const fs::path& path, Fn fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::Parse, path.string() + ": line " + std::to_string(number) +
                                              ": expected a tab separator");
        }
        fn(number, std::string_view(line).substr(0, tab),
           std::string_view(line).substr(tab + 1));
    }
}

}  // namespace

std::string_view to_string(PromptMode mode) {
    return mode == PromptMode::ActionPhrase ? "action_phrase" : "effect_description";
}

PromptMode parse_prompt_mode(std::string_view text) {
    if (text == "action_phrase") return PromptMode::ActionPhrase;
    if (text == "effect_description") return PromptMode::EffectDescription;
    throw Error(ErrorCode::Config, "unknown prompt mode '" + std::string(text) + "'");
}

ScriptedCompletionClient::ScriptedCompletionClient(std::map<std::string, std::string> table)
    : table_(std::move(table)) {}

std::unique_ptr<ScriptedCompletionClient> ScriptedCompletionClient::from_file(const fs::path& path) {
    std::map<std::string, std::string> table;
    for_each_tsv_line(path, [&](int, std::string_view action, std::string_view text) {
        table[std::string(strip(action))] = unescape_newlines(text);
    });
    return std::make_unique<ScriptedCompletionClient>(std::move(table));
}

ClientDescriptor ScriptedCompletionClient::descriptor() const {
    return {"scripted", true, 64};
}

std::string ScriptedCompletionClient::complete(const std::string& prompt, int, double,
                                               const std::vector<std::string>& stop) {
    ++calls_;
    const auto label = prompt.rfind("Action:");
    if (label == std::string::npos) {
        throw Error(ErrorCode::Validation, "scripted client: prompt has no Action: line");
    }
    const auto begin = label + std::string_view("Action:").size();
    const auto end = prompt.find('\n', begin);
    const std::string action(strip(std::string_view(prompt).substr(begin, end - begin)));
    const auto it = table_.find(action);
    if (it == table_.end()) {
        throw Error(ErrorCode::Validation,
                    "scripted client: no continuation for action '" + action + "'");
    }
    return truncate_at_stop(it->second, stop);
}

RemoteCompletionClient::RemoteCompletionClient(RemoteClientConfig config)
    : config_(std::move(config)) {
    detail::parse_url(config_.endpoint);
    if (config_.max_concurrency < 1) {
        throw Error(ErrorCode::Config, "remote client: max_concurrency must be >= 1");
    }
}

ClientDescriptor RemoteCompletionClient::descriptor() const {
    return {"remote:" + config_.model, false, config_.max_concurrency};
}

std::string RemoteCompletionClient::complete(const std::string& prompt, int max_tokens,
                                             double temperature,
                                             const std::vector<std::string>& stop) {
    const auto url = detail::parse_url(config_.endpoint);
    auto client = detail::make_client(url, config_.timeout);

    httplib::Headers headers;
    const char* key = config_.credential_env.empty()
                          ? nullptr
                          : std::getenv(config_.credential_env.c_str());
    if (key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const json body = {{"model", config_.model},
                       {"prompt", prompt},
                       {"max_tokens", max_tokens},
                       {"temperature", temperature},
                       {"stop", stop}};
    if (config_.debug) {
        std::cerr << "[completion] POST " << config_.endpoint
                  << (key ? " Authorization: Bearer <redacted>" : "") << "\n"
                  << body.dump(2) << "\n";
    }
    const auto res = client->Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::Transport, "completion endpoint " + config_.endpoint +
                                              " unreachable: " + httplib::to_string(res.error()));
    }
    if (config_.debug) std::cerr << "[completion] " << res->status << "\n" << res->body << "\n";
    if (res->status == 429 || res->status >= 500) {
        throw Error(ErrorCode::Transport,
                    "completion endpoint returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::MalformedResponse,
                    "completion endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
        const json reply = json::parse(res->body);
        return reply.at("choices").at(0).at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedResponse,
                    std::string("completion response: ") + e.what());
    }
}

std::vector<ActionEffectPair> load_pairs(const fs::path& path) {
    std::vector<ActionEffectPair> pairs;
    for_each_tsv_line(path, [&](int number, std::string_view action, std::string_view effect) {
        ActionEffectPair p{std::string(strip(action)), std::string(strip(effect))};
        if (p.action.empty() || p.effect.empty()) {
            throw Error(ErrorCode::Validation, path.string() + ": line " +
                                                   std::to_string(number) +
                                                   ": empty action or effect");
        }
        pairs.push_back(std::move(p));
    });
    return pairs;
}

std::string passthrough_prompt(const ActionInstance& instance) { return instance.phrase; }

std::string build_fewshot_prompt(const std::vector<ActionEffectPair>& pairs, int k,
                                 const std::string& action, std::uint64_t seed) {
    if (k < 1) {
        throw Error(ErrorCode::InsufficientExemplars, "exemplar count must be >= 1");
    }
    if (static_cast<std::size_t>(k) > pairs.size()) {
        throw Error(ErrorCode::InsufficientExemplars,
                    "need " + std::to_string(k) + " exemplars, pairs file has " +
                        std::to_string(pairs.size()));
    }
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }

    std::string out;
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
        const auto& p = pairs[order[i]];
        out += "Action: " + p.action + "\nEffect: " + p.effect + "\n\n";
    }
    out += "Action: " + action + "\nEffect:";
    return out;
}

std::string parse_effect(std::string_view continuation) {
    std::size_t pos = 0;
    while (pos <= continuation.size()) {
        const auto end = continuation.find('\n', pos);
        const auto line =
            strip(continuation.substr(pos, end == std::string_view::npos ? end : end - pos));
        if (!line.empty()) return std::string(line);
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    throw Error(ErrorCode::EmptyCompletion, "language model returned an empty continuation");
}

std::uint64_t instance_prompt_seed(std::uint64_t seed, const std::string& narration_id) {
    return seed ^ fnv1a64(narration_id);
}

std::string effect_prompt(const ActionInstance& instance, CompletionClient& client,
                          const std::vector<ActionEffectPair>& pairs,
                          const PromptSpec& spec) {
    const std::string prompt =
        build_fewshot_prompt(pairs, spec.exemplar_count, instance.phrase,
                             instance_prompt_seed(spec.seed, instance.narration_id));
    const std::string continuation =
        client.complete(prompt, spec.max_tokens, spec.temperature, {"\n\n"});
    return parse_effect(continuation);
}

std::string make_prompt(const ActionInstance& instance, CompletionClient* client,
                        const std::vector<ActionEffectPair>& pairs, const PromptSpec& spec) {
    if (spec.mode == PromptMode::ActionPhrase) return passthrough_prompt(instance);
    if (client == nullptr) {
        throw Error(ErrorCode::Config, "effect_description mode needs a completion client");
    }
    return effect_prompt(instance, *client, pairs, spec);
}

}  // namespace effectcast
