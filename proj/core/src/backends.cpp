#include "effectcast/backends.hpp"

#include "effectcast/error.hpp"
#include "effectcast/hashing.hpp"
#include "effectcast/image_io.hpp"
#include "http_util.hpp"
#include "json.hpp"

namespace effectcast {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::int64_t elapsed_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start)
        .count();
}

}  // namespace

void validate_request(const InpaintRequest& request) {
    const auto expect = Dimensions{kBackendSize, kBackendSize};
    if (dims(request.frame) != expect || dims(request.mask) != expect) {
        throw Error(ErrorCode::MalformedRequest,
                    "inpaint request must carry a 64x64 frame and mask, got frame " +
                        std::to_string(request.frame.width()) + "x" +
                        std::to_string(request.frame.height()) + ", mask " +
                        std::to_string(request.mask.width()) + "x" +
                        std::to_string(request.mask.height()));
    }
    if (request.prompt.empty()) {
        throw Error(ErrorCode::MalformedRequest, "inpaint request has an empty prompt");
    }
}

Frame recomposite(const Frame& generated, const Frame& original, const Mask& mask) {
    if (dims(generated) != dims(original) || dims(mask) != dims(original)) {
        throw Error(ErrorCode::DimensionMismatch, "recomposite: size mismatch");
    }
    Frame out = generated;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.at(x, y)) out.set(x, y, original.at(x, y));
        }
    }
    return out;
}

std::uint64_t mock_stream_key(std::string_view prompt, std::uint64_t seed) {
    return mix64(fnv1a64(prompt) ^ mix64(seed));
}

std::vector<std::uint8_t> mock_generate(std::string_view prompt, std::uint64_t seed,
                                        std::size_t n) {
    std::vector<std::uint8_t> out;
    out.reserve(n);
    SplitMix64 rng(mock_stream_key(prompt, seed));
    while (out.size() < n) {
        const std::uint64_t word = rng.next();
        for (int i = 0; i < 8 && out.size() < n; ++i) {
            out.push_back(static_cast<std::uint8_t>(word >> (8 * i)));
        }
    }
    return out;
}

BackendDescriptor MockBackend::descriptor() const { return {"mock", true, kUnboundedConcurrency}; }

InpaintResult MockBackend::inpaint(const InpaintRequest& request) {
    const auto start = Clock::now();
    ++calls_;
    validate_request(request);
    const auto stream = mock_generate(request.prompt, request.seed, request.mask.count() * 3);
    Frame out = request.frame;
    std::size_t next = 0;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            if (!request.mask.at(x, y)) continue;
            out.set(x, y, {stream[next], stream[next + 1], stream[next + 2]});
            next += 3;
        }
    }
    return {std::move(out), "mock", elapsed_since(start), "{}"};
}

GlideAdapter::GlideAdapter(GlideAdapterConfig config) : config_(std::move(config)) {
    detail::parse_url(config_.endpoint);
    if (config_.max_concurrency < 1) {
        throw Error(ErrorCode::Config, "adapter max_concurrency must be >= 1");
    }
}

BackendDescriptor GlideAdapter::descriptor() const {
    return {"glide-adapter", false, config_.max_concurrency};
}

std::string GlideAdapter::cache_identity() const {
    return descriptor().id + settings_json();
}

std::string GlideAdapter::settings_json() const {
    json settings = json::object();
    if (config_.steps) settings["steps"] = *config_.steps;
    if (config_.guidance_scale) settings["guidance_scale"] = *config_.guidance_scale;
    return settings.dump();
}

InpaintResult GlideAdapter::inpaint(const InpaintRequest& request) {
    const auto start = Clock::now();
    validate_request(request);

    json body = {{"prompt", request.prompt},
                 {"seed", request.seed},
                 {"image_b64", base64_encode(encode_png(request.frame))},
                 {"mask_b64", base64_encode(encode_mask_png(request.mask))}};
    const json settings = json::parse(settings_json());
    if (!settings.empty()) body["settings"] = settings;

    const auto url = detail::parse_url(config_.endpoint);
    auto client = detail::make_client(url, config_.timeout);
    const auto res = client->Post(url.path, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::BackendUnavailable,
                    "inpaint endpoint " + config_.endpoint +
                        " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::BackendUnavailable,
                    "inpaint endpoint returned HTTP " + std::to_string(res->status));
    }

    Frame generated;
    json meta = json::object();
    try {
        const json reply = json::parse(res->body);
        generated = decode_frame(base64_decode(reply.at("image_b64").get<std::string>()));
        if (reply.contains("meta")) meta = reply["meta"];
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("inpaint response: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("inpaint response: ") + e.what());
    }
    if (dims(generated) != dims(request.frame)) {
        throw Error(ErrorCode::MalformedResponse,
                    "inpaint response image is " + std::to_string(generated.width()) + "x" +
                        std::to_string(generated.height()) + ", expected 64x64");
    }
    const json record = {{"settings", settings}, {"reply", meta}};
    return {recomposite(generated, request.frame, request.mask), "glide-adapter",
            elapsed_since(start), record.dump()};
}

}  // namespace effectcast
