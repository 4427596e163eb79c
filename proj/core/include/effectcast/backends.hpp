#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "effectcast/imaging.hpp"

namespace effectcast {

inline constexpr int kBackendSize = 64;

struct InpaintRequest {
    Frame frame;  // kBackendSize x kBackendSize
    Mask mask;    // kBackendSize x kBackendSize, true = regenerate
    std::string prompt;
    std::uint64_t seed = 0;
};

struct InpaintResult {
    Frame frame;
    std::string backend_id;
    std::int64_t elapsed_ms = 0;
    std::string meta_json = "{}";  // backend-side settings and reply metadata
};

inline constexpr int kUnboundedConcurrency = std::numeric_limits<int>::max();

struct BackendDescriptor {
    std::string id;
    bool deterministic = true;
    int max_concurrency = 1;
};

/// Throws Error(MalformedRequest) unless frame and mask are 64x64 and the
/// prompt is non-empty.
void validate_request(const InpaintRequest& request);

/// Copies input pixels back over every mask-false position.
Frame recomposite(const Frame& generated, const Frame& original, const Mask& mask);

class InpaintBackend {
public:
    virtual ~InpaintBackend() = default;
    virtual BackendDescriptor descriptor() const = 0;

    // Output must equal request.frame on every mask-false pixel.
    virtual InpaintResult inpaint(const InpaintRequest& request) = 0;

    // Identity folded into cache keys. Backends whose output depends on
    // settings beyond the request must include those settings here.
    virtual std::string cache_identity() const { return descriptor().id; }
};

/// Key for the mock byte stream: mix64(fnv1a64(prompt) ^ mix64(seed)).
std::uint64_t mock_stream_key(std::string_view prompt, std::uint64_t seed);

/// n bytes of SplitMix64 output keyed by mock_stream_key, little-endian per
/// 64-bit word.
std::vector<std::uint8_t> mock_generate(std::string_view prompt, std::uint64_t seed,
                                        std::size_t n);

/// Offline, deterministic test double. Fills mask-true pixels, row-major,
/// with consecutive RGB triples from mock_generate.
class MockBackend final : public InpaintBackend {
public:
    BackendDescriptor descriptor() const override;
    InpaintResult inpaint(const InpaintRequest& request) override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
};

struct GlideAdapterConfig {
    std::string endpoint;  // http://host:port/inpaint
    std::optional<int> steps;
    std::optional<double> guidance_scale;
    std::chrono::seconds timeout{300};
    int max_concurrency = 1;
};

/// Out-of-process text-conditioned diffusion inpainter reached over HTTP.
/// Request {prompt, seed, image_b64, mask_b64[, settings]}, response
/// {image_b64, meta}; images are base64 PNGs.
class GlideAdapter final : public InpaintBackend {
public:
    explicit GlideAdapter(GlideAdapterConfig config);

    BackendDescriptor descriptor() const override;
    std::string cache_identity() const override;
    InpaintResult inpaint(const InpaintRequest& request) override;

    std::string settings_json() const;

private:
    GlideAdapterConfig config_;
};

}  // namespace effectcast
