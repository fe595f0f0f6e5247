#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "objtrans/image.hpp"
#include "objtrans/types.hpp"

// objtrans/1 wire protocol. See PROTOCOL.md for the byte-level description.
namespace objtrans::protocol {

inline constexpr std::string_view kVersion = "objtrans/1";

/// Handshake line an adapter must print before anything else.
std::string handshake_line();

/// Inline image payload: base64 of an RGB PNG.
struct InlinePng {
    std::string base64;
};

/// In-memory frame; only valid for in-process adapters, never serialized.
using SharedFrame = std::shared_ptr<const ImageFrame>;

using ImageSource = std::variant<std::filesystem::path, InlinePng, SharedFrame>;

struct DetectRequest {
    std::uint64_t request_id = 0;
    std::string image_id;
    double conf_threshold = 0.25;
    ImageSource image;
};

struct DetectResponse {
    std::uint64_t request_id = 0;
    std::vector<Detection> detections;
};

/// One JSON line, no trailing newline. Throws std::invalid_argument when the
/// image is an in-memory frame.
std::string encode_request(const DetectRequest& req);
DetectRequest decode_request(std::string_view line);

std::string encode_response(const DetectResponse& resp);
std::string encode_error(std::uint64_t request_id, std::string_view message);

/// Parses and validates an adapter reply to `req`. Throws AdapterError naming
/// the offending line on malformed JSON, mismatched request ids, missing
/// fields, scores outside [conf_threshold, 1], or an error object.
DetectResponse decode_response(std::string_view line, const DetectRequest& req);

/// Throws AdapterError unless the line is exactly the expected handshake object.
void check_handshake(std::string_view line);

/// Loads the frame behind any image source.
ImageFrame resolve_image(const DetectRequest& req);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace objtrans::protocol
