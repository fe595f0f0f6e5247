#include "objtrans/protocol.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <stdexcept>

#include "objtrans/errors.hpp"
#include "objtrans/png_io.hpp"

namespace objtrans::protocol {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string excerpt(std::string_view line) {
    constexpr std::size_t kMax = 200;
    if (line.size() <= kMax) {
        return std::string(line);
    }
    return std::string(line.substr(0, kMax)) + "...";
}

[[noreturn]] void violation(std::string_view what, std::string_view line) {
    throw AdapterError("protocol violation: " + std::string(what) + " in line: " + excerpt(line));
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (i + 1 == bytes.size()) {
        std::uint32_t v = bytes[i] << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    static const auto table = [] {
        std::array<int, 256> t{};
        t.fill(-1);
        for (int i = 0; i < 64; ++i) {
            t[static_cast<unsigned char>(kAlphabet[i])] = i;
        }
        return t;
    }();
    if (text.size() % 4 != 0) {
        throw std::invalid_argument("base64 length not a multiple of 4");
    }
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (c == '=' && i + 4 == text.size() && j >= 2) {
                vals[j] = 0;
                ++pad;
                continue;
            }
            if (pad > 0) {
                throw std::invalid_argument("base64 padding in the middle");
            }
            vals[j] = table[static_cast<unsigned char>(c)];
            if (vals[j] < 0) {
                throw std::invalid_argument("invalid base64 character");
            }
        }
        std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        if (pad < 2) {
            out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        }
        if (pad < 1) {
            out.push_back(static_cast<std::uint8_t>(v & 0xff));
        }
    }
    return out;
}

std::string handshake_line() {
    ojson j;
    j["protocol"] = kVersion;
    return j.dump();
}

void check_handshake(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        violation("handshake is not JSON", line);
    }
    if (!j.is_object() || !j.contains("protocol") || !j["protocol"].is_string()) {
        violation("handshake lacks a protocol field", line);
    }
    if (j["protocol"].get<std::string>() != kVersion) {
        throw AdapterError("protocol version mismatch: adapter speaks '" + j["protocol"].get<std::string>() +
                           "', expected '" + std::string(kVersion) + "'");
    }
}

std::string encode_request(const DetectRequest& req) {
    ojson j;
    j["request_id"] = req.request_id;
    j["image_id"] = req.image_id;
    j["conf_threshold"] = req.conf_threshold;
    if (const auto* p = std::get_if<std::filesystem::path>(&req.image)) {
        j["image_path"] = p->string();
    } else if (const auto* b = std::get_if<InlinePng>(&req.image)) {
        j["image_png_b64"] = b->base64;
    } else {
        throw std::invalid_argument("in-memory frames cannot be sent over the wire");
    }
    return j.dump();
}

DetectRequest decode_request(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        violation("request is not JSON", line);
    }
    if (!j.is_object() || !j.contains("request_id") || !j["request_id"].is_number_unsigned()) {
        violation("request lacks an unsigned request_id", line);
    }
    DetectRequest req;
    req.request_id = j["request_id"].get<std::uint64_t>();
    if (j.contains("image_id")) {
        if (!j["image_id"].is_string()) {
            violation("image_id must be a string", line);
        }
        req.image_id = j["image_id"].get<std::string>();
    }
    if (!j.contains("conf_threshold") || !j["conf_threshold"].is_number()) {
        violation("request lacks conf_threshold", line);
    }
    req.conf_threshold = j["conf_threshold"].get<double>();
    if (!(req.conf_threshold >= 0.0 && req.conf_threshold <= 1.0)) {
        violation("conf_threshold outside [0,1]", line);
    }
    bool has_path = j.contains("image_path");
    bool has_inline = j.contains("image_png_b64");
    if (has_path == has_inline) {
        violation("request must carry exactly one of image_path / image_png_b64", line);
    }
    if ((has_path && !j["image_path"].is_string()) || (has_inline && !j["image_png_b64"].is_string())) {
        violation("image field must be a string", line);
    }
    if (has_path) {
        req.image = std::filesystem::path(j["image_path"].get<std::string>());
        if (req.image_id.empty()) {
            req.image_id = std::get<std::filesystem::path>(req.image).stem().string();
        }
    } else {
        req.image = InlinePng{j["image_png_b64"].get<std::string>()};
    }
    return req;
}

std::string encode_response(const DetectResponse& resp) {
    ojson j;
    j["request_id"] = resp.request_id;
    j["detections"] = ojson::array();
    for (const auto& d : resp.detections) {
        ojson dj;
        dj["class_id"] = d.class_id;
        dj["score"] = d.score;
        dj["bbox"] = {d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h};
        j["detections"].push_back(std::move(dj));
    }
    return j.dump();
}

std::string encode_error(std::uint64_t request_id, std::string_view message) {
    ojson j;
    j["request_id"] = request_id;
    j["error"] = message;
    return j.dump();
}

DetectResponse decode_response(std::string_view line, const DetectRequest& req) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        violation("response is not JSON", line);
    }
    if (!j.is_object() || !j.contains("request_id") || !j["request_id"].is_number_unsigned()) {
        violation("response lacks an unsigned request_id", line);
    }
    auto id = j["request_id"].get<std::uint64_t>();
    if (id != req.request_id) {
        violation("response request_id " + std::to_string(id) + " does not match request " +
                      std::to_string(req.request_id),
                  line);
    }
    if (j.contains("error")) {
        throw AdapterError("detector reported error for request " + std::to_string(id) + ": " +
                           (j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump()));
    }
    if (!j.contains("detections") || !j["detections"].is_array()) {
        violation("response lacks a detections array", line);
    }
    DetectResponse resp{id, {}};
    for (const auto& dj : j["detections"]) {
        if (!dj.is_object() || !dj.contains("class_id") || !dj["class_id"].is_number_unsigned() ||
            !dj.contains("score") || !dj["score"].is_number() || !dj.contains("bbox") || !dj["bbox"].is_array() ||
            dj["bbox"].size() != 4) {
            violation("malformed detection", line);
        }
        Detection d;
        d.class_id = dj["class_id"].get<std::uint32_t>();
        d.score = dj["score"].get<double>();
        std::array<double, 4> b{};
        for (std::size_t i = 0; i < 4; ++i) {
            if (!dj["bbox"][i].is_number()) {
                violation("non-numeric bbox coordinate", line);
            }
            b[i] = dj["bbox"][i].get<double>();
            if (!std::isfinite(b[i])) {
                violation("non-finite bbox coordinate", line);
            }
        }
        if (b[2] <= 0 || b[3] <= 0) {
            violation("non-positive box extent", line);
        }
        d.bbox = {b[0], b[1], b[2], b[3]};
        if (!(d.score >= req.conf_threshold && d.score <= 1.0)) {
            violation("score " + std::to_string(d.score) + " outside [conf_threshold, 1]", line);
        }
        resp.detections.push_back(d);
    }
    return resp;
}

ImageFrame resolve_image(const DetectRequest& req) {
    if (const auto* p = std::get_if<std::filesystem::path>(&req.image)) {
        auto img = png::read_rgb(*p);
        if (!req.image_id.empty()) {
            img.set_image_id(req.image_id);
        }
        return img;
    }
    if (const auto* b = std::get_if<InlinePng>(&req.image)) {
        return png::decode_rgb(base64_decode(b->base64), req.image_id);
    }
    const auto& frame = std::get<SharedFrame>(req.image);
    if (!frame) {
        throw std::invalid_argument("null frame in request");
    }
    return *frame;
}

}  // namespace objtrans::protocol
