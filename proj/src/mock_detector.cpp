#include "objtrans/mock_detector.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

#include "objtrans/colorspace.hpp"
#include "objtrans/dataset.hpp"
#include "objtrans/errors.hpp"
#include "objtrans/rng.hpp"

namespace objtrans {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double wrap180(double deg) {
    double h = wrap_hue(deg + 180.0) - 180.0;
    return h;
}

std::uint64_t region_hash(const ImageFrame& img, const BBox& box) {
    auto mask = InstanceMask::from_bbox(box, img.width(), img.height());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto px = img.pixels();
    for (const auto& s : mask.spans()) {
        auto begin = (std::size_t{s.y} * img.width() + s.x_begin) * 3;
        auto end = (std::size_t{s.y} * img.width() + s.x_end) * 3;
        h = fnv1a64(px.subspan(begin, end - begin), h);
    }
    return h;
}

PlantedObject planted_from_json(const json& j) {
    PlantedObject o;
    auto b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) {
        throw ConfigError("planted object bbox must be [cx, cy, w, h]");
    }
    o.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    o.class_id = j.value("class_id", 0u);
    if (j.contains("score")) {
        o.score = j["score"].get<double>();
    }
    o.fragile = j.value("fragile", false);
    if (j.contains("ref_hue")) {
        o.ref_hue = j["ref_hue"].get<double>();
    }
    return o;
}

json planted_to_json(const PlantedObject& o) {
    json j = {{"bbox", {o.bbox.cx, o.bbox.cy, o.bbox.w, o.bbox.h}}, {"class_id", o.class_id}};
    if (o.score) {
        j["score"] = *o.score;
    }
    if (o.fragile) {
        j["fragile"] = true;
    }
    if (o.ref_hue) {
        j["ref_hue"] = *o.ref_hue;
    }
    return j;
}

}  // namespace

std::string to_string(MockKind kind) {
    switch (kind) {
        case MockKind::oracle_stable: return "oracle_stable";
        case MockKind::fragile_fp: return "fragile_fp";
        case MockKind::hue_sensitive: return "hue_sensitive";
        case MockKind::bernoulli: return "bernoulli";
    }
    return "unknown";
}

MockKind mock_kind_from_string(const std::string& name) {
    if (name == "oracle_stable") return MockKind::oracle_stable;
    if (name == "fragile_fp") return MockKind::fragile_fp;
    if (name == "hue_sensitive") return MockKind::hue_sensitive;
    if (name == "bernoulli") return MockKind::bernoulli;
    throw ConfigError("unknown mock detector kind '" + name + "'");
}

MockDetectorSpec MockDetectorSpec::from_json(const json& j) {
    MockDetectorSpec s;
    try {
        s.kind = mock_kind_from_string(j.at("kind").get<std::string>());
        s.seed = j.value("seed", std::uint64_t{0});
        s.base_score = j.value("base_score", s.base_score);
        s.preferred_hue = j.value("preferred_hue", s.preferred_hue);
        s.sharpness = j.value("sharpness", s.sharpness);
        s.fragile_base = j.value("fragile_base", s.fragile_base);
        s.fragile_amplitude = j.value("fragile_amplitude", s.fragile_amplitude);
        s.fragile_jitter = j.value("fragile_jitter", s.fragile_jitter);
        s.decoys_per_image = j.value("decoys_per_image", s.decoys_per_image);
        s.decoy_class = j.value("decoy_class", s.decoy_class);
        if (j.contains("table")) {
            for (const auto& e : j["table"]) {
                s.table.push_back({e.value("hue_shift", 0.0), e.at("p").get<double>(), e.value("weight", 1.0)});
            }
        }
        if (j.contains("scenes")) {
            for (const auto& [id, objs] : j["scenes"].items()) {
                auto& list = s.scenes[id];
                for (const auto& o : objs) {
                    list.push_back(planted_from_json(o));
                }
            }
        }
        if (j.contains("plant_dataset")) {
            s.plant_dataset = std::filesystem::path(j["plant_dataset"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad mock detector spec: ") + e.what());
    }
    s.validate();
    return s;
}

MockDetectorSpec MockDetectorSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open mock detector spec " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    auto spec = from_json(j);
    if (spec.plant_dataset && spec.plant_dataset->is_relative()) {
        spec.plant_dataset = path.parent_path() / *spec.plant_dataset;
    }
    return spec;
}

json MockDetectorSpec::to_json() const {
    json j = {{"kind", objtrans::to_string(kind)},
              {"seed", seed},
              {"base_score", base_score},
              {"preferred_hue", preferred_hue},
              {"sharpness", sharpness},
              {"fragile_base", fragile_base},
              {"fragile_amplitude", fragile_amplitude},
              {"fragile_jitter", fragile_jitter},
              {"decoys_per_image", decoys_per_image},
              {"decoy_class", decoy_class}};
    if (!table.empty()) {
        j["table"] = json::array();
        for (const auto& e : table) {
            j["table"].push_back({{"hue_shift", e.hue_shift}, {"p", e.p}, {"weight", e.weight}});
        }
    }
    if (!scenes.empty()) {
        j["scenes"] = json::object();
        for (const auto& [id, objs] : scenes) {
            j["scenes"][id] = json::array();
            for (const auto& o : objs) {
                j["scenes"][id].push_back(planted_to_json(o));
            }
        }
    }
    if (plant_dataset) {
        j["plant_dataset"] = plant_dataset->string();
    }
    return j;
}

void MockDetectorSpec::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(base_score)) {
        throw ConfigError("base_score must lie in [0,1]");
    }
    if (kind == MockKind::hue_sensitive && !(sharpness >= 0.0 && std::isfinite(sharpness))) {
        throw ConfigError("sharpness must be a finite non-negative number");
    }
    if (kind == MockKind::fragile_fp) {
        if (!in01(fragile_base) || !(fragile_amplitude >= 0) || !(fragile_jitter >= 0) || decoys_per_image < 0) {
            throw ConfigError("invalid fragile_fp parameters");
        }
    }
    if (kind == MockKind::bernoulli) {
        if (table.empty()) {
            throw ConfigError("bernoulli mock needs a non-empty table");
        }
        double total = 0;
        for (const auto& e : table) {
            if (!in01(e.p) || !(e.weight >= 0) || !std::isfinite(e.hue_shift)) {
                throw ConfigError("bernoulli table entries need p in [0,1] and weight >= 0");
            }
            total += e.weight;
        }
        if (!(total > 0)) {
            throw ConfigError("bernoulli table weights sum to zero");
        }
    }
    for (const auto& [id, objs] : scenes) {
        for (const auto& o : objs) {
            if (!o.bbox.valid() || (o.score && !in01(*o.score))) {
                throw ConfigError("invalid planted object in scene '" + id + "'");
            }
        }
    }
}

MockDetector::MockDetector(MockDetectorSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    planted_ = spec_.scenes;
    if (spec_.plant_dataset) {
        auto ds = load_dataset(*spec_.plant_dataset);
        for (const auto& [split, stems] : ds.splits) {
            for (const auto& stem : stems) {
                auto& list = planted_[stem];
                for (const auto& gt : load_labels(ds, stem)) {
                    PlantedObject o;
                    o.bbox = gt.bbox;
                    o.class_id = gt.class_id;
                    list.push_back(o);
                }
            }
        }
    }
}

std::vector<PlantedObject> MockDetector::objects_for(const std::string& image_id) const {
    std::vector<PlantedObject> out;
    if (auto it = planted_.find(image_id); it != planted_.end()) {
        out = it->second;
    }
    if (spec_.kind == MockKind::fragile_fp) {
        for (int i = 0; i < spec_.decoys_per_image; ++i) {
            KeyedStream rng(spec_.seed, {fnv1a64(image_id), 0xdec0, static_cast<std::uint64_t>(i)});
            double w = rng.uniform(0.08, 0.2);
            double h = rng.uniform(0.08, 0.2);
            double cx = rng.uniform(w / 2, 1 - w / 2);
            double cy = rng.uniform(h / 2, 1 - h / 2);
            PlantedObject o;
            o.bbox = {cx, cy, w, h};
            o.class_id = spec_.decoy_class;
            o.fragile = true;
            out.push_back(o);
        }
    }
    return out;
}

bool MockDetector::coin(std::uint64_t seed, std::uint64_t trial_key, double p) {
    KeyedStream rng(seed, {0xc011, trial_key});
    return rng.uniform() < p;
}

std::size_t MockDetector::bucket_for(double hue_shift) const {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < spec_.table.size(); ++i) {
        double d = std::abs(wrap180(hue_shift - spec_.table[i].hue_shift));
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

double mean_hue(const ImageFrame& img, const BBox& box) {
    auto mask = InstanceMask::from_bbox(box, img.width(), img.height());
    double sx = 0, sy = 0;
    for (const auto& s : mask.spans()) {
        for (auto x = s.x_begin; x < s.x_end; ++x) {
            auto p = rgb_to_hsv(img.at(x, s.y));
            sx += p.s * std::cos(p.h * kDegToRad);
            sy += p.s * std::sin(p.h * kDegToRad);
        }
    }
    if (sx == 0 && sy == 0) {
        return 0.0;
    }
    return wrap_hue(std::atan2(sy, sx) / kDegToRad);
}

std::vector<Detection> MockDetector::detect(const ImageFrame& img, const std::string& image_id,
                                            double conf_threshold) const {
    std::vector<Detection> out;
    auto objects = objects_for(image_id);
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        double base = o.score.value_or(spec_.base_score);
        Detection d{o.bbox.clipped(), o.class_id, base, -1};
        switch (spec_.kind) {
            case MockKind::oracle_stable:
                break;
            case MockKind::fragile_fp: {
                if (!o.fragile) {
                    break;
                }
                KeyedStream rng(spec_.seed, {region_hash(img, o.bbox), i});
                double u = rng.uniform();
                d.score = std::clamp(o.score.value_or(spec_.fragile_base) + spec_.fragile_amplitude * (2 * u - 1),
                                     0.0, 1.0);
                d.bbox.cx += spec_.fragile_jitter * o.bbox.w * (2 * rng.uniform() - 1);
                d.bbox.cy += spec_.fragile_jitter * o.bbox.h * (2 * rng.uniform() - 1);
                d.bbox = d.bbox.clipped();
                break;
            }
            case MockKind::hue_sensitive: {
                double pref = o.ref_hue.value_or(spec_.preferred_hue);
                double delta = wrap180(mean_hue(img, o.bbox) - pref);
                d.score = std::clamp(base * std::max(0.0, std::cos(spec_.sharpness * delta * kDegToRad)), 0.0, 1.0);
                break;
            }
            case MockKind::bernoulli: {
                double ref = o.ref_hue.value_or(spec_.preferred_hue);
                double shift = wrap180(mean_hue(img, o.bbox) - ref);
                double p = spec_.table[bucket_for(shift)].p;
                if (!coin(spec_.seed, mix64(region_hash(img, o.bbox)) ^ i, p)) {
                    continue;
                }
                break;
            }
        }
        if (d.score > 0.0 && d.score >= conf_threshold) {
            out.push_back(d);
        }
    }
    return out;
}

DetectResponse MockAdapter::handle(const DetectRequest& req) {
    ++calls_;
    DetectResponse resp{req.request_id, {}};
    if (const auto* frame = std::get_if<protocol::SharedFrame>(&req.image)) {
        if (!*frame) {
            throw std::invalid_argument("null frame in request");
        }
        auto id = req.image_id.empty() ? (*frame)->image_id() : req.image_id;
        resp.detections = detector_->detect(**frame, id, req.conf_threshold);
    } else {
        auto img = protocol::resolve_image(req);
        auto id = req.image_id.empty() ? img.image_id() : req.image_id;
        resp.detections = detector_->detect(img, id, req.conf_threshold);
    }
    return resp;
}

std::size_t serve_protocol(const MockDetector& detector, std::istream& in, std::ostream& out) {
    out << protocol::handshake_line() << '\n' << std::flush;
    std::size_t served = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) {
            continue;
        }
        std::uint64_t id = 0;
        try {
            auto j = json::parse(line, nullptr, false);
            if (j.is_object() && j.contains("request_id") && j["request_id"].is_number_unsigned()) {
                id = j["request_id"].get<std::uint64_t>();
            }
            auto req = protocol::decode_request(line);
            auto img = protocol::resolve_image(req);
            auto image_id = req.image_id.empty() ? img.image_id() : req.image_id;
            DetectResponse resp{req.request_id, detector.detect(img, image_id, req.conf_threshold)};
            out << protocol::encode_response(resp) << '\n' << std::flush;
        } catch (const std::exception& e) {
            out << protocol::encode_error(id, e.what()) << '\n' << std::flush;
        }
        ++served;
    }
    return served;
}

}  // namespace objtrans
