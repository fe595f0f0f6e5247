#include "objtrans/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "objtrans/errors.hpp"
#include "objtrans/png_io.hpp"

namespace objtrans {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string position(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

bool parse_double(std::string_view tok, double& out) {
    // from_chars for double is available in libstdc++ 11
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

bool parse_u32(std::string_view tok, std::uint32_t& out) {
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace

fs::path DatasetHandle::image_path(const std::string& split, const std::string& stem) const {
    return root / "images" / split / (stem + ".png");
}

fs::path DatasetHandle::label_path(const std::string& split, const std::string& stem) const {
    return root / "labels" / split / (stem + ".txt");
}

fs::path DatasetHandle::mask_path(const std::string& split, const std::string& stem) const {
    return root / "masks" / split / (stem + ".png");
}

fs::path DatasetHandle::mask_sidecar_path(const std::string& split, const std::string& stem) const {
    return root / "masks" / split / (stem + ".json");
}

std::optional<std::string> DatasetHandle::split_of(const std::string& stem) const {
    for (const auto& [name, stems] : splits) {
        if (std::find(stems.begin(), stems.end(), stem) != stems.end()) {
            return name;
        }
    }
    return std::nullopt;
}

std::size_t DatasetHandle::image_count() const {
    std::size_t n = 0;
    for (const auto& [_, stems] : splits) {
        n += stems.size();
    }
    return n;
}

std::vector<GroundTruthBox> load_labels(const fs::path& path, std::size_t num_classes) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::vector<GroundTruthBox> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;) {
            tok.push_back(t);
        }
        if (tok.empty()) {
            continue;
        }
        if (tok.size() != 5) {
            throw DataError(position(path, lineno) + ": expected 5 fields, got " + std::to_string(tok.size()));
        }
        GroundTruthBox gt;
        if (!parse_u32(tok[0], gt.class_id)) {
            throw DataError(position(path, lineno) + ": bad class id '" + tok[0] + "'");
        }
        if (gt.class_id >= num_classes) {
            throw DataError(position(path, lineno) + ": class id " + tok[0] + " out of range");
        }
        double* fields[] = {&gt.bbox.cx, &gt.bbox.cy, &gt.bbox.w, &gt.bbox.h};
        static constexpr const char* names[] = {"cx", "cy", "w", "h"};
        for (int i = 0; i < 4; ++i) {
            if (!parse_double(tok[i + 1], *fields[i])) {
                throw DataError(position(path, lineno) + ": bad number '" + tok[i + 1] + "'");
            }
            if (!(*fields[i] >= 0.0 && *fields[i] <= 1.0)) {
                throw DataError(position(path, lineno) + ": " + names[i] + "=" + tok[i + 1] + " outside [0,1]");
            }
        }
        if (gt.bbox.w <= 0 || gt.bbox.h <= 0) {
            throw DataError(position(path, lineno) + ": zero-size box");
        }
        out.push_back(gt);
    }
    return out;
}

std::string format_label_line(const GroundTruthBox& box) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%u %.6f %.6f %.6f %.6f", box.class_id, box.bbox.cx, box.bbox.cy, box.bbox.w,
                  box.bbox.h);
    return buf;
}

void write_labels(const fs::path& path, const std::vector<GroundTruthBox>& boxes) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    for (const auto& b : boxes) {
        out << format_label_line(b) << '\n';
    }
}

std::vector<GroundTruthBox> load_labels(const DatasetHandle& ds, const std::string& stem) {
    auto split = ds.split_of(stem);
    if (!split) {
        throw DataError("unknown image id " + stem);
    }
    auto path = ds.label_path(*split, stem);
    if (!fs::exists(path)) {
        return {};
    }
    return load_labels(path, ds.class_names.size());
}

DatasetHandle load_dataset(const fs::path& root) {
    DatasetHandle ds;
    ds.root = root;
    auto classes = root / "classes.txt";
    std::ifstream cin(classes);
    if (!cin) {
        throw DataError("missing " + classes.string());
    }
    for (std::string line; std::getline(cin, line);) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (!line.empty()) {
            ds.class_names.push_back(line);
        }
    }

    auto splits_path = root / "splits.json";
    if (!fs::exists(splits_path)) {
        throw DataError("missing " + splits_path.string());
    }
    auto sj = read_json(splits_path);
    if (!sj.is_object()) {
        throw DataError(splits_path.string() + ": expected an object of split lists");
    }
    std::set<std::string> seen;
    for (const auto& [name, stems] : sj.items()) {
        if (!stems.is_array()) {
            throw DataError(splits_path.string() + ": split '" + name + "' is not a list");
        }
        auto& list = ds.splits[name];
        for (const auto& s : stems) {
            auto stem = s.get<std::string>();
            if (!seen.insert(stem).second) {
                throw DataError(splits_path.string() + ": image '" + stem + "' listed in more than one split");
            }
            list.push_back(stem);
        }
    }

    for (const auto& [split, stems] : ds.splits) {
        for (const auto& stem : stems) {
            if (!fs::exists(ds.image_path(split, stem))) {
                throw DataError("missing image " + ds.image_path(split, stem).string());
            }
            auto lp = ds.label_path(split, stem);
            if (fs::exists(lp)) {
                load_labels(lp, ds.class_names.size());
            }
        }
        // label files without an image
        auto label_dir = root / "labels" / split;
        if (fs::is_directory(label_dir)) {
            for (const auto& entry : fs::directory_iterator(label_dir)) {
                if (entry.path().extension() != ".txt") {
                    continue;
                }
                auto stem = entry.path().stem().string();
                if (!fs::exists(ds.image_path(split, stem))) {
                    throw DataError("missing image for label " + entry.path().string());
                }
            }
        }
    }
    return ds;
}

std::vector<InstanceMask> load_instance_masks(const DatasetHandle& ds, const std::string& image_id) {
    auto split = ds.split_of(image_id);
    if (!split) {
        throw DataError("unknown image id " + image_id);
    }
    auto raster_path = ds.mask_path(*split, image_id);
    auto sidecar_path = ds.mask_sidecar_path(*split, image_id);
    if (!fs::exists(raster_path)) {
        throw DataError("missing mask " + raster_path.string());
    }
    if (!fs::exists(sidecar_path)) {
        throw DataError("missing mask sidecar " + sidecar_path.string());
    }
    auto raster = png::read_gray16(raster_path);
    auto sidecar = read_json(sidecar_path);
    if (!sidecar.is_object()) {
        throw DataError(sidecar_path.string() + ": expected {instance_id: class_id}");
    }

    std::map<std::uint32_t, std::uint32_t> classes;
    for (const auto& [key, value] : sidecar.items()) {
        std::uint32_t id = 0;
        if (!parse_u32(key, id) || id == 0 || id > 0xffff || !value.is_number_unsigned()) {
            throw DataError(sidecar_path.string() + ": bad entry '" + key + "'");
        }
        classes[id] = value.get<std::uint32_t>();
    }

    std::map<std::uint32_t, std::vector<Span>> spans;
    for (std::uint32_t y = 0; y < raster.height; ++y) {
        std::uint32_t x = 0;
        while (x < raster.width) {
            auto id = raster.values[std::size_t{y} * raster.width + x];
            auto start = x;
            while (x < raster.width && raster.values[std::size_t{y} * raster.width + x] == id) {
                ++x;
            }
            if (id != 0) {
                spans[id].push_back({y, start, x});
            }
        }
    }

    for (const auto& [id, _] : spans) {
        if (!classes.contains(id)) {
            throw DataError(raster_path.string() + ": instance id " + std::to_string(id) +
                            " present in raster but absent from sidecar");
        }
    }
    for (const auto& [id, _] : classes) {
        if (!spans.contains(id)) {
            throw DataError(sidecar_path.string() + ": instance id " + std::to_string(id) +
                            " listed in sidecar but absent from raster");
        }
    }

    std::vector<InstanceMask> out;
    for (auto& [id, sp] : spans) {
        out.emplace_back(image_id, id, classes.at(id), std::move(sp));
    }
    return out;
}

void write_instance_masks(const fs::path& raster_path, const fs::path& sidecar_path, std::uint32_t width,
                          std::uint32_t height, const std::vector<InstanceMask>& masks) {
    png::Gray16 raster{width, height, std::vector<std::uint16_t>(std::size_t{width} * height, 0)};
    json sidecar = json::object();
    for (const auto& m : masks) {
        if (m.instance_id() == 0 || m.instance_id() > 0xffff) {
            throw DataError("instance id must lie in [1, 65535]");
        }
        if (!m.fits(width, height)) {
            throw DataError("mask exceeds raster bounds");
        }
        for (const auto& s : m.spans()) {
            for (auto x = s.x_begin; x < s.x_end; ++x) {
                raster.values[std::size_t{s.y} * width + x] = static_cast<std::uint16_t>(m.instance_id());
            }
        }
        sidecar[std::to_string(m.instance_id())] = m.class_id();
    }
    png::write_gray16(raster_path, raster);
    std::ofstream out(sidecar_path, std::ios::trunc);
    out << sidecar.dump() << '\n';
}

void write_dataset_skeleton(const fs::path& root, const std::vector<std::string>& class_names,
                            const std::map<std::string, std::vector<std::string>>& splits) {
    fs::create_directories(root);
    {
        std::ofstream out(root / "classes.txt", std::ios::trunc);
        for (const auto& c : class_names) {
            out << c << '\n';
        }
    }
    json sj = json::object();
    for (const auto& [name, stems] : splits) {
        sj[name] = stems;
        fs::create_directories(root / "images" / name);
        fs::create_directories(root / "labels" / name);
    }
    std::ofstream out(root / "splits.json", std::ios::trunc);
    out << sj.dump(2) << '\n';
}

}  // namespace objtrans
