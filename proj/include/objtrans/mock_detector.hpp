#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "objtrans/detector.hpp"
#include "objtrans/image.hpp"
#include "objtrans/types.hpp"

namespace objtrans {

enum class MockKind {
    // Reports planted objects with their configured score, whatever the pixels
    // look like. Transformation invariant by construction.
    oracle_stable,
    // Stable planted objects plus "fragile" ones whose score and box depend on
    // a hash of the pixels under them, so any perturbation moves them.
    fragile_fp,
    // score = base * max(0, cos(sharpness * (mean_hue - preferred_hue))).
    hue_sensitive,
    // Detects each object with probability p(theta), where theta is the hue
    // shift inferred from the box pixels and looked up in a finite table.
    bernoulli,
};

std::string to_string(MockKind kind);
MockKind mock_kind_from_string(const std::string& name);

struct PlantedObject {
    BBox bbox;
    std::uint32_t class_id = 0;
    std::optional<double> score;     // falls back to the spec's base score
    bool fragile = false;
    std::optional<double> ref_hue;   // unperturbed object hue (hue_sensitive / bernoulli)
};

/// One row of the bernoulli table: detection probability under a hue shift.
struct BernoulliEntry {
    double hue_shift = 0.0;
    double p = 0.5;
    double weight = 1.0;  // sampling weight of this theta
};

struct MockDetectorSpec {
    MockKind kind = MockKind::oracle_stable;
    std::uint64_t seed = 0;
    double base_score = 0.9;

    // hue_sensitive
    double preferred_hue = 0.0;
    double sharpness = 1.0;

    // fragile_fp
    double fragile_base = 0.5;
    double fragile_amplitude = 0.45;
    double fragile_jitter = 0.05;  // center jitter as a fraction of box size
    int decoys_per_image = 0;
    std::uint32_t decoy_class = 0;

    // bernoulli
    std::vector<BernoulliEntry> table;

    // planted objects per image id
    std::map<std::string, std::vector<PlantedObject>> scenes;
    // when set, every ground-truth label of this dataset is planted as a
    // stable object
    std::optional<std::filesystem::path> plant_dataset;

    static MockDetectorSpec from_json(const nlohmann::json& j);
    static MockDetectorSpec load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// Throws ConfigError on invalid parameters for the kind.
    void validate() const;
};

/// Deterministic in-process detector. A pure function of (spec, image pixels,
/// image id, threshold).
class MockDetector {
public:
    explicit MockDetector(MockDetectorSpec spec);

    const MockDetectorSpec& spec() const { return spec_; }

    /// Planted plus generated decoy objects for an image.
    std::vector<PlantedObject> objects_for(const std::string& image_id) const;

    std::vector<Detection> detect(const ImageFrame& img, const std::string& image_id, double conf_threshold) const;

    /// Bernoulli coin shared by the image path and the variance decomposition:
    /// true with probability p for the given trial key.
    static bool coin(std::uint64_t seed, std::uint64_t trial_key, double p);

    /// Index of the table entry nearest (circularly) to a hue shift.
    std::size_t bucket_for(double hue_shift) const;

private:
    MockDetectorSpec spec_;
    std::map<std::string, std::vector<PlantedObject>> planted_;
};

/// Saturation-weighted circular mean hue of the pixels under a box; 0 when
/// the region is achromatic.
double mean_hue(const ImageFrame& img, const BBox& box);

/// In-process adapter over a MockDetector.
class MockAdapter final : public DetectorAdapter {
public:
    explicit MockAdapter(std::shared_ptr<const MockDetector> detector) : detector_(std::move(detector)) {}

    DetectResponse handle(const DetectRequest& req) override;
    std::uint64_t calls() const override { return calls_; }

private:
    std::shared_ptr<const MockDetector> detector_;
    std::uint64_t calls_ = 0;
};

/// Request loop used by the mock detector executable: handshake, then one
/// response line per request line until EOF. Unreadable images produce error
/// objects and the loop continues. Returns the number of requests served.
std::size_t serve_protocol(const MockDetector& detector, std::istream& in, std::ostream& out);

}  // namespace objtrans
