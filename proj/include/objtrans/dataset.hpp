#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "objtrans/image.hpp"
#include "objtrans/types.hpp"

namespace objtrans {

/// On-disk dataset layout:
///
///   root/classes.txt                 one class name per line, id = line index
///   root/splits.json                 {"train": [stems], "val": [...], "test": [...]}
///   root/images/<split>/<stem>.png   8-bit RGB
///   root/labels/<split>/<stem>.txt   "class cx cy w h" per line, normalized
///   root/masks/<split>/<stem>.png    16-bit instance ids, 0 = background
///   root/masks/<split>/<stem>.json   {"<instance_id>": class_id, ...}
///
/// Instance id n belongs to label line n (1-based).
struct DatasetHandle {
    std::filesystem::path root;
    std::map<std::string, std::vector<std::string>> splits;
    std::vector<std::string> class_names;

    std::filesystem::path image_path(const std::string& split, const std::string& stem) const;
    std::filesystem::path label_path(const std::string& split, const std::string& stem) const;
    std::filesystem::path mask_path(const std::string& split, const std::string& stem) const;
    std::filesystem::path mask_sidecar_path(const std::string& split, const std::string& stem) const;
    std::filesystem::path masks_dir() const { return root / "masks"; }

    /// Split containing the stem, if any.
    std::optional<std::string> split_of(const std::string& stem) const;
    std::size_t image_count() const;
};

DatasetHandle load_dataset(const std::filesystem::path& root);

/// Parses one label file. Throws DataError naming file and line on malformed
/// lines, out-of-range coordinates, or class ids >= num_classes.
std::vector<GroundTruthBox> load_labels(const std::filesystem::path& path, std::size_t num_classes);

/// Writes "class cx cy w h" lines with six decimals.
void write_labels(const std::filesystem::path& path, const std::vector<GroundTruthBox>& boxes);
std::string format_label_line(const GroundTruthBox& box);

std::vector<GroundTruthBox> load_labels(const DatasetHandle& ds, const std::string& stem);

/// Decodes the instance id raster and its class sidecar, sorted by instance id.
/// Throws DataError when raster and sidecar disagree on the set of ids.
std::vector<InstanceMask> load_instance_masks(const DatasetHandle& ds, const std::string& image_id);

/// Writes the raster and sidecar for a set of masks on a width x height image.
void write_instance_masks(const std::filesystem::path& raster_path, const std::filesystem::path& sidecar_path,
                          std::uint32_t width, std::uint32_t height, const std::vector<InstanceMask>& masks);

void write_dataset_skeleton(const std::filesystem::path& root, const std::vector<std::string>& class_names,
                            const std::map<std::string, std::vector<std::string>>& splits);

}  // namespace objtrans
