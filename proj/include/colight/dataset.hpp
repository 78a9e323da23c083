#pragma once

#include <string>
#include <vector>

#include "colight/inverse.hpp"
#include "colight/renderer.hpp"
#include "colight/scene_io.hpp"

namespace colight {

struct ManifestEntry {
    std::string image;  // paths relative to the manifest
    std::string mask;   // empty when absent
    int flash = 0;
    double gamma = 1.0;
    double exposure_ratio = 1.0;  // stored_image = exposure_ratio * physical radiance
    PinholeIntrinsics intrinsics;
    CameraPose pose;
    uint64_t seed = 0;  // per-entry render stream seed
};

struct DatasetManifest {
    std::string scene_path;  // synthetic ground truth, relative to the manifest
    Roi roi;
    RenderOptions render;  // shared options; per-entry seeds override render.seed
    std::vector<ManifestEntry> entries;
    std::string dir;  // directory of the manifest file; not serialized

    std::string image_path(const ManifestEntry& e) const { return dir + "/" + e.image; }
    std::string mask_path(const ManifestEntry& e) const { return dir + "/" + e.mask; }
    std::string scene_file() const { return dir + "/" + scene_path; }
};

/// Loads and validates a manifest: referenced files must exist, exposure
/// ratios must be positive, rotations orthonormal.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

struct SynthProtocol {
    int n_views = 75;    // camera poses; paired mode renders each twice
    bool paired = true;  // one flash-on and one flash-off image per pose
    int resolution = 256;
    double fov_deg = 45.0;
    double distance_min = 0.3, distance_max = 0.5;  // meters
    double flash_watt_min = 0.2, flash_watt_max = 0.8;
    std::string trajectory = "half_dome";  // or "spiral"
    bool masks = true;
    bool auto_exposure = false;
    RenderOptions render;

    static SynthProtocol from_json(const std::string& json_text);
};

/// Renders a multi-view flash/no-flash dataset of `scene_file` into out_dir
/// (PFM images, PNG masks, manifest.json). Byte-identical for a fixed seed.
DatasetManifest synth(const std::string& scene_file, const SynthProtocol& protocol,
                      const std::string& out_dir, uint64_t seed);

/// Rescales every image by 1/exposure_ratio (rewriting the files) and sets
/// all ratios to 1; applying it twice equals applying it once.
DatasetManifest normalize_exposure(const DatasetManifest& manifest);

/// Loads observations (images, masks, per-entry render options) for fitting;
/// exposure ratios are unapplied in memory so observations are physical.
std::vector<Observation> load_observations(const DatasetManifest& manifest);

/// Tiles tone-mapped previews into a contact sheet.
PngImage contact_sheet(const std::vector<HdrImage>& images, int columns);

}  // namespace colight
