#include "colight/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sys/stat.h>

#include "colight/errors.hpp"
#include "json.hpp"

namespace colight {

using json = nlohmann::ordered_json;

namespace {

bool file_exists(const std::string& path) {
    struct stat st;
    return ::stat(path.c_str(), &st) == 0;
}

json pose_to_json(const CameraPose& pose) {
    json j;
    json R = json::array();
    for (int i = 0; i < 9; ++i) R.push_back(pose.rotation.m[i]);
    j["R"] = R;
    j["t"] = json::array({pose.translation.x, pose.translation.y, pose.translation.z});
    return j;
}

CameraPose pose_from_json(const json& j) {
    CameraPose pose;
    const json& R = j.at("R");
    if (R.size() != 9) throw InvalidInput("pose R must have 9 entries");
    for (int i = 0; i < 9; ++i) pose.rotation.m[i] = R[i].get<double>();
    const json& t = j.at("t");
    pose.translation = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
    pose.validate();
    return pose;
}

json render_to_json(const RenderOptions& o) {
    json j;
    j["n_samples"] = o.n_samples;
    j["sharpness_scale"] = o.sharpness_scale;
    j["seed"] = o.seed;
    j["jitter"] = o.jitter;
    j["background"] = o.background == RenderOptions::Background::kNone
                          ? "none"
                          : (o.background == RenderOptions::Background::kConstant ? "constant" : "env");
    j["background_color"] = json::array({o.background_color.r, o.background_color.g, o.background_color.b});
    j["shade_eps"] = o.shade_eps;
    return j;
}

RenderOptions render_from_json(const json& j) {
    RenderOptions o;
    o.n_samples = j.value("n_samples", 128);
    o.sharpness_scale = j.value("sharpness_scale", 64.0);
    o.seed = j.value("seed", uint64_t(0));
    o.jitter = j.value("jitter", true);
    std::string bg = j.value("background", "none");
    if (bg == "none")
        o.background = RenderOptions::Background::kNone;
    else if (bg == "constant")
        o.background = RenderOptions::Background::kConstant;
    else if (bg == "env")
        o.background = RenderOptions::Background::kEnv;
    else
        throw InvalidInput("unknown background mode '" + bg + "'");
    if (j.contains("background_color")) {
        const json& c = j["background_color"];
        o.background_color = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    }
    o.shade_eps = j.value("shade_eps", 1e-5);
    return o;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open manifest " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    DatasetManifest m;
    size_t slash = path.find_last_of('/');
    m.dir = slash == std::string::npos ? "." : path.substr(0, slash);
    m.scene_path = j.value("scene", "");
    const json& roi = j.at("roi");
    m.roi.center = {roi.at("center").at(0).get<double>(), roi.at("center").at(1).get<double>(),
                    roi.at("center").at(2).get<double>()};
    m.roi.radius = roi.at("radius").get<double>();
    m.render = render_from_json(j.at("render"));
    for (const json& e : j.at("entries")) {
        ManifestEntry entry;
        entry.image = e.at("image").get<std::string>();
        entry.mask = e.value("mask", "");
        entry.flash = e.at("flash").get<int>();
        entry.gamma = e.at("gamma").get<double>();
        entry.exposure_ratio = e.at("exposure_ratio").get<double>();
        if (!(entry.exposure_ratio > 0)) throw InvalidInput("exposure ratio must be > 0");
        const json& intr = e.at("intrinsics");
        entry.intrinsics.fx = intr.at("fx").get<double>();
        entry.intrinsics.fy = intr.at("fy").get<double>();
        entry.intrinsics.cx = intr.at("cx").get<double>();
        entry.intrinsics.cy = intr.at("cy").get<double>();
        entry.intrinsics.width = intr.at("width").get<int>();
        entry.intrinsics.height = intr.at("height").get<int>();
        entry.intrinsics.validate();
        entry.pose = pose_from_json(e.at("pose"));
        entry.seed = e.value("seed", uint64_t(0));
        if (!file_exists(m.image_path(entry))) throw InvalidInput("missing image " + entry.image);
        if (!entry.mask.empty() && !file_exists(m.mask_path(entry)))
            throw InvalidInput("missing mask " + entry.mask);
        m.entries.push_back(std::move(entry));
    }
    if (!m.scene_path.empty() && !file_exists(m.scene_file()))
        throw InvalidInput("missing scene file " + m.scene_path);
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    json j;
    j["format"] = "colight-dataset-v1";
    j["conventions"] = {
        {"pose", "world_from_camera"},
        {"handedness", "right"},
        {"up", "+Y"},
        {"camera_axes", "x right, y down, z forward"},
        {"units", "meters"},
        {"exposure", "stored_image = exposure_ratio * physical_radiance"},
        {"flash", "gamma scales one unit of radiant intensity; 1 watt == gamma 1 at 1 m"}};
    if (!manifest.scene_path.empty()) j["scene"] = manifest.scene_path;
    j["roi"] = {{"center", json::array({manifest.roi.center.x, manifest.roi.center.y,
                                        manifest.roi.center.z})},
                {"radius", manifest.roi.radius}};
    j["render"] = render_to_json(manifest.render);
    json entries = json::array();
    for (const ManifestEntry& e : manifest.entries) {
        json je;
        je["image"] = e.image;
        if (!e.mask.empty()) je["mask"] = e.mask;
        je["flash"] = e.flash;
        je["gamma"] = e.gamma;
        je["exposure_ratio"] = e.exposure_ratio;
        je["intrinsics"] = {{"fx", e.intrinsics.fx}, {"fy", e.intrinsics.fy},
                            {"cx", e.intrinsics.cx}, {"cy", e.intrinsics.cy},
                            {"width", e.intrinsics.width}, {"height", e.intrinsics.height}};
        je["pose"] = pose_to_json(e.pose);
        je["seed"] = e.seed;
        entries.push_back(je);
    }
    j["entries"] = entries;
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write manifest " + path);
    out << j.dump(2) << "\n";
}

SynthProtocol SynthProtocol::from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, true, true);
    SynthProtocol p;
    p.n_views = j.value("n_views", 75);
    p.paired = j.value("paired", true);
    p.resolution = j.value("resolution", 256);
    p.fov_deg = j.value("fov_deg", 45.0);
    p.distance_min = j.value("distance_min", 0.3);
    p.distance_max = j.value("distance_max", 0.5);
    p.flash_watt_min = j.value("flash_watt_min", 0.2);
    p.flash_watt_max = j.value("flash_watt_max", 0.8);
    p.trajectory = j.value("trajectory", "half_dome");
    p.masks = j.value("masks", true);
    p.auto_exposure = j.value("auto_exposure", false);
    if (j.contains("render")) p.render = render_from_json(j["render"]);
    return p;
}

DatasetManifest synth(const std::string& scene_file, const SynthProtocol& protocol,
                      const std::string& out_dir, uint64_t seed) {
    SceneDescription desc = load_scene(scene_file);
    const SdfScene& scene = desc.scene;

    Rng rng = Rng::stream(seed, {0x73796e74ULL});
    std::vector<CameraPose> poses;
    if (protocol.trajectory == "spiral")
        poses = spiral_poses(scene.roi().center, protocol.distance_min, protocol.distance_max,
                             protocol.n_views);
    else
        poses = sample_half_dome_poses(scene.roi().center, protocol.distance_min,
                                       protocol.distance_max, protocol.n_views, rng);

    PinholeIntrinsics intr;
    intr.width = intr.height = protocol.resolution;
    double f = 0.5 * protocol.resolution / std::tan(0.5 * protocol.fov_deg * M_PI / 180.0);
    intr.fx = intr.fy = f;
    intr.cx = intr.cy = protocol.resolution / 2.0;

    DatasetManifest manifest;
    manifest.dir = out_dir;
    manifest.roi = scene.roi();
    manifest.render = protocol.render;

    // Copy the scene (with its grid payloads, if any) next to the dataset.
    manifest.scene_path = "scene.json";
    save_scene(desc, out_dir + "/scene.json");

    int image_index = 0;
    for (int i = 0; i < protocol.n_views; ++i) {
        double watt = rng.uniform(protocol.flash_watt_min, protocol.flash_watt_max);
        for (int s = protocol.paired ? 0 : (i % 2); s <= (protocol.paired ? 1 : (i % 2)); ++s) {
            CaptureView view;
            view.intrinsics = intr;
            view.pose = poses[i];
            view.flashlight = Flashlight{watt, s};

            RenderOptions opts = protocol.render;
            uint64_t entry_seed = seed;
            {
                uint64_t t = seed ^ (0x766965774dULL + uint64_t(image_index) * 0x9e3779b97f4a7c15ULL);
                entry_seed = splitmix64(t);
            }
            opts.seed = entry_seed;
            RenderResult r = render_view(scene, view, desc.env, opts);

            ManifestEntry entry;
            char name[64];
            std::snprintf(name, sizeof(name), "img_%03d.pfm", image_index);
            entry.image = name;
            entry.flash = s;
            entry.gamma = watt;
            entry.intrinsics = intr;
            entry.pose = poses[i];
            entry.seed = entry_seed;

            HdrImage stored = r.radiance;
            if (protocol.auto_exposure) {
                // Emulates per-image response scaling: bring the 95th
                // percentile to 0.9 and record the ratio.
                std::vector<double> vals;
                vals.reserve(stored.pixel_count());
                for (size_t p = 0; p < stored.pixel_count(); ++p)
                    vals.push_back(stored.at_index(p).max_component());
                std::nth_element(vals.begin(), vals.begin() + size_t(vals.size() * 0.95), vals.end());
                double p95 = vals[size_t(vals.size() * 0.95)];
                if (p95 > 1e-9) {
                    entry.exposure_ratio = 0.9 / p95;
                    for (double& v : stored.data()) v *= entry.exposure_ratio;
                }
            }
            write_pfm(out_dir + "/" + entry.image, stored);

            if (protocol.masks) {
                std::snprintf(name, sizeof(name), "mask_%03d.png", image_index);
                entry.mask = name;
                std::vector<uint8_t> mask(stored.pixel_count());
                for (size_t p = 0; p < mask.size(); ++p) mask[p] = r.alpha[p] >= 0.5 ? 1 : 0;
                write_mask_png(out_dir + "/" + entry.mask, mask, intr.width, intr.height);
            }
            manifest.entries.push_back(std::move(entry));
            ++image_index;
        }
    }
    save_manifest(manifest, out_dir + "/manifest.json");
    return manifest;
}

DatasetManifest normalize_exposure(const DatasetManifest& manifest) {
    DatasetManifest out = manifest;
    for (ManifestEntry& e : out.entries) {
        if (e.exposure_ratio == 1.0) continue;
        HdrImage img = read_pfm(out.image_path(e));
        double inv = 1.0 / e.exposure_ratio;
        for (double& v : img.data()) v *= inv;
        write_pfm(out.image_path(e), img);
        e.exposure_ratio = 1.0;
    }
    return out;
}

std::vector<Observation> load_observations(const DatasetManifest& manifest) {
    std::vector<Observation> obs;
    obs.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        Observation o;
        o.view.intrinsics = e.intrinsics;
        o.view.pose = e.pose;
        o.view.flashlight = Flashlight{e.gamma > 0 ? e.gamma : 1.0, e.flash};
        o.image = read_pfm(manifest.image_path(e));
        if (e.exposure_ratio != 1.0) {
            double inv = 1.0 / e.exposure_ratio;
            for (double& v : o.image.data()) v *= inv;
        }
        if (!e.mask.empty()) {
            int mw, mh;
            o.image.mask() = read_mask_png(manifest.mask_path(e), mw, mh);
            if (mw != o.image.width() || mh != o.image.height())
                throw InvalidInput("mask dimensions mismatch for " + e.image);
        }
        o.render = manifest.render;
        o.render.seed = e.seed;
        obs.push_back(std::move(o));
    }
    return obs;
}

PngImage contact_sheet(const std::vector<HdrImage>& images, int columns) {
    if (images.empty()) throw InvalidInput("contact sheet needs at least one image");
    int w = images[0].width(), h = images[0].height();
    int rows = (int(images.size()) + columns - 1) / columns;
    PngImage sheet;
    sheet.width = columns * w;
    sheet.height = rows * h;
    sheet.channels = 3;
    sheet.bit_depth = 8;
    sheet.pixels.assign(size_t(sheet.width) * sheet.height * 3, 0);
    for (size_t i = 0; i < images.size(); ++i) {
        if (images[i].width() != w || images[i].height() != h)
            throw InvalidInput("contact sheet images must share one size");
        PngImage tile = tonemap_preview(images[i]);
        int ox = int(i % columns) * w, oy = int(i / columns) * h;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    sheet.pixels[(size_t(oy + y) * sheet.width + ox + x) * 3 + c] =
                        tile.pixels[(size_t(y) * w + x) * 3 + c];
    }
    return sheet;
}

}  // namespace colight
