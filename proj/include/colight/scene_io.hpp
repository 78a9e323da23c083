#pragma once

#include <string>

#include "colight/photometry.hpp"
#include "colight/scene.hpp"

namespace colight {

/// A scene file bundles geometry, reflectance, ROI, and the capture
/// environment (ambient illumination) used for synthesis.
struct SceneDescription {
    SdfScene scene;
    EnvironmentMap env;
};

/// JSON scene format; grid payloads live in raw little-endian float32
/// sidecar files referenced by relative path.
SceneDescription load_scene(const std::string& path);
void save_scene(const SceneDescription& desc, const std::string& path);

TextelParams theta_from_json(const std::string& json_text);

}  // namespace colight
