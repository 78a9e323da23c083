#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "colight/image.hpp"
#include "colight/scene.hpp"
#include "colight/vec3.hpp"

namespace colight {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<double, 2>> uvs;  // per vertex, filled by build_atlas

    bool has_uvs() const { return uvs.size() == vertices.size() && !vertices.empty(); }
    double surface_area() const;
    double signed_volume() const;
    void bounding_box(Vec3& lo, Vec3& hi) const;
    double bbox_diagonal() const;

    /// Drops zero-area (< 1e-12) and out-of-range triangles.
    void cleanup();
};

/// Zero level set of fn over a regular grid: `resolution` cells per axis
/// spanning [lo, hi]. Vertices are interpolated along sign-change edges;
/// empty mesh when the field has no sign change.
TriangleMesh marching_cubes_field(const std::function<double(const Vec3&)>& fn, const Vec3& lo,
                                  const Vec3& hi, int resolution);

/// Marching cubes over the ROI bounding cube of a scene.
TriangleMesh marching_cubes(const SdfScene& scene, int resolution);

/// Cell edge length used by marching_cubes at this resolution.
double marching_cubes_cell_size(const SdfScene& scene, int resolution);

/// Quadric-error-metric edge collapse down to the target triangle count.
TriangleMesh simplify(const TriangleMesh& mesh, int target_triangle_count);

/// UV atlas with one isolated chart per triangle (two right triangles per
/// packed square cell, one-texel gutters). The returned mesh has per-corner
/// vertices so that per-vertex UVs are well defined.
struct Atlas {
    int resolution = 0;
    std::vector<Vec3> positions;    // per texel, barycentric 3D location
    std::vector<uint8_t> valid;     // per texel
    std::vector<int> triangle_ids;  // per texel, -1 outside charts
};

struct AtlasResult {
    TriangleMesh mesh;  // unwelded copy with UVs
    Atlas atlas;
};

AtlasResult build_atlas(const TriangleMesh& mesh, int texture_resolution);

/// Baked parameter maps; scalars linear, normals object-space unit vectors.
struct PbrTextureSet {
    int resolution = 0;
    HdrImage base_color;
    ScalarImage roughness, clearcoat_glossiness, subsurface, metallic, dielectric, clearcoat;
    HdrImage normal;
    std::vector<uint8_t> valid;
};

/// Evaluates the scene's reflectance field and normals at every valid atlas
/// texel; gutter texels are dilated from their nearest valid neighbors.
PbrTextureSet bake_textures(const SdfScene& scene, const Atlas& atlas);

/// Writes <name>.obj/.mtl plus PNG maps and a JSON sidecar into dir.
/// base_color is sRGB-encoded 8-bit, scalars linear 8-bit gray, the normal
/// map 16-bit RGB with (n+1)/2 encoding. Throws if files exist and
/// !overwrite.
void export_asset(const TriangleMesh& mesh, const PbrTextureSet& textures, const std::string& dir,
                  const std::string& name, bool overwrite = false);

/// Reads the OBJ subset written by export_asset (v / vt / vn / f).
TriangleMesh import_obj(const std::string& path);

}  // namespace colight
