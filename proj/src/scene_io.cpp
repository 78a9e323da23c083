#include "colight/scene_io.hpp"

#include <cstdio>
#include <fstream>

#include "colight/errors.hpp"
#include "colight/image.hpp"
#include "json.hpp"

namespace colight {

using json = nlohmann::ordered_json;

namespace {

std::string dirname_of(const std::string& path) {
    size_t slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_to(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Rgb rgb_from(const json& j) {
    Vec3 v = vec_from(j);
    return {v.x, v.y, v.z};
}

TextelParams theta_from(const json& j) {
    TextelParams t;
    t.base_color = rgb_from(j.at("base_color"));
    t.roughness = j.at("roughness").get<double>();
    t.clearcoat_glossiness = j.value("clearcoat_glossiness", 0.5);
    t.subsurface = j.value("subsurface", 0.0);
    t.metallic = j.value("metallic", 0.0);
    t.dielectric = j.value("dielectric", 0.5);
    t.clearcoat = j.value("clearcoat", 0.0);
    if (!t.in_unit_box()) throw InvalidInput("texel parameters outside [0,1]");
    return t;
}

json theta_to(const TextelParams& t) {
    json j;
    j["base_color"] = json::array({t.base_color.r, t.base_color.g, t.base_color.b});
    j["roughness"] = t.roughness;
    j["clearcoat_glossiness"] = t.clearcoat_glossiness;
    j["subsurface"] = t.subsurface;
    j["metallic"] = t.metallic;
    j["dielectric"] = t.dielectric;
    j["clearcoat"] = t.clearcoat;
    return j;
}

std::vector<float> read_raw_floats(const std::string& path, size_t expected) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw InvalidInput("cannot open volume " + path);
    std::vector<float> data(expected);
    size_t got = std::fread(data.data(), sizeof(float), expected, f);
    std::fclose(f);
    if (got != expected) throw InvalidInput(path + ": volume size mismatch");
    return data;
}

void write_raw_floats(const std::string& path, const std::vector<float>& data) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw InvalidInput("cannot write volume " + path);
    size_t put = std::fwrite(data.data(), sizeof(float), data.size(), f);
    std::fclose(f);
    if (put != data.size()) throw InvalidInput("short write to " + path);
}

std::unique_ptr<Geometry> geometry_from(const json& j, const std::string& base_dir) {
    std::string type = j.at("type").get<std::string>();
    if (type == "sphere")
        return std::make_unique<SphereGeom>(vec_from(j.at("center")), j.at("radius").get<double>());
    if (type == "box")
        return std::make_unique<BoxGeom>(vec_from(j.at("center")), vec_from(j.at("half_extents")));
    if (type == "torus")
        return std::make_unique<TorusGeom>(vec_from(j.at("center")), j.at("major_radius").get<double>(),
                                           j.at("minor_radius").get<double>());
    if (type == "capsule")
        return std::make_unique<CapsuleGeom>(vec_from(j.at("a")), vec_from(j.at("b")),
                                             j.at("radius").get<double>());
    if (type == "composite") {
        std::vector<std::unique_ptr<Geometry>> children;
        for (const json& c : j.at("children")) children.push_back(geometry_from(c, base_dir));
        return std::make_unique<CompositeGeom>(std::move(children), j.value("smoothness", 0.0));
    }
    if (type == "grid") {
        auto dims = j.at("dims");
        int nx = dims[0], ny = dims[1], nz = dims[2];
        Vec3 origin = vec_from(j.at("origin"));
        Vec3 spacing = vec_from(j.at("spacing"));
        std::string file = j.at("data").get<std::string>();
        auto values = read_raw_floats(base_dir + "/" + file, size_t(nx) * ny * nz);
        return std::make_unique<GridGeom>(nx, ny, nz, origin, spacing, std::move(values));
    }
    throw InvalidInput("unknown geometry type '" + type + "'");
}

json geometry_to(const Geometry& g, const std::string& base_dir, const std::string& stem) {
    json j;
    j["type"] = g.type_name();
    if (auto* s = dynamic_cast<const SphereGeom*>(&g)) {
        j["center"] = vec_to(s->center());
        j["radius"] = s->radius();
    } else if (auto* b = dynamic_cast<const BoxGeom*>(&g)) {
        j["center"] = vec_to(b->center());
        j["half_extents"] = vec_to(b->half_extents());
    } else if (auto* t = dynamic_cast<const TorusGeom*>(&g)) {
        j["center"] = vec_to(t->center());
        j["major_radius"] = t->major_radius();
        j["minor_radius"] = t->minor_radius();
    } else if (auto* c = dynamic_cast<const CapsuleGeom*>(&g)) {
        j["a"] = vec_to(c->point_a());
        j["b"] = vec_to(c->point_b());
        j["radius"] = c->radius();
    } else if (auto* comp = dynamic_cast<const CompositeGeom*>(&g)) {
        j["smoothness"] = comp->smoothness();
        json children = json::array();
        for (int i = 0; i < comp->region_count(); ++i)
            children.push_back(geometry_to(comp->child(i), base_dir, stem + "_c" + std::to_string(i)));
        j["children"] = children;
    } else if (auto* grid = dynamic_cast<const GridGeom*>(&g)) {
        j["dims"] = json::array({grid->nx(), grid->ny(), grid->nz()});
        j["origin"] = vec_to(grid->origin());
        j["spacing"] = vec_to(grid->spacing());
        std::string file = stem + "_sdf.raw";
        write_raw_floats(base_dir + "/" + file, grid->values());
        j["data"] = file;
    } else {
        throw InvalidInput("unserializable geometry");
    }
    return j;
}

std::unique_ptr<TexelField> texels_from(const json& j, const std::string& base_dir) {
    std::string type = j.at("type").get<std::string>();
    if (type == "constant") return std::make_unique<ConstantTexelField>(theta_from(j.at("theta")));
    if (type == "per_primitive") {
        std::vector<TextelParams> thetas;
        for (const json& t : j.at("thetas")) thetas.push_back(theta_from(t));
        return std::make_unique<PerPrimitiveTexelField>(std::move(thetas));
    }
    if (type == "grid") {
        auto dims = j.at("dims");
        int nx = dims[0], ny = dims[1], nz = dims[2];
        Vec3 origin = vec_from(j.at("origin"));
        Vec3 spacing = vec_from(j.at("spacing"));
        std::string file = j.at("data").get<std::string>();
        auto values =
            read_raw_floats(base_dir + "/" + file, size_t(nx) * ny * nz * TextelParams::kDim);
        return std::make_unique<GridTexelField>(nx, ny, nz, origin, spacing, std::move(values));
    }
    throw InvalidInput("unknown texel field type '" + type + "'");
}

json texels_to(const TexelField& f, const std::string& base_dir, const std::string& stem) {
    json j;
    j["type"] = f.type_name();
    if (auto* c = dynamic_cast<const ConstantTexelField*>(&f)) {
        j["theta"] = theta_to(c->theta());
    } else if (auto* pp = dynamic_cast<const PerPrimitiveTexelField*>(&f)) {
        json arr = json::array();
        for (const auto& t : pp->thetas()) arr.push_back(theta_to(t));
        j["thetas"] = arr;
    } else if (auto* g = dynamic_cast<const GridTexelField*>(&f)) {
        j["dims"] = json::array({g->nx(), g->ny(), g->nz()});
        j["origin"] = vec_to(g->origin());
        j["spacing"] = vec_to(g->spacing());
        std::string file = stem + "_texels.raw";
        write_raw_floats(base_dir + "/" + file, g->values());
        j["data"] = file;
    } else {
        throw InvalidInput("unserializable texel field");
    }
    return j;
}

EnvironmentMap env_from(const json& j, const std::string& base_dir) {
    if (j.is_null()) return EnvironmentMap::black();
    std::string type = j.value("type", "none");
    int samples = j.value("samples", 64);
    if (type == "none") return EnvironmentMap::black();
    if (type == "constant") return EnvironmentMap::constant(rgb_from(j.at("rgb")), samples);
    if (type == "equirect") {
        HdrImage raster = read_pfm(base_dir + "/" + j.at("path").get<std::string>());
        return EnvironmentMap::equirect(std::move(raster), samples);
    }
    throw InvalidInput("unknown environment type '" + type + "'");
}

json env_to(const EnvironmentMap& env, const std::string& base_dir, const std::string& stem) {
    json j;
    switch (env.kind()) {
        case EnvironmentMap::Kind::kBlack:
            j["type"] = "none";
            break;
        case EnvironmentMap::Kind::kConstant: {
            j["type"] = "constant";
            const Rgb& c = env.constant_color();
            j["rgb"] = json::array({c.r, c.g, c.b});
            j["samples"] = env.samples();
            break;
        }
        case EnvironmentMap::Kind::kEquirect: {
            j["type"] = "equirect";
            std::string file = stem + "_env.pfm";
            write_pfm(base_dir + "/" + file, env.raster());
            j["path"] = file;
            j["samples"] = env.samples();
            break;
        }
    }
    return j;
}

}  // namespace

SceneDescription load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open scene " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    std::string base = dirname_of(path);
    SceneDescription desc;
    const json& roi = j.at("roi");
    Roi r{vec_from(roi.at("center")), roi.at("radius").get<double>()};
    if (!(r.radius > 0)) throw InvalidInput("ROI radius must be > 0");
    desc.scene = SdfScene(r, geometry_from(j.at("geometry"), base), texels_from(j.at("texels"), base));
    desc.env = env_from(j.contains("environment") ? j["environment"] : json(), base);
    return desc;
}

void save_scene(const SceneDescription& desc, const std::string& path) {
    std::string base = dirname_of(path);
    std::string stem = path.substr(base.size() + (base == "." ? 0 : 1));
    size_t dot = stem.find_last_of('.');
    if (dot != std::string::npos) stem = stem.substr(0, dot);

    json j;
    j["format"] = "colight-scene-v1";
    j["roi"] = {{"center", vec_to(desc.scene.roi().center)}, {"radius", desc.scene.roi().radius}};
    j["geometry"] = geometry_to(desc.scene.geometry(), base, stem);
    j["texels"] = texels_to(desc.scene.texels(), base, stem);
    j["environment"] = env_to(desc.env, base, stem);
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write scene " + path);
    out << j.dump(2) << "\n";
}

TextelParams theta_from_json(const std::string& json_text) {
    return theta_from(json::parse(json_text));
}

}  // namespace colight
