#include "cpd/io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

namespace cpd::io {

namespace {

[[noreturn]] void bad_config(const std::string& msg) { throw InputError("bad_config", msg); }

template <class T>
T get_as(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        bad_config(std::string("bad value for config key '") + key + "'");
    }
}

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Complex complex_from(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

template <class Derived>
Json rows_json(const Eigen::MatrixBase<Derived>& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

template <class Matrix>
Matrix rows_from(const Json& j, int cols) {
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != static_cast<std::size_t>(cols)) throw InputError("bad_json", "ragged matrix row");
        for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][c].get<typename Matrix::Scalar>();
    }
    return m;
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json flags_json(const StageFlags& f) {
    return {{"tps", f.tps}, {"moser", f.moser}, {"degenerate", f.degenerate}, {"clamped", f.clamped},
            {"tps_failed", f.tps_failed}, {"tps_noninjective", f.tps_noninjective}};
}

StageFlags flags_from(const Json& j) {
    return {j.at("tps").get<bool>(), j.at("moser").get<bool>(), j.at("degenerate").get<bool>(),
            j.at("clamped").get<bool>(), j.at("tps_failed").get<bool>(), j.value("tps_noninjective", false)};
}

}  // namespace

RunConfig config_from_json(const Json& j, RunConfig cfg) {
    if (!j.is_object()) bad_config("config must be a JSON object");
    static const std::set<std::string> known{"samples",     "angles",     "max_extrema", "h",
                                             "n_steps",     "eps_floor",  "chi_profile", "stages",
                                             "symmetrize",  "refine_theta", "refine_top", "jobs"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) bad_config("unknown config key '" + key + "'");

    if (j.contains("samples")) cfg.samples = get_as<int>(j, "samples");
    if (j.contains("angles")) cfg.angles = get_as<int>(j, "angles");
    if (j.contains("max_extrema")) cfg.max_extrema = get_as<int>(j, "max_extrema");
    if (j.contains("h")) cfg.h = get_as<double>(j, "h");
    if (j.contains("n_steps")) cfg.n_steps = get_as<int>(j, "n_steps");
    if (j.contains("eps_floor")) cfg.eps_floor = get_as<double>(j, "eps_floor");
    if (j.contains("symmetrize")) cfg.symmetrize = get_as<bool>(j, "symmetrize");
    if (j.contains("refine_theta")) cfg.refine_theta = get_as<bool>(j, "refine_theta");
    if (j.contains("refine_top")) cfg.refine_top = get_as<int>(j, "refine_top");
    if (j.contains("jobs")) cfg.jobs = get_as<int>(j, "jobs");
    if (j.contains("chi_profile")) {
        const auto p = get_as<std::string>(j, "chi_profile");
        if (p == "atanh") cfg.chi_profile = ChiProfile::atanh;
        else if (p == "atan") cfg.chi_profile = ChiProfile::atan;
        else bad_config("chi_profile must be 'atanh' or 'atan'");
    }
    if (j.contains("stages")) {
        const auto names = get_as<std::vector<std::string>>(j, "stages");
        static const std::vector<std::string> order{"mobius", "tps", "moser"};
        std::size_t next = 0;
        Stages stages{false, false};
        for (const auto& name : names) {
            std::size_t k = next;
            while (k < order.size() && order[k] != name) ++k;
            if (k == order.size()) bad_config("stages must be an ordered subset of mobius, tps, moser");
            next = k + 1;
            if (name == "tps") stages.tps = true;
            if (name == "moser") stages.moser = true;
        }
        if (names.empty() || names.front() != "mobius") bad_config("stages must start with 'mobius'");
        cfg.stages = stages;
    }
    cfg.validate();
    return cfg;
}

Json to_json(const RunConfig& cfg) {
    Json stages = Json::array({"mobius"});
    if (cfg.stages.tps) stages.push_back("tps");
    if (cfg.stages.moser) stages.push_back("moser");
    return {{"samples", cfg.samples},
            {"angles", cfg.angles},
            {"max_extrema", cfg.max_extrema},
            {"h", cfg.h},
            {"n_steps", cfg.n_steps},
            {"eps_floor", cfg.eps_floor},
            {"chi_profile", cfg.chi_profile == ChiProfile::atanh ? "atanh" : "atan"},
            {"stages", stages},
            {"symmetrize", cfg.symmetrize},
            {"refine_theta", cfg.refine_theta},
            {"refine_top", cfg.refine_top},
            {"jobs", cfg.jobs}};
}

Json to_json(const SamplingSet& samples) {
    return {{"sample_indices", samples.sample_indices},
            {"voronoi_areas", vector_json(samples.voronoi_areas)},
            {"fill_distance", samples.fill_distance},
            {"mesh_vertex_count", samples.mesh_vertex_count}};
}

Json to_json(const RigidMotiond& motion) {
    Json U = Json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) U.push_back(motion.U(r, c));
    return {{"U", U}, {"t", {motion.t.x(), motion.t.y(), motion.t.z()}}};
}

RigidMotiond motion_from_json(const Json& j) {
    RigidMotiond m;
    const auto U = j.at("U").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (U.size() != 9 || t.size() != 3) throw InputError("bad_json", "rigid motion needs 9 + 3 entries");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m.U(r, c) = U[3 * r + c];
    m.t << t[0], t[1], t[2];
    return m;
}

Json to_json(const Mobiusd& map) {
    return {{"theta", map.theta()},
            {"a", complex_json(map.a())},
            {"orientation", map.reversing() ? "reversing" : "preserving"}};
}

Mobiusd mobius_from_json(const Json& j) {
    const auto o = j.at("orientation").get<std::string>();
    if (o != "preserving" && o != "reversing") throw InputError("bad_json", "unknown orientation '" + o + "'");
    return Mobiusd(j.at("theta").get<double>(), complex_from(j.at("a")),
                   o == "reversing" ? Orientation::reversing : Orientation::preserving);
}

Json to_json(const ExtremaSet& extrema) {
    Json out = Json::array();
    for (const auto& e : extrema.extrema)
        out.push_back({{"vertex", e.vertex},
                       {"position", complex_json(e.position)},
                       {"kind", e.kind == ExtremumKind::max ? "max" : "min"},
                       {"value", e.value}});
    return out;
}

Json to_json(const DiskParam& param) {
    return {{"vertex_count", param.surface.vertex_count()},
            {"boundary_loop", param.surface.boundary_loop()},
            {"planar_coords", rows_json(param.planar_coords)},
            {"faces", rows_json(param.surface.faces())},
            {"face_density", vector_json(param.face_density)}};
}

Json to_json(const FlowField& field) {
    return {{"potential", vector_json(field.potential)},
            {"velocity", rows_json(field.velocity)},
            {"nodal_velocity", rows_json(field.nodal_velocity)}};
}

Json to_json(const CorrespondenceMap& map) {
    return {{"source", map.source_id},
            {"target", map.target_id},
            {"dpc", map.dpc},
            {"reversed", map.reversed},
            {"candidate",
             {{"map", to_json(map.candidate.map)},
              {"source", complex_json(map.candidate.source)},
              {"target", complex_json(map.candidate.target)},
              {"angle_index", map.candidate.angle_index}}},
            {"motion", to_json(map.motion)},
            {"flags", flags_json(map.flags)},
            {"sample_points", rows_json(map.sample_points)},
            {"sample_areas", vector_json(map.sample_areas)},
            {"image_points", rows_json(map.image_points)},
            {"image_faces", map.image_faces},
            {"image_bary", rows_json(map.image_bary)}};
}

CorrespondenceMap correspondence_from_json(const Json& j) {
    try {
        CorrespondenceMap m;
        m.source_id = j.at("source").get<std::string>();
        m.target_id = j.at("target").get<std::string>();
        m.dpc = j.at("dpc").get<double>();
        m.reversed = j.at("reversed").get<bool>();
        const Json& c = j.at("candidate");
        m.candidate.map = mobius_from_json(c.at("map"));
        m.candidate.source = complex_from(c.at("source"));
        m.candidate.target = complex_from(c.at("target"));
        m.candidate.angle_index = c.at("angle_index").get<int>();
        m.motion = motion_from_json(j.at("motion"));
        m.flags = flags_from(j.at("flags"));
        m.sample_points = rows_from<Vertices>(j.at("sample_points"), 3);
        m.sample_areas = vector_from(j.at("sample_areas"));
        m.image_points = rows_from<Vertices>(j.at("image_points"), 3);
        m.image_faces = j.at("image_faces").get<std::vector<int>>();
        m.image_bary = rows_from<decltype(m.image_bary)>(j.at("image_bary"), 3);
        const auto n = m.sample_points.rows();
        if (m.sample_areas.size() != n || m.image_points.rows() != n || m.image_bary.rows() != n ||
            static_cast<Eigen::Index>(m.image_faces.size()) != n)
            throw InputError("bad_json", "correspondence arrays differ in length");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("bad_json", std::string("malformed correspondence: ") + e.what());
    }
}

void write_param_obj(std::ostream& out, const DiskParam& param) {
    out << std::setprecision(17);
    const Vertices& V = param.surface.vertices();
    for (Eigen::Index v = 0; v < V.rows(); ++v) out << "v " << V(v, 0) << ' ' << V(v, 1) << ' ' << V(v, 2) << '\n';
    for (Eigen::Index v = 0; v < V.rows(); ++v)
        out << "vt " << param.planar_coords(v, 0) << ' ' << param.planar_coords(v, 1) << '\n';
    const Faces& F = param.surface.faces();
    for (Eigen::Index f = 0; f < F.rows(); ++f) {
        out << 'f';
        for (int k = 0; k < 3; ++k) out << ' ' << F(f, k) + 1 << '/' << F(f, k) + 1;
        out << '\n';
    }
}

void write_matrix_csv(std::ostream& out, const DistanceMatrix& matrix) {
    out << std::setprecision(17) << "id";
    for (const auto& id : matrix.ids) out << ',' << id;
    out << '\n';
    for (Eigen::Index i = 0; i < matrix.values.rows(); ++i) {
        out << matrix.ids[i];
        for (Eigen::Index j = 0; j < matrix.values.cols(); ++j) out << ',' << matrix.values(i, j);
        out << '\n';
    }
}

void write_correspondence_csv(std::ostream& out, const CorrespondenceMap& map) {
    const Eigen::VectorXd residual = sample_residuals(map);
    out << std::setprecision(17) << "sample,x,y,z,area,face,b0,b1,b2,cx,cy,cz,residual\n";
    for (int l = 0; l < map.size(); ++l) {
        out << l;
        for (int k = 0; k < 3; ++k) out << ',' << map.sample_points(l, k);
        out << ',' << map.sample_areas[l] << ',' << map.image_faces[l];
        for (int k = 0; k < 3; ++k) out << ',' << map.image_bary(l, k);
        for (int k = 0; k < 3; ++k) out << ',' << map.image_points(l, k);
        out << ',' << residual[l] << '\n';
    }
}

void write_residuals_csv(std::ostream& out, const CorrespondenceMap& map) {
    const Eigen::VectorXd residual = sample_residuals(map);
    out << std::setprecision(17) << "residual\n";
    for (Eigen::Index l = 0; l < residual.size(); ++l) out << residual[l] << '\n';
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("io_error", "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("parse_error", path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("io_error", "cannot write " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw InputError("io_error", "write failed for " + path.string());
}

}  // namespace cpd::io
