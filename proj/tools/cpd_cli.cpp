// cpd: continuous Procrustes distances between disk-type surfaces.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "cpd/io.hpp"
#include "cpd/pipeline.hpp"
#include "cpd/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cpd;

namespace {

// Flags that override fields of the JSON config when given.
struct ConfigFlags {
    std::string config_path;
    std::optional<int> samples, angles, max_extrema, n_steps, refine_top, jobs;
    std::optional<double> h, eps_floor;
    std::optional<std::string> chi_profile, stages;
    std::optional<bool> symmetrize, refine_theta;

    void attach(CLI::App& app, bool with_jobs = true) {
        app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        app.add_option("--samples", samples, "Integration samples L");
        app.add_option("--angles", angles, "Angular samples K per extremum pair");
        app.add_option("--max-extrema", max_extrema, "Extrema kept per surface");
        app.add_option("--fe-h", h, "Edge length h of the Moser disk mesh");
        app.add_option("--n-steps", n_steps, "RK4 steps of the Moser flow");
        app.add_option("--eps-floor", eps_floor, "Density floor relative to the mean density");
        app.add_option("--chi-profile", chi_profile, "atanh or atan")->check(CLI::IsMember({"atanh", "atan"}));
        app.add_option("--stages", stages, "Comma-separated subset of mobius,tps,moser");
        app.add_option("--symmetrize", symmetrize, "Minimum over both directions (true/false)");
        app.add_option("--refine-theta", refine_theta, "Golden-section angle refinement (true/false)");
        app.add_option("--refine-top", refine_top, "Run later stages on the best N Mobius candidates only (0 = all)");
        if (with_jobs) app.add_option("--jobs,-j", jobs, "Worker threads");
    }

    RunConfig resolve() const {
        io::Json j = config_path.empty() ? io::Json::object() : io::read_json(config_path);
        if (!j.is_object()) throw InputError("bad_config", "config must be a JSON object");
        if (samples) j["samples"] = *samples;
        if (angles) j["angles"] = *angles;
        if (max_extrema) j["max_extrema"] = *max_extrema;
        if (h) j["h"] = *h;
        if (n_steps) j["n_steps"] = *n_steps;
        if (eps_floor) j["eps_floor"] = *eps_floor;
        if (chi_profile) j["chi_profile"] = *chi_profile;
        if (symmetrize) j["symmetrize"] = *symmetrize;
        if (refine_theta) j["refine_theta"] = *refine_theta;
        if (refine_top) j["refine_top"] = *refine_top;
        if (jobs) j["jobs"] = *jobs;
        if (stages) {
            std::vector<std::string> names;
            std::stringstream ss(*stages);
            for (std::string s; std::getline(ss, s, ',');)
                if (!s.empty()) names.push_back(s);
            j["stages"] = names;
        }
        return io::config_from_json(j);
    }
};

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("io_error", "cannot write " + path);
    return out;
}

bool is_mesh_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".off" || ext == ".obj" || ext == ".ply";
}

// A directory of meshes, or a text file listing one mesh path per line
// (relative paths resolve against the list's directory).
std::vector<fs::path> collect_meshes(const fs::path& source) {
    std::vector<fs::path> out;
    if (fs::is_directory(source)) {
        for (const auto& entry : fs::directory_iterator(source))
            if (entry.is_regular_file() && is_mesh_file(entry.path())) out.push_back(entry.path());
        std::sort(out.begin(), out.end());
    } else {
        std::ifstream in(source);
        if (!in) throw InputError("io_error", "cannot open " + source.string());
        for (std::string line; std::getline(in, line);) {
            line.erase(0, line.find_first_not_of(" \t\r"));
            line.erase(line.find_last_not_of(" \t\r") + 1);
            if (line.empty() || line[0] == '#') continue;
            fs::path p(line);
            out.push_back(p.is_absolute() ? p : source.parent_path() / p);
        }
    }
    return out;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("cpd");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("CPD_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(level));
}

int run_flatten(const std::string& mesh_path, const std::string& out_path, const std::string& obj_path,
                const ConfigFlags& flags) {
    const RunConfig cfg = flags.resolve();
    const PreparedSurface s = prepare_surface(load_mesh(mesh_path), cfg, fs::path(mesh_path).stem().string());
    io::Json j = io::to_json(s.param);
    j["id"] = s.id;
    j["extrema"] = io::to_json(s.extrema);
    j["samples"] = io::to_json(s.samples);
    io::write_json(out_path, j);
    if (!obj_path.empty()) {
        auto out = open_output(obj_path);
        io::write_param_obj(out, s.param);
    }
    spdlog::info("flattened {} ({} vertices, {} extrema)", mesh_path, s.mesh.vertex_count(), s.extrema.size());
    return 0;
}

int run_distance(const std::string& a, const std::string& b, const std::string& out_path,
                 const std::string& residual_path, const ConfigFlags& flags) {
    const RunConfig cfg = flags.resolve();
    std::unique_ptr<MoserWorkspace> workspace;
    if (cfg.stages.moser) workspace = std::make_unique<MoserWorkspace>(cfg.h);
    const PreparedSurface pa = prepare_surface(load_mesh(a), cfg, fs::path(a).stem().string(), workspace.get());
    const PreparedSurface pb = prepare_surface(load_mesh(b), cfg, fs::path(b).stem().string(), workspace.get());
    const CorrespondenceMap map = continuous_procrustes(pa, pb, cfg, workspace.get());
    std::cout << std::setprecision(10) << map.dpc << '\n';
    if (!out_path.empty()) {
        io::Json j = io::to_json(map);
        j["config"] = io::to_json(cfg);
        io::write_json(out_path, j);
    }
    if (!residual_path.empty()) {
        auto out = open_output(residual_path);
        io::write_residuals_csv(out, map);
    }
    return 0;
}

int run_matrix(const std::string& source, const std::string& out_path, const std::string& summary_path,
               const ConfigFlags& flags) {
    const RunConfig cfg = flags.resolve();
    const auto paths = collect_meshes(source);
    if (paths.size() < 2) throw InputError("too_few_meshes", "need at least two meshes in " + source);
    std::vector<TriangleMesh> meshes;
    std::vector<std::string> ids;
    for (const auto& p : paths) {
        meshes.push_back(load_mesh(p));
        ids.push_back(p.stem().string());
    }
    const DistanceMatrix matrix = distance_matrix(meshes, ids, cfg);
    auto out = open_output(out_path);
    io::write_matrix_csv(out, matrix);
    if (!summary_path.empty()) {
        io::Json pairs = io::Json::array();
        for (const auto& p : matrix.pairs)
            pairs.push_back({{"i", ids[p.i]},
                             {"j", ids[p.j]},
                             {"dpc", std::isnan(p.dpc) ? io::Json(nullptr) : io::Json(p.dpc)},
                             {"reversed", p.reversed},
                             {"orientation", p.orientation == Orientation::reversing ? "reversing" : "preserving"},
                             {"tps", p.flags.tps},
                             {"moser", p.flags.moser},
                             {"clamped", p.flags.clamped},
                             {"error", p.error}});
        io::write_json(summary_path, {{"config", io::to_json(cfg)}, {"pairs", pairs}});
    }
    const auto failed = std::count_if(matrix.pairs.begin(), matrix.pairs.end(), [](const PairSummary& p) {
        return !p.error.empty();
    });
    if (failed > 0) {
        spdlog::error("{} of {} pairs failed", failed, matrix.pairs.size());
        return 3;
    }
    return 0;
}

int run_export(const std::string& result_path, const std::string& out_path) {
    const CorrespondenceMap map = io::correspondence_from_json(io::read_json(result_path));
    auto out = open_output(out_path);
    io::write_correspondence_csv(out, map);
    return 0;
}

int run_synth(const std::string& dir, int count, int rings, unsigned seed) {
    fs::create_directories(dir);
    const auto meshes = synthetic::suite(count, rings, seed);
    for (int i = 0; i < count; ++i) {
        std::ostringstream name;
        name << "synth_" << std::setw(2) << std::setfill('0') << i << ".off";
        auto out = open_output((fs::path(dir) / name.str()).string());
        write_off(out, meshes[i]);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Continuous Procrustes distances between disk-type surfaces"};
    app.require_subcommand(1);

    ConfigFlags flatten_flags, distance_flags, matrix_flags;
    std::string mesh_path, out_path, obj_path;
    auto* flatten = app.add_subcommand("flatten", "Flatten a mesh to the unit disk");
    flatten->add_option("mesh", mesh_path, "Input mesh (OFF/OBJ/PLY)")->required()->check(CLI::ExistingFile);
    flatten->add_option("-o,--output", out_path, "Output JSON")->required();
    flatten->add_option("--obj", obj_path, "Also write an OBJ with planar texture coordinates");
    flatten_flags.attach(*flatten, false);

    std::string mesh_a, mesh_b, result_path, residual_path;
    auto* distance = app.add_subcommand("distance", "Distance and correspondence between two meshes");
    distance->add_option("meshA", mesh_a)->required()->check(CLI::ExistingFile);
    distance->add_option("meshB", mesh_b)->required()->check(CLI::ExistingFile);
    distance->add_option("-o,--output", result_path, "Correspondence JSON");
    distance->add_option("--residuals", residual_path, "Per-sample residual CSV");
    distance_flags.attach(*distance);

    std::string source, matrix_path, summary_path;
    auto* matrix = app.add_subcommand("matrix", "Pairwise distance matrix");
    matrix->add_option("source", source, "Directory of meshes or a file listing mesh paths")
        ->required()
        ->check(CLI::ExistingPath);
    matrix->add_option("-o,--output", matrix_path, "Matrix CSV")->required();
    matrix->add_option("--summary", summary_path, "Per-pair JSON summary");
    matrix_flags.attach(*matrix);

    std::string export_in, export_out;
    auto* exporter = app.add_subcommand("export-corr", "Correspondence JSON to per-sample CSV");
    exporter->add_option("result", export_in)->required()->check(CLI::ExistingFile);
    exporter->add_option("-o,--output", export_out)->required();

    std::string synth_dir;
    int synth_count = 10, synth_rings = 25;
    unsigned synth_seed = 7;
    auto* synth = app.add_subcommand("synth", "Write the synthetic bumpy-disk suite as OFF files");
    synth->add_option("dir", synth_dir)->required();
    synth->add_option("--count", synth_count)->check(CLI::PositiveNumber);
    synth->add_option("--rings", synth_rings)->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*flatten) return run_flatten(mesh_path, out_path, obj_path, flatten_flags);
        if (*distance) return run_distance(mesh_a, mesh_b, result_path, residual_path, distance_flags);
        if (*matrix) return run_matrix(source, matrix_path, summary_path, matrix_flags);
        if (*exporter) return run_export(export_in, export_out);
        if (*synth) return run_synth(synth_dir, synth_count, synth_rings, synth_seed);
    } catch (const InputError& e) {
        spdlog::error("{}: {}", e.code(), e.what());
        return 2;
    } catch (const NumericalError& e) {
        spdlog::error("{}: {}", e.code(), e.what());
        return 3;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 3;
    }
    return 0;
}
