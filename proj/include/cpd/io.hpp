#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cpd/pipeline.hpp"

namespace cpd::io {

using Json = nlohmann::json;

/// Every key is optional; unknown keys and bad values throw InputError
/// "bad_config".
RunConfig config_from_json(const Json& j, RunConfig base = {});
Json to_json(const RunConfig& cfg);

Json to_json(const SamplingSet& samples);
/// U as 9 row-major entries, t as 3.
Json to_json(const RigidMotiond& motion);
RigidMotiond motion_from_json(const Json& j);
Json to_json(const Mobiusd& map);
Mobiusd mobius_from_json(const Json& j);
Json to_json(const ExtremaSet& extrema);
Json to_json(const DiskParam& param);
Json to_json(const FlowField& field);

Json to_json(const CorrespondenceMap& map);
CorrespondenceMap correspondence_from_json(const Json& j);

/// Flattened mesh as OBJ with the planar coordinates as texture coordinates.
void write_param_obj(std::ostream& out, const DiskParam& param);

/// Matrix with a header row of mesh identifiers.
void write_matrix_csv(std::ostream& out, const DistanceMatrix& matrix);

/// One row per sample: source point, Voronoi area, image face and
/// barycentrics, image point, residual.
void write_correspondence_csv(std::ostream& out, const CorrespondenceMap& map);

/// One residual |R q_l - C q_l| per line, L lines after the header.
void write_residuals_csv(std::ostream& out, const CorrespondenceMap& map);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace cpd::io
