#pragma once

#include "fieldfuse/common.hpp"
#include "fieldfuse/cpod.hpp"
#include "fieldfuse/geometry.hpp"
#include "fieldfuse/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fieldfuse {

namespace fs = std::filesystem;

// Shortest text that reads back to the same double.
std::string fmt(double v);

// Write to a sibling temp file, then rename over the target.
void atomic_write(const fs::path& path, const std::string& content);

std::string read_text(const fs::path& path);

std::string grid_csv(const SurfaceGrid& g);
SurfaceGrid parse_grid_csv(const std::string& text);
SurfaceGrid read_grid_csv(const fs::path& path);

// cell_index,value with NaN marking missing cells.
std::string field_csv(const MaskedField& v);
std::string field_csv(const Vec& v);
MaskedField parse_field_csv(const std::string& text);
MaskedField read_field_csv(const fs::path& path);
Vec read_complete_field(const fs::path& path);

std::string operator_csv(const OutputOperator& op);

// Columns named in header, one row per cell.
std::string table_csv(const std::vector<std::string>& header, const std::vector<Vec>& cols);

nlohmann::json to_json(const ScenarioSpec& s);
ScenarioSpec spec_from_json(const nlohmann::json& j, ScenarioSpec base = {});

nlohmann::json to_json(const FlightCondition& c);
FlightCondition condition_from_json(const nlohmann::json& j);

nlohmann::json vec_json(const Vec& v);
Vec json_vec(const nlohmann::json& j);

// Directory with one field CSV per column plus manifest.json.
void write_bank(const fs::path& dir, const SnapshotSet& s);
SnapshotSet read_bank(const fs::path& dir);

}  // namespace fieldfuse
