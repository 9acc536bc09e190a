#pragma once

#include "itolab/chain.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace itolab {

/// Shortest decimal text that round-trips to the same double ("inf", "nan" for non-finite).
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Ensemble persistence: binary (magic ITOENS1) plus CSV with columns traj, step, coord, value.
void save_ensemble_binary(const Ensemble& ens, const std::filesystem::path& path);
Ensemble load_ensemble_binary(const std::filesystem::path& path);
std::string ensemble_csv(const Ensemble& ens);

/// Minimal CSV reader: header row plus rows of fields (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  [[nodiscard]] int column(const std::string& name) const;
};
CsvTable parse_csv(const std::string& text);

}  // namespace itolab
