#include "itolab/io.hpp"

#include "itolab/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace itolab {
namespace {

constexpr char kEnsembleMagic[8] = {'I', 'T', 'O', 'E', 'N', 'S', '1', '\0'};

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_ensemble_binary(const Ensemble& ens, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write(kEnsembleMagic, sizeof(kEnsembleMagic));
  put(static_cast<std::int32_t>(ens.n_traj));
  put(static_cast<std::int32_t>(ens.dim));
  put(static_cast<std::int64_t>(ens.grid.size()));
  put(ens.eta);
  put(static_cast<std::int32_t>(ens.n_diverged));
  put(static_cast<std::int64_t>(ens.lineage.size()));
  out.write(ens.lineage.data(), static_cast<std::streamsize>(ens.lineage.size()));
  out.write(reinterpret_cast<const char*>(ens.grid.data()), static_cast<std::streamsize>(ens.grid.size() * sizeof(std::int64_t)));
  out.write(reinterpret_cast<const char*>(ens.valid.data()), static_cast<std::streamsize>(ens.valid.size()));
  out.write(reinterpret_cast<const char*>(ens.states.data()), static_cast<std::streamsize>(ens.states.size() * sizeof(double)));
  if (!out) throw DataError("write failed for " + path.string());
}

Ensemble load_ensemble_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kEnsembleMagic, sizeof(magic)) != 0) throw DataError("not an ensemble file: " + path.string());
  auto get = [&](auto& v) { in.read(reinterpret_cast<char*>(&v), sizeof(v)); };
  std::int32_t n_traj, dim, n_div;
  std::int64_t n_grid, n_lin;
  Ensemble ens;
  get(n_traj);
  get(dim);
  get(n_grid);
  get(ens.eta);
  get(n_div);
  get(n_lin);
  if (!in || n_traj < 0 || dim < 1 || n_grid < 0 || n_lin < 0 || n_lin > (1 << 20)) {
    throw DataError("corrupt ensemble header: " + path.string());
  }
  ens.n_traj = n_traj;
  ens.dim = dim;
  ens.n_diverged = n_div;
  ens.lineage.resize(static_cast<std::size_t>(n_lin));
  in.read(ens.lineage.data(), n_lin);
  ens.grid.resize(static_cast<std::size_t>(n_grid));
  in.read(reinterpret_cast<char*>(ens.grid.data()), static_cast<std::streamsize>(ens.grid.size() * sizeof(std::int64_t)));
  ens.valid.resize(static_cast<std::size_t>(n_traj));
  in.read(reinterpret_cast<char*>(ens.valid.data()), static_cast<std::streamsize>(ens.valid.size()));
  ens.states.resize(static_cast<std::size_t>(n_traj) * static_cast<std::size_t>(n_grid) * static_cast<std::size_t>(dim));
  in.read(reinterpret_cast<char*>(ens.states.data()), static_cast<std::streamsize>(ens.states.size() * sizeof(double)));
  if (!in) throw DataError("truncated ensemble file: " + path.string());
  return ens;
}

std::string ensemble_csv(const Ensemble& ens) {
  std::string out = "traj,step,coord,value\n";
  for (int i = 0; i < ens.n_traj; ++i) {
    if (!ens.valid[static_cast<std::size_t>(i)]) continue;
    for (std::size_t g = 0; g < ens.grid.size(); ++g) {
      for (int c = 0; c < ens.dim; ++c) {
        out += std::to_string(i);
        out += ',';
        out += std::to_string(ens.grid[g]);
        out += ',';
        out += std::to_string(c);
        out += ',';
        out += format_double(ens.value(i, g, c));
        out += '\n';
      }
    }
  }
  return out;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw DataError("CSV has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

}  // namespace itolab
