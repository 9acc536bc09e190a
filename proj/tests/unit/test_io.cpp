#include "itolab/errors.hpp"
#include "itolab/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace itolab;

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 4.0, 0.015625}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(4.0) == "4");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("ensemble persistence") {
  Ensemble e;
  e.n_traj = 3;
  e.dim = 2;
  e.eta = 0.125;
  e.grid = {0, 8};
  e.states = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  e.valid = {1, 0, 1};
  e.n_diverged = 1;
  e.lineage = "test";
  const auto path = std::filesystem::temp_directory_path() / "itolab_io_test" / "e.bin";
  save_ensemble_binary(e, path);
  const Ensemble f = load_ensemble_binary(path);
  CHECK(f.states == e.states);
  CHECK(f.grid == e.grid);
  CHECK(f.valid == e.valid);
  CHECK(f.eta == e.eta);
  CHECK(f.lineage == e.lineage);
  std::filesystem::remove_all(path.parent_path());

  const std::string csv = ensemble_csv(e);
  const CsvTable t = parse_csv(csv);
  CHECK(t.header == std::vector<std::string>{"traj", "step", "coord", "value"});
  CHECK(t.rows.size() == 8);  // trajectory 1 is invalid
  CHECK(t.rows[0] == std::vector<std::string>{"0", "0", "0", "1"});
  CHECK(t.column("value") == 3);
  CHECK_THROWS_AS((void)t.column("missing"), DataError);
}

TEST_CASE("reading a missing file fails cleanly") {
  CHECK_THROWS_AS(read_text("/nonexistent/file.txt"), DataError);
  CHECK_THROWS_AS(load_ensemble_binary("/nonexistent/file.bin"), DataError);
}
