#pragma once

#include "perron_radius/perron_radius.hpp"
#include "perron_radius/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fixtures {

using namespace perron_radius;

inline std::string data_path(const std::string& name) {
  return std::string(PERRON_DATA_DIR) + "/" + name;
}

inline WeightedGraph four_node() {
  return load_graph(data_path("four_node.mtx"), GraphFormat::matrix_market, true);
}

inline WeightedGraph four_node_perturbed() {
  return load_graph(data_path("four_node_perturbed.mtx"), GraphFormat::matrix_market, true);
}

inline WeightedGraph nine_node_raw() {
  return load_graph(data_path("nine_node.mtx"), GraphFormat::matrix_market, false);
}

inline WeightedGraph nine_node() { return normalize_frobenius(nine_node_raw()); }

inline EdgePattern nine_node_subset(const WeightedGraph& g) {
  std::ifstream in(data_path("nine_node_subset.txt"));
  return EdgePattern::restrict_to(g, read_pair_list(in));
}

// Printed 9-node gradient G0 (upper triangle, 1-based), symmetric.
struct Entry {
  int i, j;
  double value;
};

inline const std::vector<Entry>& printed_g0() {
  static const std::vector<Entry> entries = {
      {1, 2, 0.336},  {1, 4, -0.113}, {1, 9, 0.645},  {2, 3, -0.029},
      {3, 4, -0.412}, {4, 5, -0.418}, {4, 6, -0.438}, {5, 8, -0.073},
      {6, 7, -0.074}, {7, 9, 0.188},  {8, 9, 0.109}};
  return entries;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("perron_radius_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
