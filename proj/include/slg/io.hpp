#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "slg/dataset.hpp"
#include "slg/error.hpp"
#include "slg/map.hpp"

namespace slg {

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("IoError", what) {}
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << bytes;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline WorldMap load_map_file(const std::filesystem::path& path) { return load_map(read_file(path)); }

// Every *.json map in a directory, sorted by file name.
inline std::vector<WorldMap> load_map_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("cannot open map directory '" + dir.string() + "'");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<WorldMap> maps;
  for (const auto& f : files) maps.push_back(load_map_file(f));
  return maps;
}

// Dataset directory: maps/<id>.json plus points.jsonl.
inline void save_dataset(const std::filesystem::path& dir, const Dataset& d) {
  for (const auto& [id, m] : d.maps) write_file(dir / "maps" / (id + ".json"), save_map(m));
  std::ostringstream pts;
  write_points(pts, d.points);
  write_file(dir / "points.jsonl", pts.str());
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  for (auto& m : load_map_dir(dir / "maps")) d.add_map(std::move(m));
  std::istringstream in(read_file(dir / "points.jsonl"));
  d.points = read_points(in);
  d.validate();
  return d;
}

}  // namespace slg
