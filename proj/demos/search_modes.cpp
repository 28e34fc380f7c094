// Runs one scenario in each search mode and prints steps to success.
//   search_modes [scenario.json]
#include <iostream>
#include <string>

#include "slg/io.hpp"
#include "slg/search.hpp"

using namespace slg;

int main(int argc, char** argv) {
  const std::string data = SLG_DATA_DIR;
  try {
    ScenarioConfig cfg =
        scenario_from_json(nlohmann::json::parse(read_file(argc > 1 ? argv[1] : data + "/scenarios/grid_city.json")));
    const auto maps = load_map_dir(data + "/maps");
    auto lookup = cached_maps(maps);
    for (SearchMode m : kAllModes) {
      cfg.mode = m;
      const SearchResult r = run_scenario(cfg, lookup(cfg.map_id, cfg.resolution));
      int sentences = 0;
      for (const auto& e : r.events) sentences += e["type"] == "sentence";
      std::cout << name_of(m) << ": " << (r.success ? "found after " : "gave up after ") << r.steps << " steps, "
                << sentences << " sentences, final entropy " << r.entropy.back() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}
