// Fuses operator sentences into a uniform belief over a map and prints the
// posterior as a coarse text heatmap after each one.
//   ground_sentences [map.json] ["sentence" ...]
#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "slg/belief.hpp"
#include "slg/io.hpp"
#include "slg/parser.hpp"

using namespace slg;

void print_heatmap(const BeliefGrid& b) {
  const Grid<double> g = downsample(b, 32);
  double top = 0;
  for (double v : g.values()) top = std::max(top, v);
  const std::string ramp = " .:-=+*#%@";
  for (int r = g.rows() - 1; r >= 0; --r) {  // north up
    for (int c = 0; c < g.cols(); ++c) {
      const auto k = static_cast<std::size_t>(top > 0 ? g(r, c) / top * (ramp.size() - 1) : 0);
      std::cout << ramp[k] << ramp[k];
    }
    std::cout << '\n';
  }
}

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : std::string(SLG_DATA_DIR) + "/maps/demo.json";
  std::vector<std::string> sentences(argv + std::min(argc, 2), argv + argc);
  if (sentences.empty())
    sentences = {"you can find the bag around building 4", "the bag's close to building 6",
                 "the bag's not in front of building 5"};
  try {
    const WorldMap map = load_map_file(path);
    const GridSpec spec = map.grid(1.0);
    const Grounder grounder = expert_grounder(map, spec, ExpertParams::defaults());
    const Lexicon lex = lexicon_of(map);
    BeliefGrid b = init_prior(spec, map);
    std::cout << "prior entropy " << entropy(b) << "\n";
    for (const auto& s : sentences) {
      std::cout << "\n> " << s << '\n';
      try {
        const auto obs = parse(s, lex);
        for (const auto& o : obs) std::cout << "  " << to_json(o).dump() << '\n';
        update_language(b, obs, grounder);
      } catch (const ParseError& e) {
        std::cout << "  " << e.kind() << ": " << e.what() << '\n';
        continue;
      }
      const auto m = map_estimate(b);
      std::cout << "  entropy " << entropy(b) << ", MAP at (" << m.location.x << ", " << m.location.y << ")\n";
      print_heatmap(b);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}
