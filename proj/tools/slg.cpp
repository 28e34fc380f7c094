#include <algorithm>
#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slg/corpus.hpp"
#include "slg/eval.hpp"
#include "slg/io.hpp"
#include "slg/lgn.hpp"
#include "slg/search.hpp"
#include "slg/service.hpp"

namespace fs = std::filesystem;
using namespace slg;

namespace {

std::string default_data_dir() {
  if (const char* env = std::getenv("SLG_DATA")) return env;
  return SLG_DATA_DIR;
}

// Writes to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& bytes) {
  if (path.empty() || path == "-")
    std::cout << bytes;
  else
    write_file(path, bytes);
}

// --- gen-data -------------------------------------------------------------------

struct GenDataArgs {
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
  int maps = 20;
  int draws = 10;
  int locations = 40;
  int per_class = 10;
  std::size_t n = 1000;
  double typo = 0.325;
  std::string map;
};

int gen_data(const GenDataArgs& a) {
  if (a.kind == "corpus") {
    const std::string path = a.map.empty() ? default_data_dir() + "/maps/demo.json" : a.map;
    const WorldMap m = load_map_file(path);
    CorpusStyle style;
    style.typo = a.typo;
    std::ostringstream o;
    for (const auto& e : generate_corpus(a.seed, a.n, named_landmarks(m), style)) o << to_json(e).dump() << '\n';
    emit(a.out, o.str());
    return 0;
  }
  if (a.out.empty()) throw ConfigError("gen-data " + a.kind + " needs --out DIR");
  std::mt19937_64 rng(a.seed);
  lgn::SynthOptions opt;
  opt.per_class = a.per_class;
  opt.locations = a.locations;
  const Dataset d = a.kind == "stage1" ? lgn::synthesize_stage1(rng, a.maps, opt)
                                       : lgn::synthesize_stage2(rng, a.maps, a.draws, opt);
  save_dataset(a.out, d);
  std::cout << d.maps.size() << " maps, " << d.points.size() << " points\n";
  return 0;
}

// --- train ----------------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> stages{3};
  std::vector<std::string> validation{3};
  std::string out;
  std::string init;
  std::string log;
  std::uint64_t seed = 0;
  lgn::LgnConfig model;
  lgn::TrainConfig train;
  double resolution = 1.0;
};

int train(TrainArgs a) {
  a.train.seed = a.seed;
  std::vector<lgn::Stage> stages;
  for (int s = 0; s < 3; ++s) {
    if (a.stages[s].empty()) continue;
    lgn::Stage st;
    st.number = s + 1;
    st.train = lgn::make_examples(load_dataset(a.stages[s]), a.resolution);
    if (!a.validation[s].empty()) st.validation = lgn::make_examples(load_dataset(a.validation[s]), a.resolution);
    stages.push_back(std::move(st));
  }
  if (stages.empty()) throw ConfigError("train needs at least one of --stage1, --stage2, --stage3");
  lgn::LgnModel model = a.init.empty() ? lgn::LgnModel::create(a.model, a.seed) : lgn::load_model(read_file(a.init));
  lgn::TrainLog log;
  model = lgn::train(std::move(model), stages, a.train, &log, [](const lgn::EpochRecord& r) {
    std::cerr << "stage " << r.stage << " epoch " << r.epoch << " train " << r.train_nll << " val " << r.validation_nll
              << '\n';
  });
  for (const auto& w : log.warnings) std::cerr << "warning: " << w << '\n';
  write_file(a.out, lgn::save_model(model));
  if (!a.log.empty()) {
    std::ostringstream o;
    o << "stage\tepoch\tlearning_rate\ttrain_nll\tvalidation_nll\n";
    for (const auto& r : log.epochs)
      o << r.stage << '\t' << r.epoch << '\t' << r.learning_rate << '\t' << r.train_nll << '\t' << r.validation_nll
        << '\n';
    write_file(a.log, o.str());
  }
  return 0;
}

// --- eval-nll -------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> models;
  std::string data;
  std::string params;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n = 10000;
  bool split = false;
  double resolution = 1.0;
};

// Stage-2 synthetic points, truncated to exactly n.
Dataset synthetic_points(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  Dataset d;
  for (int chunk = 0; d.points.size() < n; ++chunk) {
    lgn::SynthOptions opt;
    opt.prefix = "eval" + std::to_string(chunk);
    auto part = lgn::synthesize_stage2(rng, 10, 1, opt);
    for (auto& [id, m] : part.maps) d.add_map(std::move(m));
    for (auto& p : part.points) d.points.push_back(std::move(p));
  }
  d.points.resize(n);
  return d;
}

int eval_nll_cmd(const EvalArgs& a) {
  Dataset d;
  if (a.data.empty()) {
    d = synthetic_points(a.seed, a.n);
  } else {
    d = load_dataset(a.data);
    if (a.split) d = split_by_region(d, a.seed).test;
  }
  const ExpertParams params = a.params.empty() ? ExpertParams::defaults()
                                               : expert_params_from_json(nlohmann::json::parse(read_file(a.params)));
  nlohmann::json reports = nlohmann::json::object();
  std::vector<std::pair<std::string, std::vector<double>>> named;
  for (const auto& spec : a.models) {
    Predictor p;
    std::string name = spec;
    if (spec == "chance") {
      p = chance_predictor(a.seed);
    } else if (spec == "expert") {
      p = expert_predictor(params);
    } else {
      p = lgn_predictor(lgn::load_model(read_file(spec)), a.resolution);
      name = fs::path(spec).stem().string();
    }
    const NllReport rep = eval_nll(p, d);
    reports[name] = to_json(rep);
    if (!a.out.empty()) {
      write_file(fs::path(a.out) / (name + ".json"), to_json(rep).dump(2) + "\n");
      write_file(fs::path(a.out) / (name + "_histogram.tsv"), histogram_table(rep));
      write_file(fs::path(a.out) / (name + "_summary.tsv"), summary_table(rep));
    }
    named.emplace_back(name, rep.values);
  }
  nlohmann::json cmp = nlohmann::json::array();
  if (named.size() > 1) {
    const auto cs = compare(named);
    for (const auto& c : cs)
      cmp.push_back({{"a", c.a}, {"b", c.b}, {"mean_difference", c.mean_difference}, {"t", c.test.t},
                     {"df", c.test.df}, {"p", c.test.p}});
    if (!a.out.empty()) write_file(fs::path(a.out) / "comparison.tsv", comparison_table(cs));
  }
  const nlohmann::json summary = {{"points", d.points.size()}, {"models", reports}, {"comparisons", cmp}};
  if (!a.out.empty()) write_file(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << '\n';
  return 0;
}

// --- fit-expert -----------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string init;
  std::string out;
  std::string report;
  std::uint64_t seed = 0;
  int max_iterations = 5000;
};

int fit_expert(const FitArgs& a) {
  const Dataset d = load_dataset(a.data);
  const ExpertParams init =
      a.init.empty() ? ExpertParams::defaults() : expert_params_from_json(nlohmann::json::parse(read_file(a.init)));
  FitOptions opt;
  opt.max_iterations = a.max_iterations;
  FitReport rep;
  const ExpertParams fitted = fit_expert_params(d, init, opt, &rep);
  emit(a.out, to_json(fitted).dump(2) + "\n");
  if (!a.report.empty()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rep.relations)
      j.push_back({{"relation", name_of(r.relation)}, {"iterations", r.iterations}, {"converged", r.converged},
                   {"objective", r.objective}});
    write_file(a.report, j.dump(2) + "\n");
  }
  return 0;
}

// --- simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string mode;
  std::string maps;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool no_events = false;
};

const WorldMap& find_map(const std::vector<WorldMap>& maps, const std::string& id) {
  for (const auto& m : maps)
    if (m.id == id) return m;
  throw ConfigError("scenario refers to unknown map '" + id + "'");
}

int simulate(const SimulateArgs& a) {
  ScenarioConfig cfg = scenario_from_json(nlohmann::json::parse(read_file(a.config)));
  if (!a.mode.empty()) cfg.mode = mode_named(a.mode);
  if (a.seed_given) cfg.seed = a.seed;
  const auto maps = load_map_dir(a.maps.empty() ? default_data_dir() + "/maps" : a.maps);
  const SearchResult r = run_scenario(cfg, find_map(maps, cfg.map_id), !a.no_events);
  emit(a.out, nlohmann::json{{"config", to_json(cfg)}, {"result", to_json(r)}}.dump(2) + "\n");
  return 0;
}

// --- batch ----------------------------------------------------------------------

struct BatchArgs {
  std::string config_dir;
  std::string maps;
  std::string out;
  std::vector<std::string> modes;
  std::size_t random = 100;
  int cap = 2000;
  int cadence = 10;
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

int batch(const BatchArgs& a) {
  const auto maps = load_map_dir(a.maps.empty() ? default_data_dir() + "/maps" : a.maps);
  std::vector<ScenarioConfig> cfgs;
  if (!a.config_dir.empty()) {
    if (!fs::is_directory(a.config_dir)) throw IoError("cannot open scenario directory '" + a.config_dir + "'");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.config_dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) cfgs.push_back(scenario_from_json(nlohmann::json::parse(read_file(f))));
  } else {
    std::vector<WorldMap> pool;
    for (const auto& m : maps)
      if (m.id != "demo") pool.push_back(m);
    ScenarioConfig base;
    base.max_steps = a.cap;
    base.human_cadence = a.cadence;
    cfgs = random_scenarios(pool.empty() ? maps : pool, a.random, a.seed, base);
  }
  std::vector<SearchMode> modes;
  for (const auto& m : a.modes) modes.push_back(mode_named(m));
  if (modes.empty()) modes.assign(kAllModes.begin(), kAllModes.end());
  const BatchReport rep = run_batch(cfgs, modes, cached_maps(maps), a.threads);
  if (!a.out.empty()) {
    write_file(fs::path(a.out) / "report.json", to_json(rep).dump(2) + "\n");
    write_file(fs::path(a.out) / "summary.tsv", summary_table(rep));
    write_file(fs::path(a.out) / "curves.tsv", curve_table(rep));
  }
  std::cout << summary_table(rep);
  return 0;
}

// --- serve ----------------------------------------------------------------------

struct ServeArgs {
  std::string maps;
  std::string bind;
  std::uint64_t seed = 0;
};

int serve(const ServeArgs& a) {
  SessionManager sessions(load_map_dir(a.maps.empty() ? default_data_dir() + "/maps" : a.maps));
  sessions.set_default_seed(a.seed);
  const BindAddress bind = a.bind.empty() ? bind_from_env() : parse_bind(a.bind.c_str());
  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  Server server(sessions, bind);
  server.start();
  std::cerr << "listening on " << bind.host << ':' << server.port() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  sessions.clear();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial-language grounding and collaborative target search"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* c_gen = app.add_subcommand("gen-data", "Synthesize stage-1/stage-2 datasets or a sentence corpus");
  c_gen->add_option("kind", gd.kind, "stage1, stage2 or corpus")
      ->required()
      ->check(CLI::IsMember({"stage1", "stage2", "corpus"}));
  c_gen->add_option("--out", gd.out, "Output directory (datasets) or file (corpus, default stdout)");
  c_gen->add_option("--seed", gd.seed, "Random seed");
  c_gen->add_option("--maps", gd.maps, "Number of random maps");
  c_gen->add_option("--draws", gd.draws, "Stage 2: labels drawn per location");
  c_gen->add_option("--locations", gd.locations, "Stage 2: sampled locations per landmark");
  c_gen->add_option("--per-class", gd.per_class, "Stage 1: positives and negatives per landmark and relation");
  c_gen->add_option("--n", gd.n, "Corpus: number of sentences");
  c_gen->add_option("--typo-rate", gd.typo, "Corpus: share of sentences with one typo");
  c_gen->add_option("--map", gd.map, "Corpus: map whose landmarks are referenced");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the network through the curriculum stages");
  c_train->add_option("--stage1", tr.stages[0], "Stage-1 dataset directory");
  c_train->add_option("--stage2", tr.stages[1], "Stage-2 dataset directory");
  c_train->add_option("--stage3", tr.stages[2], "Stage-3 dataset directory");
  c_train->add_option("--val1", tr.validation[0], "Stage-1 validation directory");
  c_train->add_option("--val2", tr.validation[1], "Stage-2 validation directory");
  c_train->add_option("--val3", tr.validation[2], "Stage-3 validation directory");
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();
  c_train->add_option("--init", tr.init, "Start from this checkpoint");
  c_train->add_option("--log", tr.log, "Per-epoch log (tab-separated)");
  c_train->add_option("--seed", tr.seed, "Initialization and shuffling seed");
  c_train->add_option("--lr", tr.train.learning_rate, "Initial learning rate");
  c_train->add_option("--decay-step", tr.train.decay_step, "Epochs between learning-rate decays");
  c_train->add_option("--decay-factor", tr.train.decay_factor, "Learning-rate decay factor");
  c_train->add_option("--patience", tr.train.patience, "Early-stopping patience in epochs");
  c_train->add_option("--epochs", tr.train.max_epochs, "Maximum epochs per stage");
  c_train->add_option("--batch", tr.train.batch_size, "Rasters per optimizer step");
  c_train->add_option("--features", tr.model.features, "Pyramid feature channels");
  c_train->add_option("--map-embedding", tr.model.map_embedding, "Pooled map embedding width");
  c_train->add_option("--relation-embedding", tr.model.relation_embedding, "Relation embedding width");
  c_train->add_option("--hidden", tr.model.hidden, "Head hidden width");
  c_train->add_option("--levels", tr.model.levels, "Pyramid levels");
  c_train->add_flag("--single-level", tr.model.single_level, "Keep only the coarsest level");
  c_train->add_option("--resolution", tr.resolution, "Raster resolution in meters");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval-nll", "Per-point NLL of grounding models on a labeled set");
  c_eval->add_option("--model", ev.models, "chance, expert or a checkpoint path (repeatable)")->required();
  c_eval->add_option("--data", ev.data, "Dataset directory (default: synthetic stage-2 points)");
  c_eval->add_option("--n", ev.n, "Number of synthetic points when no dataset is given");
  c_eval->add_flag("--split", ev.split, "Evaluate on the held-out regions of a 3:2 region split");
  c_eval->add_option("--params", ev.params, "Expert parameter file");
  c_eval->add_option("--out", ev.out, "Directory for JSON, histogram and table files");
  c_eval->add_option("--seed", ev.seed, "Seed for chance draws, synthesis and the split");
  c_eval->add_option("--resolution", ev.resolution, "Raster resolution in meters");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit-expert", "Maximum-likelihood fit of the rule parameters");
  c_fit->add_option("--data", fit.data, "Dataset directory")->required();
  c_fit->add_option("--init", fit.init, "Initial parameter file");
  c_fit->add_option("--out", fit.out, "Fitted parameter file (default stdout)");
  c_fit->add_option("--report", fit.report, "Per-relation convergence report");
  c_fit->add_option("--max-iterations", fit.max_iterations, "Iteration limit per relation");
  c_fit->add_option("--seed", fit.seed, "Accepted for uniformity; the fit is deterministic");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run one search scenario");
  c_sim->add_option("--config", sim.config, "Scenario file")->required();
  c_sim->add_option("--mode", sim.mode, "human-robot, robot-only, human-only or uninformed");
  auto* seed_opt = c_sim->add_option("--seed", sim.seed, "Override the scenario seed");
  c_sim->add_option("--maps", sim.maps, "Map directory");
  c_sim->add_option("--out", sim.out, "Result file (default stdout)");
  c_sim->add_flag("--no-events", sim.no_events, "Omit the event log");

  BatchArgs ba;
  auto* c_batch = app.add_subcommand("batch", "Run scenarios in every mode and compare");
  c_batch->add_option("--config-dir", ba.config_dir, "Directory of scenario files (default: random scenarios)");
  c_batch->add_option("--random", ba.random, "Number of random scenarios");
  c_batch->add_option("--cap", ba.cap, "Step cap for random scenarios");
  c_batch->add_option("--cadence", ba.cadence, "Steps between utterances for random scenarios");
  c_batch->add_option("--modes", ba.modes, "Modes to run (default all)");
  c_batch->add_option("--maps", ba.maps, "Map directory");
  c_batch->add_option("--threads", ba.threads, "Worker threads");
  c_batch->add_option("--out", ba.out, "Directory for report, summary and curves");
  c_batch->add_option("--seed", ba.seed, "Scenario seed");

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Start the session service");
  c_serve->add_option("--maps", sv.maps, "Map directory");
  c_serve->add_option("--bind", sv.bind, "host:port (default SLG_BIND or 127.0.0.1:8080)");
  c_serve->add_option("--seed", sv.seed, "Seed for sessions that do not name one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::string what = e.what();
    const auto subs = app.get_subcommands([](const CLI::App*) { return true; });
    const auto named = [&](const CLI::App* c) { return argc > 1 && c->get_name() == argv[1]; };
    if (argc > 1 && argv[1][0] != '-' && std::none_of(subs.begin(), subs.end(), named))
      what = "unknown subcommand '" + std::string(argv[1]) + "'";
    std::cerr << "error: " << what << "\n\n" << app.help();
    return 1;
  }
  sim.seed_given = seed_opt->count() > 0;

  try {
    if (*c_gen) return gen_data(gd);
    if (*c_train) return train(tr);
    if (*c_eval) return eval_nll_cmd(ev);
    if (*c_fit) return fit_expert(fit);
    if (*c_sim) return simulate(sim);
    if (*c_batch) return batch(ba);
    if (*c_serve) return serve(sv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
