// Trains a small network on synthetic stage-2 labels and compares its
// held-out NLL with the rule family that generated them.
#include <iostream>
#include <random>

#include "slg/eval.hpp"

using namespace slg;

int main() {
  std::mt19937_64 rng(1);
  lgn::SynthOptions opt;
  opt.locations = 30;
  const Split s = split_by_region(lgn::synthesize_stage2(rng, 20, 10, opt), 1);

  lgn::LgnConfig cfg;
  cfg.features = 4;
  cfg.map_embedding = 8;
  cfg.relation_embedding = 6;
  cfg.hidden = 12;
  lgn::TrainConfig tc;
  tc.learning_rate = 5e-3;
  tc.max_epochs = 8;
  tc.batch_size = 2;
  lgn::Stage stage{2, lgn::make_examples(s.train), {}};
  const auto model = lgn::train(lgn::LgnModel::create(cfg, 1), {stage}, tc, nullptr, [](const lgn::EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " train NLL " << r.train_nll << '\n';
  });

  for (const auto& [name, p] : {std::pair<const char*, Predictor>{"network", lgn_predictor(model)},
                                {"generating rules", expert_predictor(ExpertParams::defaults())},
                                {"chance", chance_predictor(1)}})
    std::cout << name << ": held-out NLL " << eval_nll(p, s.test).overall.mean << '\n';
}
