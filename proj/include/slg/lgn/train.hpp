#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "slg/lgn/model.hpp"

namespace slg::lgn {

struct TrainConfig {
  double learning_rate = 5e-5;
  int decay_step = 10;        // epochs
  double decay_factor = 0.6;
  int patience = 20;          // epochs without validation improvement
  int max_epochs = 200;
  int batch_size = 4;         // rasters per optimizer step
  std::uint64_t seed = 0;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0) || patience < 1 || decay_step < 1 || !(decay_factor > 0) || batch_size < 1 ||
        max_epochs < 1)
      throw ConfigError("invalid training configuration");
  }

  // Step decay: lr * factor^floor(epoch / step), epochs counted from 0.
  double learning_rate_at(int epoch) const {
    return learning_rate * std::pow(decay_factor, static_cast<double>(epoch / decay_step));
  }
};

// One curriculum stage. An empty validation set monitors the training loss.
struct Stage {
  int number = 1;
  std::vector<RasterExample> train;
  std::vector<RasterExample> validation;
};

struct EpochRecord {
  int stage = 1;
  int epoch = 0;
  double learning_rate = 0.0;
  double train_nll = 0.0;
  double validation_nll = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  std::vector<int> stopped_early;  // stage numbers that hit the patience limit
};

class Adam {
 public:
  Adam(const LgnModel& like, const TrainConfig& cfg)
      : cfg_(cfg), m_(LgnModel::zeros(like.config)), v_(LgnModel::zeros(like.config)) {}

  void step(LgnModel& model, const LgnModel& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_), c2 = 1.0 - std::pow(cfg_.beta2, t_);
    auto p = model.parameters();
    auto g = grad.parameters();
    auto m = m_.parameters();
    auto v = v_.parameters();
    for (std::size_t a = 0; a < p.size(); ++a) {
      auto& pw = *p[a].second;
      const auto& gw = *g[a].second;
      auto& mw = *m[a].second;
      auto& vw = *v[a].second;
      for (std::size_t i = 0; i < pw.size(); ++i) {
        mw[i] = cfg_.beta1 * mw[i] + (1 - cfg_.beta1) * gw[i];
        vw[i] = cfg_.beta2 * vw[i] + (1 - cfg_.beta2) * gw[i] * gw[i];
        pw[i] -= lr * (mw[i] / c1) / (std::sqrt(vw[i] / c2) + cfg_.epsilon);
      }
    }
  }

 private:
  TrainConfig cfg_;
  LgnModel m_, v_;
  int t_ = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Runs the stages in order, carrying weights forward. Within a stage: Adam
// with step-decayed learning rate, shuffled raster batches, validation after
// every epoch, early stop after `patience` epochs without improvement, and
// the best weights restored at the end. An empty stage 3 is skipped with a
// warning; any other empty stage is an error.
inline LgnModel train(LgnModel model, const std::vector<Stage>& stages, const TrainConfig& cfg,
                      TrainLog* log = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  TrainLog local;
  TrainLog& out = log ? *log : local;
  std::mt19937_64 rng(cfg.seed);
  int prev = 0;
  for (const auto& stage : stages) {
    if (stage.number < prev) throw ConfigError("stages must be ordered 1 -> 2 -> 3");
    prev = stage.number;
    if (stage.train.empty()) {
      if (stage.number == 3) {
        out.warnings.push_back("stage 3 skipped: no human annotations");
        continue;
      }
      throw DatasetError("stage " + std::to_string(stage.number) + " has no training data");
    }
    Adam adam(model, cfg);
    std::vector<RasterExample> data = stage.train;
    const auto& monitor = stage.validation.empty() ? stage.train : stage.validation;
    double best = mean_nll(model, monitor);
    LgnModel best_model = model;
    int stale = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      const double lr = cfg.learning_rate_at(epoch);
      std::shuffle(data.begin(), data.end(), rng);
      double loss_sum = 0.0, weight_sum = 0.0;
      for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
        const std::span<const RasterExample> batch(data.data() + start,
                                                   std::min<std::size_t>(cfg.batch_size, data.size() - start));
        double loss = 0.0;
        const LgnModel g = gradients(model, batch, &loss);
        double w = 0.0;
        for (const auto& ex : batch) w += ex.weight();
        loss_sum += loss * w;
        weight_sum += w;
        adam.step(model, g, lr);
      }
      EpochRecord rec{stage.number, epoch, lr, loss_sum / weight_sum, mean_nll(model, monitor)};
      out.epochs.push_back(rec);
      if (on_epoch) on_epoch(rec);
      if (rec.validation_nll < best) {
        best = rec.validation_nll;
        best_model = model;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        out.stopped_early.push_back(stage.number);
        break;
      }
    }
    model = std::move(best_model);
  }
  return model;
}

}  // namespace slg::lgn
