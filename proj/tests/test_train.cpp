#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "epi/train.hpp"

using namespace epi;

namespace {

// Inputs drawn over the sampling boxes; the target is produced by `fn`.
template <class Fn>
Dataset synthetic_dataset(std::int64_t count, std::uint64_t seed, Fn&& fn) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> us(0.05, 1.0), ui(0.0, 0.5), un(0.1, 1.0),
      ub(0.075, 0.9), uk(0.1, 10.0);
  Dataset d;
  d.reserve(count);
  for (std::int64_t j = 0; j < count; ++j) {
    TrainingSample sm;
    sm.s = us(rng);
    sm.i = ui(rng);
    sm.n = un(rng);
    sm.beta = ub(rng);
    sm.kappa = uk(rng);
    sm.target = fn(sm);
    d.push_back(sm);
  }
  return d;
}

}  // namespace

TEST_CASE("training recovers the transmission-rate target f* = beta") {
  const Dataset d =
      synthetic_dataset(100'000, 1u, [](const TrainingSample& s) { return s.beta; });
  TrainConfig cfg;
  cfg.seed = 5u;
  const TrainResult r = train(d, cfg);
  REQUIRE(r.log.size() == 15);
  CHECK(r.log.back().val_mse < 1e-3);
  // The learning-rate schedule is exponential with the configured decay.
  CHECK(r.log[1].lr == Catch::Approx(cfg.learning_rate * cfg.lr_decay));
  CHECK(r.log.back().lr == Catch::Approx(cfg.learning_rate * std::pow(cfg.lr_decay, 14)));
}

TEST_CASE("a constant target is fitted to 1e-2") {
  const Dataset d = synthetic_dataset(50'000, 2u, [](const TrainingSample&) { return 0.5; });
  TrainConfig cfg;
  cfg.seed = 6u;
  const TrainResult r = train(d, cfg);
  Rng rng = make_rng(33u);
  std::uniform_real_distribution<double> us(0.05, 1.0), ui(0.0, 0.5), un(0.1, 1.0),
      ub(0.075, 0.9), uk(0.1, 10.0);
  for (int t = 0; t < 200; ++t) {
    const double pred = r.model.f_value(us(rng), ui(rng), un(rng), ub(rng), uk(rng));
    CHECK(std::abs(pred - 0.5) < 1e-2);
  }
}

TEST_CASE("shuffled labels cannot be learned") {
  Dataset d = synthetic_dataset(40'000, 3u, [](const TrainingSample& s) { return s.beta; });
  // Destroy the input-target relation while keeping the target distribution.
  {
    Rng rng = make_rng(44u);
    std::vector<double> targets;
    targets.reserve(d.size());
    for (const auto& s : d) targets.push_back(s.target);
    std::shuffle(targets.begin(), targets.end(), rng);
    for (std::size_t j = 0; j < d.size(); ++j) d[j].target = targets[j];
  }
  double mean = 0.0;
  for (const auto& s : d) mean += s.target;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (const auto& s : d) var += (s.target - mean) * (s.target - mean);
  var /= static_cast<double>(d.size());

  TrainConfig cfg;
  cfg.seed = 7u;
  const TrainResult r = train(d, cfg);
  CHECK(std::abs(r.log.back().val_mse - var) < 0.2 * var);
}

TEST_CASE("training is reproducible bit for bit") {
  const Dataset d = synthetic_dataset(5'000, 8u, [](const TrainingSample& s) { return s.beta; });
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 99u;
  const TrainResult a = train(d, cfg);
  const TrainResult b = train(d, cfg);
  for (int l = 0; l < a.model.net.n_layers(); ++l) {
    REQUIRE(a.model.net.weights[l] == b.model.net.weights[l]);
    REQUIRE(a.model.net.biases[l] == b.model.net.biases[l]);
  }
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_mse == b.log[e].train_mse);
    CHECK(a.log[e].val_mse == b.log[e].val_mse);
  }
}

TEST_CASE("degenerate datasets are rejected with diagnostics") {
  TrainConfig cfg;
  CHECK_THROWS_AS(train(Dataset{}, cfg), std::invalid_argument);

  Dataset d = synthetic_dataset(2'000, 9u, [](const TrainingSample&) { return 1e200; });
  cfg.epochs = 2;
  cfg.seed = 1u;
  CHECK_THROWS_AS(train(d, cfg), std::runtime_error);
}

TEST_CASE("fine-tuning keeps the normalization and improves the fit") {
  const Dataset small =
      synthetic_dataset(4'000, 10u, [](const TrainingSample& s) { return s.beta; });
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 3u;
  TrainResult first = train(small, cfg);
  const auto mean = first.model.in_mean;

  const Dataset big =
      synthetic_dataset(20'000, 11u, [](const TrainingSample& s) { return s.beta; });
  TrainConfig ft = cfg;
  ft.epochs = 5;
  const TrainResult second = fine_tune(first.model, big, ft);
  CHECK(second.model.in_mean == mean);
  CHECK(second.log.back().val_mse < first.log.back().val_mse);
}
