#include <doctest.h>

#include "helpers.hpp"
#include "matformer/training.hpp"

using namespace matformer;
using namespace testutil;

namespace {

ModelConfig small_config() {
  auto c = ModelConfig::for_library(*lib());
  c.layers = 1;
  c.heads = 2;
  c.dim = 16;
  return c;
}

Trainer make_trainer(Stage stage, std::uint64_t seed, NodeOrdering ordering = NodeOrdering::back_to_front_reversed) {
  const auto train = random_graphs(6, 5, 15, 40);
  const auto val = random_graphs(2, 5, 15, 41);
  TrainConfig tc;
  tc.stage = stage;
  tc.ordering = ordering;
  tc.batch_size = 2;
  tc.lr = 3e-3;
  tc.seed = seed;
  tc.max_epochs = 3;
  return Trainer(tc, small_config(), Quantizer::fit(*lib(), train), lib(), train, val);
}

bool same_params(const nn::ParamSet<float>& a, const nn::ParamSet<float>& b) {
  if (a.names() != b.names()) return false;
  for (int i = 0; i < a.size(); ++i) {
    if (a.at(i) != b.at(i)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("training lowers the loss of every stage") {
  for (Stage stage : {Stage::nodes, Stage::params, Stage::edges}) {
    CAPTURE(to_string(stage));
    auto t = make_trainer(stage, 1);
    const double before = t.train_loss();
    for (int i = 0; i < 30; ++i) t.step();
    CHECK(t.train_loss() < before);
    CHECK(t.steps() == 30);
  }
}

TEST_CASE("a resumed run continues bit-identically") {
  const auto dir = temp_dir("training_resume");
  auto straight = make_trainer(Stage::nodes, 5, NodeOrdering::random_topological);
  for (int i = 0; i < 10; ++i) straight.step();

  auto first = make_trainer(Stage::nodes, 5, NodeOrdering::random_topological);
  for (int i = 0; i < 4; ++i) first.step();
  first.save_state(dir / "state");
  auto second = make_trainer(Stage::nodes, 5, NodeOrdering::random_topological);
  second.load_state(dir / "state");
  CHECK(second.steps() == 4);
  for (int i = 0; i < 6; ++i) second.step();
  CHECK(same_params(straight.params(), second.params()));

  auto other = make_trainer(Stage::nodes, 6, NodeOrdering::random_topological);
  for (int i = 0; i < 10; ++i) other.step();
  CHECK_FALSE(same_params(straight.params(), other.params()));
}

TEST_CASE("run logs every epoch and keeps the best weights") {
  auto t = make_trainer(Stage::edges, 2);
  int seen = 0;
  t.run([&](const EpochLog& e) {
    ++seen;
    CHECK(e.epoch == seen - 1);
    CHECK(e.val_loss > 0);
  });
  CHECK(seen == 3);
  CHECK(t.log().size() == 3);
  double best = 1e300;
  for (const auto& e : t.log()) best = std::min(best, e.val_loss);
  CHECK(t.best_validation_loss() == doctest::Approx(best));
}

TEST_CASE("stage models and bundles round trip and mismatches are rejected") {
  const auto dir = temp_dir("training_bundle");
  auto n = make_trainer(Stage::nodes, 1);
  auto p = make_trainer(Stage::params, 1);
  auto e = make_trainer(Stage::edges, 1);
  n.step();
  save_stage_model(n.model(false), dir / "nodes.ckpt");
  const auto back = load_stage_model(dir / "nodes.ckpt");
  CHECK(back.stage == Stage::nodes);
  CHECK(back.config == n.model_config());
  CHECK(back.quantizer.hash() == n.model().quantizer.hash());
  CHECK(same_params(back.params, n.params()));

  const auto bundle = make_bundle(lib(), n.model(), p.model(), e.model());
  save_bundle(bundle, dir / "bundle");
  const auto loaded = load_bundle(dir / "bundle", lib());
  CHECK(same_params(loaded.nodes, bundle.nodes));
  CHECK(same_params(loaded.edges, bundle.edges));
  CHECK(loaded.quantizer.hash() == bundle.quantizer.hash());

  CHECK_THROWS_AS(make_bundle(lib(), p.model(), p.model(), e.model()), BundleError);
  auto shifted = e.model();
  shifted.quantizer = Quantizer::fit(*lib(), random_graphs(3, 5, 10, 99));
  CHECK_THROWS_AS(make_bundle(lib(), n.model(), p.model(), shifted), BundleError);
  auto wide = e.model();
  wide.config.dim = 32;
  CHECK_THROWS_AS(make_bundle(lib(), n.model(), p.model(), wide), BundleError);
  auto foreign = e.model();
  foreign.library_hash ^= 1;
  CHECK_THROWS_AS(make_bundle(lib(), n.model(), p.model(), foreign), BundleError);
}
