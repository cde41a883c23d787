#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "matformer/corpus_io.hpp"
#include "matformer/graph_io.hpp"

using namespace matformer;
using namespace testutil;
using nlohmann::json;

TEST_CASE("graph documents round trip byte for byte") {
  for (const auto& g : random_graphs(20, 5, 80, 31)) {
    const auto text = graph_to_string(g);
    const auto back = graph_from_string(text, lib());
    CHECK(structurally_equal(back, g));
    CHECK(graph_to_string(back) == text);
    CHECK(graph_hash(back) == graph_hash(g));
  }
  const auto dir = temp_dir("graph_io");
  const auto g = random_graphs(1, 30, 30, 4).front();
  save_graph(g, dir / "g.json");
  CHECK(structurally_equal(load_graph(dir / "g.json", lib()), g));
}

TEST_CASE("sparse node ids are renumbered in ascending order") {
  auto doc = graph_to_json(chain3());
  const int ids[] = {40, 7, 90};
  for (int i = 0; i < 3; ++i) doc["nodes"][i]["id"] = ids[i];
  for (auto& e : doc["edges"]) {
    e["from"]["node"] = ids[e["from"]["node"].get<int>()];
    e["to"]["node"] = ids[e["to"]["node"].get<int>()];
  }
  const auto g = graph_from_json(doc, lib());
  // 7 -> 0 (invert), 40 -> 1 (uniform_gray), 90 -> 2 (output)
  CHECK(g.node(0).type == type_of("invert"));
  CHECK(g.node(1).type == type_of("uniform_gray"));
  CHECK(validate(g).empty());
  CHECK(g.reaches(1, 2));
}

TEST_CASE("malformed documents are rejected with the matching error") {
  const auto good = graph_to_json(chain3());
  CHECK_THROWS_AS(graph_from_string("{", lib()), GraphFormatError);
  CHECK_THROWS_AS(graph_from_string("[]", lib()), GraphFormatError);
  auto v = good;
  v["format_version"] = 99;
  CHECK_THROWS_AS(graph_from_json(v, lib()), GraphFormatError);
  auto l = good;
  l["library_version"] = "other";
  CHECK_THROWS_AS(graph_from_json(l, lib()), GraphFormatError);
  auto dup = good;
  dup["nodes"][1]["id"] = 0;
  CHECK_THROWS_AS(graph_from_json(dup, lib()), GraphFormatError);
  auto t = good;
  t["nodes"][0]["type"] = "no_such_op";
  CHECK_THROWS_AS(graph_from_json(t, lib()), GraphError);
  auto e = good;
  e["edges"][0]["to"]["node"] = 17;
  CHECK_THROWS_AS(graph_from_json(e, lib()), GraphError);
  auto cyc = good;
  cyc["edges"].push_back({{"from", {{"node", 2}, {"slot", 0}}}, {"to", {{"node", 0}, {"slot", 0}}}});
  CHECK_THROWS(graph_from_json(cyc, lib()));
}

TEST_CASE("corpora round trip through a directory with a stable digest") {
  CorpusSpec spec;
  spec.graph_count = 5;
  spec.min_nodes = 5;
  spec.max_nodes = 15;
  spec.augmentations = 2;
  spec.validation_bases = 1;
  FilterReport report;
  const auto corpus = forge_corpus(spec, lib(), &report);
  const auto a = temp_dir("corpus_a");
  const auto b = temp_dir("corpus_b");
  write_corpus(corpus, spec, report, *lib(), a);
  write_corpus(forge_corpus(spec, lib()), spec, report, *lib(), b);
  CHECK(directory_digest(a) == directory_digest(b));

  CorpusManifest m;
  const auto back = read_corpus(a, lib(), &m);
  REQUIRE(back.train.size() == corpus.train.size());
  REQUIRE(back.validation.size() == corpus.validation.size());
  for (size_t i = 0; i < back.train.size(); ++i) CHECK(graph_hash(back.train[i]) == graph_hash(corpus.train[i]));
  CHECK(back.train_base == corpus.train_base);
  CHECK(m.entries.size() == 10);
  CHECK(m.spec.graph_count == 5);
  CHECK(load_graph_dir(a, lib()).size() == 10);

  std::ofstream(a / "extra.json") << "{}";
  CHECK(directory_digest(a) != directory_digest(b));
}
