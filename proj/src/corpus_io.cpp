#include "matformer/corpus_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "matformer/graph_io.hpp"
#include "matformer/hash.hpp"

namespace matformer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sample_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%06zu.json", i);
  return buf;
}

}  // namespace

void write_corpus(const Corpus& corpus, const CorpusSpec& spec, const FilterReport& filter,
                  const OperatorLibrary& library, const fs::path& dir) {
  fs::create_directories(dir);
  json entries = json::array();
  size_t index = 0;
  auto write_split = [&](const std::vector<MaterialGraph>& graphs, const std::vector<int>& bases, const char* split) {
    for (size_t i = 0; i < graphs.size(); ++i) {
      const auto name = sample_name(index++);
      save_graph(graphs[i], dir / name);
      entries.push_back({{"file", name}, {"split", split}, {"base", bases[i]}});
    }
  };
  write_split(corpus.train, corpus.train_base, "train");
  write_split(corpus.validation, corpus.validation_base, "validation");
  json manifest{{"format_version", kCorpusFormatVersion},
                {"library_version", library.version()},
                {"library_hash", hex64(library.hash())},
                {"seed", spec.seed},
                {"base_graphs", spec.graph_count},
                {"min_nodes", spec.min_nodes},
                {"max_nodes", spec.max_nodes},
                {"augmentations", spec.augmentations},
                {"validation_bases", spec.validation_bases},
                {"param_change_probability", spec.param_change_probability},
                {"filter",
                 {{"kept", filter.kept},
                  {"too_many_nodes", filter.too_many_nodes},
                  {"too_many_edges", filter.too_many_edges},
                  {"too_many_input_slots", filter.too_many_input_slots},
                  {"too_many_output_slots", filter.too_many_output_slots}}},
                {"counts", {{"train", corpus.train.size()}, {"validation", corpus.validation.size()}}},
                {"entries", entries}};
  std::ofstream f(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  f << manifest.dump(2) << '\n';
}

Corpus read_corpus(const fs::path& dir, std::shared_ptr<const OperatorLibrary> library, CorpusManifest* out) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw std::runtime_error("no corpus manifest in " + dir.string());
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed corpus manifest: " + std::string(e.what()));
  }
  if (m.at("format_version").get<int>() != kCorpusFormatVersion) throw std::runtime_error("unsupported corpus format");
  if (m.at("library_version").get<std::string>() != library->version()) {
    throw std::runtime_error("corpus was built for operator library " + m.at("library_version").get<std::string>());
  }
  Corpus c;
  CorpusManifest manifest;
  manifest.library_version = m.at("library_version");
  manifest.library_hash = m.at("library_hash");
  manifest.spec.seed = m.at("seed");
  manifest.spec.graph_count = m.at("base_graphs");
  manifest.spec.min_nodes = m.at("min_nodes");
  manifest.spec.max_nodes = m.at("max_nodes");
  manifest.spec.augmentations = m.at("augmentations");
  manifest.spec.validation_bases = m.at("validation_bases");
  manifest.spec.param_change_probability = m.at("param_change_probability");
  const auto& fr = m.at("filter");
  manifest.filter = {fr.at("kept"), fr.at("too_many_nodes"), fr.at("too_many_edges"), fr.at("too_many_input_slots"),
                     fr.at("too_many_output_slots")};
  for (const auto& e : m.at("entries")) {
    CorpusManifest::Entry entry{e.at("file"), e.at("split"), e.at("base")};
    auto g = load_graph(dir / entry.file, library);
    if (entry.split == "train") {
      c.train.push_back(std::move(g));
      c.train_base.push_back(entry.base);
    } else if (entry.split == "validation") {
      c.validation.push_back(std::move(g));
      c.validation_base.push_back(entry.base);
    } else {
      throw std::runtime_error("unknown split '" + entry.split + "' in manifest");
    }
    manifest.entries.push_back(std::move(entry));
  }
  if (out) *out = std::move(manifest);
  return c;
}

std::vector<MaterialGraph> load_graph_dir(const fs::path& dir, std::shared_ptr<const OperatorLibrary> library,
                                          std::vector<std::string>* names) {
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "manifest.json") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<MaterialGraph> out;
  for (const auto& f : files) {
    out.push_back(load_graph(f, library));
    if (names) names->push_back(f.filename().string());
  }
  return out;
}

std::string directory_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a("");
  for (const auto& f : files) {
    h = fnv1a(fs::relative(f, dir).generic_string(), h);
    h = fnv1a(read_file(f), h);
  }
  return hex64(h);
}

}  // namespace matformer
