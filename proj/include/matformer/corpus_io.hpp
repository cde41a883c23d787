#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "matformer/dataset.hpp"

namespace matformer {

inline constexpr int kCorpusFormatVersion = 1;

struct CorpusManifest {
  int format_version = kCorpusFormatVersion;
  std::string library_version;
  std::string library_hash;
  CorpusSpec spec;
  FilterReport filter;
  struct Entry {
    std::string file;
    std::string split;  // "train" or "validation"
    int base = 0;
  };
  std::vector<Entry> entries;
};

/// Writes one graph file per sample (g000000.json, ...) and manifest.json.
void write_corpus(const Corpus& corpus, const CorpusSpec& spec, const FilterReport& filter,
                  const OperatorLibrary& library, const std::filesystem::path& dir);

/// Reads a corpus written by write_corpus; refuses a different library version.
Corpus read_corpus(const std::filesystem::path& dir, std::shared_ptr<const OperatorLibrary> library,
                   CorpusManifest* manifest = nullptr);

/// Every *.json graph file in `dir` except manifest.json, sorted by file name.
std::vector<MaterialGraph> load_graph_dir(const std::filesystem::path& dir,
                                          std::shared_ptr<const OperatorLibrary> library,
                                          std::vector<std::string>* names = nullptr);

/// Digest over the sorted file names and contents of a directory tree.
std::string directory_digest(const std::filesystem::path& dir);

}  // namespace matformer
