#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "matformer/corpus_io.hpp"
#include "matformer/dataset.hpp"
#include "matformer/evaluator.hpp"
#include "matformer/generation.hpp"
#include "matformer/graph_io.hpp"
#include "matformer/hash.hpp"
#include "matformer/metrics.hpp"
#include "matformer/operators.hpp"
#include "matformer/service.hpp"
#include "matformer/training.hpp"

using namespace matformer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_renders(const MaterialGraph& g, int resolution, const fs::path& dir, const std::string& stem) {
  const auto out = evaluate_graph(g, resolution);
  for (const auto& ch : material_channels()) write_png(out.channel(ch), dir / (stem + "_" + ch + ".png"));
}

std::vector<fs::path> graph_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".json" && e.path().filename() != "manifest.json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer-based procedural material graph generation"};
  app.require_subcommand(1);
  auto library = builtin_library();

  // forge-data
  CorpusSpec spec;
  std::string forge_out;
  auto* forge = app.add_subcommand("forge-data", "Synthesize, filter, augment and split a graph corpus");
  forge->add_option("--graphs", spec.graph_count, "Base graphs to synthesize")->capture_default_str();
  forge->add_option("--augment", spec.augmentations, "Perturbed copies per base graph (>= 1)")->capture_default_str();
  forge->add_option("--seed", spec.seed)->capture_default_str();
  forge->add_option("--min-nodes", spec.min_nodes)->capture_default_str();
  forge->add_option("--max-nodes", spec.max_nodes)->capture_default_str();
  forge->add_option("--validation-bases", spec.validation_bases)->capture_default_str();
  forge->add_option("--param-probability", spec.param_change_probability, "Chance a parameter leaves its default")
      ->capture_default_str();
  forge->add_option("--out", forge_out, "Output directory")->required();

  // train
  TrainConfig tc;
  std::string stage_name = "nodes", order_name = "rr", corpus_dir, train_out, log_path;
  int batch_size = 0, layers = 0, heads = 0, dim = 0;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train one stage model");
  train->add_option("--stage", stage_name, "nodes, params or edges")->capture_default_str();
  train->add_option("--order", order_name, "Node ordering: r, rr, b or t")->capture_default_str();
  train->add_option("--corpus", corpus_dir)->required();
  train->add_option("--out", train_out, "Checkpoint path (best weights)")->required();
  train->add_option("--batch-size", batch_size, "Graphs per batch (default 64, edges 16)");
  train->add_option("--lr", tc.lr)->capture_default_str();
  train->add_option("--max-epochs", tc.max_epochs)->capture_default_str();
  train->add_option("--max-steps", tc.max_steps, "Total optimizer steps (0: unlimited)")->capture_default_str();
  train->add_option("--patience", tc.patience)->capture_default_str();
  train->add_option("--seed", tc.seed)->capture_default_str();
  train->add_option("--layers", layers);
  train->add_option("--heads", heads);
  train->add_option("--dim", dim);
  train->add_option("--log", log_path, "Training log (default <out>.log.json)");
  train->add_flag("--resume", resume, "Continue from <out>.state");

  // bundle
  std::string b_nodes, b_params, b_edges, b_out;
  auto* bundle = app.add_subcommand("bundle", "Package three stage checkpoints");
  bundle->add_option("--nodes", b_nodes)->required();
  bundle->add_option("--params", b_params)->required();
  bundle->add_option("--edges", b_edges)->required();
  bundle->add_option("--out", b_out)->required();

  // sample
  std::string models_dir, sample_out;
  int count = 10, resolution = 128;
  std::uint64_t seed = 1;
  double temperature = 1.0;
  bool render = false;
  auto* sample = app.add_subcommand("sample", "Generate graphs from a model bundle");
  sample->add_option("--models", models_dir)->required();
  sample->add_option("--count", count)->capture_default_str();
  sample->add_option("--seed", seed)->capture_default_str();
  sample->add_option("--temperature", temperature)->capture_default_str();
  sample->add_option("--out", sample_out)->required();
  sample->add_flag("--render", render, "Also write channel PNGs");
  sample->add_option("--resolution", resolution)->capture_default_str();

  // complete
  std::string c_graph, c_out;
  std::vector<int> c_pins;
  auto* complete = app.add_subcommand("complete", "Autocomplete a partial graph");
  complete->add_option("--models", models_dir)->required();
  complete->add_option("--graph", c_graph)->required();
  complete->add_option("--pin", c_pins, "Pinned node ids (default: all)");
  complete->add_option("--count", count)->capture_default_str();
  complete->add_option("--seed", seed)->capture_default_str();
  complete->add_option("--temperature", temperature)->capture_default_str();
  complete->add_option("--out", c_out)->required();

  // eval
  std::string gen_dir, ref_dir, report_out;
  MetricOptions mopts;
  bool no_render = false;
  auto* eval = app.add_subcommand("eval", "Compare generated graphs with a reference corpus");
  eval->add_option("--generated", gen_dir)->required();
  eval->add_option("--reference", ref_dir)->required();
  eval->add_option("--out", report_out, "JSON report path")->required();
  eval->add_option("--min-nodes", mopts.min_nodes, "Size filter for D_nne")->capture_default_str();
  eval->add_option("--render-resolution", mopts.render_resolution)->capture_default_str();
  eval->add_flag("--no-render", no_render, "Skip the render-statistics distance");

  // validate
  std::vector<std::string> validate_inputs;
  auto* validate_cmd = app.add_subcommand("validate", "Check graph files");
  validate_cmd->add_option("inputs", validate_inputs, "Graph files or directories")->required();

  // render
  std::string r_graph, r_out;
  auto* render_cmd = app.add_subcommand("render", "Evaluate a graph and write channel PNGs");
  render_cmd->add_option("--graph", r_graph)->required();
  render_cmd->add_option("--out", r_out)->required();
  render_cmd->add_option("--resolution", resolution)->capture_default_str();

  // library
  auto* library_cmd = app.add_subcommand("library", "Print the operator library as JSON");

  // serve
  std::string host = "127.0.0.1", data_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the authoring HTTP service");
  serve->add_option("--models", models_dir, "Model bundle directory");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--data-dir", data_dir, std::string("Session directory (default $") + kDataDirEnv + ")");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*forge) {
      if (spec.augmentations < 1) throw std::invalid_argument("--augment must be at least 1");
      FilterReport report;
      const auto corpus = forge_corpus(spec, library, &report);
      write_corpus(corpus, spec, report, *library, forge_out);
      std::cout << "wrote " << corpus.train.size() << " training and " << corpus.validation.size()
                << " validation graphs to " << forge_out << " (kept " << report.kept << " base graphs)\n";
    } else if (*train) {
      tc.stage = parse_stage(stage_name);
      tc.ordering = parse_ordering(order_name);
      tc.batch_size = batch_size > 0 ? batch_size : TrainConfig::default_batch_size(tc.stage);
      const auto corpus = read_corpus(corpus_dir, library);
      if (corpus.train.empty()) throw std::invalid_argument("corpus has no training graphs");
      auto mc = ModelConfig::for_library(*library);
      if (layers > 0) mc.layers = layers;
      if (heads > 0) mc.heads = heads;
      if (dim > 0) mc.dim = dim;
      const auto quantizer = Quantizer::fit(*library, corpus.train);
      Trainer trainer(tc, mc, quantizer, library, corpus.train, corpus.validation);
      const fs::path state = train_out + ".state";
      if (resume) {
        if (!fs::exists(state)) throw std::invalid_argument("nothing to resume: " + state.string() + " is missing");
        trainer.load_state(state);
      }
      trainer.run([&](const EpochLog& e) {
        std::printf("epoch %d step %ld train %.6f val %.6f\n", e.epoch, e.step, e.train_loss, e.val_loss);
        std::fflush(stdout);
        trainer.save_state(state);
      });
      trainer.save_state(state);
      save_stage_model(trainer.model(true), train_out);
      json log = json::array();
      for (const auto& e : trainer.log()) {
        log.push_back({{"epoch", e.epoch}, {"step", e.step}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
      }
      std::ofstream(log_path.empty() ? train_out + ".log.json" : log_path)
          << json{{"stage", stage_name},
                  {"ordering", to_string(tc.ordering)},
                  {"steps", trainer.steps()},
                  {"stopped_early", trainer.stopped_early()},
                  {"epochs", log}}
                 .dump(2)
          << "\n";
      std::cout << "saved " << train_out << " after " << trainer.steps() << " steps\n";
    } else if (*bundle) {
      const auto b = make_bundle(library, load_stage_model(b_nodes), load_stage_model(b_params), load_stage_model(b_edges));
      save_bundle(b, b_out);
      std::cout << "bundle written to " << b_out << "\n";
    } else if (*sample) {
      if (count < 0) throw std::invalid_argument("--count must be non-negative");
      const auto b = load_bundle(models_dir, library);
      fs::create_directories(sample_out);
      const auto config = SamplerConfig::uniform(temperature, false, seed);
      for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i), 0x5a));
        const auto g = generate_graph(b, config, rng);
        char stem[32];
        std::snprintf(stem, sizeof stem, "g%06d", i);
        save_graph(g.graph, fs::path(sample_out) / (std::string(stem) + ".json"));
        if (render) write_renders(g.graph, resolution, sample_out, stem);
      }
      std::cout << "wrote " << count << " graphs to " << sample_out << "\n";
    } else if (*complete) {
      const auto b = load_bundle(models_dir, library);
      const auto partial = load_graph(c_graph, library);
      std::vector<NodeId> pins(c_pins.begin(), c_pins.end());
      if (c_pins.empty()) {
        for (NodeId i = 0; i < partial.node_count(); ++i) pins.push_back(i);
      }
      const auto out = autocomplete(b, partial, pins, count, SamplerConfig::uniform(temperature, false, seed));
      fs::create_directories(c_out);
      for (size_t i = 0; i < out.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "c%03zu.json", i);
        save_graph(out[i].graph, fs::path(c_out) / name);
      }
      std::cout << "wrote " << out.size() << " completions to " << c_out << "\n";
    } else if (*eval) {
      const auto generated = load_graph_dir(gen_dir, library);
      const auto reference = load_graph_dir(ref_dir, library);
      mopts.render = !no_render;
      const auto report = evaluate_metrics(generated, reference, mopts);
      std::ofstream(report_out) << report.to_json() << "\n";
      std::cout << report.to_table();
    } else if (*validate_cmd) {
      int bad = 0;
      const auto files = graph_files(validate_inputs);
      for (const auto& f : files) {
        try {
          const auto g = load_graph(f, library);
          const auto problems = validate(g);
          if (problems.empty()) {
            std::cout << f.string() << ": ok\n";
          } else {
            ++bad;
            for (const auto& p : problems) std::cout << f.string() << ": " << p << "\n";
          }
        } catch (const std::exception& e) {
          ++bad;
          std::cout << f.string() << ": " << e.what() << "\n";
        }
      }
      std::cout << files.size() - bad << "/" << files.size() << " valid\n";
      return bad == 0 && !files.empty() ? 0 : 1;
    } else if (*render_cmd) {
      const auto g = load_graph(r_graph, library);
      fs::create_directories(r_out);
      write_renders(g, resolution, r_out, fs::path(r_graph).stem().string());
    } else if (*library_cmd) {
      std::cout << library_to_json(*library).dump(2) << "\n";
    } else if (*serve) {
      if (data_dir.empty()) {
        const char* env = std::getenv(kDataDirEnv);
        data_dir = env ? env : "sessions";
      }
      std::shared_ptr<const ModelBundle> b;
      if (!models_dir.empty()) b = std::make_shared<const ModelBundle>(load_bundle(models_dir, library));
      AuthoringService service(library, b, data_dir);
      std::cout << "serving on " << host << ":" << port << " (" << service.session_count() << " sessions from "
                << data_dir << ")\n";
      std::cout.flush();
      run_http_service(service, host, port);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
