// semv2x: payload / latency / FLOPs tables, dataset generation, probe
// training and the end-to-end experiment.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "semv2x/config.hpp"
#include "semv2x/costmodel.hpp"
#include "semv2x/errors.hpp"
#include "semv2x/netpbm.hpp"
#include "semv2x/pipeline.hpp"
#include "semv2x/probe.hpp"

namespace fs = std::filesystem;
using namespace semv2x;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string post;
  std::optional<std::int64_t> gap;
  std::string quant;
  bool probe_at_vehicle = false;
  std::string sweep_path;
  std::string report_path;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw std::runtime_error("cannot write '" + path.string() + "'");
}

// Command-line flags override the config file; the merged result is
// validated again.
ExperimentConfig resolve_config(const Options& o) {
  auto cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.post.empty()) cfg.dataset.post = parse_post_process(o.post);
  if (o.gap) cfg.dataset.gap = *o.gap;
  if (!o.quant.empty()) cfg.quant = parse_quant_format(o.quant);
  if (o.probe_at_vehicle) cfg.probe_at_vehicle = true;
  const auto v = validate_config(cfg);
  if (!v.empty()) throw ValidationError(v.front().field, v.front().message);
  return cfg;
}

// Tables go to stdout, or to <out-dir>/<name> when --out-dir is given.
void emit(const Options& o, const std::string& name, const std::string& content) {
  if (o.out_dir.empty())
    std::cout << content;
  else
    write_file(fs::path(o.out_dir) / name, content);
}

std::string out_dir_or(const Options& o, const char* fallback) { return o.out_dir.empty() ? fallback : o.out_dir; }

int run_gen(const Options& o) {
  const auto cfg = resolve_config(o);
  const auto ds = build_dataset(cfg.world, dataset_options(cfg), cfg.seed);
  const fs::path root = out_dir_or(o, "dataset");
  char name[32];
  for (const auto* split : {&ds.train, &ds.test}) {
    const auto sub = root / (split == &ds.train ? "train" : "test");
    for (const auto& c : *split) {
      std::snprintf(name, sizeof name, "clip_%04lld", static_cast<long long>(c.id));
      save_clip(sub / name, c);
    }
  }
  write_file(root / "config.yaml", serialize_config(cfg));
  std::cout << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test clips to " << root.string()
            << "\n";
  return 0;
}

int run_train(const Options& o) {
  const auto cfg = resolve_config(o);
  const auto result = cmd_train(cfg);
  const fs::path root = out_dir_or(o, "train");
  fs::create_directories(root);
  save_checkpoint(root / "probe.bin", result.params);
  write_file(root / "loss_history.csv", loss_history_csv(result.loss_history));
  std::cout << "final training loss " << (result.loss_history.empty() ? 0.0 : result.loss_history.back())
            << ", checkpoint " << (root / "probe.bin").string() << "\n";
  return 0;
}

int run_e2e(const Options& o, const CLI::App& sub) {
  const auto cfg = resolve_config(o);
  E2eOptions opts;
  // With --post or --gap only that single condition is run.
  if (sub.count("--post") || sub.count("--gap")) opts.conditions = {{cfg.dataset.post, cfg.dataset.gap}};
  const fs::path root = out_dir_or(o, "e2e");
  fs::create_directories(root);
  std::ofstream log(root / "run.log");
  opts.log = &log;
  const auto report = cmd_e2e(cfg, opts);
  write_file(root / "report.json", report_to_json(report));
  cmd_report(report, root);
  std::cout << metrics_csv(report);
  return 0;
}

int run_report(const Options& o) {
  if (o.report_path.empty()) throw ValidationError("--report", "required");
  const auto report = report_from_json(read_file(o.report_path));
  const fs::path root = o.out_dir.empty() ? fs::path(o.report_path).parent_path() : fs::path(o.out_dir);
  cmd_report(report, root.empty() ? fs::path(".") : root);
  std::cout << summary_yaml(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic V2X collision-prediction simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", o.config_path, "YAML experiment config")->check(CLI::ExistingFile);
    s->add_option("--seed", o.seed, "experiment seed");
    s->add_option("--out-dir", o.out_dir, "output directory");
    s->add_option("--quant", o.quant, "link format")->check(CLI::IsMember({"fp32", "fp16", "int8"}, CLI::ignore_case));
  };
  auto add_dataset = [&](CLI::App* s) {
    s->add_option("--post", o.post, "post-processing")
        ->check(CLI::IsMember({"none", "heatmap", "mask", "hybrid"}, CLI::ignore_case));
    s->add_option("--gap", o.gap, "frames trimmed before the collision")->check(CLI::IsMember({0, 4, 8, 12}));
  };

  auto* payload = app.add_subcommand("payload", "raw vs semantic payload table");
  auto* latency = app.add_subcommand("latency", "link latency table");
  auto* flops = app.add_subcommand("flops", "FLOPs / memory / inference-time table");
  auto* gen = app.add_subcommand("gen", "generate the synthetic dataset as Netpbm clips");
  auto* train = app.add_subcommand("train", "train the attentive probe");
  auto* e2e = app.add_subcommand("e2e", "end-to-end experiment");
  auto* report = app.add_subcommand("report", "re-render tables from a report.json");
  for (auto* s : {payload, latency, flops, gen, train, e2e, report}) add_common(s);
  for (auto* s : {gen, train, e2e}) add_dataset(s);
  for (auto* s : {e2e, train}) s->add_flag("--probe-at-vehicle", o.probe_at_vehicle, "send L x D tokens");
  flops->add_option("--sweep", o.sweep_path, "YAML list of config overrides")->check(CLI::ExistingFile);
  report->add_option("--report", o.report_path, "report.json written by e2e")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }

  try {
    if (*payload) {
      emit(o, "payload.csv", cmd_payload(resolve_config(o)));
    } else if (*latency) {
      emit(o, "latency.csv", cmd_latency(resolve_config(o)));
    } else if (*flops) {
      const auto cfg = resolve_config(o);
      const auto configs = o.sweep_path.empty() ? std::vector{cfg} : parse_sweep(read_file(o.sweep_path), cfg);
      emit(o, "flops.csv", cmd_flops(configs));
    } else if (*gen) {
      return run_gen(o);
    } else if (*train) {
      return run_train(o);
    } else if (*e2e) {
      return run_e2e(o, *e2e);
    } else if (*report) {
      return run_report(o);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
}
