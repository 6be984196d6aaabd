#include "semv2x/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "semv2x/costmodel.hpp"
#include "semv2x/csv.hpp"
#include "semv2x/encoder.hpp"
#include "semv2x/errors.hpp"
#include "semv2x/semlink.hpp"

namespace semv2x {

void ConfusionMatrix::add(Label truth, Label predicted) {
  const bool t = truth == Label::COLLISION, p = predicted == Label::COLLISION;
  if (t && p) ++tp;
  else if (!t && p) ++fp;
  else if (!t && !p) ++tn;
  else ++fn;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fp < 0 || cm.tn < 0 || cm.fn < 0) throw DomainError("confusion matrix: negative count");
  const auto total = cm.total();
  if (total == 0) throw DomainError("confusion matrix: no evaluated clips");
  Metrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
  m.precision = cm.tp + cm.fp > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp) : 1.0;
  m.recall = cm.tp + cm.fn > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn) : 1.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

namespace {

constexpr QuantFormat kFormats[] = {QuantFormat::FP32, QuantFormat::FP16, QuantFormat::INT8};

std::size_t format_index(QuantFormat f) { return static_cast<std::size_t>(f); }

}  // namespace

std::string cmd_payload(const ExperimentConfig& cfg) {
  CsvWriter csv({"n_frames", "format", "raw_bytes", "sem_bytes", "ratio"});
  for (std::int64_t n : {33, 64}) {
    auto clip = cfg.clip;
    clip.n_frames = n;
    for (auto f : kFormats) {
      const auto r = payload_report(clip, cfg.encoder.embed_dim, f);
      csv.row({std::to_string(n), std::string(to_string(f)), std::to_string(r.raw_bytes),
               std::to_string(r.sem_bytes), fmt_sig(r.ratio, 7)});
    }
  }
  return csv.str();
}

std::string cmd_latency(const ExperimentConfig& cfg) {
  std::vector<LatencyRow> rows;
  for (const auto& link : standard_links(cfg.link.bandwidth_hz))
    for (auto f : kFormats) rows.push_back(latency_row(cfg.encoder.embed_dim, f, link));
  return latency_csv(rows);
}

std::string cmd_flops(const std::vector<ExperimentConfig>& configs) {
  std::string out = flops_csv_header();
  for (const auto& c : configs) out += flops_csv_row(c, cost_report(c));
  return out;
}

std::vector<ExperimentConfig> parse_sweep(std::string_view text, const ExperimentConfig& base) {
  YAML::Node doc;
  try {
    doc = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line);
  }
  if (!doc || doc.IsNull()) return {base};
  if (!doc.IsSequence()) throw ConfigError("sweep file must be a sequence of configs", doc.Mark().line);
  std::vector<ExperimentConfig> out;
  for (const auto& item : doc) {
    YAML::Emitter e;
    e << item;
    // The item is re-emitted and parsed on its own, so report the item's
    // position in the sweep file instead of the re-parsed line.
    try {
      out.push_back(parse_config(e.c_str(), base));
    } catch (const ConfigError& err) {
      throw ConfigError("sweep item " + std::to_string(out.size()) + ": " + err.what(), item.Mark().line);
    }
  }
  return out;
}

std::string Condition::name() const {
  return std::string(to_string(post)) + "_gap" + std::to_string(gap);
}

std::vector<Condition> default_conditions(const ExperimentConfig& cfg) {
  std::vector<Condition> out;
  auto push = [&](Condition c) {
    for (const auto& o : out)
      if (o == c) return;
    out.push_back(c);
  };
  for (auto p : {PostProcess::NONE, PostProcess::HEATMAP, PostProcess::MASK, PostProcess::HYBRID})
    push({p, cfg.dataset.gap});
  for (std::int64_t g : {4, 8, 12}) push({cfg.dataset.post, g});
  return out;
}

namespace {

// Leading frames are dropped so the length is a multiple of the tubelet depth.
std::span<const Frame> tubelet_aligned(const ScenarioClip& clip, std::int64_t tp) {
  const auto keep = clip.length() - clip.length() % tp;
  if (keep <= 0) throw DomainError("clip shorter than one tubelet");
  return std::span<const Frame>(clip.frames).subspan(static_cast<std::size_t>(clip.length() - keep));
}

TokenizerSpec sim_tokenizer(const ExperimentConfig& cfg) { return {cfg.sim.patch_px, cfg.sim.tubelet_frames}; }

std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }

Label to_label(std::size_t i) { return i == 1 ? Label::COLLISION : Label::SAFE; }

std::vector<double> through_link(std::span<const double> v, QuantFormat fmt) {
  std::vector<float> f(v.begin(), v.end());
  return dequantize_embedding(quantize_embedding(f, fmt));
}

class Stopwatch {
 public:
  explicit Stopwatch(std::ostream* log) : log_(log), start_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    if (log_)
      *log_ << stage << ": " << fmt_sig(std::chrono::duration<double>(now - start_).count(), 4) << " s\n";
    start_ = now;
  }

 private:
  std::ostream* log_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

std::vector<Sample> encode_clips(const ExperimentConfig& cfg, const std::vector<ScenarioClip>& clips) {
  const auto tok = sim_tokenizer(cfg);
  const EncoderStub enc(tok, cfg.sim.channels, cfg.sim.embed_dim, cfg.sim.encoder_seed);
  std::vector<Sample> out;
  out.reserve(clips.size());
  for (const auto& c : clips)
    out.push_back({enc.encode(tubelet_aligned(c, tok.tubelet_frames)), label_index(c.label)});
  return out;
}

TrainResult cmd_train(const ExperimentConfig& cfg) {
  const auto ds = build_dataset(cfg.world, dataset_options(cfg), cfg.seed);
  if (ds.train.empty()) throw ValidationError("dataset", "training split is empty");
  const auto samples = encode_clips(cfg, ds.train);
  return train_probe(samples, init_probe(cfg.probe, static_cast<std::size_t>(cfg.sim.embed_dim), cfg.seed),
                     cfg.train);
}

ExperimentReport cmd_e2e(const ExperimentConfig& cfg, const E2eOptions& opts) {
  if (cfg.dataset.n_safe + cfg.dataset.n_collision < 1)
    throw ValidationError("dataset", "dataset has no clips");
  Stopwatch clock(opts.log);

  ExperimentReport rep;
  rep.config = cfg;
  rep.config_hash = config_hash(cfg);
  rep.payload_csv = cmd_payload(cfg);
  rep.latency_csv = cmd_latency(cfg);
  rep.flops_csv = cmd_flops({cfg});

  const auto tok = sim_tokenizer(cfg);
  const auto dim = cfg.sim.embed_dim;
  const auto aligned_frames = cfg.sim.max_frames - cfg.sim.max_frames % tok.tubelet_frames;
  rep.tokens_per_clip = (aligned_frames / tok.tubelet_frames) * (cfg.sim.height_px / tok.patch_px) *
                        (cfg.sim.width_px / tok.patch_px);
  rep.pooled_payload_bytes = semantic_payload_bytes(dim, cfg.quant);
  rep.token_payload_bytes = rep.tokens_per_clip * rep.pooled_payload_bytes;
  rep.link_payload_bytes = cfg.probe_at_vehicle ? rep.token_payload_bytes : rep.pooled_payload_bytes;

  const auto base_opts = dataset_options(cfg);
  const auto raw = generate_clips(cfg.world, base_opts, cfg.seed);
  clock.lap("generate " + std::to_string(raw.size()) + " clips");

  const EncoderStub enc(tok, cfg.sim.channels, dim, cfg.sim.encoder_seed);
  const auto conditions = opts.conditions.empty() ? default_conditions(cfg) : opts.conditions;
  for (const auto& cond : conditions) {
    ConditionResult res;
    res.condition = cond;
    auto o = base_opts;
    o.post = cond.post;
    o.gap = cond.gap;

    std::vector<ScenarioClip> prepared;
    for (const auto& c : raw) {
      try {
        prepared.push_back(prepare_clip(c, o));
      } catch (const std::exception& e) {
        res.skipped.push_back({c.id, e.what()});
      }
    }
    auto split = split_dataset(std::move(prepared), o.train_fraction, cfg.seed);

    auto encode_split = [&](const std::vector<ScenarioClip>& clips, std::vector<std::int64_t>& ids) {
      std::vector<Sample> out;
      for (const auto& c : clips) {
        try {
          out.push_back({enc.encode(tubelet_aligned(c, tok.tubelet_frames)), label_index(c.label)});
          ids.push_back(c.id);
        } catch (const std::exception& e) {
          res.skipped.push_back({c.id, e.what()});
        }
      }
      return out;
    };
    std::vector<std::int64_t> train_ids, test_ids;
    const auto train = encode_split(split.train, train_ids);
    const auto test = encode_split(split.test, test_ids);
    if (train.empty()) throw ValidationError("dataset", "training split is empty for " + cond.name());
    if (test.empty()) throw ValidationError("dataset", "test split is empty for " + cond.name());
    clock.lap(cond.name() + ": prepare and encode");

    auto trained =
        train_probe(train, init_probe(cfg.probe, static_cast<std::size_t>(dim), cfg.seed), cfg.train);
    res.train_clips = static_cast<std::int64_t>(train.size());
    res.loss_history = std::move(trained.loss_history);
    const auto& params = trained.params;
    clock.lap(cond.name() + ": train");

    std::int64_t agree16 = 0, agree8 = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      ClipPrediction pred;
      pred.clip_id = test_ids[i];
      pred.truth = to_label(test[i].label);
      for (auto f : kFormats) {
        Classification cls;
        if (cfg.probe_at_vehicle) {
          // Full token matrix crosses the link; pooling happens at the vehicle.
          TokenMatrix received(test[i].tokens.rows(), test[i].tokens.cols());
          const auto deq = through_link(test[i].tokens.values(), f);
          std::copy(deq.begin(), deq.end(), received.values().begin());
          cls = classify(params, received);
        } else {
          const auto pooled = probe_pool(params, test[i].tokens).pooled;
          cls = classify_pooled(params, through_link(pooled, f));
        }
        pred.predicted[format_index(f)] = to_label(cls.label);
        if (f == cfg.quant) pred.p_collision = cls.probs[1];
      }
      const auto p32 = pred.predicted[format_index(QuantFormat::FP32)];
      agree16 += pred.predicted[format_index(QuantFormat::FP16)] == p32;
      agree8 += pred.predicted[format_index(QuantFormat::INT8)] == p32;
      res.confusion.add(pred.truth, pred.predicted[format_index(cfg.quant)]);
      res.predictions.push_back(pred);
    }
    const auto n = static_cast<double>(test.size());
    res.fp16_agreement = static_cast<double>(agree16) / n;
    res.int8_agreement = static_cast<double>(agree8) / n;
    res.metrics = compute_metrics(res.confusion);
    clock.lap(cond.name() + ": evaluate");
    if (opts.log)
      *opts.log << cond.name() << ": accuracy " << fmt_sig(res.metrics.accuracy, 4) << ", f1 "
                << fmt_sig(res.metrics.f1, 4) << ", int8 agreement " << fmt_sig(res.int8_agreement, 4)
                << ", skipped " << res.skipped.size() << "\n";
    rep.conditions.push_back(std::move(res));
  }
  return rep;
}

namespace {

std::string exact(double v) { return fmt_sig(v, 17); }

}  // namespace

std::string metrics_csv(const ExperimentReport& report) {
  CsvWriter csv({"condition", "post", "gap", "quant", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall",
                 "f1", "fp16_agreement", "int8_agreement", "skipped"});
  for (const auto& c : report.conditions) {
    const auto& m = c.metrics;
    const auto& cm = c.confusion;
    csv.row({c.condition.name(), std::string(to_string(c.condition.post)), std::to_string(c.condition.gap),
             std::string(to_string(report.config.quant)), std::to_string(cm.tp), std::to_string(cm.fp),
             std::to_string(cm.tn), std::to_string(cm.fn), exact(m.accuracy), exact(m.precision),
             exact(m.recall), exact(m.f1), exact(c.fp16_agreement), exact(c.int8_agreement),
             std::to_string(c.skipped.size())});
  }
  return csv.str();
}

std::string predictions_csv(const ExperimentReport& report) {
  CsvWriter csv({"condition", "clip_id", "truth", "pred_fp32", "pred_fp16", "pred_int8", "p_collision"});
  for (const auto& c : report.conditions)
    for (const auto& p : c.predictions)
      csv.row({c.condition.name(), std::to_string(p.clip_id), std::string(to_string(p.truth)),
               std::string(to_string(p.predicted[0])), std::string(to_string(p.predicted[1])),
               std::string(to_string(p.predicted[2])), fmt_sig(p.p_collision, 6)});
  return csv.str();
}

std::string summary_yaml(const ExperimentReport& report) {
  YAML::Emitter e;
  e.SetDoublePrecision(6);
  e << YAML::BeginMap;
  e << YAML::Key << "config_hash" << YAML::Value << report.config_hash;
  e << YAML::Key << "seed" << YAML::Value << report.config.seed;
  e << YAML::Key << "quant" << YAML::Value << std::string(to_string(report.config.quant));
  e << YAML::Key << "probe_at_vehicle" << YAML::Value << report.config.probe_at_vehicle;
  e << YAML::Key << "tokens_per_clip" << YAML::Value << report.tokens_per_clip;
  e << YAML::Key << "link_payload_bytes" << YAML::Value << report.link_payload_bytes;
  e << YAML::Key << "pooled_payload_bytes" << YAML::Value << report.pooled_payload_bytes;
  e << YAML::Key << "token_payload_bytes" << YAML::Value << report.token_payload_bytes;
  e << YAML::Key << "conditions" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : report.conditions) {
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << c.condition.name();
    e << YAML::Key << "test_clips" << YAML::Value << c.confusion.total();
    e << YAML::Key << "accuracy" << YAML::Value << c.metrics.accuracy;
    e << YAML::Key << "precision" << YAML::Value << c.metrics.precision;
    e << YAML::Key << "recall" << YAML::Value << c.metrics.recall;
    e << YAML::Key << "f1" << YAML::Value << c.metrics.f1;
    e << YAML::Key << "int8_agreement" << YAML::Value << c.int8_agreement;
    e << YAML::Key << "skipped" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : c.skipped)
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "clip" << YAML::Value << s.clip_id << YAML::Key
        << "reason" << YAML::Value << s.reason << YAML::EndMap;
    e << YAML::EndSeq;
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

using nlohmann::json;

std::string report_to_json(const ExperimentReport& r) {
  json j;
  j["config"] = serialize_config(r.config);
  j["config_hash"] = r.config_hash;
  j["payload_csv"] = r.payload_csv;
  j["latency_csv"] = r.latency_csv;
  j["flops_csv"] = r.flops_csv;
  j["tokens_per_clip"] = r.tokens_per_clip;
  j["link_payload_bytes"] = r.link_payload_bytes;
  j["pooled_payload_bytes"] = r.pooled_payload_bytes;
  j["token_payload_bytes"] = r.token_payload_bytes;
  j["conditions"] = json::array();
  for (const auto& c : r.conditions) {
    json jc;
    jc["post"] = to_string(c.condition.post);
    jc["gap"] = c.condition.gap;
    jc["train_clips"] = c.train_clips;
    jc["confusion"] = {{"tp", c.confusion.tp}, {"fp", c.confusion.fp}, {"tn", c.confusion.tn},
                       {"fn", c.confusion.fn}};
    jc["metrics"] = {{"accuracy", c.metrics.accuracy},
                     {"precision", c.metrics.precision},
                     {"recall", c.metrics.recall},
                     {"f1", c.metrics.f1}};
    jc["fp16_agreement"] = c.fp16_agreement;
    jc["int8_agreement"] = c.int8_agreement;
    jc["loss_history"] = c.loss_history;
    jc["predictions"] = json::array();
    for (const auto& p : c.predictions)
      jc["predictions"].push_back({{"clip_id", p.clip_id},
                                   {"truth", label_index(p.truth)},
                                   {"predicted",
                                    {label_index(p.predicted[0]), label_index(p.predicted[1]),
                                     label_index(p.predicted[2])}},
                                   {"p_collision", p.p_collision}});
    jc["skipped"] = json::array();
    for (const auto& s : c.skipped) jc["skipped"].push_back({{"clip_id", s.clip_id}, {"reason", s.reason}});
    j["conditions"].push_back(std::move(jc));
  }
  return j.dump(1) + "\n";
}

ExperimentReport report_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    ExperimentReport r;
    r.config = parse_config(j.at("config").get<std::string>());
    r.config_hash = j.at("config_hash").get<std::string>();
    r.payload_csv = j.at("payload_csv").get<std::string>();
    r.latency_csv = j.at("latency_csv").get<std::string>();
    r.flops_csv = j.at("flops_csv").get<std::string>();
    r.tokens_per_clip = j.at("tokens_per_clip").get<std::int64_t>();
    r.link_payload_bytes = j.at("link_payload_bytes").get<std::int64_t>();
    r.pooled_payload_bytes = j.at("pooled_payload_bytes").get<std::int64_t>();
    r.token_payload_bytes = j.at("token_payload_bytes").get<std::int64_t>();
    for (const auto& jc : j.at("conditions")) {
      ConditionResult c;
      c.condition = {parse_post_process(jc.at("post").get<std::string>()), jc.at("gap").get<std::int64_t>()};
      c.train_clips = jc.at("train_clips").get<std::int64_t>();
      const auto& cm = jc.at("confusion");
      c.confusion = {cm.at("tp").get<std::int64_t>(), cm.at("fp").get<std::int64_t>(),
                     cm.at("tn").get<std::int64_t>(), cm.at("fn").get<std::int64_t>()};
      const auto& m = jc.at("metrics");
      c.metrics = {m.at("accuracy").get<double>(), m.at("precision").get<double>(), m.at("recall").get<double>(),
                   m.at("f1").get<double>()};
      c.fp16_agreement = jc.at("fp16_agreement").get<double>();
      c.int8_agreement = jc.at("int8_agreement").get<double>();
      c.loss_history = jc.at("loss_history").get<std::vector<double>>();
      for (const auto& jp : jc.at("predictions")) {
        ClipPrediction p;
        p.clip_id = jp.at("clip_id").get<std::int64_t>();
        p.truth = to_label(jp.at("truth").get<std::size_t>());
        const auto& pr = jp.at("predicted");
        for (std::size_t k = 0; k < 3; ++k) p.predicted[k] = to_label(pr.at(k).get<std::size_t>());
        p.p_collision = jp.at("p_collision").get<double>();
        c.predictions.push_back(p);
      }
      for (const auto& js : jc.at("skipped"))
        c.skipped.push_back({js.at("clip_id").get<std::int64_t>(), js.at("reason").get<std::string>()});
      r.conditions.push_back(std::move(c));
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace

void cmd_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + out_dir.string() + "': " + ec.message());
  write_file(out_dir / "payload.csv", report.payload_csv);
  write_file(out_dir / "latency.csv", report.latency_csv);
  write_file(out_dir / "flops.csv", report.flops_csv);
  write_file(out_dir / "metrics.csv", metrics_csv(report));
  write_file(out_dir / "predictions.csv", predictions_csv(report));
  for (const auto& c : report.conditions)
    write_file(out_dir / ("loss_" + c.condition.name() + ".csv"), loss_history_csv(c.loss_history));
  write_file(out_dir / "summary.yaml", summary_yaml(report));
}

}  // namespace semv2x
