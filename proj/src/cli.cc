// Copyright 2026 The SSLAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sslam/cli.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sslam/checkpoint.h"
#include "sslam/config.h"
#include "sslam/dataset.h"
#include "sslam/errors.h"
#include "sslam/eval.h"
#include "sslam/polytools.h"
#include "sslam/trainer.h"

namespace sslam::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof())
      throw UsageError(std::string(flag) + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct TrainFlags {
  std::string manifest;
  std::string run_dir;
  std::string config;
  std::string init_checkpoint;
  std::string resume;
  std::string preset = "desk";
  std::string variant;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::int64_t> warmup_steps;
  std::optional<std::int64_t> checkpoint_every;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> clone_batch;
  std::optional<int> top_k_global;
  std::optional<int> top_k_local;
  std::optional<int> depth;
  std::optional<int> width;
  std::optional<int> heads;
  std::optional<int> block_size;
  std::optional<double> peak_lr;
  std::optional<double> min_lr;
  std::optional<double> mask_ratio;
  std::optional<double> weight_decay;
  std::optional<std::string> mix_strategy;
  std::optional<std::string> mix_extent;
  std::optional<std::string> srl_aggregation;
  std::optional<std::string> loss_weights;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--manifest", f.manifest, "Training manifest (JSON lines)")->required();
  app->add_option("--run-dir", f.run_dir, "Output directory")->required();
  app->add_option("--config", f.config, "TOML config; flags override its values");
  app->add_option("--resume", f.resume, "Checkpoint of this stage to resume from");
  app->add_option("--preset", f.preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  app->add_option("--seed", f.seed);
  app->add_option("--steps", f.steps, "Total steps (default: epochs x steps per epoch)");
  app->add_option("--warmup-steps", f.warmup_steps);
  app->add_option("--checkpoint-every", f.checkpoint_every);
  app->add_option("--epochs", f.epochs);
  app->add_option("--batch-size", f.batch_size);
  app->add_option("--clone-batch", f.clone_batch, "Masked clones per input");
  app->add_option("--peak-lr", f.peak_lr);
  app->add_option("--min-lr", f.min_lr);
  app->add_option("--weight-decay", f.weight_decay);
  app->add_option("--mask-ratio", f.mask_ratio);
  app->add_option("--block-size", f.block_size, "Inverse mask block side, in patches");
  app->add_option("--top-k-global", f.top_k_global);
  app->add_option("--top-k-local", f.top_k_local);
  app->add_option("--depth", f.depth);
  app->add_option("--width", f.width);
  app->add_option("--heads", f.heads);
  app->add_option("--loss-weights", f.loss_weights,
                  "g_um,l_um,g_m,l_m,srl (five comma-separated weights)");
}

train::StageConfig build_config(int stage, const TrainFlags& f) {
  train::StageConfig c =
      f.preset == "full" ? train::StageConfig::full(stage) : train::StageConfig::desk(stage);
  if (!f.variant.empty()) {
    if (stage != 2) throw UsageError("--variant applies to pretrain-stage2 only");
    c = train::StageConfig::variant(f.variant, c);
  }
  if (!f.config.empty()) train::apply_table(cfg::Table::load(f.config), c);
  c.stage = stage;
  if (f.seed) c.seed = static_cast<std::uint64_t>(*f.seed);
  if (f.steps) c.total_steps = *f.steps;
  if (f.warmup_steps) c.warmup_steps = *f.warmup_steps;
  if (f.checkpoint_every) c.checkpoint_every = *f.checkpoint_every;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.clone_batch) c.clone_batch = *f.clone_batch;
  if (f.peak_lr) c.peak_lr = *f.peak_lr;
  if (f.min_lr) c.min_lr = *f.min_lr;
  if (f.weight_decay) c.weight_decay = *f.weight_decay;
  if (f.mask_ratio) c.mask_ratio = *f.mask_ratio;
  if (f.block_size) c.mask_block = *f.block_size;
  if (f.top_k_global) c.top_k_global = *f.top_k_global;
  if (f.top_k_local) c.top_k_local = *f.top_k_local;
  if (f.depth) c.model.depth = *f.depth;
  if (f.width) c.model.width = *f.width;
  if (f.heads) c.model.heads = *f.heads;
  if (f.mix_strategy) c.strategy = mix::parse_mix_strategy(*f.mix_strategy);
  if (f.mix_extent) c.extent = train::parse_mix_extent(*f.mix_extent);
  if (f.srl_aggregation) c.srl_aggregation = loss::parse_srl_aggregation(*f.srl_aggregation);
  if (f.loss_weights) {
    const auto w = parse_list<double>(*f.loss_weights, "--loss-weights");
    if (w.size() != loss::kNumTerms) throw UsageError("--loss-weights needs five values");
    std::copy(w.begin(), w.end(), c.loss_weights.begin());
  }
  c.validate();
  return c;
}

int run_pretrain(int stage, const TrainFlags& f, std::ostream& out) {
  if (stage == 2 && f.init_checkpoint.empty() && f.resume.empty())
    throw UsageError("pretrain-stage2: --init-checkpoint is required");
  const train::StageConfig c = build_config(stage, f);
  const bool waves = c.trains_mixed() && c.strategy == mix::MixStrategy::kWaveAvg;
  const auto clips = data::load_clips(f.manifest, c.frontend, waves);
  train::RunOptions opt;
  opt.run_dir = f.run_dir;
  if (!f.init_checkpoint.empty()) opt.init_checkpoint = f.init_checkpoint;
  if (!f.resume.empty()) opt.resume = f.resume;
  opt.on_step = [&out](const train::StepResult& r) { out << train::metrics_line(r) << "\n"; };
  const train::RunResult r = train::run_stage(clips, c, opt);
  out << "stage " << stage << ": " << r.steps_done << " steps";
  if (!r.history.empty()) out << ", last loss_total=" << fmt(r.history.back().bundle.total);
  out << ", checkpoint " << r.final_checkpoint.string() << "\n";
  return kExitOk;
}

train::StageConfig config_of(const ckpt::Checkpoint& c) {
  train::StageConfig cfg = train::StageConfig::desk(c.stage);
  try {
    const auto meta = nlohmann::json::parse(c.meta);
    train::apply_table(cfg::Table::parse(meta.at("config").get<std::string>(), "checkpoint"),
                       cfg);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  return cfg;
}

model::ParamStore encoder_of(const ckpt::Checkpoint& c) {
  model::ParamStore p;
  for (const auto& name : c.names_with_prefix("student/"))
    if (name.rfind("encoder.", 0) == 0) p.add(name, c.get("student/" + name));
  if (p.size() == 0) throw DataError("checkpoint holds no encoder parameters");
  return p;
}

std::vector<const dsp::LogMelSpectrogram*> spec_ptrs(const std::vector<data::Clip>& clips) {
  std::vector<const dsp::LogMelSpectrogram*> out;
  for (const auto& c : clips) out.push_back(&c.spec);
  return out;
}

eval::EvalReport score(const Mat& logits, const eval::Labels& labels, bool multilabel) {
  eval::EvalReport rep;
  if (multilabel) {
    const eval::MapResult m = eval::mean_average_precision(logits, labels);
    rep.metric = "mAP";
    rep.value = m.map;
    rep.per_class_ap = m.per_class;
    rep.skipped_classes = m.skipped;
  } else {
    std::vector<int> truth;
    for (const auto& l : labels)
      truth.push_back(static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin()));
    rep.metric = "accuracy";
    rep.value = eval::accuracy(eval::argmax_rows(logits), truth);
  }
  return rep;
}

nlohmann::ordered_json head_to_json(const eval::LinearHead& h, bool multilabel) {
  auto rows = [](const Mat& m) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      a.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
    return a;
  };
  auto vec = [](const RowVec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::ordered_json j;
  j["multilabel"] = multilabel;
  j["weight"] = rows(h.weight);
  j["bias"] = vec(h.bias);
  j["shift"] = vec(h.shift);
  j["scale"] = vec(h.scale);
  return j;
}

eval::LinearHead head_from_json(const nlohmann::json& j, bool& multilabel) {
  eval::LinearHead h;
  auto to_row = [](const std::vector<double>& v) {
    RowVec r(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) r(i) = v[i];
    return r;
  };
  const auto w = j.at("weight").get<std::vector<std::vector<double>>>();
  if (w.empty()) throw DataError("head file: empty weight");
  h.weight.resize(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(w[0].size()));
  for (size_t r = 0; r < w.size(); ++r) {
    if (w[r].size() != w[0].size()) throw DataError("head file: ragged weight");
    for (size_t c = 0; c < w[r].size(); ++c) h.weight(r, c) = w[r][c];
  }
  h.bias = to_row(j.at("bias").get<std::vector<double>>());
  h.shift = to_row(j.at("shift").get<std::vector<double>>());
  h.scale = to_row(j.at("scale").get<std::vector<double>>());
  multilabel = j.at("multilabel").get<bool>();
  return h;
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) {
  std::ofstream o(p);
  o << j.dump(2) << "\n";
  if (!o) throw DataError("cannot write " + p.string());
}

struct ProbeFlags {
  std::string checkpoint;
  std::string train_manifest;
  std::string eval_manifest;
  std::string run_dir;
  int epochs = 50;
  int warmup_epochs = 5;
  int batch_size = 48;
  double peak_lr = 1e-3;
  int steps = 50;
  std::int64_t seed = 0;
  bool single_label = false;
  bool no_standardize = false;
};

int run_probe(const ProbeFlags& f, std::ostream& out) {
  const ckpt::Checkpoint c = ckpt::load(f.checkpoint);
  const train::StageConfig cfg = config_of(c);
  const model::ParamStore enc = encoder_of(c);
  const auto train_clips = data::load_clips(f.train_manifest, cfg.frontend);
  const auto eval_clips = data::load_clips(f.eval_manifest, cfg.frontend);
  const eval::Labels ytr = data::label_matrix(train_clips);
  const eval::Labels yev = data::label_matrix(eval_clips);

  eval::ProbeConfig pc;
  pc.epochs = f.epochs;
  pc.warmup_epochs = f.warmup_epochs;
  pc.batch_size = f.batch_size;
  pc.peak_lr = f.peak_lr;
  pc.multilabel = !f.single_label;
  pc.standardize = !f.no_standardize;
  pc.seed = static_cast<std::uint64_t>(f.seed);
  const Mat xtr = eval::extract_embeddings(enc, cfg.model, spec_ptrs(train_clips));
  const Mat xev = eval::extract_embeddings(enc, cfg.model, spec_ptrs(eval_clips));
  const eval::ProbeResult pr = eval::train_linear_probe(xtr, ytr, pc);

  eval::EvalReport rep = score(pr.head.logits(xev), yev, pc.multilabel);
  rep.n_train = static_cast<int>(train_clips.size());
  rep.n_eval = static_cast<int>(eval_clips.size());
  rep.config_hash = eval::hash_text(c.meta + "|probe|" + std::to_string(pc.epochs) + "|" +
                                    std::to_string(pc.batch_size) + "|" +
                                    cfg::format_double(pc.peak_lr) + "|" +
                                    std::to_string(pc.seed));
  fs::create_directories(f.run_dir);
  write_json(fs::path(f.run_dir) / "report.json", rep.to_json());
  write_json(fs::path(f.run_dir) / "probe_head.json", head_to_json(pr.head, pc.multilabel));
  out << "probe " << rep.metric << "=" << fmt(rep.value) << " train=" << rep.n_train
      << " eval=" << rep.n_eval << " report=" << (fs::path(f.run_dir) / "report.json").string()
      << "\n";
  return kExitOk;
}

int run_finetune(const ProbeFlags& f, std::ostream& out) {
  ckpt::Checkpoint c = ckpt::load(f.checkpoint);
  const train::StageConfig cfg = config_of(c);
  const model::ParamStore enc = encoder_of(c);
  const auto train_clips = data::load_clips(f.train_manifest, cfg.frontend);
  const auto eval_clips = data::load_clips(f.eval_manifest, cfg.frontend);
  const eval::Labels ytr = data::label_matrix(train_clips);
  const eval::Labels yev = data::label_matrix(eval_clips);

  eval::FineTuneConfig ft;
  ft.steps = f.steps;
  ft.warmup_steps = std::max(1, f.steps / 10);
  ft.batch_size = f.batch_size;
  ft.peak_lr = f.peak_lr;
  ft.multilabel = !f.single_label;
  ft.seed = static_cast<std::uint64_t>(f.seed);
  const eval::FineTuneResult r = eval::fine_tune(enc, cfg.model, spec_ptrs(train_clips), ytr, ft);
  const Mat xev = eval::extract_embeddings(r.encoder, cfg.model, spec_ptrs(eval_clips));
  eval::EvalReport rep = score(r.head.logits(xev), yev, ft.multilabel);
  rep.n_train = static_cast<int>(train_clips.size());
  rep.n_eval = static_cast<int>(eval_clips.size());
  rep.config_hash = eval::hash_text(c.meta + "|finetune|" + std::to_string(ft.steps) + "|" +
                                    cfg::format_double(ft.peak_lr) + "|" +
                                    std::to_string(ft.seed));
  fs::create_directories(f.run_dir);
  for (const auto& [name, v] : r.encoder.entries()) c.put("student/" + name, v->value);
  ckpt::save(c, fs::path(f.run_dir) / "finetuned.ckpt");
  write_json(fs::path(f.run_dir) / "report.json", rep.to_json());
  write_json(fs::path(f.run_dir) / "finetune_head.json", head_to_json(r.head, ft.multilabel));
  out << "finetune " << rep.metric << "=" << fmt(rep.value) << " train=" << rep.n_train
      << " eval=" << rep.n_eval << "\n";
  return kExitOk;
}

int run_eval(const std::string& checkpoint, const std::string& head_path,
             const std::string& manifest, const std::string& report, std::ostream& out) {
  const ckpt::Checkpoint c = ckpt::load(checkpoint);
  const train::StageConfig cfg = config_of(c);
  const model::ParamStore enc = encoder_of(c);
  nlohmann::json hj;
  {
    std::ifstream in(head_path);
    if (!in) throw DataError("cannot open " + head_path);
    try {
      hj = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(head_path + ": " + e.what());
    }
  }
  bool multilabel = true;
  const eval::LinearHead head = head_from_json(hj, multilabel);
  const auto clips = data::load_clips(manifest, cfg.frontend);
  const Mat x = eval::extract_embeddings(enc, cfg.model, spec_ptrs(clips));
  eval::EvalReport rep = score(head.logits(x), data::label_matrix(clips), multilabel);
  rep.n_eval = static_cast<int>(clips.size());
  rep.config_hash = eval::hash_text(c.meta + "|eval|" + hj.dump());
  if (!report.empty()) write_json(report, rep.to_json());
  out << "eval " << rep.metric << "=" << fmt(rep.value) << " clips=" << rep.n_eval << "\n";
  return kExitOk;
}

int run_ontology(const std::string& ontology, const std::string& labels,
                 const std::string& levels, const std::string& report, std::ostream& out) {
  const poly::Ontology o = poly::Ontology::load(ontology);
  const auto sets = poly::read_label_sets(labels);
  nlohmann::ordered_json j;
  j["clips"] = sets.size();
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (int l : parse_list<int>(levels, "--levels")) {
    const double pct = poly::polyphony_percentage(sets, l, o);
    out << "L=" << l << " polyphonic=" << fmt(pct) << "%\n";
    per.push_back({{"level", l}, {"polyphonic_percent", pct}});
  }
  j["levels"] = per;
  if (!report.empty()) write_json(report, j);
  return kExitOk;
}

int run_dump(const std::string& wav, const std::string& out_path, const std::string& pgm,
             const std::string& config, std::ostream& out) {
  train::StageConfig c = train::StageConfig::desk(1);
  if (!config.empty()) train::apply_table(cfg::Table::load(config), c);
  const dsp::LogMelSpectrogram s =
      data::model_input(data::prepare_waveform(dsp::read_wav(wav), c.frontend), c.frontend);
  dsp::write_spectrogram_cache(out_path, s);
  if (!pgm.empty()) dsp::write_pgm(pgm, s);
  out << "spectrogram " << s.frames() << "x" << s.bins() << " -> " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised audio pre-training from partially mixed clips", "sslam"};
  app.require_subcommand(1);

  TrainFlags s1;
  TrainFlags s2;
  auto* c1 = app.add_subcommand("pretrain-stage1", "Pre-train on unmixed clips");
  add_train_flags(c1, s1);
  auto* c2 = app.add_subcommand("pretrain-stage2", "Continue with mixed clips and SRL");
  add_train_flags(c2, s2);
  c1->add_option("--init-checkpoint", s1.init_checkpoint, "Optional stage-1 warm start");
  c2->add_option("--init-checkpoint", s2.init_checkpoint, "Stage-1 checkpoint (required)");
  c2->add_option("--variant", s2.variant, "MB-UA, MB-PMA, MB-UA-PMA or SSLAM")
      ->check(CLI::IsMember({"MB-UA", "MB-PMA", "MB-UA-PMA", "SSLAM"}));
  c2->add_option("--mix-strategy", s2.mix_strategy, "spec_max, spec_avg or wave_avg");
  c2->add_option("--mix-extent", s2.mix_extent, "partial or full");
  c2->add_option("--srl-aggregation", s2.srl_aggregation, "average or max");

  ProbeFlags pf;
  auto* probe = app.add_subcommand("probe", "Linear probe on frozen embeddings");
  ProbeFlags ff;
  auto* finetune = app.add_subcommand("finetune", "Fine-tune the encoder with a linear head");
  for (auto [cmd, f] : {std::pair{probe, &pf}, std::pair{finetune, &ff}}) {
    cmd->add_option("--checkpoint", f->checkpoint)->required();
    cmd->add_option("--train-manifest", f->train_manifest)->required();
    cmd->add_option("--eval-manifest", f->eval_manifest)->required();
    cmd->add_option("--run-dir", f->run_dir)->required();
    cmd->add_option("--batch-size", f->batch_size);
    cmd->add_option("--seed", f->seed);
    cmd->add_flag("--single-label", f->single_label, "Softmax CE and accuracy instead of BCE and mAP");
  }
  probe->add_option("--epochs", pf.epochs);
  probe->add_option("--warmup-epochs", pf.warmup_epochs);
  probe->add_option("--peak-lr", pf.peak_lr);
  probe->add_flag("--no-standardize", pf.no_standardize);
  ff.batch_size = 8;
  ff.peak_lr = 5e-5;
  finetune->add_option("--steps", ff.steps);
  finetune->add_option("--peak-lr", ff.peak_lr);

  std::string e_ckpt, e_head, e_manifest, e_report;
  auto* ev = app.add_subcommand("eval", "Score a trained head on a labeled manifest");
  ev->add_option("--checkpoint", e_ckpt)->required();
  ev->add_option("--head", e_head, "Head JSON written by probe or finetune")->required();
  ev->add_option("--manifest", e_manifest)->required();
  ev->add_option("--report", e_report, "Write the EvalReport JSON here");

  std::string o_ontology, o_labels, o_levels = "1,2,3,4", o_report;
  auto* onto = app.add_subcommand("analyze-ontology", "Distinct-event polyphony statistics");
  onto->add_option("--ontology", o_ontology, "Ontology JSON (id, child_ids)")->required();
  onto->add_option("--labels", o_labels, "JSON lines with a \"labels\" array per clip")->required();
  onto->add_option("--levels", o_levels, "Comma-separated hierarchy levels");
  onto->add_option("--report", o_report);

  poly::SynthConfig sc;
  std::string sd_out, sd_degrees = "2,3";
  auto* synth = app.add_subcommand("synth-data", "Render a synthetic polyphonic dataset");
  synth->add_option("--out-dir", sd_out)->required();
  synth->add_option("--n-clips", sc.n_clips);
  synth->add_option("--degrees", sd_degrees, "Allowed event counts, e.g. 2,3");
  synth->add_option("--clip-seconds", sc.clip_seconds);
  synth->add_option("--sample-rate", sc.sample_rate);
  synth->add_option("--seed", sc.seed);

  std::string d_wav, d_out, d_pgm, d_config;
  auto* dump = app.add_subcommand("dump-spectrogram", "Write a model-input spectrogram");
  dump->add_option("--wav", d_wav)->required();
  dump->add_option("--out", d_out, "Spectrogram cache file")->required();
  dump->add_option("--pgm", d_pgm, "Also write a PGM image");
  dump->add_option("--config", d_config, "TOML config for the [data] section");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    if (*c1) return run_pretrain(1, s1, out);
    if (*c2) return run_pretrain(2, s2, out);
    if (*probe) return run_probe(pf, out);
    if (*finetune) return run_finetune(ff, out);
    if (*ev) return run_eval(e_ckpt, e_head, e_manifest, e_report, out);
    if (*onto) return run_ontology(o_ontology, o_labels, o_levels, o_report, out);
    if (*synth) {
      sc.degree_bin = parse_list<int>(sd_degrees, "--degrees");
      const fs::path m = poly::write_synth_dataset(sc, sd_out);
      out << "wrote " << sc.n_clips << " clips, manifest " << m.string() << "\n";
      return kExitOk;
    }
    if (*dump) return run_dump(d_wav, d_out, d_pgm, d_config, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace sslam::cli
