// tfsep/tools/tfsep_main.cpp

// Copyright 2026  tfsep authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: mix / train / separate / evaluate / inspect.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tfsep/checkpoint.hpp"
#include "tfsep/config.hpp"
#include "tfsep/metrics.hpp"
#include "tfsep/mixer.hpp"
#include "tfsep/model.hpp"
#include "tfsep/train.hpp"
#include "tfsep/wav_io.hpp"

namespace fs = std::filesystem;
using namespace tfsep;

namespace {

// Bad flags/config are usage errors (exit 2); anything else that throws is a
// runtime failure (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig make_config(const std::string& config_file,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg = RunConfig::defaults();
  try {
    if (!config_file.empty()) cfg.load_file(config_file);
    cfg.apply_overrides(overrides);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int cmd_mix(const std::vector<std::string>& corpus, const std::string& out,
            mix::BuildOptions opts, bool write_audio) {
  mix::Manifest manifest = mix::build_manifest(corpus, opts);
  fs::path out_path(out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  mix::write_manifest(manifest, out);
  std::string dir = out_path.has_parent_path()
                        ? out_path.parent_path().string()
                        : std::string(".");
  if (write_audio) {
    for (int i = 0; i < static_cast<int>(manifest.records.size()); ++i) {
      mix::RecordAudio audio =
          mix::synthesize_record(manifest.records[i], manifest.sample_rate);
      std::string stem = (fs::path(dir) / mix::record_stem(manifest, i)).string();
      io::write_wav(stem + "_mix.wav", audio.mixture);
      for (size_t s = 0; s < audio.sources.size(); ++s)
        io::write_wav(stem + "_s" + std::to_string(s + 1) + ".wav",
                      audio.sources[s]);
    }
  }
  std::cout << "wrote " << manifest.records.size() << " mixtures to " << out
            << (write_audio ? " (with audio)" : " (manifest only)") << "\n";
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& valid,
              const std::string& out_dir, const std::string& config_file,
              const std::vector<std::string>& overrides,
              const std::string& resume) {
  RunConfig cfg = make_config(config_file, overrides);
  train::TrainOptions opts;
  opts.manifest_path = manifest;
  opts.valid_manifest_path = valid;
  opts.out_dir = out_dir;
  opts.resume_from = resume;
  train::TrainSummary summary = train::train(cfg, opts);
  std::cout << "trained " << summary.steps << " steps over " << summary.epochs
            << " epochs; final loss " << summary.last_loss << "\n"
            << "last checkpoint: " << summary.last_checkpoint << "\n";
  if (summary.best_checkpoint != summary.last_checkpoint)
    std::cout << "best checkpoint: " << summary.best_checkpoint << "\n";
  return 0;
}

int cmd_separate(const std::string& ckpt, const std::string& input,
                 const std::string& out_dir) {
  LoadedCheckpoint lc = load_checkpoint(ckpt);
  Waveform mixture = io::read_wav(input);
  std::vector<Waveform> ests = train::separate(*lc.model, mixture);
  fs::create_directories(out_dir);
  std::string stem = fs::path(input).stem().string();
  for (size_t i = 0; i < ests.size(); ++i) {
    std::string path =
        (fs::path(out_dir) / (stem + "_est" + std::to_string(i + 1) + ".wav"))
            .string();
    io::write_wav(path, ests[i]);
    std::cout << path << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& manifest_path,
                 const std::string& noise_dir,
                 const std::vector<double>& noise_snrs, uint64_t seed,
                 const std::string& report_path) {
  LoadedCheckpoint lc = load_checkpoint(ckpt);
  mix::Manifest manifest = mix::read_manifest(manifest_path);
  std::string dir = fs::path(manifest_path).parent_path().string();
  if (dir.empty()) dir = ".";

  std::vector<metrics::NoiseCondition> conditions;
  conditions.push_back({"clean", "", mix::kNoiseDisabled, seed});
  for (double snr : noise_snrs) {
    if (noise_dir.empty())
      throw UsageError("--noise-snr requires --noise-dir");
    char label[32];
    std::snprintf(label, sizeof label, "noise %g dB", snr);
    conditions.push_back({label, noise_dir, snr, seed});
  }

  metrics::EvalReport report =
      metrics::evaluate(*lc.model, manifest, dir, conditions);
  report.manifest_path = manifest_path;

  std::vector<metrics::TableRow> rows;
  for (const auto& cr : report.conditions)
    rows.push_back({cr.condition.label, {cr.mean_sdr_i, cr.mean_si_snr_i}});
  std::cout << metrics::render_table("condition", {"SDRi", "SI-SNRi"}, rows);
  for (const auto& cr : report.conditions)
    if (cr.failed > 0)
      std::cout << cr.condition.label << ": " << cr.failed
                << " utterance(s) skipped\n";
  if (!report_path.empty()) {
    metrics::write_report_json(report, report_path);
    std::cout << "report: " << report_path << "\n";
  }
  return 0;
}

int cmd_inspect(const std::string& ckpt, const std::string& config_file,
                const std::vector<std::string>& overrides) {
  std::unique_ptr<model::Model> owned;
  if (!ckpt.empty()) {
    LoadedCheckpoint lc = load_checkpoint(ckpt);
    owned = std::move(lc.model);
  } else {
    owned = std::make_unique<model::Model>(make_config(config_file, overrides));
  }
  model::Model& m = *owned;
  std::cout << "config:\n";
  std::istringstream cfg_in(m.run_config.serialize());
  std::string line;
  while (std::getline(cfg_in, line)) std::cout << "  " << line << "\n";
  std::cout << "\nparameters:\n";
  for (const auto& p : m.params) {
    std::cout << "  " << p.name << " [";
    for (size_t d = 0; d < p.value.shape().size(); ++d)
      std::cout << (d ? " x " : "") << p.value.shape()[d];
    std::cout << "] = " << p.value.numel() << "\n";
  }
  std::cout << "\ntotal parameters: " << m.param_count() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tfsep: single-channel two-speaker separation toolkit"};
  app.require_subcommand(1);

  // mix
  auto* mix_cmd = app.add_subcommand("mix", "synthesize a mixture dataset");
  std::vector<std::string> corpus;
  std::string mix_out;
  mix::BuildOptions mopts;
  bool no_audio = false;
  mix_cmd->add_option("--corpus", corpus, "speech corpus directory")
      ->required()
      ->expected(-1);
  mix_cmd->add_option("--out", mix_out, "manifest output path (.jsonl)")
      ->required();
  mix_cmd->add_option("--count", mopts.count, "number of mixtures")->required();
  mix_cmd->add_option("--split", mopts.split, "train | valid | test");
  mix_cmd->add_option("--seed", mopts.seed, "random seed");
  mix_cmd->add_option("--snr-lo", mopts.snr_lo_db, "pair SNR lower bound (dB)");
  mix_cmd->add_option("--snr-hi", mopts.snr_hi_db, "pair SNR upper bound (dB)");
  mix_cmd->add_option("--noise-dir", mopts.noise_dir, "noise corpus directory");
  mix_cmd->add_option("--noise-snr", mopts.noise_snr_db, "noise SNR (dB)");
  mix_cmd->add_option("--sample-rate", mopts.sample_rate, "output sample rate");
  mix_cmd->add_flag("--no-audio", no_audio, "write the manifest only");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a separation model");
  std::string tr_manifest, tr_valid, tr_out, tr_config, tr_resume;
  std::vector<std::string> tr_set;
  train_cmd->add_option("--manifest", tr_manifest, "training manifest")
      ->required();
  train_cmd->add_option("--valid", tr_valid, "validation manifest");
  train_cmd->add_option("--out", tr_out, "output directory")->required();
  train_cmd->add_option("--config", tr_config, "config file (key = value)");
  train_cmd->add_option("--set", tr_set, "config override key=value");
  train_cmd->add_option("--resume", tr_resume, "checkpoint to resume from");

  // separate
  auto* sep_cmd = app.add_subcommand("separate", "separate a mixture file");
  std::string sp_ckpt, sp_input, sp_out;
  sep_cmd->add_option("--checkpoint", sp_ckpt, "model checkpoint")->required();
  sep_cmd->add_option("--input", sp_input, "mixture .wav")->required();
  sep_cmd->add_option("--out-dir", sp_out, "output directory")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score a test manifest");
  std::string ev_ckpt, ev_manifest, ev_noise_dir, ev_report;
  std::vector<double> ev_snrs;
  uint64_t ev_seed = 0;
  eval_cmd->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--manifest", ev_manifest, "test manifest")->required();
  eval_cmd->add_option("--noise-dir", ev_noise_dir, "noise corpus directory");
  eval_cmd->add_option("--noise-snr", ev_snrs,
                       "noise SNR condition in dB (repeatable)");
  eval_cmd->add_option("--seed", ev_seed, "noise draw seed");
  eval_cmd->add_option("--report", ev_report, "write JSON report here");

  // inspect
  auto* ins_cmd = app.add_subcommand("inspect", "describe a model");
  std::string in_ckpt, in_config;
  std::vector<std::string> in_set;
  ins_cmd->add_option("--checkpoint", in_ckpt, "model checkpoint");
  ins_cmd->add_option("--config", in_config, "config file");
  ins_cmd->add_option("--set", in_set, "config override key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (mix_cmd->parsed()) return cmd_mix(corpus, mix_out, mopts, !no_audio);
    if (train_cmd->parsed())
      return cmd_train(tr_manifest, tr_valid, tr_out, tr_config, tr_set,
                       tr_resume);
    if (sep_cmd->parsed()) return cmd_separate(sp_ckpt, sp_input, sp_out);
    if (eval_cmd->parsed())
      return cmd_evaluate(ev_ckpt, ev_manifest, ev_noise_dir, ev_snrs, ev_seed,
                          ev_report);
    if (ins_cmd->parsed()) return cmd_inspect(in_ckpt, in_config, in_set);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
