// tfsep/tests/test_cli.cpp

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

// End-to-end checks of the installed command-line tool. The binary path
// comes from the TFSEP_CLI environment variable (set by CTest).

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "support.hpp"
#include "tfsep/wav_io.hpp"

namespace fs = std::filesystem;
using namespace tfsep;
using namespace tfsep::testing;

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

std::string cli_path() {
  const char* p = std::getenv("TFSEP_CLI");
  REQUIRE_MESSAGE(p != nullptr, "TFSEP_CLI must point at the tfsep binary");
  return p;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  fs::path cap = fs::temp_directory_path() /
                 ("tfsep_cli_out_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  std::string cmd = cli_path() + " " + args + " > " + cap.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(cap);
  std::ostringstream os;
  os << in.rdbuf();
  r.output = os.str();
  fs::remove(cap);
  return r;
}

}  // namespace

TEST_CASE("help exits clean, bad usage exits 2") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("mix --help").code == 0);

  CHECK(run_cli("").code == 2);               // subcommand required
  CHECK(run_cli("frobnicate").code == 2);     // unknown subcommand
  CHECK(run_cli("mix --count 3").code == 2);  // missing required flags
  CHECK(run_cli("inspect --bogus-flag").code == 2);

  RunResult r = run_cli("inspect --set not.a.key=1");
  CHECK(r.code == 2);
  CHECK(r.output.find("not.a.key") != std::string::npos);
}

TEST_CASE("missing inputs are runtime failures, not usage errors") {
  CHECK(run_cli("separate --checkpoint /nonexistent.ckpt "
                "--input /nonexistent.wav --out-dir /tmp/tfsepnull")
            .code == 1);
  CHECK(run_cli("train --manifest /nonexistent.jsonl --out /tmp/tfsepnull")
            .code == 1);
  CHECK(run_cli("mix --corpus /nonexistent-dir --out /tmp/x.jsonl --count 1")
            .code == 1);
}

TEST_CASE("inspect reports the default parameter budget") {
  RunResult r = run_cli("inspect");
  CHECK(r.code == 0);
  CHECK(r.output.find("total parameters: 9995884") != std::string::npos);
  CHECK(r.output.find("encoder.kernel") != std::string::npos);
  CHECK(r.output.find("cluster.centers") != std::string::npos);
}

TEST_CASE("mix / train / separate / evaluate round trip") {
  TempDir tmp("cli");
  write_toy_corpus(tmp.path() / "corpus", 4, 2, 0.5);
  std::filesystem::create_directories(tmp.path() / "noise");
  io::write_wav(tmp.file("noise/hiss.wav"), make_white_noise(9, 1.2));

  // A config file sizes the model down to test scale; overrides layer on top.
  {
    std::ofstream cfg(tmp.file("tiny.cfg"));
    cfg << "# test-size model\n"
        << "encoder.conv_channels = 12\n"
        << "separator.bottleneck_channels = 10\n"
        << "separator.hidden_channels = 16\n"
        << "separator.num_blocks = 2\n"
        << "separator.num_repeats = 1\n"
        << "separator.embed_dim = 4\n"
        << "train.segment_seconds = 0.25\n"
        << "train.stats_records = 2\n"
        << "train.log_every = 1\n";
  }

  RunResult r = run_cli("mix --corpus " + tmp.file("corpus") + " --out " +
                        tmp.file("data/train.jsonl") +
                        " --count 3 --split train --seed 5");
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp.file("data/train.jsonl")));
  CHECK(fs::exists(tmp.file("data/train_00000_mix.wav")));
  CHECK(fs::exists(tmp.file("data/train_00002_s2.wav")));

  r = run_cli("mix --corpus " + tmp.file("corpus") + " --out " +
              tmp.file("data/test.jsonl") +
              " --count 2 --split test --seed 5 --no-audio");
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp.file("data/test.jsonl")));
  CHECK(!fs::exists(tmp.file("data/test_00000_mix.wav")));

  r = run_cli("train --manifest " + tmp.file("data/train.jsonl") + " --out " +
              tmp.file("run") + " --config " + tmp.file("tiny.cfg") +
              " --set train.max_steps=2 --set train.epochs=1");
  CHECK(r.code == 0);
  CHECK(r.output.find("trained 2 steps") != std::string::npos);
  REQUIRE(fs::exists(tmp.file("run/last.ckpt")));
  CHECK(fs::exists(tmp.file("run/config.resolved")));
  CHECK(fs::exists(tmp.file("run/train_log.jsonl")));

  r = run_cli("inspect --checkpoint " + tmp.file("run/last.ckpt"));
  CHECK(r.code == 0);
  CHECK(r.output.find("encoder.conv_channels = 12") != std::string::npos);

  r = run_cli("separate --checkpoint " + tmp.file("run/last.ckpt") +
              " --input " + tmp.file("data/train_00000_mix.wav") +
              " --out-dir " + tmp.file("sep"));
  CHECK(r.code == 0);
  REQUIRE(fs::exists(tmp.file("sep/train_00000_mix_est1.wav")));
  REQUIRE(fs::exists(tmp.file("sep/train_00000_mix_est2.wav")));
  Waveform mixw = io::read_wav(tmp.file("data/train_00000_mix.wav"));
  Waveform est1 = io::read_wav(tmp.file("sep/train_00000_mix_est1.wav"));
  CHECK(est1.size() == mixw.size());
  CHECK(est1.sample_rate == mixw.sample_rate);

  r = run_cli("evaluate --checkpoint " + tmp.file("run/last.ckpt") +
              " --manifest " + tmp.file("data/test.jsonl") + " --report " +
              tmp.file("report.json"));
  CHECK(r.code == 0);
  CHECK(r.output.find("condition") != std::string::npos);
  CHECK(r.output.find("clean") != std::string::npos);
  REQUIRE(fs::exists(tmp.file("report.json")));
  {
    std::ifstream in(tmp.file("report.json"));
    nlohmann::json rep = nlohmann::json::parse(in);
    CHECK(rep.at("conditions").size() == 1);
    CHECK(rep["conditions"][0]["evaluated"] == 2);
  }

  // Noise sweep: a missing --noise-dir is a usage error; with one, the
  // condition shows up in the table.
  r = run_cli("evaluate --checkpoint " + tmp.file("run/last.ckpt") +
              " --manifest " + tmp.file("data/test.jsonl") +
              " --noise-snr 10");
  CHECK(r.code == 2);

  r = run_cli("evaluate --checkpoint " + tmp.file("run/last.ckpt") +
              " --manifest " + tmp.file("data/test.jsonl") + " --noise-dir " +
              tmp.file("noise") + " --noise-snr 10 --seed 3");
  CHECK(r.code == 0);
  CHECK(r.output.find("noise 10 dB") != std::string::npos);

  // Resume training for two more steps from the saved state.
  r = run_cli("train --manifest " + tmp.file("data/train.jsonl") + " --out " +
              tmp.file("run2") + " --config " + tmp.file("tiny.cfg") +
              " --set train.max_steps=4 --set train.epochs=2 --resume " +
              tmp.file("run/last.ckpt"));
  CHECK(r.code == 0);
  CHECK(r.output.find("trained 4 steps") != std::string::npos);
}
