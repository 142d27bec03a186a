// Copyright 2026 The stsnet Authors
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
//
// End-to-end runs of the `snn` binary. A small stand-in corpus shared by
// every case keeps these fast.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stsnet/data.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
};

const std::string& work_root() {
  static const std::string root = [] {
    std::string r = (fs::temp_directory_path() / "stsnet_cli_tests").string();
    fs::remove_all(r);
    fs::create_directories(r);
    return r;
  }();
  return root;
}

// One small corpus for every test, written through the IDX files once.
const std::string& data_dir() {
  static const std::string dir = [] {
    const std::string d = work_root() + "/data";
    fs::create_directories(d);
    stsnet::MnistImages train = stsnet::synth_digit_corpus(600, 0xC0FFEE);
    stsnet::MnistImages test = stsnet::synth_digit_corpus(200, 0xC0FFEF);
    stsnet::write_idx_images(d + "/train-images-idx3-ubyte", train.images);
    stsnet::write_idx_labels(d + "/train-labels-idx1-ubyte", train.labels);
    stsnet::write_idx_images(d + "/t10k-images-idx3-ubyte", test.images);
    stsnet::write_idx_labels(d + "/t10k-labels-idx1-ubyte", test.labels);
    return d;
  }();
  return dir;
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string capture =
      work_root() + "/cli_out_" + std::to_string(counter++) + ".txt";
  const std::string cmd = std::string(SNN_CLI_PATH) + " " + args + " > " +
                          capture + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = rc == -1 ? -1 : WEXITSTATUS(rc);
  std::ifstream is(capture);
  std::stringstream ss;
  ss << is.rdbuf();
  res.out = ss.str();
  return res;
}

std::string base_flags(const std::string& out_dir) {
  return "--data-dir " + data_dir() + " --out-dir " + work_root() + "/" +
         out_dir + " --threads 2";
}

// Picks `key` out of a "k: v"-ish line, e.g. accuracy from a summary line.
double parse_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  return std::atof(text.c_str() + pos + key.size());
}

}  // namespace

TEST_CASE("gen-data is deterministic and reports counts") {
  const std::string flags =
      base_flags("gen1") + " --seq 2 --seed 7 --train-count 30 --test-count 10";
  CliResult a = run_cli(flags + " gen-data");
  REQUIRE(a.exit_code == 0);
  CHECK(a.out.find("train: 30 samples, 20 classes") != std::string::npos);
  CliResult b = run_cli(flags + " gen-data");
  REQUIRE(b.exit_code == 0);
  // identical seeds -> identical checksums
  CHECK(a.out.substr(a.out.find("checksum")) ==
        b.out.substr(b.out.find("checksum")));

  // paired sequences produce two samples per image
  CliResult c = run_cli(base_flags("gen2") + " --seq 1 gen-data");
  REQUIRE(c.exit_code == 0);
  CHECK(c.out.find("train: 1200 samples") != std::string::npos);

  // occlusion sequence reports 10 classes in the cache header
  CliResult d = run_cli(base_flags("gen3") +
                        " --seq 4 --train-count 20 --test-count 10 gen-data");
  REQUIRE(d.exit_code == 0);
  CHECK(d.out.find("20 samples, 10 classes") != std::string::npos);
  stsnet::MaterializedDataset cached = stsnet::load_dataset_cache(
      work_root() + "/gen3/seq4_train.sseq");
  CHECK(cached.num_classes() == 10);
}

TEST_CASE("train writes metrics, checkpoint, snapshot; rerun reproduces") {
  const std::string flags = base_flags("train1") +
                            " --seq 3 --channels 2,2 --train-count 40"
                            " --test-count 20 --epochs 3 --pretrain-epochs 1"
                            " --window 4 --lr 0.002 --seed 11";
  CliResult a = run_cli(flags + " train");
  REQUIRE(a.exit_code == 0);
  const std::string out = work_root() + "/train1";
  CHECK(fs::exists(out + "/best.snnw"));
  CHECK(fs::exists(out + "/metrics.csv"));
  CHECK(fs::exists(out + "/confusion.csv"));
  CHECK(fs::exists(out + "/firing_rates.csv"));
  CHECK(fs::exists(out + "/config_resolved.txt"));

  {
    std::ifstream m(out + "/metrics.csv");
    std::string line;
    std::getline(m, line);
    CHECK(line == "epoch,phase,train_acc,test_acc,loss");
    std::getline(m, line);
    CHECK(line.find("1,analog,") == 0);
    std::getline(m, line);
    CHECK(line.find("2,spiking,") == 0);
  }

  const double best_a = parse_after(a.out, "best test accuracy ");
  // rerun purely from the resolved snapshot
  CliResult b = run_cli("--config " + out + "/config_resolved.txt --out-dir " +
                        work_root() + "/train1_rerun train");
  REQUIRE(b.exit_code == 0);
  const double best_b = parse_after(b.out, "best test accuracy ");
  CHECK(best_a == doctest::Approx(best_b).epsilon(1e-9));
}

TEST_CASE("pretrain-epochs 0 runs a pure spiking schedule") {
  CliResult a = run_cli(base_flags("train2") +
                        " --seq 0 --channels 2,2 --train-count 30"
                        " --test-count 10 --epochs 2 --pretrain-epochs 0"
                        " --window 3 train");
  REQUIRE(a.exit_code == 0);
  std::ifstream m(work_root() + "/train2/metrics.csv");
  std::string line;
  std::getline(m, line);
  while (std::getline(m, line))
    CHECK(line.find(",analog,") == std::string::npos);
}

TEST_CASE("eval round-trips the spiking-phase best accuracy") {
  const std::string flags = base_flags("train3") +
                            " --seq 0 --channels 3,3 --train-count 60"
                            " --test-count 30 --epochs 3 --pretrain-epochs 0"
                            " --window 4 --lr 0.002 --seed 3";
  CliResult a = run_cli(flags + " train");
  REQUIRE(a.exit_code == 0);
  const double best = parse_after(a.out, "best test accuracy ");
  CliResult e = run_cli(flags + " eval --checkpoint " + work_root() +
                        "/train3/best.snnw");
  REQUIRE(e.exit_code == 0);
  const double top1 = parse_after(e.out, "top-1 accuracy ");
  CHECK(top1 == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("eval rejects a checkpoint from a different architecture") {
  CliResult e = run_cli(base_flags("train3") +
                        " --seq 0 --channels 5,3 --train-count 20"
                        " --test-count 10 --window 4 eval --checkpoint " +
                        work_root() + "/train3/best.snnw");
  CHECK(e.exit_code != 0);
  CHECK(e.out.find("expects") != std::string::npos);
  CHECK(e.out.find("3x1x3x3") != std::string::npos);   // found
  CHECK(e.out.find("5x1x3x3") != std::string::npos);   // expected
}

TEST_CASE("untrained random weights sit at chance level on 10 classes") {
  // a fresh random checkpoint, evaluated on the balanced stand-in test set
  const std::string flags = base_flags("train4") +
                            " --seq 0 --channels 4,4 --train-count 10"
                            " --test-count 200 --epochs 1 --pretrain-epochs 0"
                            " --window 4 --lr 1e-12 --seed 99";
  CliResult a = run_cli(flags + " train");
  REQUIRE(a.exit_code == 0);
  CliResult e = run_cli(flags + " eval --checkpoint " + work_root() +
                        "/train4/best.snnw");
  REQUIRE(e.exit_code == 0);
  const double top1 = parse_after(e.out, "top-1 accuracy ");
  CHECK(top1 >= 0.05);
  CHECK(top1 <= 0.15);
}

TEST_CASE("count-ops emits the layer CSV and the dense-MAC ordering") {
  CliResult small = run_cli(base_flags("ops") + " --channels 48,48 --seq 3 count-ops");
  REQUIRE(small.exit_code == 0);
  CHECK(small.out.find("layer,macs,rate,accs") != std::string::npos);
  CHECK(small.out.find("conv1,") != std::string::npos);
  const double dense_small = parse_after(small.out, "dense MACs per window: ");
  CHECK(parse_after(small.out, "spike-driven ACC estimate: ") == 0.0);

  CliResult big = run_cli(base_flags("ops") + " --channels 256,256 --seq 3 count-ops");
  REQUIRE(big.exit_code == 0);
  const double dense_big = parse_after(big.out, "dense MACs per window: ");
  CHECK(dense_small * 10 < dense_big);
}

TEST_CASE("dump-features writes one file per time step") {
  CliResult d = run_cli(base_flags("dump") +
                        " --seq 0 --channels 2,2 --train-count 10"
                        " --test-count 5 --window 6 dump-features --layer 2"
                        " --sample 1");
  REQUIRE(d.exit_code == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(work_root() + "/dump"))
    if (e.path().extension() == ".pgm") ++files;
  CHECK(files == 6);

  CliResult bad = run_cli(base_flags("dump") +
                          " --seq 0 --channels 2,2 --train-count 10"
                          " --test-count 5 --window 6 dump-features --layer 1");
  CHECK(bad.exit_code != 0);
}

TEST_CASE("error paths exit nonzero") {
  CliResult missing = run_cli("--data-dir " + work_root() +
                              "/definitely_absent --out-dir " + work_root() +
                              "/x --seq 1 gen-data");
  CHECK(missing.exit_code != 0);
  CHECK(missing.out.find("missing") != std::string::npos);

  CliResult badflag = run_cli(base_flags("x") + " --optimizer sgdd --seq 0"
                              " --train-count 10 --test-count 5 train");
  CHECK(badflag.exit_code != 0);
  CHECK(badflag.out.find("optimizer") != std::string::npos);

  // config validation failures are listed all at once
  CliResult multi = run_cli(base_flags("x") +
                            " --optimizer sgdd --loss msee --lr -1 --seq 0"
                            " --train-count 10 --test-count 5 train");
  CHECK(multi.exit_code != 0);
  CHECK(multi.out.find("optimizer") != std::string::npos);
  CHECK(multi.out.find("loss") != std::string::npos);
  CHECK(multi.out.find("lr") != std::string::npos);
}

TEST_CASE("SNN_DATA_DIR provides the data-dir default") {
  ::setenv("SNN_DATA_DIR", data_dir().c_str(), 1);
  CliResult r = run_cli("--out-dir " + work_root() +
                        "/envrun --seq 4 --train-count 10 --test-count 5"
                        " --threads 2 gen-data");
  ::unsetenv("SNN_DATA_DIR");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("10 samples, 10 classes") != std::string::npos);
}
