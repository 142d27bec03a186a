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
// Experiment runner: dataset generation, training, evaluation, operation
// counting, and feature-map dumps over plain-text configs.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "stsnet/data.hpp"
#include "stsnet/model.hpp"
#include "stsnet/train.hpp"

namespace fs = std::filesystem;
using namespace stsnet;

namespace {

struct ExperimentConfig {
  std::string arch = "convsnn";
  std::string channels = "48,48";
  double width_scale = 1.0;
  std::string seq = "0";  // 0..5 or nmnist
  int window = 10;

  double alpha = 0.5;
  double threshold = 0.5;
  bool resting = false;
  double beta = 0.01;
  std::string surrogate = "gaussian";
  double surrogate_width = 1.0 / 6.0;
  double dropout = 0.25;

  double lr = 5e-4;
  int epochs = 50;
  int pretrain_epochs = 5;
  int batch_size = 20;
  std::string optimizer = "adam";
  std::string loss = "mse";
  uint64_t seed = 1;
  int threads = 0;  // 0 = hardware
  double stop_at_test_acc = 0.0;

  int64_t train_count = 0;  // 0 = full split
  int64_t test_count = 0;
  int events_per_frame = 1000;

  std::string data_dir = "data";
  std::string out_dir = "out";
  bool synth_digits = false;

  // bookkeeping: which arch/seq-dependent defaults were overridden
  bool alpha_set = false, batch_set = false, optimizer_set = false,
       loss_set = false, lr_set = false;

  int seq_id() const {
    if (seq == "nmnist") return 6;
    if (seq.size() == 1 && seq[0] >= '0' && seq[0] <= '5') return seq[0] - '0';
    throw parameter_error("seq must be 0..5 or nmnist, got '" + seq + "'");
  }

  void resolve_defaults() {
    if (!alpha_set && seq_id() == 6) alpha = 0.8;  // event data remembers more
    if (arch == "sts-resnet") {
      if (!batch_set) batch_size = 10;
      if (!optimizer_set) optimizer = "sgd";
      if (!loss_set) loss = "bce";
    }
    if (threads <= 0) threads = default_threads();
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> errs;
    if (arch != "convsnn" && arch != "sts-resnet")
      errs.push_back("arch must be convsnn or sts-resnet");
    try {
      (void)seq_id();
    } catch (const std::exception& e) {
      errs.push_back(e.what());
    }
    if (window < 1) errs.push_back("window must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) errs.push_back("alpha must be in [0,1]");
    if (!(threshold > 0.0)) errs.push_back("threshold must be > 0");
    if (beta < 0.0) errs.push_back("beta must be >= 0");
    if (surrogate != "gaussian" && surrogate != "rect")
      errs.push_back("surrogate must be gaussian or rect");
    if (!(surrogate_width > 0.0)) errs.push_back("surrogate-width must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) errs.push_back("dropout must be in [0,1)");
    if (!(lr > 0.0)) errs.push_back("lr must be > 0");
    if (epochs < 1) errs.push_back("epochs must be >= 1");
    if (pretrain_epochs < 0 || pretrain_epochs > epochs)
      errs.push_back("need 0 <= pretrain-epochs <= epochs");
    if (batch_size < 1) errs.push_back("batch-size must be >= 1");
    if (optimizer != "adam" && optimizer != "sgd")
      errs.push_back("optimizer must be adam or sgd");
    if (loss != "mse" && loss != "bce") errs.push_back("loss must be mse or bce");
    if (events_per_frame < 1) errs.push_back("events-per-frame must be >= 1");
    return errs;
  }

  LifConfig<float> lif() const {
    LifConfig<float> cfg;
    cfg.alpha = static_cast<float>(alpha);
    cfg.threshold = static_cast<float>(threshold);
    cfg.resting = resting;
    cfg.beta = static_cast<float>(beta);
    cfg.surrogate = surrogate == "rect" ? Surrogate::rect : Surrogate::gaussian;
    cfg.surrogate_width = static_cast<float>(surrogate_width);
    return cfg;
  }

  std::pair<int, int> channel_pair() const {
    const auto comma = channels.find(',');
    if (comma == std::string::npos)
      throw parameter_error("channels must be 'c1,c2', got '" + channels + "'");
    return {std::stoi(channels.substr(0, comma)),
            std::stoi(channels.substr(comma + 1))};
  }
};

void write_resolved_config(const ExperimentConfig& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw path_error("cannot write " + path);
  os << "arch = " << c.arch << "\n"
     << "channels = \"" << c.channels << "\"\n"
     << "width-scale = " << c.width_scale << "\n"
     << "seq = " << c.seq << "\n"
     << "window = " << c.window << "\n"
     << "alpha = " << c.alpha << "\n"
     << "threshold = " << c.threshold << "\n"
     << "resting = " << (c.resting ? "true" : "false") << "\n"
     << "beta = " << c.beta << "\n"
     << "surrogate = " << c.surrogate << "\n"
     << "surrogate-width = " << c.surrogate_width << "\n"
     << "dropout = " << c.dropout << "\n"
     << "lr = " << c.lr << "\n"
     << "epochs = " << c.epochs << "\n"
     << "pretrain-epochs = " << c.pretrain_epochs << "\n"
     << "batch-size = " << c.batch_size << "\n"
     << "optimizer = " << c.optimizer << "\n"
     << "loss = " << c.loss << "\n"
     << "seed = " << c.seed << "\n"
     << "threads = " << c.threads << "\n"
     << "stop-at-test-acc = " << c.stop_at_test_acc << "\n"
     << "train-count = " << c.train_count << "\n"
     << "test-count = " << c.test_count << "\n"
     << "events-per-frame = " << c.events_per_frame << "\n"
     << "data-dir = " << c.data_dir << "\n"
     << "out-dir = " << c.out_dir << "\n";
}

struct Splits {
  std::shared_ptr<Dataset> train, test;
  std::vector<int> input_shape;
  int num_classes = 0;
};

std::shared_ptr<MnistImages> load_split_images(const ExperimentConfig& c,
                                               bool train_split) {
  const std::string img = c.data_dir + "/" +
                          (train_split ? "train-images-idx3-ubyte"
                                       : "t10k-images-idx3-ubyte");
  const std::string lbl = c.data_dir + "/" +
                          (train_split ? "train-labels-idx1-ubyte"
                                       : "t10k-labels-idx1-ubyte");
  if (!fs::exists(img) || !fs::exists(lbl)) {
    if (!c.synth_digits)
      throw path_error("missing " + img + " (place the IDX files under " +
                       c.data_dir + " or pass --synth-digits to generate a "
                       "stand-in digit corpus)");
    std::cout << "note: writing stand-in digit corpus under " << c.data_dir
              << " (real IDX files not found)\n";
    fs::create_directories(c.data_dir);
    // Fixed corpus seed: the stand-in files are a stable artifact of the
    // data dir; --seed only drives experiment randomness.
    const MnistImages corpus = synth_digit_corpus(
        train_split ? 60000 : 10000, train_split ? 0x5EEDu : 0x5EEEu, c.threads);
    write_idx_images(img, corpus.images);
    write_idx_labels(lbl, corpus.labels);
  }
  return std::make_shared<MnistImages>(load_mnist(img, lbl));
}

Splits make_datasets(const ExperimentConfig& c) {
  Splits s;
  const int seq = c.seq_id();
  if (seq == 6) {
    const std::string root = c.data_dir + "/nmnist";
    const int64_t train_per_class = c.train_count > 0 ? (c.train_count + 9) / 10 : 0;
    const int64_t test_per_class = c.test_count > 0 ? (c.test_count + 9) / 10 : 0;
    auto tr = std::make_shared<MaterializedDataset>(load_event_dataset(
        root + "/Train", c.events_per_frame, c.window, train_per_class));
    auto te = std::make_shared<MaterializedDataset>(load_event_dataset(
        root + "/Test", c.events_per_frame, c.window, test_per_class));
    s.train = tr;
    s.test = te;
  } else {
    auto train_imgs = load_split_images(c, true);
    auto test_imgs = load_split_images(c, false);
    auto tr = gen_dataset(seq, train_imgs, c.seed, c.window);
    auto te = gen_dataset(seq, test_imgs, c.seed + 0x7e57, c.window);
    if (c.train_count > 0)
      s.train = std::make_shared<MaterializedDataset>(
          materialize(*tr, c.train_count, c.threads));
    else
      s.train = tr;
    if (c.test_count > 0)
      s.test = std::make_shared<MaterializedDataset>(
          materialize(*te, c.test_count, c.threads));
    else
      s.test = te;
  }
  const SequenceSample probe = s.train->get(0);
  s.input_shape = {probe.frames.dim(1), probe.frames.dim(2), probe.frames.dim(3)};
  s.num_classes = s.train->num_classes();
  return s;
}

NetworkSpec<float> build_net(const ExperimentConfig& c,
                             const std::vector<int>& input_shape,
                             int num_classes) {
  if (c.arch == "convsnn") {
    const auto [c1, c2] = c.channel_pair();
    return build_convsnn<float>(c1, c2, input_shape, num_classes, c.lif(),
                                c.window);
  }
  return build_sts_resnet<float>(c.width_scale, input_shape, num_classes,
                                 c.lif(), c.window,
                                 static_cast<float>(c.dropout));
}

TrainSchedule<float> make_schedule(const ExperimentConfig& c) {
  TrainSchedule<float> sched;
  sched.pretrain_epochs = c.pretrain_epochs;
  sched.total_epochs = c.epochs;
  sched.lr = static_cast<float>(c.lr);
  sched.optimizer = c.optimizer == "adam" ? OptimizerKind::adam
                                          : OptimizerKind::sgd_momentum;
  sched.loss = c.loss == "mse" ? LossKind::mse : LossKind::bce;
  sched.batch_size = c.batch_size;
  sched.seed = c.seed;
  sched.lif = c.lif();
  sched.threads = c.threads;
  sched.stop_at_test_acc = c.stop_at_test_acc;
  return sched;
}

void require_valid(const ExperimentConfig& c) {
  const auto errs = c.validate();
  if (errs.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : errs) msg += "\n  - " + e;
  throw parameter_error(msg);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(ExperimentConfig& c) {
  require_valid(c);
  fs::create_directories(c.out_dir);
  const int seq = c.seq_id();
  Splits s = make_datasets(c);
  const std::string train_path =
      c.out_dir + "/seq" + std::to_string(seq) + "_train.sseq";
  const std::string test_path =
      c.out_dir + "/seq" + std::to_string(seq) + "_test.sseq";
  save_dataset_cache(train_path, *s.train, seq);
  save_dataset_cache(test_path, *s.test, seq);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    dataset_cache_checksum(*s.train, seq, c.threads)));
  std::cout << "train: " << s.train->size() << " samples, "
            << s.num_classes << " classes, checksum " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    dataset_cache_checksum(*s.test, seq, c.threads)));
  std::cout << "test: " << s.test->size() << " samples, checksum " << buf
            << "\n";
  std::cout << "wrote " << train_path << " and " << test_path << "\n";
  return 0;
}

int cmd_train(ExperimentConfig& c) {
  require_valid(c);
  fs::create_directories(c.out_dir);
  Splits s = make_datasets(c);
  NetworkSpec<float> net = build_net(c, s.input_shape, s.num_classes);
  Rng init_rng(c.seed);
  auto params = init_params(net, init_rng);
  write_resolved_config(c, c.out_dir + "/config_resolved.txt");

  std::cout << net.arch << ": " << net.weighted_layer_count()
            << " weighted layers, " << s.train->size() << " train / "
            << s.test->size() << " test samples, " << s.num_classes
            << " classes\n";
  TrainResult<float> res =
      train(net, std::move(params), *s.train, *s.test, make_schedule(c),
            [](const EpochMetrics& m) {
              std::printf("epoch %3d  %-8s train %.4f  test %.4f  loss %.6f\n",
                          m.epoch, phase_name(m.phase), m.train_acc, m.test_acc,
                          m.loss);
              std::fflush(stdout);
            });

  save_checkpoint(c.out_dir + "/best.snnw", res.best_params);
  write_metrics_csv(c.out_dir + "/metrics.csv", res.metrics.history);
  write_confusion_csv(c.out_dir + "/confusion.csv", res.metrics.confusion);
  {
    std::vector<Tensor<float>> probe_frames;
    for (int64_t i = 0; i < std::min<int64_t>(100, s.test->size()); ++i)
      probe_frames.push_back(s.test->get(i).frames);
    auto rates = measure_firing_rates(net, res.best_params, probe_frames);
    std::vector<std::string> names;
    for (int id : net.weighted_layers())
      names.push_back(net.layers[static_cast<size_t>(id)].name);
    write_rates_csv(c.out_dir + "/firing_rates.csv", names, rates);
  }
  std::printf("best test accuracy %.6f at epoch %d\n",
              res.metrics.best_test_acc, res.metrics.best_epoch);
  std::cout << "wrote " << c.out_dir << "/best.snnw, metrics.csv, "
            << "confusion.csv, firing_rates.csv, config_resolved.txt\n";
  return 0;
}

int cmd_eval(ExperimentConfig& c, const std::string& checkpoint) {
  require_valid(c);
  fs::create_directories(c.out_dir);
  Splits s = make_datasets(c);
  NetworkSpec<float> net = build_net(c, s.input_shape, s.num_classes);
  auto params = load_checkpoint<float>(checkpoint);
  check_checkpoint_shapes(net, params);
  EvalResult ev = evaluate(net, params, *s.test, Phase::spiking, c.threads);
  write_confusion_csv(c.out_dir + "/confusion.csv", ev.confusion);
  std::printf("top-1 accuracy %.6f over %lld samples\n", ev.top1,
              static_cast<long long>(s.test->size()));
  std::cout << "wrote " << c.out_dir << "/confusion.csv\n";
  return 0;
}

int cmd_count_ops(ExperimentConfig& c, const std::string& checkpoint) {
  require_valid(c);
  fs::create_directories(c.out_dir);
  std::vector<int> input_shape = c.seq_id() == 6
                                     ? std::vector<int>{2, 36, 36}
                                     : std::vector<int>{1, 28, 28};
  const int classes = sequence_num_classes(c.seq_id());
  NetworkSpec<float> net = build_net(c, input_shape, classes);
  std::vector<double> rates;
  if (!checkpoint.empty()) {
    auto params = load_checkpoint<float>(checkpoint);
    check_checkpoint_shapes(net, params);
    Splits s = make_datasets(c);
    std::vector<Tensor<float>> probe;
    for (int64_t i = 0; i < std::min<int64_t>(100, s.test->size()); ++i)
      probe.push_back(s.test->get(i).frames);
    rates = measure_firing_rates(net, params, probe);
  }
  OpsReport rep = count_ops(net, rates);
  std::ofstream csv(c.out_dir + "/ops.csv");
  csv << "layer,macs,rate,accs\n";
  std::cout << "layer,macs,rate,accs\n";
  for (const auto& l : rep.layers) {
    csv << l.name << ',' << l.macs << ',' << l.rate << ',' << l.accs << '\n';
    std::cout << l.name << ',' << l.macs << ',' << l.rate << ',' << l.accs
              << '\n';
  }
  std::printf("dense MACs per window: %.0f\n", rep.dense_macs);
  std::printf("spike-driven ACC estimate: %.0f\n", rep.spike_accs);
  return 0;
}

int cmd_dump_features(ExperimentConfig& c, const std::string& checkpoint,
                      int layer, int64_t sample, const std::string& format) {
  require_valid(c);
  fs::create_directories(c.out_dir);
  Splits s = make_datasets(c);
  NetworkSpec<float> net = build_net(c, s.input_shape, s.num_classes);
  std::vector<Tensor<float>> params;
  if (!checkpoint.empty()) {
    params = load_checkpoint<float>(checkpoint);
    check_checkpoint_shapes(net, params);
  } else {
    Rng rng(c.seed);
    params = init_params(net, rng);
  }
  if (sample < 0 || sample >= s.test->size())
    throw parameter_error("sample index out of range");
  const SequenceSample smp = s.test->get(sample);
  auto files = dump_feature_maps(net, params, smp.frames, layer, c.out_dir,
                                 format == "csv" ? DumpFormat::csv
                                                 : DumpFormat::pgm);
  std::cout << "wrote " << files.size() << " files under " << c.out_dir << "\n";
  for (const auto& f : files) std::cout << "  " << f << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ExperimentConfig cfg;
  CLI::App app{"spiking network experiment runner"};
  app.fallthrough();
  app.set_config("--config", "", "flat key = value config file");
  app.require_subcommand(1);

  const char* env_data = std::getenv("SNN_DATA_DIR");
  if (env_data && *env_data) cfg.data_dir = env_data;

  auto* arch = app.add_option("--arch", cfg.arch, "convsnn | sts-resnet");
  app.add_option("--channels", cfg.channels, "convsnn conv widths, e.g. 16,16");
  app.add_option("--width-scale", cfg.width_scale, "sts-resnet channel scale");
  app.add_option("--seq", cfg.seq, "0 (static) | 1..5 | nmnist");
  app.add_option("--window", cfg.window, "time window length");
  auto* alpha = app.add_option("--alpha", cfg.alpha, "membrane decay factor");
  app.add_option("--threshold", cfg.threshold, "firing threshold");
  app.add_flag("--resting", cfg.resting, "enable the reset gate");
  app.add_option("--beta", cfg.beta, "analog-phase negative slope");
  app.add_option("--surrogate", cfg.surrogate, "gaussian | rect");
  app.add_option("--surrogate-width", cfg.surrogate_width,
                 "gaussian variance / rect width");
  app.add_option("--dropout", cfg.dropout, "sub-block dropout rate");
  auto* lr = app.add_option("--lr", cfg.lr, "learning rate");
  app.add_option("--epochs", cfg.epochs, "total epochs");
  app.add_option("--pretrain-epochs", cfg.pretrain_epochs,
                 "analog epochs before the spiking switch");
  auto* batch = app.add_option("--batch-size", cfg.batch_size, "batch size");
  auto* opt = app.add_option("--optimizer", cfg.optimizer, "adam | sgd");
  auto* loss = app.add_option("--loss", cfg.loss, "mse | bce");
  app.add_option("--seed", cfg.seed, "experiment seed");
  app.add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
  app.add_option("--stop-at-test-acc", cfg.stop_at_test_acc,
                 "stop once best spiking test accuracy reaches this");
  app.add_option("--train-count", cfg.train_count, "subset size (0 = all)");
  app.add_option("--test-count", cfg.test_count, "subset size (0 = all)");
  app.add_option("--events-per-frame", cfg.events_per_frame,
                 "events stacked into one frame");
  app.add_option("--data-dir", cfg.data_dir,
                 "input data directory (env SNN_DATA_DIR)");
  app.add_option("--out-dir", cfg.out_dir, "output directory");
  app.add_flag("--synth-digits", cfg.synth_digits,
               "generate a stand-in digit corpus when IDX files are missing");

  std::string checkpoint;
  std::string dump_format = "pgm";
  int dump_layer = 2;
  int64_t dump_sample = 0;

  CLI::App* gen = app.add_subcommand("gen-data", "generate and cache a dataset");
  CLI::App* tr = app.add_subcommand("train", "run the hybrid training loop");
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", checkpoint, "weights file")->required();
  CLI::App* ops = app.add_subcommand("count-ops", "dense MAC / spike ACC report");
  ops->add_option("--checkpoint", checkpoint,
                  "measure firing rates with these weights");
  CLI::App* dump = app.add_subcommand("dump-features", "write per-step spike maps");
  dump->add_option("--checkpoint", checkpoint, "weights file");
  dump->add_option("--layer", dump_layer, "synapse layer index");
  dump->add_option("--sample", dump_sample, "test-sample index");
  dump->add_option("--format", dump_format, "pgm | csv");

  CLI11_PARSE(app, argc, argv);
  cfg.alpha_set = alpha->count() > 0;
  cfg.batch_set = batch->count() > 0;
  cfg.optimizer_set = opt->count() > 0;
  cfg.loss_set = loss->count() > 0;
  cfg.lr_set = lr->count() > 0;
  (void)arch;
  cfg.resolve_defaults();

  try {
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (tr->parsed()) return cmd_train(cfg);
    if (ev->parsed()) return cmd_eval(cfg, checkpoint);
    if (ops->parsed()) return cmd_count_ops(cfg, checkpoint);
    if (dump->parsed())
      return cmd_dump_features(cfg, checkpoint, dump_layer, dump_sample,
                               dump_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
