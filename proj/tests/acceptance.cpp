// Copyright 2026 The TargetDrop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   targetdrop_acceptance [--cli PATH] [--workdir DIR] [--only N]

#include <sys/wait.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "targetdrop/baselines.hpp"
#include "targetdrop/binary_io.hpp"
#include "targetdrop/data.hpp"
#include "targetdrop/gradcheck.hpp"
#include "targetdrop/nn.hpp"
#include "targetdrop/target_drop.hpp"

namespace fs = std::filesystem;
using namespace targetdrop;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure message; later checks still run.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      first_failure_ = what;
    }
  }
  bool pass() const { return pass_; }
  Outcome outcome(std::string detail) const {
    return {pass_, pass_ ? std::move(detail) : first_failure_ + " (" + detail + ")"};
  }

 private:
  bool pass_ = true;
  std::string first_failure_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

DropConfig train_cfg(double gamma, std::size_t k) {
  DropConfig c;
  c.gamma = gamma;
  c.block_size = k;
  c.phase = Phase::kTrain;
  return c;
}

// Scores with many exact ties: values drawn from a small set.
std::vector<double> tied_scores(Rng& rng, std::size_t c) {
  std::vector<double> m(c);
  const std::size_t levels = 1 + rng.below(8);
  for (auto& x : m) x = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
  return m;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Checker ck;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  for (int n = 0; n < 1000; ++n) {
    const std::size_t c = 1 + rng.below(512);
    const double gamma = rng.uniform(0.0, 1.0);
    const auto m = n % 2 ? tied_scores(rng, c) : [&] {
      std::vector<double> v(c);
      for (auto& x : v) x = rng.uniform(0.0, 1.0);
      return v;
    }();
    const auto expected = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(c)));
    const auto sel = select_target_channels(m, gamma);
    std::size_t tagged = 0;
    for (auto t : sel.tags) tagged += t;
    ck.expect(sel.count == expected && tagged == expected,
              "instance " + std::to_string(n) + ": tagged " + std::to_string(tagged) + ", expected " +
                  std::to_string(expected));
    ck.expect(sel.tags == oracle::tags(m, expected), "instance " + std::to_string(n) + ": tie order differs");
    ck.expect(select_target_channels(m, gamma).tags == sel.tags, "selection not deterministic");
  }
  const double secs = seconds_since(t0);
  ck.expect(secs < 5.0, "runtime " + std::to_string(secs) + " s");
  return ck.outcome(fmt("1000 instances, C <= 512, %.2f s", secs));
}

Outcome criterion2() {
  Checker ck;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2002);
  std::size_t cases = 0;
  for (std::size_t h = 1; h <= 6; ++h) {
    for (std::size_t w = 1; w <= 6; ++w) {
      for (std::size_t k : {1, 3, 5}) {
        for (std::size_t a = 0; a < h; ++a) {
          for (std::size_t b = 0; b < w; ++b) {
            // Channel 0 peaks at (a, b) over noise; channel 1 is a constant
            // plane (argmax (0, 0)); channel 2 is noise.
            Tensor u = oracle::random_tensor(rng, {h, w, 3}, 0.0, 1.0);
            u.at(a, b, 0) = 2.0;
            for (std::size_t i = 0; i < h; ++i)
              for (std::size_t j = 0; j < w; ++j) u.at(i, j, 1) = 0.5;
            for (double gamma : {0.0, 0.34, 0.67, 1.0}) {
              const std::vector<double> scores{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
              const auto mask = build_mask(u, scores, train_cfg(gamma, k));
              const auto tags = oracle::tags(scores, target_count(gamma, 3));
              const auto s = oracle::mask(u, tags, k);
              bool same = mask.tags == tags;
              for (std::size_t i = 0; i < s.size(); ++i) same = same && (mask.keep[i] != 0) == (s[i] == 1.0);
              same = same && apply_and_normalize(u, mask) == oracle::apply(u, s);
              ck.expect(same, "mismatch at H=" + std::to_string(h) + " W=" + std::to_string(w) +
                                  " k=" + std::to_string(k) + " argmax=(" + std::to_string(a) + "," +
                                  std::to_string(b) + ")");
              ++cases;
            }
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  ck.expect(secs < 30.0, "runtime " + std::to_string(secs) + " s");
  return ck.outcome(std::to_string(cases) + " exhaustive cases, " + fmt("%.2f s", secs));
}

Outcome criterion3() {
  Checker ck;
  Rng rng(3003);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12), c = 1 + rng.below(16);
    Tensor u({h, w, c});
    for (std::size_t z = 0; z < c; ++z) {
      const double v = rng.uniform(-50.0, 50.0);
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) u.at(i, j, z) = v;
    }
    std::vector<double> scores(c);
    for (auto& x : scores) x = rng.uniform(0, 1);
    const std::size_t k = 1 + 2 * rng.below(3);
    const auto mask = build_mask(u, scores, train_cfg(rng.uniform(0, 1), k));
    const Tensor out = apply_and_normalize(u, mask);
    for (std::size_t z = 0; z < c; ++z) {
      if (mask.kept_counts[z] == 0) continue;
      double sum_in = 0.0, sum_out = 0.0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          sum_in += u.at(i, j, z);
          sum_out += out.at(i, j, z);
        }
      const double err = std::abs(sum_out - sum_in) / static_cast<double>(h * w);
      worst = std::max(worst, err);
    }
  }
  ck.expect(worst <= 1e-12, fmt("mean drift %.3g", worst));

  const auto gate = init_attention(32, 16, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor u = oracle::random_tensor(rng, {7, 9, 32});
    ck.expect(targetdrop_forward(u, gate, train_cfg(0.0, 5)).output == u, "gamma = 0 changed the input");
  }

  reset_fully_dropped_channel_events();
  const Tensor u = oracle::random_tensor(rng, {4, 4, 6}, 1.0, 2.0);
  const auto all = build_mask(u, std::vector<double>(6, 0.5), train_cfg(1.0, 9));
  const Tensor zeroed = apply_and_normalize(u, all);
  bool zeros = true;
  for (double v : zeroed.data()) zeros = zeros && v == 0.0 && !std::isnan(v);
  ck.expect(zeros, "fully dropped channel is not all zeros");
  ck.expect(fully_dropped_channel_events() == 6, "fully dropped channels not counted");
  return ck.outcome(fmt("worst mean drift %.2g; gamma=0 identity; empty channels zero, %g events", worst,
                        static_cast<double>(fully_dropped_channel_events())));
}

Outcome criterion4() {
  Checker ck;
  Rng rng(4004);
  DropConfig cfg;
  cfg.phase = Phase::kInference;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 16 * (1 + rng.below(4));
    const Tensor u = oracle::random_tensor(rng, {1 + rng.below(4), 1 + rng.below(10), 1 + rng.below(10), c},
                                           -5.0, 5.0);
    cfg.gamma = rng.uniform(0, 1);
    const auto res = targetdrop_forward(u, init_attention(c, 16, rng.next_u64()), cfg);
    ck.expect(res.output == u && res.masks.empty(), "inference output differs at trial " + std::to_string(trial));
  }
  return ck.outcome("100 random tensors bit-identical");
}

Outcome criterion5() {
  Checker ck;
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckOptions opts;
  opts.eps = 1e-3;
  const auto results = run_gradcheck_suite(opts);
  const double secs = seconds_since(t0);
  std::ostringstream detail;
  double op_worst = 0.0, net = 0.0;
  for (const auto& r : results) {
    const double limit = r.name == "tinycnn_network" ? 1e-3 : 1e-4;
    ck.expect(r.trials >= 50 && r.max_rel_error <= limit,
              r.name + fmt(": rel err %.3g over %g trials", r.max_rel_error, static_cast<double>(r.trials)));
    if (r.name == "tinycnn_network") net = r.max_rel_error;
    else op_worst = std::max(op_worst, r.max_rel_error);
  }
  ck.expect(results.size() >= 10, "suite is missing checks");
  ck.expect(secs < 120.0, "runtime " + std::to_string(secs) + " s");
  return ck.outcome(std::to_string(results.size()) + " checks x 50 trials" +
                    fmt(", worst op %.2g, network %.2g, %.1f s", op_worst, net, secs));
}

Outcome criterion6() {
  Checker ck;
  const std::vector<std::size_t> channels{64, 128};
  const auto o = param_overhead(channels, 16, 11170000);
  ck.expect(o.added == 2560, "added " + std::to_string(o.added));
  ck.expect(o.fraction >= 0.00018 && o.fraction <= 0.00028, fmt("fraction %.6g", o.fraction));
  return ck.outcome(fmt("2560 added, %.4f%% of 11.17M", 100.0 * o.fraction));
}

Outcome criterion7(const std::string& cli, const fs::path& work) {
  Checker ck;
  const DropConfig d;
  const DropLayerConfig layer;
  ck.expect(d.gamma == 0.15 && d.block_size == 5 && layer.reduction_ratio == 16, "library defaults differ");
  bool accepted = true;
  try {
    d.validate();
    layer.validate(ModelConfig{});
    init_attention(64, 16, 0);
  } catch (const std::exception&) {
    accepted = false;
  }
  ck.expect(accepted, "defaults rejected by validation");
  for (std::size_t k : {0, 2, 4, 6}) {
    DropConfig even;
    even.block_size = k;
    bool rejected = false;
    try {
      even.validate();
    } catch (const ConfigError&) {
      rejected = true;
    }
    ck.expect(rejected, "k=" + std::to_string(k) + " accepted");
  }
  std::string via_cli = "library only";
  if (!cli.empty()) {
    const auto dir = work / "c7";
    const std::string base = "\"" + cli + "\" train --out \"" + dir.string() + "\" ";
    const int even = std::system((base + "--set k=4 > /dev/null 2>&1").c_str());
    ck.expect(WIFEXITED(even) && WEXITSTATUS(even) == 2, "CLI accepted k=4");
    ck.expect(!fs::exists(dir / "train_log.csv"), "CLI trained with k=4");
    const int ok = std::system(("\"" + cli + "\" mask-stats --out \"" + (work / "c7_defaults").string() +
                                "\" > /dev/null 2>&1").c_str());
    ck.expect(WIFEXITED(ok) && WEXITSTATUS(ok) == 0, "CLI rejected the defaults");
    const std::string manifest = binary::read_file(work / "c7_defaults" / "manifest.txt");
    ck.expect(manifest.find("config.gamma=0.15\n") != std::string::npos &&
                  manifest.find("config.k=5\n") != std::string::npos &&
                  manifest.find("config.r=16\n") != std::string::npos,
              "CLI manifest lacks the defaults");
    via_cli = "CLI exit 2 on k=4, defaults run";
  }
  return ck.outcome("gamma=0.15 k=5 r=16 accepted; even k rejected; " + via_cli);
}

Outcome criterion8() {
  Checker ck;
  // A two-image dataset keeps 100 real training epochs cheap; the logged
  // learning rates come from the training loop itself.
  ToyDatasetConfig tc;
  tc.classes = 2;
  tc.n_per_class = 1;
  tc.image_size = 8;
  const auto data = make_toy_dataset(tc);
  ModelConfig mc;
  mc.image_size = 8;
  mc.classes = 2;
  mc.widths = {4, 4, 4};
  TinyCNN model(mc, DropLayerConfig{}, 1);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 2;
  cfg.initial_lr = 0.1;
  cfg.augment = false;
  const auto logs = train(model, data, data, cfg);
  ck.expect(logs.size() == 100, "expected 100 epochs");
  std::vector<std::size_t> transitions;
  for (std::size_t e = 0; e < logs.size(); ++e) {
    const double expected = e < 40 ? 0.1 : e < 60 ? 0.02 : e < 80 ? 0.004 : 0.0008;
    ck.expect(std::abs(logs[e].lr - expected) <= 1e-15 * expected,
              "epoch " + std::to_string(e) + fmt(": lr %.17g", logs[e].lr));
    if (e > 0 && logs[e].lr != logs[e - 1].lr) transitions.push_back(e);
  }
  ck.expect(transitions == std::vector<std::size_t>{40, 60, 80}, "transitions at the wrong epochs");
  return ck.outcome("0.1/0.02/0.004/0.0008 with transitions at epochs 40/60/80");
}

Outcome criterion9() {
  Checker ck;
  ToyDatasetConfig tc;  // 10 classes, 16x16x3
  tc.n_per_class = 200;
  const auto train_set = make_toy_dataset(tc, "train");
  tc.n_per_class = 50;
  const auto test_set = make_toy_dataset(tc, "test");

  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.initial_lr = 0.005;
  cfg.milestones = {0.6, 0.8, 0.9};
  cfg.augment = false;
  cfg.seed = 2024;

  struct Run {
    double train_acc = 0, test_acc = 0, secs = 0;
  };
  auto run = [&](DropLayerConfig drop) {
    const auto t0 = std::chrono::steady_clock::now();
    TinyCNN model(ModelConfig{}, std::move(drop), 7);
    const auto logs = train(model, train_set, test_set, cfg);
    return Run{logs.back().train_acc, logs.back().test_acc, seconds_since(t0)};
  };
  const Run base = run(DropLayerConfig{});
  DropLayerConfig td;
  td.method = DropMethod::kTargetDrop;
  td.targetdrop.gamma = 0.15;
  td.targetdrop.block_size = 5;
  const Run drop = run(td);

  const double base_gap = base.train_acc - base.test_acc, drop_gap = drop.train_acc - drop.test_acc;
  ck.expect(base.train_acc > 0.9, fmt("baseline train accuracy %.3f", base.train_acc));
  ck.expect(drop.train_acc > 0.9, fmt("TargetDrop train accuracy %.3f", drop.train_acc));
  ck.expect(drop_gap <= base_gap + 0.02, fmt("gap %.3f vs baseline %.3f", drop_gap, base_gap));
  ck.expect(base.secs <= 300 && drop.secs <= 300, fmt("runtime %.0f s / %.0f s", base.secs, drop.secs));
  return ck.outcome(fmt("train acc %.3f / %.3f (none / TargetDrop), gaps %.3f / %.3f", base.train_acc,
                        drop.train_acc, base_gap, drop_gap) +
                    fmt(", %.0f s + %.0f s", base.secs, drop.secs));
}

Outcome criterion10() {
  Checker ck;
  const auto m = dropout_mask({100, 100, 100}, 0.5, 10);
  std::size_t dropped = 0;
  for (auto k : m.keep) dropped += k == 0;
  const double frac = static_cast<double>(dropped) / 1e6;
  ck.expect(std::abs(frac - 0.5) <= 0.002, fmt("dropout fraction %.5f", frac));

  Rng rng(1010);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8), c = 1 + rng.below(6);
    const auto sd = spatialdropout_mask({h, w, c}, rng.uniform(0.0, 0.9), rng.next_u64());
    bool ok = sd.tags.size() == c;
    for (std::size_t i = 0; i < h && ok; ++i)
      for (std::size_t j = 0; j < w; ++j)
        for (std::size_t z = 0; z < c; ++z) ok = ok && sd.kept(i, j, z) == !sd.tags[z];
    ck.expect(ok, "spatialdropout zero-set differs at trial " + std::to_string(trial));

    const std::size_t block = 1 + 2 * rng.below(4);
    const auto db = dropblock_mask({h, w, c}, rng.uniform(0.0, 0.5), block, rng.next_u64());
    std::vector<std::vector<oracle::Centre>> seeds(c);
    bool interior = true;
    for (const auto& r : db.regions) {
      interior = interior && r.center.row >= block / 2 && r.center.col >= block / 2 &&
                 r.center.row + block / 2 < h && r.center.col + block / 2 < w;
      seeds[r.channel].push_back({static_cast<long>(r.center.row), static_cast<long>(r.center.col)});
    }
    ck.expect(interior, "dropblock seed outside the valid interior");
    ck.expect(db.keep == oracle::dropblock_keep(h, w, c, block, seeds),
              "dropblock zero-set differs at trial " + std::to_string(trial));
  }
  return ck.outcome(fmt("dropout fraction %.5f; 500 spatialdropout and dropblock maps <= 8x8 match", frac));
}

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Every file under `a` equals the same relative file under `b`.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel) || binary::read_file(entry.path()) != binary::read_file(b / rel)) return false;
    ++files;
  }
  return files > 0;
}

Outcome criterion11(const std::string& cli, const fs::path& work) {
  Checker ck;
  if (cli.empty()) return {false, "no CLI path given (--cli)"};
  const fs::path root = work / "c11";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string toy = "--set toy_classes=3 --set toy_train_per_class=8 --set toy_test_per_class=4 "
                          "--set toy_image_size=8 --set batch_size=4 --set lr=0.01 --set epochs=2 ";
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"mask", "mask-stats --seed 3 --set feature_channels=16 --set feature_height=12 --set feature_width=12"},
      {"grad", "gradcheck --set trials=5 --eps 1e-3"},
      {"train", "train " + toy + "--sweep gamma=0.1,0.3 --set k=3"},
      {"train_augment", "train " + toy + "--set method=dropblock --set dropblock_block=3 --set cutout=2"},
      {"cam", "cam " + toy + "--set checkpoint=" + q(root / "train_augment" / "checkpoint.bin")},
  };
  std::size_t total_files = 0;
  for (const auto& [name, args] : runs) {
    const fs::path out = root / name, again = root / (name + "_replay");
    const int first = run_cli(cli, args + " --out " + q(out), root / (name + ".log"));
    ck.expect(first == 0, name + ": exit " + std::to_string(first));
    const int replay = run_cli(cli, "replay " + q(out / "manifest.txt") + " --out " + q(again),
                               root / (name + "_replay.log"));
    ck.expect(replay == 0, name + ": replay exit " + std::to_string(replay));
    std::size_t files = 0;
    ck.expect(fs::exists(again) && same_tree(out, again, files), name + ": replayed files differ");
    total_files += files;
  }

  // A tampered checksum must be reported.
  std::string manifest = binary::read_file(root / "mask" / "manifest.txt");
  const auto pos = manifest.find("artifact.mask_stats.csv=");
  ck.expect(pos != std::string::npos, "manifest lacks mask_stats.csv");
  if (pos != std::string::npos) {
    char& digit = manifest[pos + std::string("artifact.mask_stats.csv=").size()];
    digit = digit == '0' ? '1' : '0';
    binary::write_file(root / "tampered.txt", manifest);
    const int code = run_cli(cli, "replay " + q(root / "tampered.txt") + " --out " + q(root / "tampered"),
                             root / "tampered.log");
    ck.expect(code == 1, "tampered manifest replayed with exit " + std::to_string(code));
  }
  return ck.outcome(std::to_string(runs.size()) + " CLI runs, " + std::to_string(total_files) +
                    " files reproduced bit-exactly; tampered checksum detected");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TargetDrop acceptance checks"};
  std::string cli;
  std::string workdir = (fs::temp_directory_path() / "targetdrop_acceptance").string();
  std::vector<int> only;
  app.add_option("--cli", cli, "path to the targetdrop executable");
  app.add_option("--workdir", workdir, "scratch directory for CLI runs");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"channel selection cardinality", criterion1},
      {"drop region geometry (exhaustive)", criterion2},
      {"rescaling identities", criterion3},
      {"inference identity", criterion4},
      {"gradient checks", criterion5},
      {"parameter overhead", criterion6},
      {"hyper-parameter defaults", [&] { return criterion7(cli, workdir); }},
      {"lr schedule", criterion8},
      {"smoke training", criterion9},
      {"baseline drop rates", criterion10},
      {"reproducibility", [&] { return criterion11(cli, workdir); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  criterion %2d  %-36s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
