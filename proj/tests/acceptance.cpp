// Copyright 2026 The linmix Authors. All Rights Reserved.
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

// End-to-end acceptance run: one PASS/FAIL line per criterion, each with its
// own tolerance and wall-clock limit. Exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"

namespace linmix {
namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

class Acceptance {
 public:
  void run(const std::string& id, const std::string& title, double limit_s,
           const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < limit_s;
    const bool ok = o.passed && in_time;
    failures_ += ok ? 0 : 1;
    std::printf("%s %s  %s: %s [%.2f s, limit %.0f s%s]\n", id.c_str(),
                ok ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(), secs, limit_s,
                in_time ? "" : ", too slow");
    std::fflush(stdout);
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Outcome transcriptions() {
  Rng rng(101);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    auto mixer = init_mixer_layer(rng, 2, 2, 3, 4);
    randomize(mixer, rng, -1.0, 1.0);
    auto ff = init_ff_only(rng, 2, 2, 3, 4);
    randomize(ff, rng, -1.0, 1.0);
    auto res = init_resmlp_block(rng, 2, 2, 3);
    randomize(res, rng, -1.0, 1.0);
    const Tensor x = rng.tensor({2, 2}, -2.0, 2.0);
    worst = std::max({worst, oracle::max_gap(oracle::mixer(x, mixer), mixer_layer(x, mixer)),
                      oracle::max_gap(oracle::ff_only(x, ff), ff_only_block(x, ff)),
                      oracle::max_gap(oracle::resmlp(x, res), resmlp_block(x, res))});
  }
  return {worst <= 1e-12, "3 blocks x 20 draws, worst " + sci(worst) + " (tol 1e-12)"};
}

Outcome ea_equivalence() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(8), m = 1 + rng.below(8);
    const Tensor f = rng.tensor({n, d}, -1.0, 1.0);
    const Tensor mk = rng.tensor({m, d}, -1.0, 1.0);
    const Tensor mv = rng.tensor({m, d}, -1.0, 1.0);
    const LinearParams<> f1{mk, Tensor({m})}, f2{transpose(mv), Tensor({d})};
    worst = std::max(worst, max_abs_diff(external_attention_linear_inner(f, f1, f2),
                                         external_attention(f, mk, mv)));
  }
  return {worst <= 1e-12, "100 trials, worst " + sci(worst) + " (tol 1e-12)"};
}

Outcome resmlp_fold() {
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig cfg;
    cfg.arch = Arch::resmlp;
    cfg.height = cfg.width = 8;
    cfg.patch = 4;
    cfg.embed_dim = 8;
    cfg.depth = 1 + rng.below(3);
    cfg.channel_hidden = 16;
    cfg.classes = 3;
    Model<> m = build_model(cfg);
    randomize(m, rng, -1.0, 1.0);
    const Tensor img = rng.tensor({1, 8, 8}, 0.0, 1.0);
    worst = std::max(worst, max_abs_diff(forward_logits(fold_resmlp_model(m), img),
                                         forward_logits(m, img)));
  }
  return {worst <= 1e-10, "100 random networks, worst " + sci(worst) + " (tol 1e-10)"};
}

Outcome gradients() {
  const SuiteReport r = run_suite("gradcheck", 1);
  double worst = 0.0;
  for (const auto& c : r.checks) worst = std::max(worst, c.worst);
  std::ostringstream os;
  os << r.checks.size() - r.failures() << "/" << r.checks.size()
     << " op and block checks, worst rel err " << sci(worst) << " (tol 1e-4)";
  for (const auto& c : r.checks)
    if (!c.passed) os << "; failed " << c.property;
  return {r.passed(), os.str()};
}

Outcome residual_identity() {
  Rng rng(505);
  int cases = 0;
  bool all = true;
  for (Arch arch : kAllArchs)
    for (std::size_t s = 1; s <= 6; ++s)
      for (std::size_t c = 2; c <= 8; c += 2) {
        const Tensor x = rng.tensor({s, c}, -3.0, 3.0);
        all = all && apply_layer(x, suite::residual_floor(arch, s, c)) == x;
        ++cases;
      }
  return {all, std::to_string(cases) + " block/shape cases, outputs bitwise equal to inputs"};
}

Outcome long_range() {
  Rng rng(606);
  double weakest = std::numeric_limits<double>::infinity();
  for (Arch arch : kAllArchs)
    for (int draw = 0; draw < 5; ++draw) {
      const Layer<> layer = suite::random_layer(arch, rng, 4, suite::kChannels);
      const Tensor x = rng.tensor({4, suite::kChannels}, -1.0, 1.0);
      const Tensor sens = suite::token_sensitivity(
          [&](const Tensor& v) { return apply_layer(v, layer); }, x);
      for (double v : sens.data()) weakest = std::min(weakest, v);
    }
  return {weakest > 1e-6, "4 archs x 5 draws at S=4, smallest token-pair sensitivity " +
                              sci(weakest) + " (must exceed 1e-6)"};
}

Outcome desk_learning() {
  const Dataset data = gen_synthetic(512, 2, 16, 1);
  TrainOptions opts;
  opts.opt = Optimizer::adam;
  opts.lr = 1e-3;
  opts.epochs = 200;
  opts.batch = 16;
  opts.stop_at_accuracy = 0.95;
  std::ostringstream os;
  bool ok = true;
  for (Arch arch : kAllArchs) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.height = cfg.width = 16;
    cfg.patch = 4;
    cfg.embed_dim = 16;
    cfg.depth = 2;
    cfg.classes = 2;
    cfg.seed = 7;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train(cfg, data, opts);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double acc = evaluate(r.model, data).accuracy;
    ok = ok && acc >= 0.95;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %.3f in %zu epochs (%.0f s), ",
                  arch_name(arch).c_str(), acc, r.history.size(), secs);
    os << buf;
  }
  const double baseline = train_patch_baseline(data, 4).accuracy(data);
  ok = ok && baseline <= 0.75;
  char buf[64];
  std::snprintf(buf, sizeof buf, "patch-local baseline %.3f (need >= 0.95 / <= 0.75)",
                baseline);
  os << buf;
  return {ok, os.str()};
}

Outcome cost_model() {
  Rng rng(808);
  int param_mismatch = 0, flop_mismatch = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const ModelConfig cfg = oracle::random_config(rng, kAllArchs[rng.below(4)]);
    param_mismatch += count_params(cfg) != oracle::enumerated_params(cfg);
  }
  for (Arch arch : kAllArchs)
    for (int trial = 0; trial < 20; ++trial) {
      const ModelConfig cfg = oracle::random_config(rng, arch);
      flop_mismatch += count_flops(cfg) != oracle::instrumented_flops(cfg);
    }
  // Attention-map cost at N and 2N, by counter and by formula.
  bool scaling = true;
  const std::size_t d = 8, memory = 16;
  const Tensor mk = rng.tensor({memory, d}, -1.0, 1.0);
  auto counted = [](auto&& f) {
    const FlopScope scope;
    f();
    return scope.count();
  };
  for (std::size_t n : {16u, 64u, 256u}) {
    const Tensor f1 = rng.tensor({n, d}, -1.0, 1.0), f2 = rng.tensor({2 * n, d}, -1.0, 1.0);
    const auto ea1 = counted([&] { external_attention_map(f1, mk); });
    const auto ea2 = counted([&] { external_attention_map(f2, mk); });
    const auto sa1 = counted([&] { self_attention_map(f1); });
    const auto sa2 = counted([&] { self_attention_map(f2); });
    scaling = scaling && ea2 == 2 * ea1 && sa2 == 4 * sa1 &&
              ea1 == cost::external_attention_map_flops(n, d, memory) &&
              sa1 == cost::self_attention_map_flops(n, d) &&
              cost::external_attention_map_flops(2 * n, d, memory) == 2 * ea1 &&
              cost::self_attention_map_flops(2 * n, d) == 4 * sa1;
  }
  std::ostringstream os;
  os << "params " << 50 - param_mismatch << "/50 exact, flops " << 80 - flop_mismatch
     << "/80 exact, attention map N->2N: external x2, self x4 "
     << (scaling ? "confirmed" : "NOT confirmed");
  return {param_mismatch == 0 && flop_mismatch == 0 && scaling, os.str()};
}

Outcome reproducibility() {
  const Dataset data = gen_synthetic(64, 2, 8, 9);
  TrainOptions opts;
  opts.epochs = 3;
  opts.batch = 8;
  bool same = true;
  for (Arch arch : kAllArchs) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.height = cfg.width = 8;
    cfg.patch = 4;
    cfg.embed_dim = 8;
    cfg.depth = 2;
    cfg.token_hidden = cfg.channel_hidden = 8;
    cfg.memory = 4;
    cfg.seed = 42;
    const TrainResult a = train(cfg, data, opts);
    const TrainResult b = train(cfg, data, opts);
    same = same && checkpoint_bytes(a.model) == checkpoint_bytes(b.model) &&
           history_ndjson(a.history) == history_ndjson(b.history);
  }
  auto report = [] {
    std::vector<CostReport> rs;
    for (Arch arch : kAllArchs) {
      ModelConfig cfg;
      cfg.arch = arch;
      rs.push_back(cost_report(cfg));
    }
    return reports_json(rs) + reports_csv(rs);
  };
  same = same && report() == report();
  const SuiteReport s1 = run_suite("equivalence", 5), s2 = run_suite("equivalence", 5);
  same = same && format_report(s1) == format_report(s2);
  return {same, same ? "models, histories, cost reports and suite reports identical across two runs"
                     : "outputs differ between runs"};
}

}  // namespace
}  // namespace linmix

int main() {
  using namespace linmix;
  Acceptance acc;
  acc.run("AC1", "block transcriptions at S=C=2", 1, transcriptions);
  acc.run("AC2", "external attention memory vs linear form", 1, ea_equivalence);
  acc.run("AC3", "ResMLP affine folding", 1, resmlp_fold);
  acc.run("AC4", "gradient correctness", 30, gradients);
  acc.run("AC5", "residual identity floor", 1, residual_identity);
  acc.run("AC6", "long-range token interaction", 10, long_range);
  acc.run("AC7", "desk-scale learning", 600, desk_learning);
  acc.run("AC8", "cost model consistency", 10, cost_model);
  acc.run("AC9", "bitwise reproducibility", 60, reproducibility);
  std::printf("%d of 9 criteria failed\n", acc.failures());
  return acc.failures() == 0 ? 0 : 1;
}
