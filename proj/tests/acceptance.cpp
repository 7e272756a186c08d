// Copyright 2026 The CSI-NTC Authors. All Rights Reserved.
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


// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
// Writes the rate-distortion points to acceptance_rd.csv in the working
// directory.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "csi_ntc/csi_ntc.hpp"
#include "csi_ntc/selftest.hpp"

namespace csi_ntc {
namespace {

using Verdict = selftest::Result;
using selftest::Clock;
using selftest::fmt;
using selftest::seconds_since;

int failures = 0;

void report(const char* name, const Verdict& v, double secs) {
  std::printf("%s %-22s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs);
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

void run(const char* name, const std::function<Verdict()>& fn) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  report(name, v, seconds_since(t0));
}

// ---------------------------------------------------------------------------

// ---------------------------------------------------------------------------
// Rate-distortion experiment on 2x32x32 synthetic channels.

constexpr double kLambdas[] = {1e-4, 1e-3, 1e-2};
constexpr double kBaseStep = 1.0 / 256;
constexpr double kDominanceTolDb = 0.2;

struct ModelRecipe {
  std::string id;
  Architecture arch;
  size_t latent;  // linear / mlp
  double learning_rate;
  size_t epochs;
};

const ModelRecipe kRecipes[] = {
    {"swin_toy", Architecture::swin_toy, 0, 1e-2, 20},
    {"mlp", Architecture::mlp, 64, 1e-3, 15},
    {"linear", Architecture::linear, 64, 1e-3, 20},
    // Reported only: a linear baseline with as many latents as swin_toy.
    {"linear512", Architecture::linear, 512, 1e-3, 8},
};

struct Experiment {
  std::vector<ChannelTensor> train, calibration, test;
  std::map<std::string, std::vector<Codec>> codecs;  // by recipe, one per lambda
  std::vector<RdPoint> points;
  double seconds = 0.0;
};

Experiment& experiment() {
  static Experiment ex = [] {
    Experiment ex;
    const auto t0 = Clock::now();
    ChannelConfig cc;
    cc.seed = 2024;
    ex.train = generate_dataset(cc, 2000, 0);
    const Normalization scale = ex.train.front().scale;
    ex.calibration = generate_dataset(cc, 100, 50000, scale);
    ex.test = generate_dataset(cc, 200, 100000, scale);
    std::vector<NamedModel> named;
    for (const ModelRecipe& r : kRecipes) {
      auto& list = ex.codecs[r.id];
      list.reserve(std::size(kLambdas));
      for (double lambda : kLambdas) {
        const auto tm = Clock::now();
        TransformSpec spec;
        spec.arch = r.arch;
        spec.latent = {r.latent, 1, 1};
        TransformParams t = make_transform(spec, 1, scale);
        TrainConfig tc;
        tc.lambda = lambda;
        tc.learning_rate = r.learning_rate;
        tc.epochs = r.epochs;
        tc.optimizer = Optimizer::adam;
        tc.entropy_lr_scale = 20.0;
        const QuantLadder ladder{kBaseStep, 6};
        const size_t channels = t.network().latent_shape().c;
        TrainResult res = train(ex.train, tc, std::move(t),
                                EntropyModelParams::initial(channels, ladder));
        list.emplace_back(round_trip_weights(CodecModel{res.transform, res.entropy, lambda}));
        std::printf("  trained %-9s lambda %.0e in %5.1f s, final loss %.4f\n", r.id.c_str(),
                    lambda, seconds_since(tm), res.history.back().loss);
        std::fflush(stdout);
      }
      for (const Codec& c : list) named.push_back({r.id, &c});
    }
    ex.points = rd_sweep(ex.test, named, kLambdas);
    std::ofstream("acceptance_rd.csv") << rd_csv(ex.points);
    ex.seconds = seconds_since(t0);
    return ex;
  }();
  return ex;
}

// One model's points ordered by level (finest first).
std::vector<RdPoint> curve(const std::vector<RdPoint>& pts, const std::string& id, double lambda) {
  std::vector<RdPoint> out;
  for (const auto& p : pts)
    if (p.model_id == id && p.lambda == lambda) out.push_back(p);
  std::sort(out.begin(), out.end(), [](const RdPoint& a, const RdPoint& b) { return a.level < b.level; });
  return out;
}

// Best NMSE (dB) the reference reaches using at most `bpe` bits per entry;
// NAN when every reference point needs more.
double frontier_db(const std::vector<RdPoint>& pts, const std::string& ref, double bpe) {
  double best = NAN;
  for (const auto& p : pts)
    if (p.model_id == ref && p.bits_per_entry <= bpe && !(p.nmse_db >= best)) best = p.nmse_db;
  return best;
}

struct Dominance {
  int lambdas_won = 0;
  std::string detail;
};

Dominance dominance(const std::vector<RdPoint>& pts, const std::string& model, const std::string& ref) {
  Dominance d;
  for (double lambda : kLambdas) {
    size_t comparable = 0, worse = 0;
    double margin = INFINITY;
    for (const auto& p : curve(pts, model, lambda)) {
      const double f = frontier_db(pts, ref, p.bits_per_entry);
      if (std::isnan(f)) continue;
      ++comparable;
      worse += p.nmse_db > f + kDominanceTolDb;
      margin = std::min(margin, f - p.nmse_db);
    }
    const bool won = comparable > 0 && worse == 0;
    d.lambdas_won += won;
    d.detail += fmt("%s%.0e:%s(%zu pts, margin %+.2f dB)", d.detail.empty() ? "" : " ", lambda,
                    won ? "ok" : "no", comparable, comparable ? margin : 0.0);
  }
  return d;
}

Verdict rd_trend() {
  Experiment& ex = experiment();
  const auto& pts = ex.points;
  size_t non_monotone = 0, unsaturated = 0, curves = 0;
  std::string sat;
  for (const ModelRecipe& r : kRecipes) {
    for (double lambda : kLambdas) {
      auto c = curve(pts, r.id, lambda);
      ++curves;
      // More bits must not raise NMSE; equal-rate points are not ordered.
      bool monotone = true;
      for (const auto& a : c)
        for (const auto& b : c)
          if (b.bits_per_entry > a.bits_per_entry && b.nmse > a.nmse + 1e-6) monotone = false;
      non_monotone += !monotone;
      const double gain10 = c[1].nmse - c[0].nmse;
      const double gain32 = c[3].nmse - c[2].nmse;
      unsaturated += !(gain10 < gain32);
      if (!(gain10 < gain32)) sat += fmt(" %s@%.0e", r.id.c_str(), lambda);
    }
  }
  for (const ModelRecipe& r : kRecipes) {
    std::printf("  %-9s", r.id.c_str());
    for (double lambda : kLambdas) {
      const auto c = curve(pts, r.id, lambda);
      std::printf(" | %.0e: L0 %.3f bpe %+.2f dB, L5 %.3f bpe %+.2f dB", lambda,
                  c.front().bits_per_entry, c.front().nmse_db, c.back().bits_per_entry,
                  c.back().nmse_db);
    }
    std::printf("\n");
  }
  const Dominance d = dominance(pts, "swin_toy", "linear");
  const Dominance wide = dominance(pts, "swin_toy", "linear512");
  std::printf("  swin_toy vs linear (64 latents):  %s\n", d.detail.c_str());
  std::printf("  swin_toy vs linear512 (reported): %s\n", wide.detail.c_str());
  const bool ok = non_monotone == 0 && unsaturated == 0 && d.lambdas_won >= 2 && ex.seconds < 1800;
  return {ok, fmt("monotone violations %zu/%zu curves, unsaturated %zu%s, swin_toy matches "
                  "linear on %d/3 lambdas (tol %.1f dB), %.0f s of 1800 s",
                  non_monotone, curves, unsaturated, sat.c_str(), d.lambdas_won, kDominanceTolDb,
                  ex.seconds)};
}

Verdict capacity_adaptation() {
  Experiment& ex = experiment();
  const Codec& codec = ex.codecs.at("swin_toy")[1];
  const std::vector<double> est = estimate_bits_per_level(codec, ex.calibration);
  std::vector<double> budgets;
  budgets.push_back(est.back() * 0.9);  // admits no level
  for (size_t k = est.size() - 1; k > 0; --k) budgets.push_back(0.5 * (est[k] + est[k - 1]));
  budgets.push_back(est.front() * 1.05);
  bool ok = true;
  double worst_fraction = 0.0;
  size_t tested = 0;
  std::string detail;
  for (double cap : budgets) {
    int level;
    try {
      level = select_level(est, RateBudget{cap});
    } catch (const CapacityError&) {
      detail += fmt(" %.0f:none", cap);
      continue;
    }
    double total = 0.0;
    size_t over = 0;
    for (const auto& h : ex.test) {
      const double bits = static_cast<double>(encode_csi(h, codec, level).length_bits());
      total += bits;
      over += bits > cap;
    }
    const double mean = total / static_cast<double>(ex.test.size());
    const double fraction = static_cast<double>(over) / static_cast<double>(ex.test.size());
    ok = ok && mean <= cap && fraction < 0.2;
    worst_fraction = std::max(worst_fraction, fraction);
    ++tested;
    detail += fmt(" %.0f:L%d mean %.0f over %.1f%%", cap, level, mean, 100.0 * fraction);
  }
  return {ok && tested > 0,
          fmt("%zu budgets, worst per-sample violation %.1f%% (limit 20%%);", tested,
              100.0 * worst_fraction) +
              detail};
}

}  // namespace
}  // namespace csi_ntc

int main(int argc, char** argv) {
  using namespace csi_ntc;
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria = {
      {"nesting_law", selftest::nesting_law},
      {"entropy_chain", selftest::entropy_chain},
      {"lossless_coding", selftest::lossless_coding},
      {"rate_bounds", selftest::rate_bounds},
      {"gradient_correctness", selftest::gradient_correctness},
      {"rd_trend", rd_trend},
      {"capacity_adaptation", capacity_adaptation},
      {"parameter_ratio", selftest::parameter_ratio},
  };
  // Usage: acceptance [--expect-fail NAME]... [NAME]...
  // Names select criteria (default all). With --expect-fail the exit status
  // is 0 only when exactly the listed criteria fail.
  std::vector<std::string> wanted, expected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--expect-fail" && i + 1 < argc) {
      expected.push_back(argv[++i]);
    } else {
      wanted.push_back(a);
    }
  }
  std::vector<std::string> failed;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    const int before = failures;
    run(name, fn);
    if (failures != before) failed.push_back(name);
  }
  std::printf("%d criteria failed\n", failures);
  if (expected.empty()) return failures == 0 ? 0 : 1;
  bool as_expected = true;
  for (const auto& name : expected) {
    const bool in_run = wanted.empty() || std::find(wanted.begin(), wanted.end(), name) != wanted.end();
    if (in_run && std::find(failed.begin(), failed.end(), name) == failed.end()) {
      std::printf("expected failure of %s did not occur\n", name.c_str());
      as_expected = false;
    }
  }
  for (const auto& name : failed) {
    if (std::find(expected.begin(), expected.end(), name) == expected.end()) as_expected = false;
  }
  return as_expected ? 0 : 1;
}
