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


// ntc: command-line front end for the multi-rate CSI codec.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 data or format error, 4 capacity error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csi_ntc/csi_ntc.hpp"
#include "csi_ntc/selftest.hpp"

namespace csi_ntc {
namespace {

// ---------------------------------------------------------------------------
// Training config: one "key = value" per line, '#' starts a comment.

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  for (size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key " + key);
  }
  return kv;
}

struct TrainJob {
  TransformSpec spec;
  TrainConfig train;
  QuantLadder ladder;
  uint64_t init_seed = 1;
};

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key " + key + ": not a number: " + v);
}

size_t to_size(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (!(d >= 0.0) || d != std::floor(d) || d > 1e15)
    throw ConfigError("config key " + key + ": not a nonnegative integer: " + v);
  return static_cast<size_t>(d);
}

TrainJob parse_train_config(const std::map<std::string, std::string>& kv) {
  TrainJob job;
  TransformSpec& s = job.spec;
  TrainConfig& t = job.train;
  for (const auto& [key, v] : kv) {
    if (key == "architecture") s.arch = parse_architecture(v);
    else if (key == "lambda") t.lambda = to_double(key, v);
    else if (key == "epochs") t.epochs = to_size(key, v);
    else if (key == "lr" || key == "learning_rate") t.learning_rate = to_double(key, v);
    else if (key == "seed") t.seed = job.init_seed = to_size(key, v);
    else if (key == "batch_size") t.batch_size = to_size(key, v);
    else if (key == "momentum") t.momentum = to_double(key, v);
    else if (key == "beta2") t.beta2 = to_double(key, v);
    else if (key == "grad_clip") t.grad_clip = to_double(key, v);
    else if (key == "entropy_lr_scale") t.entropy_lr_scale = to_double(key, v);
    else if (key == "optimizer") {
      if (v == "sgd") t.optimizer = Optimizer::sgd_momentum;
      else if (v == "adam") t.optimizer = Optimizer::adam;
      else throw ConfigError("optimizer must be sgd or adam, got " + v);
    }
    else if (key == "base_step") job.ladder.base_step = to_double(key, v);
    else if (key == "levels") job.ladder.n_levels = static_cast<int>(to_size(key, v));
    else if (key == "latent") s.latent = {to_size(key, v), 1, 1};
    else if (key == "hidden") s.hidden = to_size(key, v);
    else if (key == "identity_init") s.identity_init = v == "1" || v == "true";
    else if (key == "swin_patch") s.swin.patch = to_size(key, v);
    else if (key == "swin_heads") s.swin.heads = to_size(key, v);
    else if (key == "swin_embed_dim") s.swin.embed_dim = to_size(key, v);
    else if (key == "swin_window") s.swin.window = to_size(key, v);
    else if (key == "swin_mlp_ratio") s.swin.mlp_ratio = to_size(key, v);
    else if (key == "swin_latent_channels") s.swin.latent_channels = to_size(key, v);
    else if (key == "swin_depths") {
      s.swin.depths.clear();
      std::stringstream ss(v);
      for (std::string part; std::getline(ss, part, ',');) s.swin.depths.push_back(to_size(key, part));
    } else {
      throw ConfigError("unknown config key " + key);
    }
  }
  job.train.validate();
  job.ladder.validate();
  return job;
}

// ---------------------------------------------------------------------------

const ChannelTensor& first_sample(const std::vector<ChannelTensor>& set, const std::string& path) {
  if (set.empty()) throw FormatError(path + " holds no samples");
  return set.front();
}

void write_csit(const std::string& path, const std::vector<ChannelTensor>& set) {
  const ChannelTensor& h = first_sample(set, path);
  write_tensor_file(path, set, h.n_delay(), h.n_tx());
}

int select_from(const Codec& codec, const std::string& calibration_path, double capacity,
                std::vector<double>* estimates = nullptr) {
  const auto calibration = read_tensor_file(calibration_path);
  const std::vector<double> est = estimate_bits_per_level(codec, calibration);
  if (estimates) *estimates = est;
  return select_level(est, RateBudget{capacity});
}

std::string stream_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06zu.csib", i);
  return buf;
}

int run_selftest() {
  int failed = 0;
  for (const auto& [name, fn] : selftest::invariant_checks()) {
    selftest::Result r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %-22s %s\n", r.pass ? "PASS" : "FAIL", name, r.detail.c_str());
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CapacityError*>(&e)) return 4;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const LadderError*>(&e) ||
      dynamic_cast<const PrecisionError*>(&e))
    return 2;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const TruncationError*>(&e) ||
      dynamic_cast<const CorruptionError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const CoderDomainError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const NumericError*>(&e))
    return 3;
  return 1;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-rate CSI compression with nonlinear transform coding"};
  app.require_subcommand(1);
  int status = 0;

  // generate
  auto* gen = app.add_subcommand("generate", "Synthesize channels into a CSIT tensor file");
  ChannelConfig cc;
  size_t gen_count = 0;
  uint64_t gen_first = 0;
  std::string gen_out, gen_scale_from;
  gen->add_option("--out", gen_out, "Output CSIT file")->required();
  gen->add_option("--count", gen_count, "Number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--first", gen_first, "Index of the first sample")->capture_default_str();
  gen->add_option("--seed", cc.seed, "Dataset seed")->capture_default_str();
  gen->add_option("--n-tx", cc.n_tx, "Transmit antennas")->capture_default_str();
  gen->add_option("--n-subcarriers", cc.n_subcarriers, "Subcarriers")->capture_default_str();
  gen->add_option("--n-delay", cc.n_delay, "Retained delay taps")->capture_default_str();
  gen->add_option("--n-paths", cc.n_paths, "Multipath taps")->capture_default_str();
  gen->add_option("--decay", cc.decay, "Power-delay-profile decay rate")->capture_default_str();
  gen->add_option("--scale-from", gen_scale_from,
                  "Reuse the normalization of this CSIT file instead of fitting one");
  gen->callback([&] {
    std::optional<Normalization> scale;
    if (!gen_scale_from.empty())
      scale = first_sample(read_tensor_file(gen_scale_from), gen_scale_from).scale;
    const auto set = generate_dataset(cc, gen_count, gen_first, scale);
    write_csit(gen_out, set);
    std::printf("wrote %zu samples (2x%zux%zu, offset %.9g gain %.9g) to %s\n", set.size(),
                cc.n_delay, cc.n_tx, set.front().scale.offset, set.front().scale.gain,
                gen_out.c_str());
  });

  // train
  auto* tr = app.add_subcommand("train", "Train a codec from a key = value config");
  std::string tr_config, tr_data, tr_out;
  tr->add_option("--config", tr_config, "Config file")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", tr_data, "Training CSIT file")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Output CSIW weight file")->required();
  tr->callback([&] {
    TrainJob job = parse_train_config(read_key_values(tr_config));
    const auto data = read_tensor_file(tr_data);
    const ChannelTensor& h = first_sample(data, tr_data);
    job.spec.n_delay = h.n_delay();
    job.spec.n_tx = h.n_tx();
    TransformParams t = make_transform(job.spec, job.init_seed, h.scale);
    const size_t channels = t.network().latent_shape().c;
    std::printf("%s: %zu parameters, latent %s\n", to_string(t.arch).c_str(),
                count_parameters(t), t.network().latent_shape().str().c_str());
    const TrainResult r = train(data, job.train, std::move(t),
                                EntropyModelParams::initial(channels, job.ladder));
    for (size_t e = 0; e < r.history.size(); ++e)
      std::printf("epoch %zu loss %.6f distortion %.6f rate_nats %.3f\n", e + 1,
                  r.history[e].loss, r.history[e].distortion, r.history[e].rate_nats);
    save_weights(tr_out, CodecModel{r.transform, r.entropy, job.train.lambda});
    std::printf("wrote %s\n", tr_out.c_str());
  });

  // encode
  auto* enc = app.add_subcommand("encode", "Encode every sample of a CSIT file to bitstreams");
  std::string enc_model, enc_data, enc_dir, enc_calibration;
  int enc_level = -1;
  double enc_capacity = 0.0;
  enc->add_option("--model", enc_model, "CSIW weight file")->required()->check(CLI::ExistingFile);
  enc->add_option("--data", enc_data, "CSIT file to encode")->required()->check(CLI::ExistingFile);
  enc->add_option("--out-dir", enc_dir, "Directory for sample_NNNNNN.csib files")->required();
  auto* lvl = enc->add_option("--level", enc_level, "Ladder level");
  auto* cap = enc->add_option("--capacity", enc_capacity, "Feedback budget C_f in bits per sample");
  enc->add_option("--calibration", enc_calibration, "CSIT file for rate estimates")
      ->check(CLI::ExistingFile)
      ->needs(cap);
  lvl->excludes(cap);
  enc->callback([&] {
    const Codec codec(load_weights(enc_model));
    int level = enc_level;
    if (cap->count() > 0) {
      if (enc_calibration.empty()) throw ConfigError("--capacity needs --calibration");
      level = select_from(codec, enc_calibration, enc_capacity);
    } else if (lvl->count() == 0) {
      throw ConfigError("give --level or --capacity");
    }
    const auto data = read_tensor_file(enc_data);
    std::filesystem::create_directories(enc_dir);
    std::vector<Bitstream> streams;
    for (size_t i = 0; i < data.size(); ++i) {
      streams.push_back(encode_csi(data[i], codec, level));
      write_file((std::filesystem::path(enc_dir) / stream_name(i)).string(),
                 streams.back().serialize());
    }
    const ChannelTensor& h = first_sample(data, enc_data);
    std::printf("level %d: %zu streams, %.4f bits per entry\n", level, streams.size(),
                bits_per_entry(streams, h.n_delay(), h.n_tx()));
  });

  // decode
  auto* dec = app.add_subcommand("decode", "Decode bitstreams into a CSIT file");
  std::string dec_model, dec_out;
  std::vector<std::string> dec_inputs;
  dec->add_option("--model", dec_model, "CSIW weight file")->required()->check(CLI::ExistingFile);
  dec->add_option("--out", dec_out, "Output CSIT file")->required();
  dec->add_option("streams", dec_inputs, "Bitstream files, in sample order")
      ->required()
      ->check(CLI::ExistingFile);
  dec->callback([&] {
    const Codec codec(load_weights(dec_model));
    std::vector<ChannelTensor> out;
    for (const auto& path : dec_inputs) out.push_back(decode_csi(read_file(path), codec));
    write_csit(dec_out, out);
    std::printf("decoded %zu streams to %s\n", out.size(), dec_out.c_str());
  });

  // select-level
  auto* sel = app.add_subcommand("select-level", "Print the finest level that fits a budget");
  std::string sel_model, sel_calibration;
  double sel_capacity = 0.0;
  bool sel_verbose = false;
  sel->add_option("--model", sel_model, "CSIW weight file")->required()->check(CLI::ExistingFile);
  sel->add_option("--calibration", sel_calibration, "CSIT file for rate estimates")
      ->required()
      ->check(CLI::ExistingFile);
  sel->add_option("--capacity", sel_capacity, "Feedback budget C_f in bits per sample")
      ->required();
  sel->add_flag("-v,--verbose", sel_verbose, "Also print the per-level estimates to stderr");
  sel->callback([&] {
    const Codec codec(load_weights(sel_model));
    std::vector<double> est;
    int level = -1;
    try {
      level = select_from(codec, sel_calibration, sel_capacity, &est);
    } catch (const CapacityError&) {
      if (sel_verbose)
        for (size_t k = 0; k < est.size(); ++k)
          std::fprintf(stderr, "level %zu: %.1f bits\n", k, est[k]);
      throw;
    }
    if (sel_verbose)
      for (size_t k = 0; k < est.size(); ++k)
        std::fprintf(stderr, "level %zu: %.1f bits\n", k, est[k]);
    std::printf("%d\n", level);
  });

  // rd-sweep
  auto* rd = app.add_subcommand("rd-sweep", "Rate-distortion sweep over levels, as CSV");
  std::string rd_data, rd_out;
  std::vector<std::string> rd_models;
  rd->add_option("--data", rd_data, "Test CSIT file")->required()->check(CLI::ExistingFile);
  rd->add_option("--model", rd_models, "id=path.csiw, repeatable")->required();
  rd->add_option("--out", rd_out, "CSV output (default stdout)");
  rd->callback([&] {
    const auto data = read_tensor_file(rd_data);
    std::vector<Codec> codecs;
    std::vector<std::string> ids;
    std::vector<double> lambdas;
    codecs.reserve(rd_models.size());
    for (const auto& m : rd_models) {
      const auto eq = m.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--model expects id=path, got " + m);
      ids.push_back(m.substr(0, eq));
      codecs.emplace_back(load_weights(m.substr(eq + 1)));
      const double l = codecs.back().model().lambda;
      if (std::find(lambdas.begin(), lambdas.end(), l) == lambdas.end()) lambdas.push_back(l);
    }
    std::vector<NamedModel> named;
    for (size_t i = 0; i < codecs.size(); ++i) named.push_back({ids[i], &codecs[i]});
    const std::string csv = rd_csv(rd_sweep(data, named, lambdas));
    if (rd_out.empty()) {
      std::fputs(csv.c_str(), stdout);
    } else {
      std::ofstream f(rd_out);
      if (!(f << csv)) throw FormatError("cannot write " + rd_out);
    }
  });

  // export-symbols
  auto* ex = app.add_subcommand("export-symbols",
                                "Write one sample's symbols and tables as exchange text files");
  std::string ex_model, ex_data, ex_symbols, ex_pmf;
  size_t ex_sample = 0;
  int ex_level = 0;
  ex->add_option("--model", ex_model, "CSIW weight file")->required()->check(CLI::ExistingFile);
  ex->add_option("--data", ex_data, "CSIT file")->required()->check(CLI::ExistingFile);
  ex->add_option("--sample", ex_sample, "Sample index")->capture_default_str();
  ex->add_option("--level", ex_level, "Ladder level")->capture_default_str();
  ex->add_option("--symbols", ex_symbols, "Symbol file to write")->required();
  ex->add_option("--pmf", ex_pmf, "PMF file to write")->required();
  ex->callback([&] {
    const Codec codec(load_weights(ex_model));
    const auto data = read_tensor_file(ex_data);
    if (ex_sample >= data.size())
      throw ConfigError("sample " + std::to_string(ex_sample) + " out of range");
    const SymbolTensor s = codec.symbols_for(data[ex_sample], ex_level);
    std::ofstream(ex_symbols) << symbols_text(s);
    std::ofstream(ex_pmf) << pmf_text(codec.tables(ex_level));
    const Payload p = encode_symbols(s, codec.tables(ex_level));
    std::printf("symbols %zu coded_bits %zu empirical_entropy %.9f\n", s.size(), p.coded_bits(),
                empirical_entropy(s, false));
  });

  // selftest
  auto* st = app.add_subcommand("selftest", "Run the invariant checks");
  st->callback([&] { status = run_selftest(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return status;
}

}  // namespace
}  // namespace csi_ntc

int main(int argc, char** argv) {
  try {
    return csi_ntc::run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ntc: %s\n", e.what());
    return csi_ntc::exit_code_for(e);
  }
}
