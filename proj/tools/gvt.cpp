// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "gvt/gradcheck.hpp"
#include "gvt/harness.hpp"
#include "gvt/parallel.hpp"
#include "gvt/pipeline.hpp"

namespace {

gvt::RunConfig preset(const std::string& name) {
  if (name == "micro") return gvt::micro_config();
  if (name == "toy") return gvt::toy_config();
  if (name == "full") return gvt::RunConfig{};
  throw gvt::ConfigError("unknown preset '" + name + "'");
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing " + path);
}

std::vector<gvt::RdConfig> parse_pairs(const std::string& text) {
  std::vector<gvt::RdConfig> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw gvt::ConfigError("expected K:tau pairs, got '" + item + "'");
    out.push_back({std::stoul(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  gvt::configure_threads();
  CLI::App app{"Gaussian video tokenizer"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string config_path, preset_name = "toy", data_dir, checkpoint_out, metrics_path;
  bool synthetic = false;
  std::size_t steps = 100, clip_count = 8;
  std::uint64_t seed = 0;
  bool seed_set = false;
  train->add_option("--config", config_path, "key = value model/training config");
  train->add_option("--preset", preset_name, "micro, toy or full; --config overrides on top");
  auto* data_opt = train->add_option("--data", data_dir, "directory of .gvcl clips or PNG sequences");
  train->add_flag("--synthetic", synthetic, "train on generated clips")->excludes(data_opt);
  train->add_option("--clips", clip_count, "number of synthetic clips");
  train->add_option("--seed", seed, "seed for parameters and data")->each([&](const std::string&) { seed_set = true; });
  train->add_option("--steps", steps, "optimizer steps");
  train->add_option("--checkpoint", checkpoint_out, "checkpoint output path");
  train->add_option("--metrics", metrics_path, "metrics CSV output path");

  // encode / decode
  auto* encode = app.add_subcommand("encode", "Tokenize a clip into a GVT1 stream");
  std::string ckpt, input, output;
  bool embed = false;
  encode->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  encode->add_option("--input", input, "clip (.gvcl)")->required();
  encode->add_option("--output", output, "stream output path")->required();
  encode->add_flag("--embed-codebook", embed, "store the codebook inside the stream");

  auto* decode = app.add_subcommand("decode", "Reconstruct a clip from a GVT1 stream");
  decode->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  decode->add_option("--input", input, "stream")->required();
  decode->add_option("--output", output, "clip output path (.gvcl)")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gvt::GradcheckOptions gc;
  gradcheck->add_option("--seed", gc.seed, "seed");
  gradcheck->add_option("--trials", gc.trials, "random draws per op");

  // rd-sweep
  auto* rd = app.add_subcommand("rd-sweep", "Rate-distortion sweep over (K, tau) pairs");
  std::string pairs = "64:0.1,64:0.25,64:0.5", csv_path, tsv_path;
  rd->add_option("--pairs", pairs, "comma-separated K:tau list");
  rd->add_option("--config", config_path, "base config");
  rd->add_option("--preset", preset_name, "base preset");
  rd->add_option("--steps", steps, "training steps per point");
  rd->add_option("--clips", clip_count, "number of synthetic clips");
  rd->add_option("--seed", seed, "seed")->each([&](const std::string&) { seed_set = true; });
  rd->add_option("--csv", csv_path, "RatePoint CSV output");
  rd->add_option("--tsv", tsv_path, "plot data TSV output");

  // synth
  auto* synth = app.add_subcommand("synth", "Write one synthetic clip sized for a preset");
  synth->add_option("--preset", preset_name, "micro, toy or full");
  synth->add_option("--seed", seed, "clip seed");
  synth->add_option("--output", output, "clip output path (.gvcl)")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Print a stream header and token accounting");
  stats->add_option("--input", input, "stream")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    auto base_config = [&] {
      gvt::RunConfig cfg = preset(preset_name);
      if (!config_path.empty()) cfg = gvt::load_config(config_path, cfg);
      if (seed_set) cfg.train.seed = seed;
      return cfg;
    };

    if (*train) {
      gvt::RunConfig cfg = base_config();
      if (!synthetic && data_dir.empty()) throw gvt::ConfigError("train needs --data or --synthetic");
      const auto& m = cfg.model;
      auto clips = synthetic ? gvt::synthetic_suite(clip_count, m.frame_height, m.frame_width, m.frames(), cfg.train.seed)
                             : gvt::load_clip_dir(data_dir);
      gvt::GvtModel model(cfg);
      std::ofstream csv;
      if (!metrics_path.empty()) {
        csv.open(metrics_path);
        if (!csv) throw std::runtime_error("cannot write " + metrics_path);
      }
      const auto start = std::chrono::steady_clock::now();
      auto history = gvt::train(model, clips, steps, metrics_path.empty() ? nullptr : &csv);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!history.empty()) {
        const auto& last = history.back();
        std::cout << "steps=" << history.size() << " l_recon=" << last.l_recon << " mean_mask=" << last.mean_mask
                  << " tokens=" << last.tokens << " psnr=" << last.psnr << " seconds=" << secs << '\n';
      }
      if (!checkpoint_out.empty()) gvt::save_checkpoint(checkpoint_out, model);
      return 0;
    }
    if (*encode) {
      auto model = gvt::load_checkpoint(ckpt);
      const auto stream = model->encode(gvt::read_clip(input), embed);
      write_bytes(output, gvt::serialize(stream));
      std::cout << "tokens=" << stream.token_count() << " S=" << stream.static_count() << '\n';
      return 0;
    }
    if (*decode) {
      auto model = gvt::load_checkpoint(ckpt);
      const auto bytes = read_bytes(input);
      const auto stream = gvt::deserialize(bytes);
      gvt::write_clip(output, model->decode(stream));
      return 0;
    }
    if (*gradcheck) {
      bool ok = true;
      const auto start = std::chrono::steady_clock::now();
      for (const auto& r : gvt::gradcheck_suite(gc)) {
        std::cout << std::left << std::setw(28) << r.name << " checked=" << r.entries.size()
                  << " max_rel_err=" << std::scientific << std::setprecision(3) << r.max_rel_error
                  << std::defaultfloat << " worst=" << r.worst.label << (r.passed ? " PASS" : " FAIL") << '\n';
        ok = ok && r.passed;
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cout << "seconds=" << secs << '\n';
      return ok ? 0 : 1;
    }
    if (*rd) {
      gvt::RunConfig cfg = base_config();
      const auto& m = cfg.model;
      const auto clips = gvt::synthetic_suite(clip_count, m.frame_height, m.frame_width, m.frames(), cfg.train.seed);
      const auto table = gvt::rd_sweep(clips, parse_pairs(pairs), cfg, steps);
      std::ofstream csv_file, tsv_file;
      std::ostream* out = &std::cout;
      if (!csv_path.empty()) {
        csv_file.open(csv_path);
        out = &csv_file;
      }
      // Gaussians before GSP are K_init * T per clip; after GSP, the stored tokens.
      *out << "K_init,tau,gaussians_before,gaussians_after,bits,payload_bits,bpp,psnr\n";
      const double n = static_cast<double>(clips.size());
      for (const auto& p : table) {
        *out << p.initial_gaussians << ',' << p.tau << ',' << p.initial_gaussians * m.time_steps << ','
             << static_cast<double>(p.tokens) / n << ',' << p.bits << ',' << p.payload_bits << ',' << p.bpp << ','
             << p.psnr << '\n';
      }
      if (!tsv_path.empty()) {
        tsv_file.open(tsv_path);
        tsv_file << "# bpp\tpsnr\tK_init\ttau\n";
        for (const auto& p : table) tsv_file << p.bpp << '\t' << p.psnr << '\t' << p.initial_gaussians << '\t' << p.tau << '\n';
      }
      return 0;
    }
    if (*synth) {
      const auto m = preset(preset_name).model;
      gvt::write_clip(output, gvt::synthetic_suite(1, m.frame_height, m.frame_width, m.frames(), seed)[0]);
      return 0;
    }
    if (*stats) {
      const auto bytes = read_bytes(input);
      std::cout << gvt::describe(gvt::deserialize(bytes));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
