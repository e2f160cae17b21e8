// SPDX-License-Identifier: Apache-2.0
//
// sparsid: sparse identification of rational transfer functions
// Copyright (C) 2026 The sparsid authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// sparsid command-line driver.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sparsid/sparsid.hpp"

namespace {

enum Exit : int { ok = 0, config_error = 2, io_error = 3, solver_failure = 4 };

std::vector<double> parse_pole_list(const std::string& arg) {
  std::string text = arg;
  if (std::filesystem::is_regular_file(arg)) text = sparsid::detail::read_file(arg);
  std::vector<double> out;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ',')) {
    std::istringstream line(tok);
    std::string piece;
    while (line >> piece) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(piece, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != piece.size()) throw sparsid::ConfigError("not a number in pole list: '" + piece + "'");
      out.push_back(v);
    }
  }
  if (out.empty()) throw sparsid::ConfigError("empty pole list");
  return out;
}

void print_table(const std::vector<sparsid::TableRow>& rows) {
  for (const auto& r : rows) {
    std::printf("%-18s rate=%.2f  max=%.3g  min=%.3g  avg=%.3g  order=%zu\n", r.model.c_str(), r.stats.recover_rate,
                r.stats.max_error, r.stats.min_error, r.stats.average_error, r.order);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse identification of rational transfer functions"};
  app.set_version_flag("--version", sparsid::kVersion);
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a preset or config and write the report bundle");
  std::string preset_name, config_path, out_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  bool quiet = false;
  auto* preset_opt = run->add_option("--preset", preset_name, "Named preset");
  auto* config_opt = run->add_option("--config", config_path, "JSON config file");
  preset_opt->excludes(config_opt);
  auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides the config)");
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--jobs", jobs, "Worker threads (default: available parallelism)");
  run->add_flag("--quiet", quiet, "Do not print the table");

  auto* diag = app.add_subcommand("diagnose", "Print coherence, uniqueness and bound diagnostics");
  std::string diag_target;
  diag->add_option("config", diag_target, "Config file or preset name")->required();

  auto* rep = app.add_subcommand("report", "Recompute table.csv from a trials file");
  std::string trials_path;
  rep->add_option("trials", trials_path, "trials.jsonl")->required();

  auto* coh = app.add_subcommand("coherence", "Mutual coherence of a TM pole sequence");
  std::string pole_arg;
  std::size_t n2 = 0, depth = 0;
  coh->add_option("--poles", pole_arg, "Comma-separated poles or a file of them")->required();
  coh->add_option("--n2", n2, "Number of TM functions")->required()->check(CLI::PositiveNumber);
  coh->add_option("--depth", depth, "Truncation depth (default: automatic)");

  auto* pre = app.add_subcommand("preset", "Print a preset as a config file");
  std::string dump_name;
  pre->add_option("name", dump_name, "Preset name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (preset_name.empty() && config_path.empty()) throw sparsid::ConfigError("run needs --preset or --config");
      sparsid::ExperimentConfig cfg =
          preset_name.empty() ? sparsid::load_config(config_path) : sparsid::preset(preset_name);
      if (*seed_opt) cfg.master_seed = seed;
      const sparsid::RunResult result = sparsid::run_experiment(cfg, jobs);
      const sparsid::ReportBundle bundle = sparsid::write_bundle(result, out_dir);
      if (!quiet) {
        print_table(result.table);
        std::printf("wrote %s\n", bundle.table_csv.string().c_str());
      }
      if (result.all_failed) {
        std::fprintf(stderr, "error: the solver did not converge on any trial\n");
        return solver_failure;
      }
    } else if (*diag) {
      const bool is_file = std::filesystem::exists(diag_target);
      const sparsid::ExperimentConfig cfg =
          is_file ? sparsid::load_config(diag_target) : sparsid::preset(diag_target);
      sparsid::diagnose(cfg, std::cout);
    } else if (*rep) {
      std::cout << sparsid::report(trials_path);
    } else if (*coh) {
      const sparsid::PoleSequence poles(parse_pole_list(pole_arg));
      if (n2 > poles.size()) throw sparsid::ConfigError("--n2 exceeds the number of poles");
      const sparsid::ImpulseTable table =
          depth > 0 ? sparsid::impulse_table(poles, n2, depth) : sparsid::impulse_table_auto(poles, n2);
      const auto c = sparsid::mutual_coherence_tilde(table, std::numeric_limits<double>::infinity());
      std::printf("mu_tilde %.17g\nargmax_d %zu\nargmax_l %zu\ntruncation %zu\ntail_bound %.3g\n", c.value,
                  c.argmax_d, c.argmax_l, c.truncation, c.max_tail_bound);
      if (c.accuracy > 0.0) std::printf("warning: tail bound exceeds the computed maximum by %.3g\n", c.accuracy);
    } else if (*pre) {
      std::cout << sparsid::config_to_json(sparsid::preset(dump_name)).dump(2) << "\n";
    }
  } catch (const sparsid::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return config_error;
  } catch (const sparsid::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return io_error;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return config_error;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return ok;
}
