// Copyright 2026 The BFT Authors.
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

// bft: command-line front end.
//
//   bft run --config run.json
//   bft theory-check [--out report.json]
//   bft gen-data [--spec spec.json] --seed N --out DIR
//   bft fit-backbone --streams DIR... --out model.bftw
//   bft train-rank --config rank.json
//   bft quantize --model model.bftw --calib DIR --out model.q.bftw
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bft/backbone.hpp"
#include "bft/dataset.hpp"
#include "bft/error.hpp"
#include "bft/harness.hpp"
#include "bft/model.hpp"
#include "bft/quant.hpp"
#include "bft/theory.hpp"
#include "bft/train_rank.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int ExitCodeFor(bft::ErrorKind kind) {
  switch (kind) {
    case bft::ErrorKind::kConfig: return kExitConfig;
    case bft::ErrorKind::kNumerical:
    case bft::ErrorKind::kTraining: return kExitNumerical;
    default: return kExitData;
  }
}

nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) bft::Fail(bft::ErrorKind::kConfig, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    bft::Fail(bft::ErrorKind::kConfig, path + " is not valid JSON: " + e.what());
  }
}

void PrintMetrics(const bft::EvalReport& r) {
  const bft::Metrics& m = r.metrics;
  std::printf("mode=%s trials=%zu branches=%zu", bft::ModeName(r.config.mode), m.n, r.branches);
  if (m.accuracy) std::printf(" accuracy=%.4f", *m.accuracy);
  if (m.rmse) std::printf(" rmse=%.4f", *m.rmse);
  if (r.config.task == bft::Task::kRegression) {
    if (m.cc) std::printf(" cc=%.4f", *m.cc);
    else std::printf(" cc=undefined");
  }
  if (m.ndcg_median) std::printf(" ndcg@%zu_median=%.4f", r.config.ndcg_k, *m.ndcg_median);
  const bft::Latency& l = r.mean_latency;
  std::printf("\nlatency_ms align=%.3f transform=%.3f forward=%.3f rank=%.3f aggregate=%.3f total=%.3f\n", l.align_ms,
              l.transform_ms, l.forward_ms, l.rank_ms, l.aggregate_ms, l.total_ms());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time branch fusion for streaming EEG decoding"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Prequential stream evaluation");
  run->add_option("--config", run_config, "Run configuration (JSON)")->required();

  bft::TheoryCheckOptions theory;
  std::string theory_out;
  auto* tc = app.add_subcommand("theory-check", "Variance-bound verification suite");
  tc->add_option("--sweeps", theory.sweeps, "Random BranchStats per sweep");
  tc->add_option("--mc-cases", theory.mc_cases, "Monte-Carlo cases");
  tc->add_option("--mc-draws", theory.mc_draws, "Draws per Monte-Carlo case");
  tc->add_option("--max-k", theory.max_k, "Largest branch count");
  tc->add_option("--seed", theory.seed, "Seed");
  tc->add_option("--out", theory_out, "Write the JSON report here instead of stdout");

  std::string gen_spec, gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Synthetic multi-subject dataset");
  gen->add_option("--spec", gen_spec, "Dataset spec (JSON); defaults when absent");
  gen->add_option("--seed", gen_seed, "Seed")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();

  std::vector<std::string> fit_streams;
  std::string fit_out;
  bft::BackboneOptions fit_opts;
  auto* fit = app.add_subcommand("fit-backbone", "Closed-form reference backbone");
  fit->add_option("--streams", fit_streams, "Source stream directories")->required();
  fit->add_option("--out", fit_out, "Output model container")->required();
  fit->add_option("--augment", fit_opts.augment_copies, "Augmented copies per training trial");
  fit->add_option("--seed", fit_opts.seed, "Seed");

  std::string rank_config;
  auto* tr = app.add_subcommand("train-rank", "Fit mapping and ranking modules");
  tr->add_option("--config", rank_config, "Rank training configuration (JSON)")->required();

  std::string q_model, q_calib, q_out;
  bft::CalibrationOptions q_opts;
  auto* qz = app.add_subcommand("quantize", "Post-training static int8 quantization");
  qz->add_option("--model", q_model, "Float model container")->required();
  qz->add_option("--calib", q_calib, "Calibration stream directory")->required();
  qz->add_option("--out", q_out, "Output quantized container")->required();
  qz->add_flag("--percentile", q_opts.percentile_clip, "Percentile range clipping");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const bft::EvalReport r = bft::RunStreamFromConfig(bft::StreamConfig::Load(run_config));
      PrintMetrics(r);
    } else if (*tc) {
      const nlohmann::json report = bft::TheoryCheck(theory);
      if (theory_out.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        std::ofstream(theory_out) << report.dump(2) << '\n';
        std::printf("theory-check pass=%s seconds=%.2f\n", report["pass"].get<bool>() ? "true" : "false",
                    report["seconds"].get<double>());
      }
      if (!report["pass"].get<bool>()) return kExitNumerical;
    } else if (*gen) {
      const bft::DatasetSpec spec =
          gen_spec.empty() ? bft::DatasetSpec{} : bft::DatasetSpec::FromJson(ReadJsonFile(gen_spec));
      const auto subjects = bft::GenSyntheticDataset(spec, gen_seed);
      bft::WriteDatasetDir(gen_out, spec, gen_seed, subjects);
      std::printf("wrote %zu subjects to %s\n", subjects.size(), gen_out.c_str());
    } else if (*fit) {
      std::vector<bft::Stream> streams;
      for (const std::string& d : fit_streams) streams.push_back(bft::ReadStreamDir(d));
      const bft::ModelBundle m = bft::FitBackbone(streams, fit_opts);
      bft::SaveModelFile(fit_out, m);
      std::printf("wrote %s (feature_dim=%zu outputs=%zu)\n", fit_out.c_str(), m.feature_dim(), m.num_outputs());
    } else if (*tr) {
      const bft::RankTrainConfig cfg = bft::RankTrainConfig::Load(rank_config);
      const bft::RankHead h = bft::TrainRankHeadFromConfig(cfg);
      std::printf("wrote %s (variant=%s dim=%zu)\n", cfg.output_path.string().c_str(), bft::RankVariantName(h.variant),
                  h.ranking.dim());
    } else if (*qz) {
      const bft::ModelBundle m = bft::LoadModelFile(q_model);
      const bft::Stream calib = bft::ReadStreamDir(q_calib);
      std::vector<bft::Trial> inputs;
      for (const bft::Trial& t : calib.trials) inputs.push_back(t.Slice(0, m.input_samples()));
      const bft::QuantModel q = bft::Quantize(m, inputs, q_opts);
      bft::SaveQuantModelFile(q_out, q);
      std::printf("wrote %s (%zu ops)\n", q_out.c_str(), q.ops().size());
    }
  } catch (const bft::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
