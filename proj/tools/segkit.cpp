#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segkit/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool non_ar = false;
};

segkit::RunConfig resolve_config(const CommonOpts& opts) {
  segkit::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = segkit::load_run_config(opts.config_path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.train.seed = *opts.seed;
    cfg.synth.seed = *opts.seed;
  }
  if (opts.non_ar) cfg.model.autoregressive = false;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run configuration file (JSON)");
  cmd->add_option("--seed", opts.seed, "override the run seed");
  cmd->add_flag("--non-ar", opts.non_ar, "use the non-autoregressive variant");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segkit: phoneme boundary detection toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string corpus_root, cache_dir, out_dir, split = "test", scheme, checkpoint, audio_path,
              out_path = "boundaries.txt";
  std::optional<double> nu, gamma_ms;
  std::optional<int> n_utterances;
  bool plot = false;
  std::vector<std::string> run_dirs;
  std::string report_out = "ablation_report.txt";

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth, opts);
  synth->add_option("--corpus-root", corpus_root, "where to write the corpus");
  synth->add_option("--n", n_utterances, "number of utterances");

  auto* prepare = app.add_subcommand("prepare", "build manifest and feature cache");
  add_common(prepare, opts);
  prepare->add_option("--corpus-root", corpus_root, "corpus root directory");
  prepare->add_option("--cache-dir", cache_dir, "feature cache directory");

  auto* train = app.add_subcommand("train", "train the detector");
  add_common(train, opts);
  train->add_option("--out-dir", out_dir, "run output directory");

  auto* tune = app.add_subcommand("tune", "grid-search the decision threshold");
  add_common(tune, opts);
  tune->add_option("--out-dir", out_dir, "run output directory");
  tune->add_option("--scheme", scheme, "tuning metric scheme: proposed|conventional");

  auto* evaluate = app.add_subcommand("evaluate", "score a split under both schemes");
  add_common(evaluate, opts);
  evaluate->add_option("--out-dir", out_dir, "run output directory");
  evaluate->add_option("--split", split, "split to score: train|val|test");
  evaluate->add_option("--nu", nu, "decision threshold override");
  evaluate->add_option("--gamma-ms", gamma_ms, "matching tolerance in milliseconds");

  auto* segment = app.add_subcommand("segment", "detect boundaries in one audio file");
  add_common(segment, opts);
  segment->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  segment->add_option("--audio", audio_path, "16 kHz mono audio file")->required();
  segment->add_option("--nu", nu, "decision threshold");
  segment->add_option("--out", out_path, "boundary output file (seconds, one per line)");
  segment->add_flag("--plot", plot, "also write a spectrogram plot (PPM)");

  auto* report = app.add_subcommand("report", "aggregate evaluation results across runs");
  report->add_option("--runs", run_dirs, "run directories to aggregate")->required();
  report->add_option("--out", report_out, "report output path");

  CLI11_PARSE(app, argc, argv);

  try {
    segkit::RunConfig cfg = resolve_config(opts);
    if (!corpus_root.empty()) cfg.corpus_root = corpus_root;
    if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (n_utterances) cfg.synth.n_utterances = *n_utterances;
    if (gamma_ms) cfg.gamma_ms = *gamma_ms;
    if (!scheme.empty()) {
      if (scheme != "proposed" && scheme != "conventional")
        throw segkit::validation_error("--scheme must be proposed or conventional");
      cfg.train.threshold_metric_scheme =
          scheme == "proposed" ? segkit::HitScheme::proposed : segkit::HitScheme::conventional;
    }

    if (*synth) {
      segkit::cmd_synth(cfg);
      std::cout << "wrote " << cfg.synth.n_utterances << " utterances to " << cfg.corpus_root
                << "\n";
    } else if (*prepare) {
      const auto stats = segkit::cmd_prepare(cfg);
      std::cout << "utterances\t" << stats.n_utterances << "\n"
                << "boundaries\t" << stats.n_boundaries << "\n"
                << "duration_s\t" << stats.total_duration_s << "\n"
                << "boundaries_per_s\t" << stats.boundaries_per_s() << "\n";
    } else if (*train) {
      const auto result = segkit::cmd_train(cfg);
      if (result.aborted) {
        std::cerr << "training aborted on non-finite loss; last good checkpoint kept\n";
        return 1;
      }
      std::cout << "best_epoch\t" << result.best_epoch << "\nbest_val_metric\t"
                << result.best_val_metric << "\n";
    } else if (*tune) {
      const double best = segkit::cmd_tune(cfg, segkit::default_threshold_grid());
      std::cout << "nu\t" << best << "\n";
    } else if (*evaluate) {
      const auto res = segkit::cmd_evaluate(cfg, segkit::split_from_name(split), nu);
      auto row = [](const char* name, const segkit::PairScore& s) {
        std::printf("%-13s P=%.4f R=%.4f F1=%.4f Rval=%.4f\n", name, s.precision, s.recall,
                    s.f1, s.r_value);
      };
      row("conventional", res.conventional.score);
      row("proposed", res.proposed.score);
      std::printf("duplicate_boundary_fraction=%.4f\n", res.duplicate_fraction);
    } else if (*segment) {
      if (!nu) throw segkit::validation_error("segment: --nu is required");
      const auto seconds = segkit::cmd_segment(cfg, checkpoint, audio_path, *nu, out_path, plot);
      std::cout << seconds.size() << " boundaries -> " << out_path << "\n";
    } else if (*report) {
      segkit::cmd_report(run_dirs, report_out);
      std::cout << "wrote " << report_out << "\n";
    }
    return 0;
  } catch (const segkit::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
