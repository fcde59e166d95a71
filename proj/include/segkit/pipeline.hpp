#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segkit/corpus.hpp"
#include "segkit/metrics.hpp"
#include "segkit/synth.hpp"
#include "segkit/trainer.hpp"

namespace segkit {

struct RunConfig {
  std::uint64_t seed = 0;
  std::string corpus = "synthetic";  // synthetic | timit | buckeye
  std::string corpus_root;
  std::string cache_dir;
  std::string out_dir;
  double val_fraction = 0.1;  // TIMIT train/val split
  SuperSegConfig model;
  TrainConfig train;
  double gamma_ms = 20.0;
  SyntheticSpec synth;

  FrameGrid grid() const { return FrameGrid(0.010, 0.040, 16000); }
  Tolerance gamma() const { return Tolerance::from_ms(gamma_ms, grid()); }
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

// Builds the corpus manifest, fills the feature cache (existing cache files are
// kept), and returns printable corpus statistics.
struct PrepareStats {
  std::size_t n_utterances = 0;
  std::int64_t n_boundaries = 0;
  double total_duration_s = 0;
  double boundaries_per_s() const {
    return total_duration_s > 0 ? static_cast<double>(n_boundaries) / total_duration_s : 0;
  }
};

void cmd_synth(const RunConfig& cfg);
PrepareStats cmd_prepare(const RunConfig& cfg);

std::vector<TrainExample> load_split(const RunConfig& cfg, const Manifest& manifest, Split split,
                                     bool load_audio);
Manifest load_prepared_manifest(const RunConfig& cfg);

TrainResult cmd_train(const RunConfig& cfg);

// Writes <out_dir>/nu.txt and returns the tuned threshold.
double cmd_tune(const RunConfig& cfg, const std::vector<double>& grid);
double load_tuned_nu(const std::string& run_dir);

struct EvalResult {
  CorpusScore conventional, proposed;
  double duplicate_fraction = 0;  // fraction of predictions within gamma of another prediction
  double nu = 0;
  std::size_t n_utterances = 0;
};

// Scores the split under both schemes and writes eval_<split>.txt (table) and
// eval_<split>_records.txt (one record per utterance plus a corpus record).
EvalResult cmd_evaluate(const RunConfig& cfg, Split split, std::optional<double> nu_override);

// Boundaries in seconds (3 decimals) for one audio file; optional PPM plot of
// the mel-spectrogram with boundary columns marked.
std::vector<double> cmd_segment(const RunConfig& cfg, const std::string& checkpoint,
                                const std::string& audio_path, double nu,
                                const std::string& out_path, bool plot);

// Aggregates eval_test results of several runs into one table keyed by the
// augmentation flags in each run's config (the 2x2 ablation shape).
void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path);

}  // namespace segkit
