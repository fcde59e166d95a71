#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segkit/features.hpp"
#include "segkit/metrics.hpp"
#include "segkit/model.hpp"

namespace segkit {

struct TrainExample {
  std::string id;
  std::vector<double> audio;  // raw samples, needed when pitch/formant aug is on
  int sample_rate = 16000;
  MelFrames mel;  // unaugmented cached features
  std::vector<std::uint8_t> labels;
};

struct TrainConfig {
  double lr = 0.0005;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double weight_decay = 0.01;
  int batch_size = 256;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  Tolerance gamma{2};
  HitScheme threshold_metric_scheme = HitScheme::proposed;
  double val_nu = 0.5;  // fixed threshold used for per-epoch validation scoring

  void validate() const {
    if (lr < 0) throw validation_error("TrainConfig: lr must be >= 0");
    if (batch_size < 1) throw validation_error("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 0) throw validation_error("TrainConfig: max_epochs must be >= 0");
  }
};

struct AdamWState {
  std::vector<float> m, v;
  std::int64_t step = 0;
};

// Decoupled weight decay update, applied to every parameter.
void adamw_step(std::vector<float>& params, const std::vector<float>& grad, AdamWState& state,
                const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  PairScore val_conventional, val_proposed;
};

struct TrainResult {
  SuperSegParams<float> best_params;
  int best_epoch = -1;
  double best_val_metric = -1;
  std::vector<EpochRecord> history;
  bool aborted = false;  // non-finite loss; best_params holds the last good checkpoint
};

// Epoch loop of {augment -> features -> teacher-forced forward -> BCE -> AdamW}.
// When run_dir is non-empty, writes last.ckpt (with optimizer state) after each
// epoch, best.ckpt on improvement, and appends to history.txt; a pre-existing
// last.ckpt resumes training from its epoch.
TrainResult train(SuperSegParams<float> params, const TrainConfig& cfg,
                  const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& val_set, const std::string& run_dir = "");

// Grid-searched decision threshold maximizing the pooled R-value of the chosen
// scheme on the validation set; ties go to the smaller threshold.
double tune_threshold(const SuperSegParams<float>& params,
                      const std::vector<TrainExample>& val_set, Tolerance gamma,
                      HitScheme scheme, const std::vector<double>& grid);

std::vector<double> default_threshold_grid();

// Checkpoint binary: magic "SKCK", version, config record, named float32 blobs,
// optional AdamW state, epoch counter.
void save_checkpoint(const SuperSegParams<float>& params, const std::string& path,
                     const AdamWState* opt = nullptr, int epoch = 0);
SuperSegParams<float> load_checkpoint(const std::string& path, AdamWState* opt = nullptr,
                                      int* epoch = nullptr);

// History record file: "#segkit-history v1" header, then per epoch one
// tab-separated line: epoch, train_loss, then P/R/F1/R-value for the
// conventional and proposed schemes at the fixed validation threshold.
void append_history(const std::string& path, const EpochRecord& rec);
std::vector<EpochRecord> load_history(const std::string& path);

}  // namespace segkit
