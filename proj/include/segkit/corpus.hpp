#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "segkit/boundary.hpp"

namespace segkit {

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
  std::string utterance_id;
  std::string audio_path;
  std::string annotation_path;
  std::string speaker_id;
  Split split = Split::train;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;

  std::vector<ManifestEntry> split_entries(Split s) const;
};

// TIMIT .phn lines: "<start_sample> <end_sample> <label>".
std::vector<Interval> parse_timit_phn(std::istream& text);

// Buckeye .phones: free-text header terminated by a line starting with '#',
// then "<end_time_s> <dbl> <label>" lines; times are segment END times.
std::vector<std::pair<double, std::string>> parse_buckeye_phones(std::istream& text);

// Converts Buckeye (end_time, label) pairs to contiguous sample intervals
// (the first segment starts at sample 0).
std::vector<Interval> buckeye_intervals(const std::vector<std::pair<double, std::string>>& phones,
                                        int sample_rate);

bool is_buckeye_nonspeech(const std::string& label);

// Cuts an interval list into utterance chunks at non-speech intervals longer
// than min_pause_s; the cutting intervals themselves are dropped, shorter
// non-speech intervals are retained inside chunks.
std::vector<std::vector<Interval>> chunk_at_pauses(const std::vector<Interval>& intervals,
                                                   int sample_rate, double min_pause_s = 0.150);

Manifest build_timit_manifest(const std::string& root, double val_fraction, std::uint64_t seed);
Manifest build_buckeye_manifest(const std::string& root, std::uint64_t seed);

// Manifest file: first line "#segkit-manifest\tv1\tseed=<seed>", then one
// tab-separated record per line: utt_id, audio, annotation, speaker, split.
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// 16-bit PCM mono audio; accepts RIFF WAV and NIST SPHERE containers.
struct AudioClip {
  std::vector<double> samples;  // in [-1, 1)
  int sample_rate = 16000;
};

AudioClip read_audio(const std::string& path);
void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate);

}  // namespace segkit
