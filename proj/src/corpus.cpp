#include "segkit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "segkit/error.hpp"

namespace fs = std::filesystem;

namespace segkit {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw validation_error("unknown split name: " + name);
}

std::vector<ManifestEntry> Manifest::split_entries(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

std::vector<Interval> parse_timit_phn(std::istream& text) {
  std::vector<Interval> out;
  std::string line;
  int line_no = 0;
  while (std::getline(text, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::int64_t start = 0, end = 0;
    std::string label;
    if (!(ls >> start)) {
      std::string rest;
      if (!(std::istringstream(line) >> rest)) continue;  // blank line
      throw validation_error("parse_timit_phn: line " + std::to_string(line_no) +
                             ": expected integer start sample");
    }
    if (!(ls >> end >> label))
      throw validation_error("parse_timit_phn: line " + std::to_string(line_no) +
                             ": missing field");
    out.push_back({start, end, label});
  }
  if (out.empty()) throw validation_error("parse_timit_phn: empty annotation");
  return out;
}

std::vector<std::pair<double, std::string>> parse_buckeye_phones(std::istream& text) {
  std::string line;
  int line_no = 0;
  bool header_done = false;
  while (std::getline(text, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') {
      header_done = true;
      break;
    }
  }
  if (!header_done)
    throw validation_error("parse_buckeye_phones: missing '#' header terminator");

  std::vector<std::pair<double, std::string>> out;
  while (std::getline(text, line)) {
    ++line_no;
    std::istringstream ls(line);
    double time = 0;
    std::string dbl, label;
    if (!(ls >> time)) continue;  // blank line
    if (!(ls >> dbl >> label))
      throw validation_error("parse_buckeye_phones: line " + std::to_string(line_no) +
                             ": missing field");
    if (!out.empty() && time <= out.back().first)
      throw validation_error("parse_buckeye_phones: line " + std::to_string(line_no) +
                             ": non-monotonic time " + std::to_string(time));
    out.emplace_back(time, label);
  }
  return out;
}

std::vector<Interval> buckeye_intervals(const std::vector<std::pair<double, std::string>>& phones,
                                        int sample_rate) {
  std::vector<Interval> out;
  std::int64_t prev = 0;
  for (const auto& [end_s, label] : phones) {
    const auto end = static_cast<std::int64_t>(std::llround(end_s * sample_rate));
    if (end <= prev) continue;  // zero-length after rounding
    out.push_back({prev, end, label});
    prev = end;
  }
  return out;
}

bool is_buckeye_nonspeech(const std::string& label) {
  if (label.empty()) return true;
  if (label[0] == '{' || label[0] == '<') return true;
  std::string low;
  for (char c : label) low.push_back(static_cast<char>(std::tolower(c)));
  return low == "sil" || low == "noise" || low == "vocnoise" || low == "iver" ||
         low == "laugh" || low == "unknown";
}

std::vector<std::vector<Interval>> chunk_at_pauses(const std::vector<Interval>& intervals,
                                                   int sample_rate, double min_pause_s) {
  const auto min_len = static_cast<std::int64_t>(min_pause_s * sample_rate);
  std::vector<std::vector<Interval>> chunks;
  std::vector<Interval> cur;
  for (const auto& iv : intervals) {
    const bool cut = is_buckeye_nonspeech(iv.label) && iv.end_sample - iv.start_sample > min_len;
    if (cut) {
      if (!cur.empty()) chunks.push_back(std::move(cur));
      cur.clear();
    } else {
      if (!cur.empty() && cur.back().end_sample != iv.start_sample) {
        // gap created by a dropped pause: rebase contiguity by starting a new chunk
        chunks.push_back(std::move(cur));
        cur.clear();
      }
      cur.push_back(iv);
    }
  }
  if (!cur.empty()) chunks.push_back(std::move(cur));
  return chunks;
}

namespace {
std::vector<fs::path> find_files(const fs::path& root, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string e = entry.path().extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string utterance_id_from(const fs::path& root, const fs::path& p) {
  std::string rel = fs::relative(p, root).replace_extension("").string();
  std::replace(rel.begin(), rel.end(), '/', '_');
  return rel;
}

fs::path sibling_audio(const fs::path& ann) {
  for (const char* ext : {".wav", ".WAV", ".sph"}) {
    fs::path cand = ann;
    cand.replace_extension(ext);
    if (fs::exists(cand)) return cand;
  }
  throw validation_error("no audio file next to " + ann.string());
}
}  // namespace

Manifest build_timit_manifest(const std::string& root, double val_fraction, std::uint64_t seed) {
  const fs::path train_dir = fs::path(root) / "TRAIN";
  const fs::path test_dir = fs::path(root) / "TEST";
  if (!fs::is_directory(train_dir) || !fs::is_directory(test_dir))
    throw validation_error("build_timit_manifest: expected TRAIN/ and TEST/ under " + root);

  Manifest m;
  m.seed = seed;

  auto train_phns = find_files(train_dir, ".phn");
  std::vector<std::size_t> order(train_phns.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(train_phns.size())));

  std::vector<Split> assign(train_phns.size(), Split::train);
  for (std::size_t i = 0; i < n_val; ++i) assign[order[i]] = Split::val;

  for (std::size_t i = 0; i < train_phns.size(); ++i) {
    const auto& phn = train_phns[i];
    ManifestEntry e;
    e.utterance_id = utterance_id_from(root, phn);
    e.annotation_path = phn.string();
    e.audio_path = sibling_audio(phn).string();
    e.speaker_id = phn.parent_path().filename().string();
    e.split = assign[i];
    m.entries.push_back(std::move(e));
  }
  for (const auto& phn : find_files(test_dir, ".phn")) {
    ManifestEntry e;
    e.utterance_id = utterance_id_from(root, phn);
    e.annotation_path = phn.string();
    e.audio_path = sibling_audio(phn).string();
    e.speaker_id = phn.parent_path().filename().string();
    e.split = Split::test;
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest build_buckeye_manifest(const std::string& root, std::uint64_t seed) {
  std::vector<fs::path> speakers;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) speakers.push_back(entry.path());
  std::sort(speakers.begin(), speakers.end());
  if (speakers.size() < 3)
    throw validation_error("build_buckeye_manifest: need at least 3 speaker directories");

  std::mt19937_64 rng(seed);
  std::shuffle(speakers.begin(), speakers.end(), rng);
  const auto n = speakers.size();
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * 0.1)));
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * 0.1)));

  Manifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    Split split = Split::train;
    if (i < n_val)
      split = Split::val;
    else if (i < n_val + n_test)
      split = Split::test;
    for (const auto& phones : find_files(speakers[i], ".phones")) {
      ManifestEntry e;
      e.utterance_id = utterance_id_from(root, phones);
      e.annotation_path = phones.string();
      e.audio_path = sibling_audio(phones).string();
      e.speaker_id = speakers[i].filename().string();
      e.split = split;
      m.entries.push_back(std::move(e));
    }
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.utterance_id < b.utterance_id;
            });
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw runtime_failure("save_manifest: cannot open " + path);
  f << "#segkit-manifest\tv1\tseed=" << m.seed << "\n";
  for (const auto& e : m.entries)
    f << e.utterance_id << '\t' << e.audio_path << '\t' << e.annotation_path << '\t'
      << e.speaker_id << '\t' << split_name(e.split) << '\n';
  if (!f) throw runtime_failure("save_manifest: write failed for " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw runtime_failure("load_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("#segkit-manifest\tv1\tseed=", 0) != 0)
    throw validation_error("load_manifest: bad header in " + path);
  Manifest m;
  m.seed = std::stoull(line.substr(std::strlen("#segkit-manifest\tv1\tseed=")));
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 5)
      throw validation_error("load_manifest: line " + std::to_string(line_no) +
                             ": expected 5 tab-separated fields");
    m.entries.push_back(
        {fields[0], fields[1], fields[2], fields[3], split_from_name(fields[4])});
  }
  return m;
}

namespace {
std::uint32_t read_u32le(std::istream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
std::uint16_t read_u16le(std::istream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

AudioClip read_riff_wav(std::ifstream& f, const std::string& path) {
  f.seekg(4);
  read_u32le(f);  // riff size
  char wave[4];
  f.read(wave, 4);
  if (std::memcmp(wave, "WAVE", 4) != 0)
    throw validation_error("read_audio: not a WAVE file: " + path);

  int channels = 0, bits = 0, rate = 0;
  std::vector<std::int16_t> pcm;
  while (f) {
    char id[4];
    f.read(id, 4);
    if (!f) break;
    const std::uint32_t size = read_u32le(f);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      const auto fmt = read_u16le(f);
      channels = read_u16le(f);
      rate = static_cast<int>(read_u32le(f));
      read_u32le(f);
      read_u16le(f);
      bits = read_u16le(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      if (fmt != 1) throw validation_error("read_audio: only PCM WAV supported: " + path);
    } else if (std::memcmp(id, "data", 4) == 0) {
      pcm.resize(size / 2);
      f.read(reinterpret_cast<char*>(pcm.data()), size);
      break;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (bits != 16) throw validation_error("read_audio: only 16-bit PCM supported: " + path);
  if (channels != 1) throw validation_error("read_audio: only mono audio supported: " + path);

  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i)
    clip.samples[i] = static_cast<double>(pcm[i]) / 32768.0;
  return clip;
}

AudioClip read_sphere(std::ifstream& f, const std::string& path) {
  f.seekg(0);
  std::string l1, l2;
  std::getline(f, l1);
  std::getline(f, l2);
  const long header_size = std::stol(l2);
  int rate = 16000, channels = 1, bytes_per = 2;
  std::string byte_format = "01";
  std::string line;
  while (static_cast<long>(f.tellg()) < header_size && std::getline(f, line)) {
    std::istringstream ls(line);
    std::string key, type, value;
    if (!(ls >> key >> type >> value)) continue;
    if (key == "sample_rate") rate = std::stoi(value);
    else if (key == "channel_count") channels = std::stoi(value);
    else if (key == "sample_n_bytes") bytes_per = std::stoi(value);
    else if (key == "sample_byte_format") byte_format = value;
    else if (key == "end_head") break;
  }
  if (channels != 1) throw validation_error("read_audio: only mono SPHERE supported: " + path);
  if (bytes_per != 2) throw validation_error("read_audio: only 16-bit SPHERE supported: " + path);

  f.seekg(0, std::ios::end);
  const long data_bytes = static_cast<long>(f.tellg()) - header_size;
  f.seekg(header_size);
  std::vector<char> raw(static_cast<std::size_t>(data_bytes));
  f.read(raw.data(), data_bytes);

  AudioClip clip;
  clip.sample_rate = rate;
  const std::size_t n = raw.size() / 2;
  clip.samples.resize(n);
  const bool big_endian = byte_format == "10";
  for (std::size_t i = 0; i < n; ++i) {
    const auto b0 = static_cast<unsigned char>(raw[2 * i]);
    const auto b1 = static_cast<unsigned char>(raw[2 * i + 1]);
    const auto v = static_cast<std::int16_t>(big_endian ? (b0 << 8) | b1 : (b1 << 8) | b0);
    clip.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return clip;
}
}  // namespace

AudioClip read_audio(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw runtime_failure("read_audio: cannot open " + path);
  char magic[8] = {};
  f.read(magic, 8);
  if (std::memcmp(magic, "RIFF", 4) == 0) return read_riff_wav(f, path);
  if (std::memcmp(magic, "NIST_1A", 7) == 0) return read_sphere(f, path);
  throw validation_error("read_audio: unrecognized container (expected RIFF or NIST_1A): " +
                         path);
}

void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw runtime_failure("write_wav: cannot open " + path);
  std::vector<std::int16_t> pcm(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double v = std::clamp(samples[i], -1.0, 32767.0 / 32768.0);
    pcm[i] = static_cast<std::int16_t>(std::lrint(v * 32768.0));
  }
  const std::uint32_t data_size = static_cast<std::uint32_t>(pcm.size() * 2);
  auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto w16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  f.write("RIFF", 4);
  w32(36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  w32(16);
  w16(1);  // PCM
  w16(1);  // mono
  w32(static_cast<std::uint32_t>(sample_rate));
  w32(static_cast<std::uint32_t>(sample_rate * 2));
  w16(2);
  w16(16);
  f.write("data", 4);
  w32(data_size);
  f.write(reinterpret_cast<const char*>(pcm.data()), data_size);
  if (!f) throw runtime_failure("write_wav: write failed for " + path);
}

}  // namespace segkit
