#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "mpm/types.hpp"

namespace mpm {

// TIMIT-style .phn: "start_sample end_sample phone" per line.

struct Phone {
  long start_sample = 0;
  long end_sample = 0;
  std::string label;

  friend bool operator==(const Phone&, const Phone&) = default;
};

struct TimitAlignment {
  std::vector<Phone> phones;
  Flags vowel_frames;
  int syllable_count = 0;
};

const std::set<std::string>& default_timit_vowels();

struct TimitOptions {
  std::set<std::string> vowels = default_timit_vowels();
  int sample_rate = 16000;
  double hop_seconds = 0.01;
  // Frames to emit; -1 derives floor(last_end / hop_samples).
  int num_frames = -1;
};

/// Frame i is flagged when sample round(i * hop * sr) lies inside a vowel
/// phone. Each vowel phone counts as one syllable.
TimitAlignment parse_timit_alignment(std::istream& in, const TimitOptions& opts = {});
TimitAlignment parse_timit_alignment_file(const std::string& path, const TimitOptions& opts = {});
void write_timit_alignment(std::ostream& out, const std::vector<Phone>& phones);

// ToBI-style word tier: one word per line, three tab-separated fields
//   word <TAB> accents <TAB> break_index [<TAB> start_seconds <TAB> end_seconds]
// accents is a space-separated list of per-syllable accent symbols, "_" for
// none. break_index is 0..4, optionally followed by one of "-", "p", "?".
// Blank lines and lines starting with '#' are ignored.

const std::set<std::string>& prominence_accents();

struct TobiWord {
  std::string word;
  std::vector<std::string> accents;  // recognised symbols only
  int break_index = 0;
  int prominent = 0;
  int boundary = 0;
  double start_seconds = -1.0;  // -1 when the line carries no timing
  double end_seconds = -1.0;

  bool timed() const { return start_seconds >= 0.0; }

  friend bool operator==(const TobiWord&, const TobiWord&) = default;
};

/// Unknown accent symbols are skipped with a warning.
std::vector<TobiWord> parse_tobi_labels(std::istream& in);
std::vector<TobiWord> parse_tobi_labels_file(const std::string& path);
void write_tobi_labels(std::ostream& out, const std::vector<TobiWord>& words);

// RAVDESS-style file names: seven hyphen-separated numeric fields
// modality-channel-emotion-intensity-statement-repetition-actor.

struct RavdessId {
  int emotion = 0;  // emotion field - 1, in 0..7
  int speaker = 0;  // actor field
  std::vector<int> fields;
};

RavdessId parse_ravdess_id(const std::string& filename);

}  // namespace mpm
