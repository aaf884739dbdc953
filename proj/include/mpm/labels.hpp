#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mpm/types.hpp"

namespace mpm {

enum class Provenance { kReal, kSynthetic };

struct WordLabel {
  FrameSpan span;
  std::string word;
  int prominence = -1;  // -1 when not annotated
  int boundary = -1;

  friend bool operator==(const WordLabel&, const WordLabel&) = default;
};

struct LabeledUtterance {
  std::string id;
  std::vector<WordLabel> words;  // sorted, non-overlapping
  Flags frame_labels;            // vowel / syllable-nucleus flags
  int utterance_label = -1;      // e.g. emotion class
  int syllable_count = -1;
  int speaker = -1;
  Provenance provenance = Provenance::kReal;

  void validate() const;

  friend bool operator==(const LabeledUtterance&, const LabeledUtterance&) = default;
};

/// Maximal runs of nonzero flags.
std::vector<FrameSpan> flag_runs(const Flags& flags);
Flags flags_from_runs(const std::vector<FrameSpan>& runs, int num_frames);

/// Tab-separated, one utterance per line, with a header:
///   id  class  syllables  speaker  frames  words  nuclei
/// words:  comma list of start-end:prominence:boundary ("-" when empty)
/// nuclei: comma list of start-end runs of frame_labels ("-" when empty)
/// Word text is not stored.
void write_labels_manifest(std::ostream& out, const std::vector<LabeledUtterance>& labels);
std::vector<LabeledUtterance> read_labels_manifest(std::istream& in, Provenance provenance = Provenance::kSynthetic);

void save_labels_manifest(const std::string& path, const std::vector<LabeledUtterance>& labels);
std::vector<LabeledUtterance> load_labels_manifest(const std::string& path,
                                                   Provenance provenance = Provenance::kSynthetic);

}  // namespace mpm
