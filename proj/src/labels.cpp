#include "mpm/labels.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mpm/error.hpp"

namespace mpm {

void LabeledUtterance::validate() const {
  for (std::size_t i = 0; i < words.size(); ++i) {
    const FrameSpan& s = words[i].span;
    if (s.start < 0 || s.end <= s.start) throw Error(ErrorCode::kInvalidSpan, id + ": empty or negative word span");
    if (i > 0 && s.start < words[i - 1].span.end) {
      throw Error(ErrorCode::kInvalidSpan, id + ": word spans overlap or are unsorted");
    }
    if (!frame_labels.empty() && s.end > static_cast<int>(frame_labels.size())) {
      throw Error(ErrorCode::kInvalidSpan, id + ": word span past the last frame");
    }
  }
}

std::vector<FrameSpan> flag_runs(const Flags& flags) {
  std::vector<FrameSpan> runs;
  const int n = static_cast<int>(flags.size());
  for (int i = 0; i < n;) {
    if (!flags[static_cast<std::size_t>(i)]) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && flags[static_cast<std::size_t>(j)]) ++j;
    runs.push_back({i, j});
    i = j;
  }
  return runs;
}

Flags flags_from_runs(const std::vector<FrameSpan>& runs, int num_frames) {
  Flags f(static_cast<std::size_t>(num_frames), 0);
  for (const FrameSpan& r : runs) {
    if (r.start < 0 || r.end > num_frames || r.start >= r.end) throw Error(ErrorCode::kInvalidSpan, "run out of range");
    for (int i = r.start; i < r.end; ++i) f[static_cast<std::size_t>(i)] = 1;
  }
  return f;
}

namespace {

const char* kHeader = "id\tclass\tsyllables\tspeaker\tframes\twords\tnuclei";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

int to_int(const std::string& s, int line) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) {
    throw Error(ErrorCode::kParse, "labels manifest line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

FrameSpan to_span(const std::string& s, int line) {
  const auto parts = split(s, '-');
  if (parts.size() != 2) {
    throw Error(ErrorCode::kParse, "labels manifest line " + std::to_string(line) + ": bad span '" + s + "'");
  }
  return {to_int(parts[0], line), to_int(parts[1], line)};
}

}  // namespace

void write_labels_manifest(std::ostream& out, const std::vector<LabeledUtterance>& labels) {
  out << kHeader << '\n';
  for (const LabeledUtterance& u : labels) {
    out << u.id << '\t' << u.utterance_label << '\t' << u.syllable_count << '\t' << u.speaker << '\t'
        << u.frame_labels.size() << '\t';
    if (u.words.empty()) out << '-';
    for (std::size_t i = 0; i < u.words.size(); ++i) {
      const WordLabel& w = u.words[i];
      out << (i ? "," : "") << w.span.start << '-' << w.span.end << ':' << w.prominence << ':' << w.boundary;
    }
    out << '\t';
    const auto runs = flag_runs(u.frame_labels);
    if (runs.empty()) out << '-';
    for (std::size_t i = 0; i < runs.size(); ++i) out << (i ? "," : "") << runs[i].start << '-' << runs[i].end;
    out << '\n';
  }
}

std::vector<LabeledUtterance> read_labels_manifest(std::istream& in, Provenance provenance) {
  std::string raw;
  if (!std::getline(in, raw) || raw != kHeader) throw Error(ErrorCode::kSchema, "labels manifest header mismatch");
  std::vector<LabeledUtterance> out;
  int line = 1;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.empty()) continue;
    const auto f = split(raw, '\t');
    if (f.size() != 7) {
      throw Error(ErrorCode::kParse, "labels manifest line " + std::to_string(line) + ": expected 7 fields");
    }
    LabeledUtterance u;
    u.id = f[0];
    u.utterance_label = to_int(f[1], line);
    u.syllable_count = to_int(f[2], line);
    u.speaker = to_int(f[3], line);
    const int frames = to_int(f[4], line);
    u.provenance = provenance;
    if (f[5] != "-") {
      for (const std::string& w : split(f[5], ',')) {
        const auto parts = split(w, ':');
        if (parts.size() != 3) {
          throw Error(ErrorCode::kParse, "labels manifest line " + std::to_string(line) + ": bad word '" + w + "'");
        }
        WordLabel wl;
        wl.span = to_span(parts[0], line);
        wl.prominence = to_int(parts[1], line);
        wl.boundary = to_int(parts[2], line);
        u.words.push_back(wl);
      }
    }
    std::vector<FrameSpan> runs;
    if (f[6] != "-") {
      for (const std::string& r : split(f[6], ',')) runs.push_back(to_span(r, line));
    }
    u.frame_labels = flags_from_runs(runs, frames);
    u.validate();
    out.push_back(std::move(u));
  }
  return out;
}

void save_labels_manifest(const std::string& path, const std::vector<LabeledUtterance>& labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  write_labels_manifest(out, labels);
}

std::vector<LabeledUtterance> load_labels_manifest(const std::string& path, Provenance provenance) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "labels manifest not found: " + path);
  return read_labels_manifest(in, provenance);
}

}  // namespace mpm
