#include "mpm/parsers.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mpm/error.hpp"
#include "mpm/log.hpp"

namespace mpm {

namespace {

std::string line_prefix(int line) { return "line " + std::to_string(line) + ": "; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return in;
}

}  // namespace

const std::set<std::string>& default_timit_vowels() {
  static const std::set<std::string> kVowels{"iy", "ih", "eh", "ey", "ae", "aa", "aw", "ay", "ah", "ao",
                                             "oy", "ow", "uh", "uw", "ux", "er", "ax", "ix", "axr", "ax-h"};
  return kVowels;
}

TimitAlignment parse_timit_alignment(std::istream& in, const TimitOptions& opts) {
  TimitAlignment a;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty()) continue;
    std::istringstream ss(text);
    Phone p;
    if (!(ss >> p.start_sample >> p.end_sample >> p.label)) {
      throw Error(ErrorCode::kParse, line_prefix(line) + "expected 'start end phone'");
    }
    if (p.end_sample <= p.start_sample || p.start_sample < 0) {
      throw Error(ErrorCode::kParse, line_prefix(line) + "phone boundaries not increasing");
    }
    if (!a.phones.empty() && p.start_sample < a.phones.back().end_sample) {
      throw Error(ErrorCode::kParse, line_prefix(line) + "phone starts before the previous one ends");
    }
    a.phones.push_back(p);
  }

  const double hop_samples = opts.hop_seconds * opts.sample_rate;
  int frames = opts.num_frames;
  if (frames < 0) {
    frames = a.phones.empty() ? 0 : static_cast<int>(std::floor(a.phones.back().end_sample / hop_samples + 1e-9));
  }
  a.vowel_frames.assign(static_cast<std::size_t>(frames), 0);
  std::size_t k = 0;
  for (int i = 0; i < frames; ++i) {
    const auto s = std::lround(i * hop_samples);
    while (k < a.phones.size() && a.phones[k].end_sample <= s) ++k;
    if (k < a.phones.size() && a.phones[k].start_sample <= s && opts.vowels.count(a.phones[k].label)) {
      a.vowel_frames[static_cast<std::size_t>(i)] = 1;
    }
  }
  for (const Phone& p : a.phones) a.syllable_count += static_cast<int>(opts.vowels.count(p.label));
  return a;
}

TimitAlignment parse_timit_alignment_file(const std::string& path, const TimitOptions& opts) {
  std::ifstream in = open_text(path);
  return parse_timit_alignment(in, opts);
}

void write_timit_alignment(std::ostream& out, const std::vector<Phone>& phones) {
  for (const Phone& p : phones) out << p.start_sample << ' ' << p.end_sample << ' ' << p.label << '\n';
}

const std::set<std::string>& prominence_accents() {
  static const std::set<std::string> kAccents{"H*", "L*", "L*+H", "L+H*", "H+", "!H*"};
  return kAccents;
}

std::vector<TobiWord> parse_tobi_labels(std::istream& in) {
  std::vector<TobiWord> words;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty() || raw[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(raw);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(trim(f));
    if (fields.size() != 3 && fields.size() != 5) {
      throw Error(ErrorCode::kParse, line_prefix(line) + "expected 3 or 5 tab-separated fields, got " +
                                         std::to_string(fields.size()));
    }
    TobiWord w;
    w.word = fields[0];
    if (w.word.empty()) throw Error(ErrorCode::kParse, line_prefix(line) + "empty word");

    std::istringstream accents(fields[1]);
    std::string a;
    while (accents >> a) {
      if (a == "_") continue;
      if (prominence_accents().count(a)) {
        w.accents.push_back(a);
      } else {
        warn(line_prefix(line) + "unknown accent '" + a + "' on '" + w.word + "' skipped");
      }
    }

    const std::string& b = fields[2];
    const bool modifier_ok = b.size() == 1 || (b.size() == 2 && (b[1] == '-' || b[1] == 'p' || b[1] == '?'));
    if (b.empty() || b[0] < '0' || b[0] > '4' || !modifier_ok) {
      throw Error(ErrorCode::kParse, line_prefix(line) + "break index '" + b + "' not in 0..4");
    }
    w.break_index = b[0] - '0';
    w.prominent = w.accents.empty() ? 0 : 1;
    w.boundary = w.break_index >= 3 ? 1 : 0;
    if (fields.size() == 5) {
      try {
        std::size_t a = 0, b = 0;
        w.start_seconds = std::stod(fields[3], &a);
        w.end_seconds = std::stod(fields[4], &b);
        if (a != fields[3].size() || b != fields[4].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, line_prefix(line) + "bad word timing");
      }
      if (w.start_seconds < 0.0 || w.end_seconds <= w.start_seconds) {
        throw Error(ErrorCode::kParse, line_prefix(line) + "word timing not increasing");
      }
    }
    words.push_back(std::move(w));
  }
  return words;
}

std::vector<TobiWord> parse_tobi_labels_file(const std::string& path) {
  std::ifstream in = open_text(path);
  return parse_tobi_labels(in);
}

void write_tobi_labels(std::ostream& out, const std::vector<TobiWord>& words) {
  for (const TobiWord& w : words) {
    out << w.word << '\t';
    if (w.accents.empty()) {
      out << '_';
    } else {
      for (std::size_t i = 0; i < w.accents.size(); ++i) out << (i ? " " : "") << w.accents[i];
    }
    out << '\t' << w.break_index;
    if (w.timed()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "\t%.17g\t%.17g", w.start_seconds, w.end_seconds);
      out << buf;
    }
    out << '\n';
  }
}

RavdessId parse_ravdess_id(const std::string& filename) {
  const std::string stem = std::filesystem::path(filename).stem().string();
  RavdessId id;
  std::stringstream ss(stem);
  std::string f;
  while (std::getline(ss, f, '-')) {
    if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorCode::kParse, "'" + filename + "': field '" + f + "' is not numeric");
    }
    id.fields.push_back(std::stoi(f));
  }
  if (id.fields.size() != 7) {
    throw Error(ErrorCode::kParse,
                "'" + filename + "': expected 7 fields, got " + std::to_string(id.fields.size()));
  }
  if (id.fields[2] < 1 || id.fields[2] > 8) {
    throw Error(ErrorCode::kParse, "'" + filename + "': emotion code outside 01..08");
  }
  id.emotion = id.fields[2] - 1;
  id.speaker = id.fields[6];
  return id;
}

}  // namespace mpm
