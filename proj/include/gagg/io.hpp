#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gagg/eval.hpp"
#include "gagg/gat.hpp"
#include "gagg/matrix.hpp"
#include "gagg/readout.hpp"

namespace gagg {

// Binary layouts are pinned: magic, u32 version, then payload; all integers
// u32 little-endian, all reals float64 little-endian.
inline constexpr char kFeatureMagic[4] = {'G', 'A', 'F', 'F'};
inline constexpr char kCheckpointMagic[4] = {'G', 'A', 'G', 'G'};
inline constexpr char kEmbeddingMagic[4] = {'G', 'A', 'G', 'E'};
inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline void put_f64(std::ostream& os, double d) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline bool try_u32(std::istream& is, std::uint32_t& out) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) return false;
  out = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  std::uint32_t v;
  if (!try_u32(is, v)) throw FormatError(std::string("truncated file: ") + what);
  return v;
}

inline double get_f64(std::istream& is, const char* what) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (is.gcount() != 8) throw FormatError(std::string("truncated file: ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

inline void check_magic(std::istream& is, const char (&magic)[4], const char* kind) {
  char b[4];
  is.read(b, 4);
  if (is.gcount() != 4 || b[0] != magic[0] || b[1] != magic[1] || b[2] != magic[2] ||
      b[3] != magic[3]) {
    throw FormatError(std::string("bad magic for ") + kind + " file");
  }
  std::uint32_t version = get_u32(is, "version");
  if (version != kFormatVersion) {
    throw FormatError(std::string(kind) + " file: unsupported version " + std::to_string(version));
  }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open file: " + path.string());
  return is;
}

/// Write-temp-then-rename so concurrent readers never see a partial file.
template <typename WriteFn>
void atomic_write(const std::filesystem::path& path, WriteFn&& fn) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open file for writing: " + tmp.string());
    fn(os);
    os.flush();
    if (!os) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void put_matrix(std::ostream& os, const Matrix& m) {
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) put_f64(os, v);
}

inline Matrix get_matrix(std::istream& is, const char* what) {
  int rows = static_cast<int>(get_u32(is, what));
  int cols = static_cast<int>(get_u32(is, what));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = get_f64(is, what);
  return m;
}

}  // namespace detail

// ---- feature files: magic "GAFF", version, N, F, row-major float64 --------

inline void write_feature_file(const std::filesystem::path& path, const Matrix& features) {
  detail::atomic_write(path, [&features](std::ostream& os) {
    os.write(kFeatureMagic, 4);
    detail::put_u32(os, kFormatVersion);
    detail::put_matrix(os, features);
  });
}

inline FrameGraph read_feature_file(const std::filesystem::path& path) {
  std::ifstream is = detail::open_input(path);
  detail::check_magic(is, kFeatureMagic, "feature");
  Matrix m = detail::get_matrix(is, "feature data");
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("feature file: trailing bytes after matrix data");
  }
  return FrameGraph(std::move(m));
}

// ---- checkpoints: magic "GAGG", version, named blocks until EOF -----------

using NamedMatrices = std::vector<std::pair<std::string, Matrix>>;

inline void write_checkpoint(const std::filesystem::path& path, const NamedMatrices& blocks) {
  detail::atomic_write(path, [&blocks](std::ostream& os) {
    os.write(kCheckpointMagic, 4);
    detail::put_u32(os, kFormatVersion);
    for (const auto& [name, matrix] : blocks) {
      detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      detail::put_matrix(os, matrix);
    }
  });
}

inline NamedMatrices read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is = detail::open_input(path);
  detail::check_magic(is, kCheckpointMagic, "checkpoint");
  NamedMatrices blocks;
  std::uint32_t name_len;
  while (detail::try_u32(is, name_len)) {
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    if (is.gcount() != static_cast<std::streamsize>(name_len)) {
      throw FormatError("truncated file: checkpoint block name");
    }
    Matrix m = detail::get_matrix(is, "checkpoint block");
    blocks.emplace_back(std::move(name), std::move(m));
  }
  return blocks;
}

// ---- embedding store: magic "GAGE", version, (id, dim, values) records ----

/// Utterance-id keyed embeddings with a uniform dimension.
class EmbeddingStore {
 public:
  void insert(const std::string& id, UtteranceEmbedding emb) {
    if (id.empty()) throw ConfigError("embedding store: empty utterance id");
    if (emb.values.rows() != 1 || emb.dim() < 1) {
      throw ShapeError("embedding store: want a 1xD embedding, got " + emb.values.shape_string());
    }
    if (dim_ >= 0 && emb.dim() != dim_) {
      throw ShapeError("embedding store: dim " + std::to_string(emb.dim()) +
                       " does not match store dim " + std::to_string(dim_));
    }
    if (!map_.emplace(id, std::move(emb)).second) {
      throw ConfigError("embedding store: duplicate utterance id '" + id + "'");
    }
    dim_ = map_.begin()->second.dim();
  }

  const UtteranceEmbedding& at(const std::string& id) const {
    auto it = map_.find(id);
    if (it == map_.end()) throw EvaluationError("embedding store: unknown utterance id '" + id + "'");
    return it->second;
  }

  bool contains(const std::string& id) const { return map_.count(id) > 0; }
  std::size_t size() const { return map_.size(); }
  int dim() const { return dim_; }
  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

 private:
  std::map<std::string, UtteranceEmbedding> map_;  // ordered: deterministic files
  int dim_ = -1;
};

inline void write_embedding_store(const std::filesystem::path& path, const EmbeddingStore& store) {
  detail::atomic_write(path, [&store](std::ostream& os) {
    os.write(kEmbeddingMagic, 4);
    detail::put_u32(os, kFormatVersion);
    for (const auto& [id, emb] : store) {
      detail::put_u32(os, static_cast<std::uint32_t>(id.size()));
      os.write(id.data(), static_cast<std::streamsize>(id.size()));
      detail::put_u32(os, static_cast<std::uint32_t>(emb.dim()));
      for (double v : emb.values.values()) detail::put_f64(os, v);
    }
  });
}

inline EmbeddingStore read_embedding_store(const std::filesystem::path& path) {
  std::ifstream is = detail::open_input(path);
  detail::check_magic(is, kEmbeddingMagic, "embedding store");
  EmbeddingStore store;
  std::uint32_t id_len;
  while (detail::try_u32(is, id_len)) {
    std::string id(id_len, '\0');
    is.read(id.data(), static_cast<std::streamsize>(id_len));
    if (is.gcount() != static_cast<std::streamsize>(id_len)) {
      throw FormatError("truncated file: embedding id");
    }
    int dim = static_cast<int>(detail::get_u32(is, "embedding dim"));
    Matrix m(1, dim);
    for (double& v : m.values()) v = detail::get_f64(is, "embedding values");
    store.insert(id, UtteranceEmbedding{std::move(m)});
  }
  return store;
}

// ---- trial lists: ASCII lines "label enroll_id test_id" --------------------

inline std::vector<Trial> parse_trials_text(const std::string& text) {
  std::vector<Trial> trials;
  std::istringstream is(text);
  std::string line;
  int line_number = 0;
  while (std::getline(is, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string label, enroll, test, extra;
    ls >> label >> enroll >> test;
    if (ls.fail() || enroll.empty() || test.empty()) {
      throw ParseError("trial line needs 'label enroll_id test_id'", line_number);
    }
    if (ls >> extra) {
      throw ParseError("trial line has trailing tokens", line_number);
    }
    Trial t;
    if (label == "1") {
      t.label = TrialLabel::kTarget;
    } else if (label == "0") {
      t.label = TrialLabel::kNontarget;
    } else {
      throw ParseError("trial label must be 0 or 1, got '" + label + "'", line_number);
    }
    t.enroll_id = enroll;
    t.test_id = test;
    trials.push_back(std::move(t));
  }
  return trials;
}

inline std::vector<Trial> parse_trials(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_trials_text(buf.str());
}

// ---- score files: ASCII lines "enroll_id test_id score" (6 decimals) ------

struct ScoreLine {
  std::string enroll_id;
  std::string test_id;
  double score;
};

inline void write_scores_file(const std::filesystem::path& path,
                              const std::vector<ScoreLine>& lines) {
  detail::atomic_write(path, [&lines](std::ostream& os) {
    char buf[64];
    for (const ScoreLine& l : lines) {
      std::snprintf(buf, sizeof(buf), "%.6f", l.score);
      os << l.enroll_id << " " << l.test_id << " " << buf << "\n";
    }
  });
}

inline std::vector<ScoreLine> read_scores_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open file: " + path.string());
  std::vector<ScoreLine> lines;
  std::string line;
  int line_number = 0;
  while (std::getline(is, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(line);
    ScoreLine sl;
    ls >> sl.enroll_id >> sl.test_id >> sl.score;
    if (ls.fail()) throw ParseError("score line needs 'enroll_id test_id score'", line_number);
    lines.push_back(std::move(sl));
  }
  return lines;
}

}  // namespace gagg
