#pragma once

// Model file: a versioned line-oriented container.
//
//   beamparse-model 1
//   encoding text|f32
//   dims word_vocab=.. tag_vocab=.. label_vocab=.. word_dim=.. tag_dim=.. label_dim=..
//        hidden1=.. hidden2=.. num_decisions=..        (one line)
//   vocab <group> <size>            followed by "<id>\t<string>" per non-special entry
//   matrix <name> <rows> <cols>     followed by the row-major values
//   perceptron phi=<blocks> dim=<d> decisions=<n> averaged=<0|1>   (optional)
//   end
//
// With encoding text each matrix row is one line of shortest round-trip
// decimals, so load(save(m)) == m exactly. With f32 the values follow the
// header line as little-endian IEEE-754 binary32 and a newline.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "beamparse/errors.hpp"
#include "beamparse/feature_model.hpp"
#include "beamparse/network.hpp"
#include "beamparse/perceptron.hpp"

namespace beamparse {

struct Model {
  Vocabularies vocabs;
  NetworkParams network;
  std::optional<PerceptronModel> perceptron;

  TransitionSystem transition_system() const { return vocabs.transition_system(); }

  friend bool operator==(const Model&, const Model&) = default;
};

enum class MatrixEncoding { kText, kFloat32 };

namespace detail {

inline constexpr const char* kModelMagic = "beamparse-model";
inline constexpr int kModelVersion = 1;

inline void write_double(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, ptr - buf);
}

template <class M>
void write_matrix(std::ostream& out, const std::string& name, const M& m, MatrixEncoding enc) {
  const auto rows = m.rows();
  const auto cols = m.cols();
  out << "matrix " << name << ' ' << rows << ' ' << cols << '\n';
  if (enc == MatrixEncoding::kText) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (c) out << ' ';
        write_double(out, m(r, c));
      }
      out << '\n';
    }
    return;
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
      unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
      out.write(reinterpret_cast<const char*>(bytes), 4);
    }
  }
  out << '\n';
}

class ModelReader {
 public:
  explicit ModelReader(std::istream& in) : in_(in) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) fail("unexpected end of file");
    ++line_no_;
    return s;
  }

  std::vector<std::string> fields() {
    std::istringstream ss(line());
    std::vector<std::string> out;
    std::string f;
    while (ss >> f) out.push_back(f);
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ModelFormatError("model file line " + std::to_string(line_no_) + ": " + what);
  }

  long to_long(const std::string& s) const {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("expected integer, got '" + s + "'");
    return v;
  }

  std::string value_of(const std::string& field, const std::string& key) const {
    if (field.rfind(key + "=", 0) != 0) fail("expected " + key + "=..., got '" + field + "'");
    return field.substr(key.size() + 1);
  }

  Vocabulary vocab(const std::string& group) {
    const auto head = fields();
    if (head.size() != 3 || head[0] != "vocab" || head[1] != group) fail("expected 'vocab " + group + " <size>'");
    const long size = to_long(head[2]);
    std::vector<std::string> entries;
    for (long i = 0; i < size; ++i) {
      const auto s = line();
      const auto tab = s.find('\t');
      if (tab == std::string::npos || to_long(s.substr(0, tab)) != i + Vocabulary::kNumSpecial) {
        fail("bad vocabulary entry");
      }
      entries.push_back(s.substr(tab + 1));
    }
    return Vocabulary(std::move(entries));
  }

  template <class M>
  void matrix(const std::string& name, M& m, Eigen::Index rows, Eigen::Index cols, MatrixEncoding enc) {
    const auto head = fields();
    if (head.size() != 4 || head[0] != "matrix" || head[1] != name) fail("expected 'matrix " + name + "'");
    if (to_long(head[2]) != rows || to_long(head[3]) != cols) fail("matrix " + name + " has unexpected shape");
    m.resize(rows, cols);
    if (enc == MatrixEncoding::kText) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto s = line();
        const char* p = s.data();
        const char* end = s.data() + s.size();
        for (Eigen::Index c = 0; c < cols; ++c) {
          while (p < end && *p == ' ') ++p;
          double v = 0.0;
          auto [next, ec] = std::from_chars(p, end, v);
          if (ec != std::errc()) fail("bad number in matrix " + name);
          m(r, c) = v;
          p = next;
        }
      }
      return;
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        unsigned char b[4];
        if (!in_.read(reinterpret_cast<char*>(b), 4)) fail("truncated binary matrix " + name);
        const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
                                   (std::uint32_t{b[3]} << 24);
        m(r, c) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
    if (in_.get() != '\n') fail("missing newline after binary matrix " + name);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline void save_model(const Model& model, std::ostream& out, MatrixEncoding enc = MatrixEncoding::kText) {
  const auto& d = model.network.dims;
  out << detail::kModelMagic << ' ' << detail::kModelVersion << '\n';
  out << "encoding " << (enc == MatrixEncoding::kText ? "text" : "f32") << '\n';
  out << "dims word_vocab=" << d.word_vocab << " tag_vocab=" << d.tag_vocab << " label_vocab=" << d.label_vocab
      << " word_dim=" << d.word_dim << " tag_dim=" << d.tag_dim << " label_dim=" << d.label_dim
      << " hidden1=" << d.hidden1 << " hidden2=" << d.hidden2 << " num_decisions=" << d.num_decisions << '\n';
  auto vocab = [&](const char* group, const Vocabulary& v) {
    out << "vocab " << group << ' ' << v.entries().size() << '\n';
    for (std::size_t i = 0; i < v.entries().size(); ++i)
      out << i + Vocabulary::kNumSpecial << '\t' << v.entries()[i] << '\n';
  };
  vocab("word", model.vocabs.word);
  vocab("tag", model.vocabs.tag);
  vocab("label", model.vocabs.label);
  NetworkParams::zip_blocks([&](const char* name, const auto& m) { detail::write_matrix(out, name, m, enc); },
                            model.network);
  if (model.perceptron) {
    const auto& p = *model.perceptron;
    out << "perceptron phi=" << p.composition.to_string() << " dim=" << p.dim() << " decisions=" << p.num_decisions()
        << " averaged=" << (p.use_averaged ? 1 : 0) << '\n';
    detail::write_matrix(out, "perceptron_weights", p.weights, enc);
    detail::write_matrix(out, "perceptron_averaged", p.averaged, enc);
  }
  out << "end\n";
  if (!out) throw DataError("failed writing model");
}

inline Model load_model(std::istream& in) {
  detail::ModelReader r(in);
  Model m;
  const auto magic = r.fields();
  if (magic.size() != 2 || magic[0] != detail::kModelMagic) r.fail("not a beamparse model file");
  if (r.to_long(magic[1]) != detail::kModelVersion) r.fail("unsupported model version " + magic[1]);
  const auto enc_line = r.fields();
  if (enc_line.size() != 2 || enc_line[0] != "encoding") r.fail("expected encoding line");
  MatrixEncoding enc;
  if (enc_line[1] == "text") enc = MatrixEncoding::kText;
  else if (enc_line[1] == "f32") enc = MatrixEncoding::kFloat32;
  else r.fail("unknown encoding '" + enc_line[1] + "'");

  const auto dims = r.fields();
  if (dims.size() != 10 || dims[0] != "dims") r.fail("expected dims line");
  auto& d = m.network.dims;
  int* targets[] = {&d.word_vocab, &d.tag_vocab, &d.label_vocab, &d.word_dim, &d.tag_dim,
                    &d.label_dim,  &d.hidden1,   &d.hidden2,     &d.num_decisions};
  const char* keys[] = {"word_vocab", "tag_vocab", "label_vocab", "word_dim",     "tag_dim",
                        "label_dim",  "hidden1",   "hidden2",     "num_decisions"};
  for (std::size_t i = 0; i < 9; ++i) *targets[i] = static_cast<int>(r.to_long(r.value_of(dims[i + 1], keys[i])));

  m.vocabs.word = r.vocab("word");
  m.vocabs.tag = r.vocab("tag");
  m.vocabs.label = r.vocab("label");
  if (m.vocabs.word.size() != d.word_vocab || m.vocabs.tag.size() != d.tag_vocab ||
      m.vocabs.label.size() != d.label_vocab || 2 * static_cast<int>(m.vocabs.label.entries().size()) + 1 != d.num_decisions) {
    r.fail("vocabulary sizes disagree with dims");
  }

  const auto shape = NetworkParams::zeros(d);
  NetworkParams::zip_blocks(
      [&](const char* name, auto& target, const auto& like) { r.matrix(name, target, like.rows(), like.cols(), enc); },
      m.network, shape);

  auto next = r.fields();
  if (!next.empty() && next[0] == "perceptron") {
    if (next.size() != 5) r.fail("bad perceptron header");
    PerceptronModel p;
    try {
      p.composition = PhiComposition::parse(r.value_of(next[1], "phi"));
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
    const long dim = r.to_long(r.value_of(next[2], "dim"));
    const long decisions = r.to_long(r.value_of(next[3], "decisions"));
    p.use_averaged = r.to_long(r.value_of(next[4], "averaged")) != 0;
    if (decisions != d.num_decisions || dim != p.composition.dimension(d)) r.fail("perceptron shape mismatch");
    r.matrix("perceptron_weights", p.weights, decisions, dim, enc);
    r.matrix("perceptron_averaged", p.averaged, decisions, dim, enc);
    m.perceptron = std::move(p);
    next = r.fields();
  }
  if (next.size() != 1 || next[0] != "end") r.fail("expected 'end'");
  return m;
}

inline void save_model_file(const Model& model, const std::string& path, MatrixEncoding enc = MatrixEncoding::kText) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save_model(model, out, enc);
}

inline Model load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path);
  return load_model(in);
}

}  // namespace beamparse
