#pragma once

// Feed-forward scorer: embedding layer, one or two ReLU hidden layers and a
// softmax over the legal decisions of a configuration.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "beamparse/errors.hpp"
#include "beamparse/feature_model.hpp"
#include "beamparse/transition_system.hpp"

namespace beamparse {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct NetworkDims {
  int word_vocab = 0;
  int tag_vocab = 0;
  int label_vocab = 0;
  int word_dim = 64;
  int tag_dim = 32;
  int label_dim = 32;
  int hidden1 = 200;
  int hidden2 = 200;  // 0 for a single hidden layer
  int num_decisions = 0;

  int input_dim() const {
    return kWordFeatures * word_dim + kTagFeatures * tag_dim + kLabelFeatures * label_dim;
  }
  int num_labels() const { return (num_decisions - 1) / 2; }
  int top_hidden() const { return hidden2 > 0 ? hidden2 : hidden1; }

  friend bool operator==(const NetworkDims&, const NetworkDims&) = default;
};

struct NetworkParams {
  NetworkDims dims;
  Matrix word_embeddings;   // word_vocab x word_dim
  Matrix tag_embeddings;    // tag_vocab x tag_dim
  Matrix label_embeddings;  // label_vocab x label_dim
  Matrix hidden1_weights;   // hidden1 x input_dim
  Vector hidden1_bias;
  Matrix hidden2_weights;   // hidden2 x hidden1, empty with one layer
  Vector hidden2_bias;
  Matrix softmax_weights;   // num_decisions x top_hidden
  Vector softmax_bias;

  bool has_second_layer() const { return dims.hidden2 > 0; }

  static NetworkParams zeros(const NetworkDims& d) {
    NetworkParams p;
    p.dims = d;
    p.word_embeddings = Matrix::Zero(d.word_vocab, d.word_dim);
    p.tag_embeddings = Matrix::Zero(d.tag_vocab, d.tag_dim);
    p.label_embeddings = Matrix::Zero(d.label_vocab, d.label_dim);
    p.hidden1_weights = Matrix::Zero(d.hidden1, d.input_dim());
    p.hidden1_bias = Vector::Zero(d.hidden1);
    p.hidden2_weights = Matrix::Zero(d.hidden2, d.hidden2 > 0 ? d.hidden1 : 0);
    p.hidden2_bias = Vector::Zero(d.hidden2);
    p.softmax_weights = Matrix::Zero(d.num_decisions, d.top_hidden());
    p.softmax_bias = Vector::Zero(d.num_decisions);
    return p;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    bool same = a.dims == b.dims;
    zip_blocks([&](const char*, const auto& x, const auto& y) { same = same && x == y; }, a, b);
    return same;
  }

  // Calls f(name, block_of_p0, block_of_p1, ...) for every parameter block.
  template <class F, class... P>
  static void zip_blocks(F&& f, P&... ps) {
    f("word_embeddings", ps.word_embeddings...);
    f("tag_embeddings", ps.tag_embeddings...);
    f("label_embeddings", ps.label_embeddings...);
    f("hidden1_weights", ps.hidden1_weights...);
    f("hidden1_bias", ps.hidden1_bias...);
    f("hidden2_weights", ps.hidden2_weights...);
    f("hidden2_bias", ps.hidden2_bias...);
    f("softmax_weights", ps.softmax_weights...);
    f("softmax_bias", ps.softmax_bias...);
  }
};

inline NetworkDims make_dims(const Vocabularies& vocabs, int word_dim, int tag_dim, int label_dim, int hidden1,
                             int hidden2) {
  NetworkDims d;
  d.word_vocab = vocabs.word.size();
  d.tag_vocab = vocabs.tag.size();
  d.label_vocab = vocabs.label.size();
  d.word_dim = word_dim;
  d.tag_dim = tag_dim;
  d.label_dim = label_dim;
  d.hidden1 = hidden1;
  d.hidden2 = hidden2;
  d.num_decisions = 2 * static_cast<int>(vocabs.label.entries().size()) + 1;
  return d;
}

// Pretrained word vectors keyed by form.
struct Embeddings {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

// Text format: optional "count dim" header, then "word v_1 ... v_D" per line.
inline Embeddings read_embeddings(std::istream& in) {
  Embeddings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw DataError("embeddings line " + std::to_string(line_no) + ": bad value '" + tok + "'");
      }
      values.push_back(v);
    }
    if (line_no == 1 && values.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos) {
      continue;  // "count dim" header
    }
    if (out.dim == 0) out.dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != out.dim || out.dim == 0) {
      throw DataError("embeddings line " + std::to_string(line_no) + ": expected " + std::to_string(out.dim) +
                      " values, got " + std::to_string(values.size()));
    }
    out.vectors.emplace(word, std::move(values));
  }
  return out;
}

struct InitOptions {
  double weight_variance = 1e-4;
  double hidden_bias = 0.2;
};

// W_i, softmax weights and embeddings ~ N(0, variance); hidden biases constant;
// softmax bias zero. Word rows found in `pretrained` are copied over.
// Returns the number of copied rows through `copied` when given.
template <class Rng>
NetworkParams init_params(const NetworkDims& dims, const Vocabulary& words, Rng& rng,
                          const Embeddings* pretrained = nullptr, const InitOptions& options = {},
                          int* copied = nullptr) {
  if (dims.word_dim <= 0 || dims.tag_dim <= 0 || dims.label_dim <= 0 || dims.hidden1 <= 0 ||
      dims.hidden2 < 0 || dims.num_decisions < 1) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  if (pretrained && pretrained->dim != 0 && pretrained->dim != dims.word_dim) {
    throw DataError("embedding dimension " + std::to_string(pretrained->dim) + " does not match word_dim " +
                    std::to_string(dims.word_dim));
  }
  auto p = NetworkParams::zeros(dims);
  std::normal_distribution<double> gauss(0.0, std::sqrt(options.weight_variance));
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  };
  fill(p.word_embeddings);
  fill(p.tag_embeddings);
  fill(p.label_embeddings);
  fill(p.hidden1_weights);
  fill(p.hidden2_weights);
  fill(p.softmax_weights);
  p.hidden1_bias.setConstant(options.hidden_bias);
  p.hidden2_bias.setConstant(options.hidden_bias);

  int n = 0;
  if (pretrained) {
    for (std::size_t i = 0; i < words.entries().size(); ++i) {
      auto it = pretrained->vectors.find(words.entries()[i]);
      if (it == pretrained->vectors.end()) continue;
      const auto row = static_cast<Eigen::Index>(i) + Vocabulary::kNumSpecial;
      for (int k = 0; k < dims.word_dim; ++k) p.word_embeddings(row, k) = it->second[static_cast<std::size_t>(k)];
      ++n;
    }
  }
  if (copied) *copied = n;
  return p;
}

// Activations of one forward pass. Probabilities are exactly zero and log
// probabilities -inf for illegal decisions.
struct ForwardTrace {
  Vector h0;
  Vector z1, h1;
  Vector z2, h2;
  Vector logits;
  std::vector<char> legal;
  Vector probs;
  Vector log_probs;

  const Vector& top_hidden() const { return h2.size() > 0 ? h2 : h1; }
};

namespace detail {

inline std::vector<char> legal_vector(const LegalMask& mask, int num_decisions) {
  const int labels = (num_decisions - 1) / 2;
  std::vector<char> out(static_cast<std::size_t>(num_decisions));
  for (int y = 0; y < num_decisions; ++y) out[static_cast<std::size_t>(y)] = mask.allows(y, labels) ? 1 : 0;
  return out;
}

inline void check_ids(const FeatureIds& f, const NetworkDims& d) {
  auto check = [](const auto& ids, int vocab, const char* group) {
    for (int id : ids) {
      if (id < 0 || id >= vocab) {
        throw std::out_of_range(std::string(group) + " feature id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(vocab));
      }
    }
  };
  check(f.words, d.word_vocab, "word");
  check(f.tags, d.tag_vocab, "tag");
  check(f.labels, d.label_vocab, "label");
}

// Fills probs/log_probs from logits, normalizing over legal entries only.
inline void masked_softmax(ForwardTrace& t) {
  const auto n = t.logits.size();
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Eigen::Index y = 0; y < n; ++y)
    if (t.legal[static_cast<std::size_t>(y)]) max_logit = std::max(max_logit, t.logits[y]);
  if (!std::isfinite(max_logit)) throw std::invalid_argument("no legal decision to normalize over");
  double sum = 0.0;
  for (Eigen::Index y = 0; y < n; ++y)
    if (t.legal[static_cast<std::size_t>(y)]) sum += std::exp(t.logits[y] - max_logit);
  const double log_z = max_logit + std::log(sum);
  t.probs.resize(n);
  t.log_probs.resize(n);
  for (Eigen::Index y = 0; y < n; ++y) {
    if (t.legal[static_cast<std::size_t>(y)]) {
      t.log_probs[y] = t.logits[y] - log_z;
      t.probs[y] = std::exp(t.log_probs[y]);
    } else {
      t.log_probs[y] = -std::numeric_limits<double>::infinity();
      t.probs[y] = 0.0;
    }
  }
}

inline void hidden_and_output(const NetworkParams& p, ForwardTrace& t) {
  t.h1 = t.z1.cwiseMax(0.0);
  if (p.has_second_layer()) {
    t.z2 = p.hidden2_weights * t.h1 + p.hidden2_bias;
    t.h2 = t.z2.cwiseMax(0.0);
  } else {
    t.z2.resize(0);
    t.h2.resize(0);
  }
  t.logits = p.softmax_weights * t.top_hidden() + p.softmax_bias;
  masked_softmax(t);
}

}  // namespace detail

// Concatenates the embedding rows of every feature in template order.
inline Vector embed(const NetworkParams& p, const FeatureIds& f) {
  const auto& d = p.dims;
  Vector h0(d.input_dim());
  Eigen::Index off = 0;
  for (int id : f.words) {
    h0.segment(off, d.word_dim) = p.word_embeddings.row(id).transpose();
    off += d.word_dim;
  }
  for (int id : f.tags) {
    h0.segment(off, d.tag_dim) = p.tag_embeddings.row(id).transpose();
    off += d.tag_dim;
  }
  for (int id : f.labels) {
    h0.segment(off, d.label_dim) = p.label_embeddings.row(id).transpose();
    off += d.label_dim;
  }
  return h0;
}

inline ForwardTrace forward(const NetworkParams& p, const FeatureIds& f, const LegalMask& legal) {
  if (!legal.any()) throw std::invalid_argument("forward requires at least one legal decision");
  detail::check_ids(f, p.dims);
  ForwardTrace t;
  t.legal = detail::legal_vector(legal, p.dims.num_decisions);
  t.h0 = embed(p, f);
  t.z1 = p.hidden1_weights * t.h0 + p.hidden1_bias;
  detail::hidden_and_output(p, t);
  return t;
}

struct TrainingExample {
  FeatureIds features;
  LegalMask legal;
  int gold = 0;  // decision id
};

struct LossAndGradient {
  double loss = 0.0;       // data loss + regularizer
  double data_loss = 0.0;  // mean negative log-likelihood
  double reg_loss = 0.0;   // lambda * sum_i ||W_i||^2
  NetworkParams gradient;
};

// Mean negative log-likelihood over the batch plus lambda times the squared
// Frobenius norms of the hidden weight matrices.
inline LossAndGradient loss_and_gradient(const NetworkParams& p, const std::vector<TrainingExample>& batch,
                                         double lambda) {
  const auto& d = p.dims;
  LossAndGradient out;
  out.gradient = NetworkParams::zeros(d);
  auto& g = out.gradient;
  out.reg_loss = lambda * (p.hidden1_weights.squaredNorm() + p.hidden2_weights.squaredNorm());
  if (batch.empty()) {
    out.loss = out.reg_loss;
  } else {
    const auto B = static_cast<Eigen::Index>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    Eigen::MatrixXd h0(d.input_dim(), B);
    std::vector<std::vector<char>> legal(batch.size());
    for (Eigen::Index j = 0; j < B; ++j) {
      const auto& ex = batch[static_cast<std::size_t>(j)];
      detail::check_ids(ex.features, d);
      legal[static_cast<std::size_t>(j)] = detail::legal_vector(ex.legal, d.num_decisions);
      if (ex.gold < 0 || ex.gold >= d.num_decisions || !legal[static_cast<std::size_t>(j)][static_cast<std::size_t>(ex.gold)]) {
        throw std::invalid_argument("gold decision " + std::to_string(ex.gold) + " is not legal");
      }
      h0.col(j) = embed(p, ex.features);
    }
    Eigen::MatrixXd z1 = (p.hidden1_weights * h0).colwise() + p.hidden1_bias;
    Eigen::MatrixXd h1 = z1.cwiseMax(0.0);
    Eigen::MatrixXd z2, h2;
    if (p.has_second_layer()) {
      z2 = (p.hidden2_weights * h1).colwise() + p.hidden2_bias;
      h2 = z2.cwiseMax(0.0);
    }
    const Eigen::MatrixXd& top = p.has_second_layer() ? h2 : h1;
    Eigen::MatrixXd logits = (p.softmax_weights * top).colwise() + p.softmax_bias;

    // dlogits = (P - onehot(gold)) / B over legal entries.
    Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(d.num_decisions, B);
    for (Eigen::Index j = 0; j < B; ++j) {
      ForwardTrace t;
      t.logits = logits.col(j);
      t.legal = std::move(legal[static_cast<std::size_t>(j)]);
      detail::masked_softmax(t);
      const int gold = batch[static_cast<std::size_t>(j)].gold;
      out.data_loss -= t.log_probs[gold] * inv_b;
      dlogits.col(j) = t.probs * inv_b;
      dlogits(gold, j) -= inv_b;
    }
    out.loss = out.data_loss + out.reg_loss;

    g.softmax_weights = dlogits * top.transpose();
    g.softmax_bias = dlogits.rowwise().sum();
    Eigen::MatrixXd dtop = p.softmax_weights.transpose() * dlogits;
    Eigen::MatrixXd dz1;
    if (p.has_second_layer()) {
      Eigen::MatrixXd dz2 = dtop.cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
      g.hidden2_weights = dz2 * h1.transpose();
      g.hidden2_bias = dz2.rowwise().sum();
      Eigen::MatrixXd dh1 = p.hidden2_weights.transpose() * dz2;
      dz1 = dh1.cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
    } else {
      dz1 = dtop.cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
    }
    g.hidden1_weights = dz1 * h0.transpose();
    g.hidden1_bias = dz1.rowwise().sum();
    Eigen::MatrixXd dh0 = p.hidden1_weights.transpose() * dz1;

    for (Eigen::Index j = 0; j < B; ++j) {
      const auto& f = batch[static_cast<std::size_t>(j)].features;
      Eigen::Index off = 0;
      for (int id : f.words) {
        g.word_embeddings.row(id) += dh0.col(j).segment(off, d.word_dim).transpose();
        off += d.word_dim;
      }
      for (int id : f.tags) {
        g.tag_embeddings.row(id) += dh0.col(j).segment(off, d.tag_dim).transpose();
        off += d.tag_dim;
      }
      for (int id : f.labels) {
        g.label_embeddings.row(id) += dh0.col(j).segment(off, d.label_dim).transpose();
        off += d.label_dim;
      }
    }
  }
  g.hidden1_weights += 2.0 * lambda * p.hidden1_weights;
  g.hidden2_weights += 2.0 * lambda * p.hidden2_weights;
  return out;
}

// Forward pass over frozen parameters with the first hidden layer's
// contribution of each (feature slot, id) pair cached. Word ids below
// `max_cached_words` are cached (ids are frequency ranked); the rest are
// computed on demand. Keeps a reference to `params`.
class NetworkScorer {
 public:
  explicit NetworkScorer(const NetworkParams& params, int max_cached_words = 5000) : p_(params) {
    const auto& d = p_.dims;
    cached_words_ = std::min(d.word_vocab, max_cached_words);
    word_table_ = build_table(p_.word_embeddings, kWordFeatures, cached_words_, 0);
    tag_table_ = build_table(p_.tag_embeddings, kTagFeatures, d.tag_vocab, kWordFeatures * d.word_dim);
    label_table_ = build_table(p_.label_embeddings, kLabelFeatures, d.label_vocab,
                               kWordFeatures * d.word_dim + kTagFeatures * d.tag_dim);
  }

  const NetworkParams& params() const { return p_; }
  int num_decisions() const { return p_.dims.num_decisions; }

  // Same result as beamparse::forward up to summation order; h0 is not filled.
  void forward(const FeatureIds& f, const LegalMask& legal, ForwardTrace& t) const {
    if (!legal.any()) throw std::invalid_argument("forward requires at least one legal decision");
    const auto& d = p_.dims;
    detail::check_ids(f, d);
    t.legal = detail::legal_vector(legal, d.num_decisions);
    t.h0.resize(0);
    t.z1 = p_.hidden1_bias;
    for (int s = 0; s < kWordFeatures; ++s) {
      const int id = f.words[static_cast<std::size_t>(s)];
      if (id < cached_words_) {
        t.z1 += word_table_.row(s * cached_words_ + id).transpose();
      } else {
        t.z1 += p_.hidden1_weights.middleCols(s * d.word_dim, d.word_dim) * p_.word_embeddings.row(id).transpose();
      }
    }
    for (int s = 0; s < kTagFeatures; ++s)
      t.z1 += tag_table_.row(s * d.tag_vocab + f.tags[static_cast<std::size_t>(s)]).transpose();
    for (int s = 0; s < kLabelFeatures; ++s)
      t.z1 += label_table_.row(s * d.label_vocab + f.labels[static_cast<std::size_t>(s)]).transpose();
    detail::hidden_and_output(p_, t);
  }

  ForwardTrace forward(const FeatureIds& f, const LegalMask& legal) const {
    ForwardTrace t;
    forward(f, legal, t);
    return t;
  }

 private:
  // Row (slot * count + id) holds W1[:, slot block] * E[id].
  Matrix build_table(const Matrix& emb, int slots, int count, int offset) const {
    const int dim = static_cast<int>(emb.cols());
    Matrix table(static_cast<Eigen::Index>(slots) * count, p_.dims.hidden1);
    for (int s = 0; s < slots; ++s) {
      const auto block = p_.hidden1_weights.middleCols(offset + s * dim, dim);
      table.middleRows(static_cast<Eigen::Index>(s) * count, count) = emb.topRows(count) * block.transpose();
    }
    return table;
  }

  const NetworkParams& p_;
  int cached_words_ = 0;
  Matrix word_table_;
  Matrix tag_table_;
  Matrix label_table_;
};

inline bool all_finite(const NetworkParams& p) {
  bool ok = true;
  NetworkParams::zip_blocks([&](const char*, const auto& m) { ok = ok && m.allFinite(); }, p);
  return ok;
}

}  // namespace beamparse
