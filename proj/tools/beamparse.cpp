// beamparse: train, decode, evaluate and filter dependency parses.
//
// Exit codes: 0 ok, 1 data error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "beamparse/beamparse.hpp"

namespace {

using namespace beamparse;

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<DepTree> read_treebank(const std::string& path, ConllReadOptions options = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return read_conll(in, options);
  } catch (const ConllParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_treebank(const std::string& path, const std::vector<DepTree>& trees) {
  if (path.empty() || path == "-") {
    write_conll(trees, std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_conll(trees, out);
}

int default_threads() {
  if (const char* env = std::getenv("BEAMPARSE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string train, dev, embeddings, config, model = "beamparse.model", encoding = "text";
  double eta0 = 0, mu = 0, gamma = 0, lambda = 0, max_seconds = 0;
  int batch = 0, patience = 0, epochs = 0, word_dim = 0, tag_dim = 0, label_dim = 0, hidden1 = 0, hidden2 = 0;
  std::size_t min_count = 0;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  CLI::Option *eta0, *mu, *gamma, *lambda, *max_seconds, *batch, *patience, *epochs, *word_dim, *tag_dim, *label_dim,
      *hidden1, *hidden2, *min_count, *seed;
};

MatrixEncoding parse_encoding(const std::string& s) {
  if (s == "text") return MatrixEncoding::kText;
  if (s == "f32") return MatrixEncoding::kFloat32;
  throw UsageError("unknown encoding '" + s + "'");
}

int cmd_train(const TrainArgs& a, const TrainOptions& o) {
  PipelineConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw DataError("cannot open config " + a.config);
    read_config(in, cfg);
  }
  auto& t = cfg.trainer;
  if (o.eta0->count()) t.eta0 = a.eta0;
  if (o.mu->count()) t.mu = a.mu;
  if (o.gamma->count()) t.gamma = a.gamma;
  if (o.lambda->count()) t.lambda = a.lambda;
  if (o.max_seconds->count()) t.max_seconds = a.max_seconds;
  if (o.batch->count()) t.batch = a.batch;
  if (o.patience->count()) t.patience = a.patience;
  if (o.epochs->count()) t.max_epochs = a.epochs;
  if (o.word_dim->count()) t.word_dim = a.word_dim;
  if (o.tag_dim->count()) t.tag_dim = a.tag_dim;
  if (o.label_dim->count()) t.label_dim = a.label_dim;
  if (o.hidden1->count()) t.hidden1 = a.hidden1;
  if (o.hidden2->count()) t.hidden2 = a.hidden2;
  if (o.min_count->count()) t.min_count = a.min_count;
  if (o.seed->count()) t.seed = a.seed;
  const auto encoding = parse_encoding(a.encoding);

  const auto train = read_treebank(a.train);
  const auto dev = a.dev.empty() ? std::vector<DepTree>{} : read_treebank(a.dev);
  if (train.empty()) throw DataError("training treebank " + a.train + " is empty");

  Embeddings pretrained;
  if (!a.embeddings.empty()) {
    std::ifstream in(a.embeddings);
    if (!in) throw DataError("cannot open embeddings " + a.embeddings);
    pretrained = read_embeddings(in);
  }

  Model model;
  model.vocabs = build_vocabularies(train, t.min_count);
  std::cerr << "vocab word=" << model.vocabs.word.size() << " tag=" << model.vocabs.tag.size()
            << " label=" << model.vocabs.label.size() << '\n';
  auto result = train_greedy(train, dev, model.vocabs, t, a.embeddings.empty() ? nullptr : &pretrained, &std::cerr);
  model.network = std::move(result.params);
  save_model_file(model, a.model, encoding);
  std::cerr << "model=" << a.model << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PerceptronArgs {
  std::string model, train, dev, out, phi = "h1,h2,py", config, encoding = "text";
  int beam = 8, epochs = 10;
  std::uint64_t seed = 1;
  bool no_average = false;
};

int cmd_train_perceptron(const PerceptronArgs& a, CLI::Option* beam_opt, CLI::Option* epochs_opt,
                         CLI::Option* phi_opt, CLI::Option* seed_opt) {
  PipelineConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw DataError("cannot open config " + a.config);
    read_config(in, cfg);
  }
  auto& p = cfg.perceptron;
  if (beam_opt->count() || a.config.empty()) p.beam = a.beam;
  if (epochs_opt->count() || a.config.empty()) p.epochs = a.epochs;
  if (phi_opt->count() || a.config.empty()) {
    try {
      p.composition = PhiComposition::parse(a.phi);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (seed_opt->count()) p.seed = a.seed;
  if (a.no_average) p.averaged = false;
  const auto encoding = parse_encoding(a.encoding);

  auto model = load_model_file(a.model);
  if (p.composition.has(PhiComposition::kH2) && !model.network.has_second_layer()) {
    throw DataError("phi uses h2 but the model network has a single hidden layer");
  }
  const auto train = read_treebank(a.train);
  const auto dev = a.dev.empty() ? std::vector<DepTree>{} : read_treebank(a.dev);
  auto result = train_perceptron(model.network, model.vocabs, train, dev, p, &std::cerr);
  model.perceptron = std::move(result.model);
  const auto out = a.out.empty() ? a.model : a.out;
  save_model_file(model, out, encoding);
  std::cerr << "best_epoch=" << result.best_epoch << " model=" << out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ParseArgs {
  std::string model, input, output, scorer = "auto";
  int beam = 8;
  int threads = 0;
};

int cmd_parse(const ParseArgs& a) {
  const auto model = load_model_file(a.model);
  bool use_perceptron = false;
  if (a.scorer == "perceptron") {
    if (!model.perceptron) throw DataError("model has no perceptron section; train one with train-perceptron");
    use_perceptron = true;
  } else if (a.scorer == "auto") {
    use_perceptron = model.perceptron.has_value();
  } else if (a.scorer != "softmax") {
    throw UsageError("unknown scorer '" + a.scorer + "' (softmax, perceptron or auto)");
  }
  if (a.beam < 1) throw UsageError("--beam must be at least 1");

  const auto sentences = read_treebank(a.input, ConllReadOptions{.require_heads = false});
  const auto system = model.transition_system();
  const NetworkScorer net(model.network);
  const PerceptronModel* perceptron = use_perceptron ? &*model.perceptron : nullptr;

  const auto start = std::chrono::steady_clock::now();
  std::vector<DepTree> parsed(sentences.size());
  const int threads = std::max(1, a.threads > 0 ? a.threads : default_threads());
  const std::size_t chunk = (sentences.size() + static_cast<std::size_t>(threads) - 1) / static_cast<std::size_t>(threads);
  auto work = [&](std::size_t begin, std::size_t end) {
    const std::vector<DepTree> slice(sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                                     sentences.begin() + static_cast<std::ptrdiff_t>(end));
    auto out = beam_parse_all(net, perceptron, system, slice, model.vocabs, a.beam);
    std::move(out.begin(), out.end(), parsed.begin() + static_cast<std::ptrdiff_t>(begin));
  };
  if (threads == 1 || sentences.size() < 2) {
    work(0, sentences.size());
  } else {
    std::vector<std::thread> pool;
    for (std::size_t begin = 0; begin < sentences.size(); begin += chunk)
      pool.emplace_back(work, begin, std::min(sentences.size(), begin + chunk));
    for (auto& t : pool) t.join();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_treebank(a.output, parsed);
  std::cerr << "parse sentences=" << sentences.size() << " tokens=" << token_count(sentences)
            << " scorer=" << (use_perceptron ? "perceptron" : "softmax") << " beam=" << a.beam
            << " threads=" << threads << " sentences_per_second="
            << (secs > 0 ? static_cast<double>(sentences.size()) / secs : 0.0) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string gold, pred;
  bool include_punct = false;
};

int cmd_eval(const EvalArgs& a) {
  const auto gold = read_treebank(a.gold);
  const auto pred = read_treebank(a.pred);
  const auto r = evaluate(gold, pred, !a.include_punct);
  std::cout << std::fixed << std::setprecision(2) << "UAS " << 100.0 * r.uas << " LAS " << 100.0 * r.las
            << " scored " << r.scored_tokens << '/' << r.total_tokens << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FilterArgs {
  std::string a, b, out, mode = "labeled", reference, stats;
  std::size_t budget = std::numeric_limits<std::size_t>::max();
  bool match_lengths = false;
  std::uint64_t seed = 1;
};

int cmd_filter_agree(const FilterArgs& f) {
  AgreementMode mode;
  if (f.mode == "labeled") mode = AgreementMode::kLabeled;
  else if (f.mode == "unlabeled") mode = AgreementMode::kUnlabeled;
  else throw UsageError("unknown --mode '" + f.mode + "' (labeled or unlabeled)");
  if (f.match_lengths && f.reference.empty()) throw UsageError("--match-lengths requires --reference");

  const auto a = read_treebank(f.a);
  const auto b = read_treebank(f.b);
  auto result = agreement_filter(a, b, mode);
  std::vector<DepTree> selected;
  if (f.match_lengths) {
    selected = length_matched_sample(result.kept, read_treebank(f.reference), f.budget, f.seed, &std::cerr);
  } else {
    selected = take_token_budget(result.kept, f.budget);
  }
  write_treebank(f.out, selected);

  std::ostringstream report;
  write_stats(report, result.stats);
  report << "selected_sentences=" << selected.size() << '\n' << "selected_tokens=" << token_count(selected) << '\n';
  if (f.stats.empty()) {
    std::cerr << report.str();
  } else {
    std::ofstream out(f.stats);
    if (!out) throw DataError("cannot open " + f.stats + " for writing");
    out << report.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VocabArgs {
  std::string train;
  std::size_t min_count = 2;
};

int cmd_vocab(const VocabArgs& a) {
  const auto vocabs = build_vocabularies(read_treebank(a.train), a.min_count);
  auto dump = [](const char* group, const Vocabulary& v) {
    std::cout << "vocab " << group << ' ' << v.size() << '\n';
    for (int id = 0; id < v.size(); ++id) std::cout << id << '\t' << v.name(id) << '\n';
  };
  dump("word", vocabs.word);
  dump("tag", vocabs.tag);
  dump("label", vocabs.label);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beamparse: transition-based dependency parser with neural scoring and beam search"};
  app.require_subcommand(1);

  TrainArgs train;
  TrainOptions topt{};
  auto* train_cmd = app.add_subcommand("train", "Train the network with backpropagation");
  train_cmd->add_option("--train", train.train, "Training treebank (CoNLL-X)")->required();
  train_cmd->add_option("--dev", train.dev, "Held-out treebank for early stopping");
  train_cmd->add_option("--embeddings", train.embeddings, "Pretrained word embeddings");
  train_cmd->add_option("--config", train.config, "key=value training config");
  train_cmd->add_option("--model", train.model, "Output model path")->capture_default_str();
  train_cmd->add_option("--encoding", train.encoding, "Matrix encoding: text or f32")->capture_default_str();
  topt.seed = train_cmd->add_option("--seed", train.seed, "Random seed");
  topt.eta0 = train_cmd->add_option("--eta0", train.eta0, "Initial learning rate (0.05)");
  topt.mu = train_cmd->add_option("--mu", train.mu, "Momentum (0.9)");
  topt.gamma = train_cmd->add_option("--gamma", train.gamma, "Epoch fraction between decays (0.2)");
  topt.lambda = train_cmd->add_option("--lambda", train.lambda, "L2 weight on hidden weights (1e-4)");
  topt.batch = train_cmd->add_option("--batch", train.batch, "Mini-batch size (32)");
  topt.patience = train_cmd->add_option("--patience", train.patience, "Epochs without dev gain before stopping (10)");
  topt.epochs = train_cmd->add_option("--epochs", train.epochs, "Maximum epochs (200)");
  topt.max_seconds = train_cmd->add_option("--max-seconds", train.max_seconds, "Wall-clock cap (0 = none)");
  topt.word_dim = train_cmd->add_option("--word-dim", train.word_dim, "Word embedding size (64)");
  topt.tag_dim = train_cmd->add_option("--tag-dim", train.tag_dim, "Tag embedding size (32)");
  topt.label_dim = train_cmd->add_option("--label-dim", train.label_dim, "Label embedding size (32)");
  topt.hidden1 = train_cmd->add_option("--hidden1", train.hidden1, "First hidden layer size (200)");
  topt.hidden2 = train_cmd->add_option("--hidden2", train.hidden2, "Second hidden layer size, 0 for none (200)");
  topt.min_count = train_cmd->add_option("--min-count", train.min_count, "Minimum word frequency (2)");

  PerceptronArgs perc;
  auto* perc_cmd = app.add_subcommand("train-perceptron", "Train the structured perceptron layer");
  perc_cmd->add_option("--model", perc.model, "Pretrained model")->required();
  perc_cmd->add_option("--train", perc.train, "Training treebank")->required();
  perc_cmd->add_option("--dev", perc.dev, "Held-out treebank for epoch selection");
  perc_cmd->add_option("--out", perc.out, "Output model path (default: overwrite --model)");
  perc_cmd->add_option("--config", perc.config, "key=value config (beam, perceptron_epochs, phi, seed)");
  perc_cmd->add_option("--encoding", perc.encoding, "Matrix encoding: text or f32")->capture_default_str();
  auto* beam_opt = perc_cmd->add_option("--beam", perc.beam, "Beam width")->capture_default_str();
  auto* epochs_opt = perc_cmd->add_option("--epochs", perc.epochs, "Training epochs")->capture_default_str();
  auto* phi_opt = perc_cmd->add_option("--phi", perc.phi, "phi blocks from {h1,h2,py}")->capture_default_str();
  auto* seed_opt = perc_cmd->add_option("--seed", perc.seed, "Random seed")->capture_default_str();
  perc_cmd->add_flag("--no-average", perc.no_average, "Decode with the final rather than averaged weights");

  ParseArgs parse;
  auto* parse_cmd = app.add_subcommand("parse", "Parse CoNLL input");
  parse_cmd->add_option("--model", parse.model, "Model file")->required();
  parse_cmd->add_option("--input", parse.input, "Input CoNLL (heads may be placeholders)")->required();
  parse_cmd->add_option("--output", parse.output, "Output path (default stdout)");
  parse_cmd->add_option("--beam", parse.beam, "Beam width")->capture_default_str();
  parse_cmd->add_option("--scorer", parse.scorer, "softmax, perceptron or auto")->capture_default_str();
  parse_cmd->add_option("--threads", parse.threads, "Worker threads (default $BEAMPARSE_THREADS or 1)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Attachment scores of predicted against gold trees");
  eval_cmd->add_option("--gold", eval.gold, "Gold CoNLL")->required();
  eval_cmd->add_option("--pred", eval.pred, "Predicted CoNLL")->required();
  eval_cmd->add_flag("--include-punct", eval.include_punct, "Score punctuation tokens too");

  FilterArgs filter;
  auto* filter_cmd = app.add_subcommand("filter-agree", "Keep sentences on which two parsers agree");
  filter_cmd->add_option("--a", filter.a, "Parser A output (labels copied from here)")->required();
  filter_cmd->add_option("--b", filter.b, "Parser B output")->required();
  filter_cmd->add_option("--out", filter.out, "Output CoNLL (default stdout)");
  filter_cmd->add_option("--budget", filter.budget, "Token budget");
  filter_cmd->add_option("--mode", filter.mode, "labeled or unlabeled")->capture_default_str();
  filter_cmd->add_flag("--match-lengths", filter.match_lengths, "Match the reference length distribution");
  filter_cmd->add_option("--reference", filter.reference, "Reference treebank for --match-lengths");
  filter_cmd->add_option("--seed", filter.seed, "Sampling seed")->capture_default_str();
  filter_cmd->add_option("--stats", filter.stats, "Stats report path (default stderr)");

  VocabArgs vocab;
  auto* vocab_cmd = app.add_subcommand("vocab", "Print the vocabularies built from a treebank");
  vocab_cmd->add_option("--train", vocab.train, "Treebank")->required();
  vocab_cmd->add_option("--min-count", vocab.min_count, "Minimum word frequency")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train, topt);
    if (*perc_cmd) return cmd_train_perceptron(perc, beam_opt, epochs_opt, phi_opt, seed_opt);
    if (*parse_cmd) return cmd_parse(parse);
    if (*eval_cmd) return cmd_eval(eval);
    if (*filter_cmd) return cmd_filter_agree(filter);
    if (*vocab_cmd) return cmd_vocab(vocab);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
