// slm: structured language model toolkit.
//
// Subcommands: preprocess, train, ppl, em, inspect. See README.md.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slm/decoder.hpp"
#include "slm/em.hpp"
#include "slm/errors.hpp"
#include "slm/model_set.hpp"

namespace fs = std::filesystem;
using namespace slm;

namespace {

struct CommonOpts {
  std::string head_rules_path;
  std::string bin_schemes_path;
  std::string scheme = "baseline";
  size_t vocab_cap = 10000;
  size_t heldout_period = 10;
  bool no_lowercase = false;
  std::string number_token;

  CleanOptions clean() const {
    CleanOptions c;
    c.lowercase = !no_lowercase;
    c.number_token = number_token;
    return c;
  }
  HeadRules heads() const {
    return head_rules_path.empty() ? HeadRules::default_rules()
                                   : HeadRules::read_file(head_rules_path);
  }
  BinarizationRules bins() const {
    return bin_schemes_path.empty()
               ? BinarizationRules::default_rules()
               : BinarizationRules::read_file(bin_schemes_path);
  }
};

void add_common(CLI::App *cmd, CommonOpts &o, bool with_scheme = true) {
  cmd->add_option("--head-rules", o.head_rules_path,
                  "Head-percolation rules file (default: built-in table)");
  cmd->add_option("--bin-schemes", o.bin_schemes_path,
                  "Binarization scheme file (default: built-in)");
  if (with_scheme)
    cmd->add_option("--scheme", o.scheme,
                    "NT enrichment scheme: baseline|same|opposite|both");
  cmd->add_option("--vocab-cap", o.vocab_cap, "Word vocabulary cap");
  cmd->add_option("--heldout-period", o.heldout_period,
                  "Hold out every Nth training sentence (0 = none)");
  cmd->add_flag("--no-lowercase", o.no_lowercase,
                "Keep the original case of words");
  cmd->add_option("--number-token", o.number_token,
                  "Replace number-like tokens with this symbol");
}

std::vector<Tree> read_tree_files(const std::vector<std::string> &paths,
                                  const CleanOptions &clean,
                                  ReadStats *stats = nullptr) {
  std::vector<Tree> all;
  for (const std::string &p : paths) {
    std::vector<Tree> trees = read_clean_trees_from_file(p, clean, stats);
    for (Tree &t : trees) all.push_back(std::move(t));
  }
  return all;
}

std::vector<std::vector<std::string>> read_text_files(
    const std::vector<std::string> &paths, const CleanOptions &clean) {
  std::vector<std::vector<std::string>> sentences;
  for (const std::string &p : paths) {
    std::ifstream is(p);
    if (!is) throw DataError("cannot open text file: " + p);
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::vector<std::string> words;
      std::string w;
      while (ls >> w) {
        if (clean.lowercase)
          for (char &c : w) c = (char)std::tolower((unsigned char)c);
        words.push_back(w);
      }
      if (!words.empty()) sentences.push_back(std::move(words));
    }
  }
  return sentences;
}

std::vector<std::vector<std::string>> read_corpus_words(
    const std::vector<std::string> &paths, const std::string &format,
    const CleanOptions &clean) {
  if (format == "text") return read_text_files(paths, clean);
  if (format != "trees") throw ConfigError("unknown input format: " + format);
  std::vector<std::vector<std::string>> sentences;
  for (const Tree &t : read_tree_files(paths, clean))
    sentences.push_back(tree_words(t));
  return sentences;
}

void write_text_atomic(const std::string &path, const std::string &content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write file: " + tmp);
    os << content;
    if (!os) throw DataError("error writing file: " + tmp);
  }
  fs::rename(tmp, path);
}

std::string echo_header(const std::map<std::string, std::string> &cfg) {
  std::string out;
  for (const auto &[k, v] : cfg) out += "# " + k + " = " + v + "\n";
  return out;
}

std::string join(const std::vector<std::string> &v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += v[i];
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_preprocess(const CommonOpts &common,
                   const std::vector<std::string> &train_files,
                   const std::vector<std::string> &heldout_files,
                   const std::vector<std::string> &test_files,
                   const std::string &out_dir) {
  EnrichScheme scheme = parse_scheme(common.scheme);
  HeadRules heads = common.heads();
  BinarizationRules bins = common.bins();
  CleanOptions clean = common.clean();
  fs::create_directories(out_dir);

  std::map<std::string, std::string> cfg = {
      {"command", "preprocess"},
      {"scheme", common.scheme},
      {"train", join(train_files)},
      {"heldout", join(heldout_files)},
      {"test", join(test_files)},
      {"vocab-cap", std::to_string(common.vocab_cap)},
      {"lowercase", common.no_lowercase ? "no" : "yes"},
  };

  ReadStats stats;
  struct Part {
    std::string name;
    std::vector<Tree> trees;
    std::vector<std::unique_ptr<BinNode>> transformed;
  };
  std::vector<Part> parts;
  parts.push_back({"train", read_tree_files(train_files, clean, &stats), {}});
  if (!heldout_files.empty())
    parts.push_back(
        {"heldout", read_tree_files(heldout_files, clean, &stats), {}});
  if (!test_files.empty())
    parts.push_back({"test", read_tree_files(test_files, clean, &stats), {}});

  for (Part &part : parts) {
    std::string cleaned, display;
    for (const Tree &t : part.trees) {
      cleaned += print_tree(t) + "\n";
      part.transformed.push_back(transform_tree(t, heads, bins, scheme));
      display += display_tree(*part.transformed.back()) + "\n";
    }
    write_text_atomic(out_dir + "/" + part.name + ".clean", cleaned);
    write_text_atomic(out_dir + "/" + part.name + ".trees", display);
  }

  std::string words_file, labels_file;
  size_t n_tags = 0, n_nts = 0;
  if (!parts[0].trees.empty()) {
    Vocabulary words = build_word_vocab(parts[0].trees, common.vocab_cap);
    std::vector<const BinNode *> ptrs;
    for (const Part &part : parts) {
      if (part.name == "test") continue;
      for (const auto &b : part.transformed) ptrs.push_back(b.get());
    }
    VocabSet vs = build_vocab_set(ptrs, words);
    std::ostringstream ws, ls;
    vs.words.write(ws);
    vs.labels.write(ls);
    words_file = ws.str();
    labels_file = ls.str();
    n_tags = vs.tag_ids.size();
    n_nts = vs.nt_ids.size();
  }
  write_text_atomic(out_dir + "/words.vocab", words_file);
  write_text_atomic(out_dir + "/labels.vocab", labels_file);

  std::ostringstream report;
  report << "# slm preprocess report\n" << echo_header(cfg);
  for (const Part &part : parts)
    report << part.name << "-sentences " << part.trees.size() << "\n";
  report << "skipped-empty " << stats.skipped_empty << "\n";
  report << "pos-tags " << n_tags << "\n";
  report << "nt-labels " << n_nts << "\n";
  report << "constructor-ops " << (1 + 2 * n_nts) << "\n";
  write_text_atomic(out_dir + "/report.txt", report.str());
  std::cout << report.str();
  return 0;
}

int cmd_train(const CommonOpts &common,
              const std::vector<std::string> &train_files,
              const std::vector<std::string> &heldout_files,
              const std::string &input_format, bool trigram_equiv,
              const std::string &out_path) {
  CleanOptions clean = common.clean();
  std::map<std::string, std::string> cfg = {
      {"command", "train"},
      {"scheme", trigram_equiv ? "baseline" : common.scheme},
      {"train", join(train_files)},
      {"heldout", join(heldout_files)},
      {"input-format", input_format},
      {"vocab-cap", std::to_string(common.vocab_cap)},
      {"heldout-period", std::to_string(common.heldout_period)},
      {"lowercase", common.no_lowercase ? "no" : "yes"},
      {"trigram-equiv", trigram_equiv ? "yes" : "no"},
  };

  TrainOptions topts;
  topts.scheme = parse_scheme(trigram_equiv ? "baseline" : common.scheme);
  topts.vocab_cap = common.vocab_cap;
  topts.heldout_period = common.heldout_period;
  topts.clean = clean;
  topts.trigram_equiv = trigram_equiv;

  TrainReport rep;
  ModelSet model;
  if (trigram_equiv || input_format == "text") {
    auto train = read_text_files(train_files, clean);
    auto heldout = read_text_files(heldout_files, clean);
    model = train_model_text(train, heldout, topts, &rep);
  } else {
    auto train = read_tree_files(train_files, clean);
    auto heldout = read_tree_files(heldout_files, clean);
    model = train_model(train, heldout, common.heads(), common.bins(), topts,
                        &rep);
  }
  model.config_echo = cfg;
  model.write_file(out_path);
  for (const std::string &w : rep.warnings)
    std::cerr << "warning: " << w << "\n";
  std::cerr << "trained on " << rep.train_sentences << " sentences ("
            << rep.heldout_sentences << " heldout, " << rep.predicted_tokens
            << " tokens); model written to " << out_path << "\n";
  return 0;
}

int cmd_ppl(const std::string &model_path,
            const std::vector<std::string> &test_files,
            const std::string &input_format, std::vector<double> lambdas,
            size_t beam, double delta, bool forced_rb, bool per_sentence,
            const std::string &report_path, const std::string &csv_path,
            size_t threads, const CommonOpts &common) {
  ModelSet model = ModelSet::read_file(model_path);
  auto sentences_s =
      read_corpus_words(test_files, input_format, common.clean());
  std::vector<std::vector<uint32_t>> sentences;
  sentences.reserve(sentences_s.size());
  for (const auto &s : sentences_s)
    sentences.push_back(to_word_ids(s, model.vocab.words));

  if (lambdas.empty()) lambdas = {0.0, 0.6, 1.0};
  for (double l : lambdas)
    if (l < 0.0 || l > 1.0)
      throw ConfigError("interpolation weight out of [0,1]: " + fmt(l));

  DecoderOptions dopts;
  dopts.beam = beam;
  dopts.delta = delta;
  dopts.forced_right_branching = forced_rb;

  std::map<std::string, std::string> cfg = {
      {"command", "ppl"},
      {"model", model_path},
      {"test", join(test_files)},
      {"input-format", input_format},
      {"beam", std::to_string(beam)},
      {"delta", fmt(delta)},
      {"forced-rb", forced_rb ? "yes" : "no"},
      {"threads", std::to_string(threads)},
      {"scheme", scheme_name(model.scheme)},
  };

  std::ostringstream out, csv;
  out << "# slm ppl report\n" << echo_header(cfg);
  out << "model lambda sentences tokens logprob ppl flagged\n";
  csv << "model,lambda,sentences,tokens,logprob,ppl,flagged\n";
  for (double lambda : lambdas) {
    PplReport rep = perplexity(model, dopts, sentences, {lambda}, threads);
    const char *name = scheme_name(model.scheme);
    out << name << ' ' << fmt(lambda) << ' ' << rep.sentences << ' '
        << rep.tokens << ' ' << fmt(rep.logprob) << ' ' << fmt(rep.ppl) << ' '
        << rep.flagged_sentences << "\n";
    csv << name << ',' << fmt(lambda) << ',' << rep.sentences << ','
        << rep.tokens << ',' << fmt(rep.logprob) << ',' << fmt(rep.ppl) << ','
        << rep.flagged_sentences << "\n";
    if (per_sentence)
      for (size_t i = 0; i < rep.per_sentence.size(); ++i) {
        const SentenceScore &sc = rep.per_sentence[i];
        out << "  sentence " << i << " tokens " << sc.tokens << " logprob "
            << fmt(sc.logprob) << " ppl "
            << fmt(std::exp(-sc.logprob / (double)sc.tokens))
            << (sc.search_failure ? " SEARCH-FAILURE" : "") << "\n";
      }
  }
  std::cout << out.str();
  if (!report_path.empty()) write_text_atomic(report_path, out.str());
  if (!csv_path.empty()) write_text_atomic(csv_path, csv.str());
  return 0;
}

int cmd_em(const std::string &model_path,
           const std::vector<std::string> &train_files,
           const std::vector<std::string> &heldout_files,
           const std::string &input_format, size_t iterations, size_t nbest,
           size_t beam, double delta, const std::string &out_prefix,
           const std::string &log_path, size_t threads,
           const CommonOpts &common) {
  ModelSet model = ModelSet::read_file(model_path);
  CleanOptions clean = common.clean();

  auto sentences_s = read_corpus_words(train_files, input_format, clean);
  std::vector<std::vector<uint32_t>> sentences;
  for (const auto &s : sentences_s)
    sentences.push_back(to_word_ids(s, model.vocab.words));

  // Gold heldout derivations for per-iteration weight refitting.
  std::vector<IdDerivation> heldout;
  if (!heldout_files.empty()) {
    HeadRules heads = common.heads();
    BinarizationRules bins = common.bins();
    for (const Tree &t : read_tree_files(heldout_files, clean)) {
      auto bin = transform_tree(t, heads, bins, model.scheme);
      heldout.push_back(
          to_id_derivation(tree_to_derivation(*bin), model.vocab));
    }
  } else {
    std::cerr << "warning: no heldout treebank; interpolation weights will "
                 "fall back to 0.5\n";
  }

  EMConfig cfg;
  cfg.iterations = iterations;
  cfg.nbest = nbest;
  cfg.decode.beam = beam;
  cfg.decode.delta = delta;
  cfg.threads = threads;

  std::map<std::string, std::string> echo = {
      {"command", "em"},
      {"model", model_path},
      {"train", join(train_files)},
      {"heldout", join(heldout_files)},
      {"iterations", std::to_string(iterations)},
      {"nbest", std::to_string(nbest ? nbest : beam)},
      {"beam", std::to_string(beam)},
      {"delta", fmt(delta)},
      {"threads", std::to_string(threads)},
      {"weights-refit", "per-iteration on gold heldout derivations"},
  };

  std::ostringstream log;
  log << "# slm em log\n" << echo_header(echo);
  log << "iter,tokens,loglik,train_ppl\n";
  ModelSet current = std::move(model);
  for (size_t it = 1; it <= iterations; ++it) {
    EMIterationLog ilog;
    ModelSet next = em_iteration(current, sentences, heldout, cfg, &ilog);
    next.config_echo = echo;
    next.config_echo["iteration"] = std::to_string(it);
    std::string path = out_prefix + ".iter" + std::to_string(it);
    next.write_file(path);
    log << it << ',' << ilog.tokens << ',' << fmt(ilog.loglik) << ','
        << fmt(ilog.train_ppl) << "\n";
    std::cerr << "iteration " << it << ": loglik " << fmt(ilog.loglik)
              << " train-ppl " << fmt(ilog.train_ppl) << " (" << ilog.skipped
              << " skipped), checkpoint " << path << "\n";
    current = std::move(next);
  }
  std::cout << log.str();
  if (!log_path.empty()) write_text_atomic(log_path, log.str());
  return 0;
}

int cmd_inspect(const CommonOpts &common, const std::string &tree_text,
                const std::string &tree_file) {
  EnrichScheme scheme = parse_scheme(common.scheme);
  HeadRules heads = common.heads();
  BinarizationRules bins = common.bins();
  std::vector<Tree> trees;
  if (!tree_text.empty())
    trees = read_trees_from_string(tree_text);
  else if (!tree_file.empty())
    trees = read_trees_from_file(tree_file);
  else
    throw ConfigError("inspect needs --tree or --input");

  for (Tree &t : trees) {
    if (!clean_tree(t, common.clean())) {
      std::cout << "tree vanishes after cleaning\n";
      continue;
    }
    std::cout << "cleaned:    " << print_tree(t) << "\n";
    HeadedTree headed = percolate(t, heads);
    auto bin = binarize(headed, bins);
    std::cout << "binarized:  " << display_tree(*bin) << "\n";
    enrich(*bin, scheme);
    if (scheme != EnrichScheme::Baseline)
      std::cout << "enriched:   " << display_tree(*bin) << " ("
                << scheme_name(scheme) << ")\n";
    bin = collapse_unary(std::move(bin));
    std::cout << "collapsed:  " << display_tree(*bin) << "\n";
    Derivation d = tree_to_derivation(*bin);
    std::cout << "derivation:\n";
    for (const DerivationStep &s : d.steps) {
      std::cout << "  " << s.word << "/" << s.tag << ":";
      for (const ConstructorOp &op : s.ops) {
        std::cout << ' ' << op_kind_name(op.kind);
        if (op.kind != OpKind::Null) std::cout << '(' << op.nt_label << ')';
      }
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"slm: structured language model toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value config file");

  CommonOpts pre_common, train_common, em_common, ins_common, ppl_common;

  auto *pre = app.add_subcommand(
      "preprocess", "Clean, transform and display a treebank; build vocabs");
  std::vector<std::string> pre_train, pre_heldout, pre_test;
  std::string pre_out = "preprocessed";
  pre->add_option("--train", pre_train, "Training treebank files")->required();
  pre->add_option("--heldout", pre_heldout, "Heldout treebank files");
  pre->add_option("--test", pre_test, "Test treebank files");
  pre->add_option("--out-dir", pre_out, "Output directory");
  add_common(pre, pre_common);

  auto *tr = app.add_subcommand("train", "Initialize models from a treebank");
  std::vector<std::string> tr_train, tr_heldout;
  std::string tr_out = "model.slm", tr_format = "trees";
  bool tr_equiv = false;
  tr->add_option("--train", tr_train, "Training files")->required();
  tr->add_option("--heldout", tr_heldout, "Heldout files");
  tr->add_option("--out", tr_out, "Output model path");
  tr->add_option("--input-format", tr_format, "trees|text");
  tr->add_flag("--trigram-equiv-mode", tr_equiv,
               "Collapsed-label right-branching test mode");
  add_common(tr, train_common);

  auto *pp = app.add_subcommand("ppl", "Perplexity over a lambda grid");
  std::string pp_model, pp_format = "trees", pp_report, pp_csv;
  std::vector<std::string> pp_test;
  std::vector<double> pp_lambdas;
  size_t pp_beam = 128, pp_threads = 1;
  double pp_delta = DecoderOptions{}.delta;
  bool pp_forced = false, pp_per_sentence = false;
  pp->add_option("--model", pp_model, "Model file")->required();
  pp->add_option("--test", pp_test, "Test files")->required();
  pp->add_option("--input-format", pp_format, "trees|text");
  pp->add_option("--lambda", pp_lambdas,
                 "Interpolation weights (default 0.0 0.6 1.0)");
  pp->add_option("--beam", pp_beam, "Beam width B");
  pp->add_option("--delta", pp_delta, "Log-prob beam window");
  pp->add_flag("--forced-rb", pp_forced, "Forced right-branching test mode");
  pp->add_flag("--per-sentence", pp_per_sentence, "Per-sentence lines");
  pp->add_option("--report", pp_report, "Write the report here too");
  pp->add_option("--csv", pp_csv, "Write a CSV of the table");
  pp->add_option("--threads", pp_threads, "Worker threads");
  add_common(pp, ppl_common, /*with_scheme=*/false);

  auto *em = app.add_subcommand("em", "N-best EM reestimation");
  std::string em_model, em_format = "trees", em_prefix = "model", em_log;
  std::vector<std::string> em_train, em_heldout;
  size_t em_iters = 3, em_nbest = 0, em_beam = 128, em_threads = 1;
  double em_delta = DecoderOptions{}.delta;
  em->add_option("--model", em_model, "Initial model file")->required();
  em->add_option("--train", em_train, "Training files")->required();
  em->add_option("--heldout", em_heldout, "Heldout treebank files");
  em->add_option("--input-format", em_format, "trees|text");
  em->add_option("--iterations", em_iters, "EM iterations");
  em->add_option("--nbest", em_nbest, "Parses kept per sentence (0 = beam)");
  em->add_option("--beam", em_beam, "Beam width B");
  em->add_option("--delta", em_delta, "Log-prob beam window");
  em->add_option("--out-prefix", em_prefix, "Checkpoint prefix");
  em->add_option("--log", em_log, "Likelihood CSV path");
  em->add_option("--threads", em_threads, "Worker threads");
  add_common(em, em_common, /*with_scheme=*/false);

  auto *ins = app.add_subcommand(
      "inspect", "Pretty-print a tree through the transform pipeline");
  std::string ins_tree, ins_file;
  ins->add_option("--tree", ins_tree, "Bracketed tree on the command line");
  ins->add_option("--input", ins_file, "File of bracketed trees");
  add_common(ins, ins_common);

  try {
    app.parse(argc, argv);
    if (pre->parsed())
      return cmd_preprocess(pre_common, pre_train, pre_heldout, pre_test,
                            pre_out);
    if (tr->parsed())
      return cmd_train(train_common, tr_train, tr_heldout, tr_format,
                       tr_equiv, tr_out);
    if (pp->parsed())
      return cmd_ppl(pp_model, pp_test, pp_format, pp_lambdas, pp_beam,
                     pp_delta, pp_forced, pp_per_sentence, pp_report, pp_csv,
                     pp_threads, ppl_common);
    if (em->parsed())
      return cmd_em(em_model, em_train, em_heldout, em_format, em_iters,
                    em_nbest, em_beam, em_delta, em_prefix, em_log,
                    em_threads, em_common);
    if (ins->parsed()) return cmd_inspect(ins_common, ins_tree, ins_file);
    return 1;
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
