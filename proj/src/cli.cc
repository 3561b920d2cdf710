#include "ocoref/cli.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ocoref/evaluate.h"
#include "ocoref/ingest.h"
#include "ocoref/metrics.h"
#include "ocoref/model.h"
#include "ocoref/train.h"

namespace ocoref {

using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodeFlags {
  std::string profile = "friends";
  int window_tokens = 384;
  double ratio = 0.4;
  int max_span_width = 0;   // 0: from profile
  int max_antecedents = 0;  // 0: from profile
  int max_speakers = 16;
  bool no_speaker_tokens = false;

  void add_to(CLI::App* app) {
    app->add_option("--profile", profile,
                    "friends (L=6, K=20) or ontonotes (L=25, K=50)")
        ->check(CLI::IsMember({"friends", "ontonotes"}));
    app->add_option("--window-tokens", window_tokens,
                    "utterance tokens per window")
        ->check(CLI::PositiveNumber);
    app->add_option("--ratio", ratio, "top-span ratio")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--max-span-width", max_span_width,
                    "maximum span width (overrides profile)")
        ->check(CLI::PositiveNumber);
    app->add_option("--max-antecedents", max_antecedents,
                    "antecedents per candidate (overrides profile)")
        ->check(CLI::PositiveNumber);
    app->add_option("--max-speakers", max_speakers, "speaker token capacity")
        ->check(CLI::PositiveNumber);
    app->add_flag("--no-speaker-tokens", no_speaker_tokens,
                  "omit speaker tokens from encoder input");
  }

  DecodeConfig config(Variant variant) const {
    DecodeConfig c;
    c.variant = variant;
    c.window_tokens = window_tokens;
    c.top_span_ratio = ratio;
    const bool onto = profile == "ontonotes";
    c.max_span_width = max_span_width > 0 ? max_span_width : (onto ? 25 : 6);
    c.max_antecedents = max_antecedents > 0 ? max_antecedents : (onto ? 50 : 20);
    c.max_speakers = max_speakers;
    c.speaker_tokens = !no_speaker_tokens;
    return c;
  }
};

Variant variant_or_throw(const std::string& name) {
  const auto v = parse_variant(name);
  if (!v) throw UsageError("unknown variant '" + name + "'");
  return *v;
}

std::vector<Dialogue> load_corpus(const std::string& path, bool drop_plural,
                                  std::ostream& err) {
  std::vector<std::string> warnings;
  ParseOptions options;
  options.drop_plural_links = drop_plural;
  options.warnings = &warnings;
  std::vector<Dialogue> corpus = read_dialogues(path, options);
  for (const std::string& w : warnings) err << "warning: " << w << '\n';
  return corpus;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

// --- gen ---------------------------------------------------------------

struct GenFlags {
  GenSpec spec;
  bool no_singleton_annotation = false;
  std::string out;

  void add_to(CLI::App* app) {
    app->add_option("--seed", spec.seed, "generator seed");
    app->add_option("--dialogues", spec.num_dialogues, "number of dialogues");
    app->add_option("--min-speakers", spec.min_speakers);
    app->add_option("--max-speakers", spec.max_speakers);
    app->add_option("--min-utterances", spec.min_utterances);
    app->add_option("--max-utterances", spec.max_utterances);
    app->add_option("--names", spec.name_vocab_size, "entity-name vocabulary");
    app->add_option("--singleton-rate", spec.singleton_rate);
    app->add_option("--first-person-rate", spec.first_person_rate);
    app->add_option("--min-fillers", spec.min_fillers);
    app->add_option("--max-fillers", spec.max_fillers);
    app->add_option("--mentions-per-utterance",
                    spec.max_mentions_per_utterance);
    app->add_flag("--no-singleton-annotation", no_singleton_annotation,
                  "do not write size-1 gold clusters");
    app->add_option("--out", out, "output JSONL (default: stdout)");
  }
};

int cmd_gen(GenFlags& flags, std::ostream& out) {
  flags.spec.annotate_singletons = !flags.no_singleton_annotation;
  try {
    flags.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::vector<Dialogue> corpus = generate_synthetic(flags.spec);
  if (flags.out.empty()) {
    write_dialogue_jsonl(out, corpus);
  } else {
    std::ofstream file = open_output(flags.out);
    write_dialogue_jsonl(file, corpus);
  }
  return kExitOk;
}

// --- train -------------------------------------------------------------

struct TrainFlags {
  std::string variant = "OR+SG+SA";
  std::string data;
  std::string out;
  std::string init;
  std::string log;
  std::uint64_t seed = 1;
  TrainConfig train;
  EncoderConfig encoder;
  ScoringConfig scoring;
  DecodeFlags decode;
  bool drop_plural = false;

  void add_to(CLI::App* app) {
    app->add_option("--variant", variant, "BL, SR, OR, OR+SG or OR+SG+SA");
    app->add_option("--data", data, "training data (.jsonl or .conll)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "checkpoint path")->required();
    app->add_option("--init", init, "warm-start checkpoint")
        ->check(CLI::ExistingFile);
    app->add_option("--log", log, "training log (default: stderr)");
    app->add_option("--seed", seed, "initialization and sampling seed");
    app->add_option("--epochs", train.epochs)->check(CLI::NonNegativeNumber);
    app->add_option("--lr-encoder", train.lr_encoder)
        ->check(CLI::NonNegativeNumber);
    app->add_option("--lr-task", train.lr_task)->check(CLI::NonNegativeNumber);
    app->add_option("--dropout", train.dropout)->check(CLI::Range(0.0, 0.99));
    app->add_option("--accumulation", train.accumulation)
        ->check(CLI::PositiveNumber);
    app->add_option("--clip-norm", train.clip_norm,
                    "gradient norm limit, 0 to disable")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--alpha-c", train.weights.coref)
        ->check(CLI::NonNegativeNumber);
    app->add_option("--alpha-m", train.weights.mention)
        ->check(CLI::NonNegativeNumber);
    app->add_option("--alpha-s", train.weights.speaker)
        ->check(CLI::NonNegativeNumber);
    app->add_flag("--full-negatives", train.full_negatives,
                  "mention loss over every negative span (no sampling)");
    app->add_option("--dim", encoder.dim, "token embedding width")
        ->check(CLI::PositiveNumber);
    app->add_option("--hidden", encoder.hidden, "encoder feed-forward width")
        ->check(CLI::PositiveNumber);
    app->add_option("--mention-hidden", scoring.mention_hidden)
        ->check(CLI::PositiveNumber);
    app->add_flag("--drop-plural-links", drop_plural,
                  "drop mentions shared by two clusters instead of failing");
    decode.add_to(app);
  }
};

int cmd_train(TrainFlags& f, std::ostream& err) {
  const Variant variant = variant_or_throw(f.variant);
  if (f.train.weights.coref == 0 && f.train.weights.mention == 0 &&
      f.train.weights.speaker == 0) {
    throw UsageError("all loss weights are zero");
  }
  const std::vector<Dialogue> corpus = load_corpus(f.data, f.drop_plural, err);
  std::unique_ptr<CorefModel> model;
  if (!f.init.empty()) {
    model = std::make_unique<CorefModel>(CorefModel::load(f.init));
    model->set_variant(variant);
  } else {
    ModelConfig config;
    config.encoder = f.encoder;
    config.encoder.max_positions = f.decode.window_tokens + 2;
    config.scoring = f.scoring;
    config.decode = f.decode.config(variant);
    model = std::make_unique<CorefModel>(
        config, Vocab::build(corpus, config.decode.max_speakers), f.seed);
  }
  TrainConfig tc = f.train;
  tc.seed = f.seed;
  Trainer trainer(*model, tc);
  std::ofstream log_file;
  if (!f.log.empty()) log_file = open_output(f.log);
  trainer.log = f.log.empty() ? &err : &log_file;
  trainer.train(corpus);
  model->save(f.out);
  std::ofstream vocab = open_output(f.out + ".vocab");
  model->vocab().write(vocab);
  return kExitOk;
}

// --- eval / stream -------------------------------------------------------

struct EvalFlags {
  std::string model;
  std::string scorer = "model";
  std::string variant;
  std::string data;
  std::string mode = "online";
  std::string report;
  std::string trace;
  std::string predictions;
  bool gold_singletons = false;
  bool drop_plural = false;
  DecodeFlags decode;

  void add_to(CLI::App* app, bool with_data) {
    app->add_option("--model", model, "checkpoint")->check(CLI::ExistingFile);
    app->add_option("--scorer", scorer,
                    with_data ? "model, oracle or string-match"
                              : "model or string-match")
        ->check(CLI::IsMember(with_data
                                  ? std::vector<std::string>{"model", "oracle",
                                                             "string-match"}
                                  : std::vector<std::string>{"model",
                                                             "string-match"}));
    app->add_option("--variant", variant,
                    "decode as this variant (default: checkpoint's)");
    decode.add_to(app);
    if (!with_data) return;
    app->add_option("--data", data, "evaluation data (.jsonl or .conll)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--mode", mode, "online or non-online")
        ->check(CLI::IsMember({"online", "non-online"}));
    app->add_option("--report", report, "write the score report as JSON");
    app->add_option("--trace", trace, "write per-turn results as JSONL");
    app->add_option("--predictions", predictions,
                    "write predicted clusters as JSONL");
    app->add_flag("--gold-singletons", gold_singletons,
                  "include gold singletons in mention precision/recall");
    app->add_flag("--drop-plural-links", drop_plural,
                  "drop mentions shared by two clusters instead of failing");
  }

  std::unique_ptr<CorefModel> load_model() const {
    if (scorer != "model") return nullptr;
    if (model.empty()) throw UsageError("--model is required");
    auto m = std::make_unique<CorefModel>(CorefModel::load(model));
    if (!variant.empty()) m->set_variant(variant_or_throw(variant));
    return m;
  }

  DecodeConfig decode_config(const CorefModel* m) const {
    if (m != nullptr) return m->config().decode;
    return decode.config(variant.empty() ? Variant::kSR
                                         : variant_or_throw(variant));
  }
};

int cmd_eval(EvalFlags& f, std::ostream& out, std::ostream& err) {
  const std::vector<Dialogue> corpus = load_corpus(f.data, f.drop_plural, err);
  const std::unique_ptr<CorefModel> model = f.load_model();
  EvalOptions options;
  options.mode = f.mode == "online" ? EvalMode::kOnline : EvalMode::kNonOnline;
  options.gold_singletons_in_mentions = f.gold_singletons;
  EvalResult result;
  if (model && options.mode == EvalMode::kNonOnline) {
    result = evaluate(corpus, *model, options);
  } else {
    if (options.mode == EvalMode::kNonOnline) {
      throw UsageError("non-online mode needs a model");
    }
    const std::string kind = f.scorer;
    result = evaluate(
        corpus,
        [&](const Dialogue& d) -> std::unique_ptr<TurnScorer> {
          if (kind == "oracle") return std::make_unique<OracleScorer>(d);
          if (kind == "string-match") {
            return std::make_unique<StringMatchScorer>();
          }
          return std::make_unique<NeuralScorer>(*model);
        },
        f.decode_config(model.get()), options);
  }
  out << result.report.to_table() << result.report.to_json() << '\n';
  if (!f.report.empty()) {
    open_output(f.report) << result.report.to_json() << '\n';
  }
  if (!f.trace.empty()) {
    std::ofstream trace = open_output(f.trace);
    for (const DialogueResult& d : result.dialogues) {
      for (const TurnResult& t : d.turns) trace << to_json(t) << '\n';
    }
  }
  if (!f.predictions.empty()) {
    std::ofstream pred = open_output(f.predictions);
    for (const DialogueResult& d : result.dialogues) {
      pred << clusters_json(d.doc_id, d.predicted) << '\n';
    }
  }
  return kExitOk;
}

int cmd_stream(EvalFlags& f, std::istream& in, std::ostream& out) {
  const std::unique_ptr<CorefModel> model = f.load_model();
  std::unique_ptr<TurnScorer> scorer;
  if (model) {
    scorer = std::make_unique<NeuralScorer>(*model);
  } else {
    scorer = std::make_unique<StringMatchScorer>();
  }
  stream_session(in, out, *scorer, f.decode_config(model.get()));
  return kExitOk;
}

// --- score -------------------------------------------------------------

std::map<std::string, Clustering> read_clusterings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::map<std::string, Clustering> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Clustering clusters;
      for (const json& c : j.at("clusters")) {
        Cluster cluster;
        for (const json& m : c) {
          cluster.push_back({m.at(0).get<int>(), m.at(1).get<int>(),
                             m.at(2).get<int>()});
        }
        clusters.push_back(std::move(cluster));
      }
      out[j.at("doc_id").get<std::string>()] = std::move(clusters);
    } catch (const json::exception& e) {
      throw ParseError(path + ": " + e.what(), number);
    }
  }
  return out;
}

struct ScoreFlags {
  std::string gold;
  std::string pred;
  std::string report;
  bool keep_singletons = false;

  void add_to(CLI::App* app) {
    app->add_option("gold", gold, "gold clusters JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("pred", pred, "predicted clusters JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--report", report, "write the score report as JSON");
    app->add_flag("--keep-singletons", keep_singletons,
                  "score size-1 clusters on both sides");
  }
};

int cmd_score(ScoreFlags& f, std::ostream& out) {
  const auto gold = read_clusterings(f.gold);
  const auto pred = read_clusterings(f.pred);
  Scorer scorer;
  for (const auto& [doc, g] : gold) {
    auto it = pred.find(doc);
    const Clustering p = it == pred.end() ? Clustering{} : it->second;
    if (f.keep_singletons) {
      scorer.add(g, p);
    } else {
      scorer.add(drop_singletons(g), drop_singletons(p));
    }
  }
  const ScoreReport report = scorer.report();
  out << report.to_table() << report.to_json() << '\n';
  if (!f.report.empty()) open_output(f.report) << report.to_json() << '\n';
  return kExitOk;
}

// Fills options not given on the command line from key=value lines.
void apply_config_file(CLI::App& app, const std::string& path) {
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) {
      throw UsageError("sections are not supported: '" + item.fullname() + "'");
    }
    CLI::Option* option = app.get_option_no_throw("--" + item.name);
    if (option == nullptr || item.name == "config") {
      throw UsageError("unknown key '" + item.name + "'");
    }
    if (option->count() > 0) continue;
    option->add_result(item.inputs);
    option->run_callback();
  }
}

}  // namespace

void stream_session(std::istream& in, std::ostream& out, TurnScorer& scorer,
                    const DecodeConfig& config) {
  auto state = std::make_unique<OnlineState>(config.max_speakers);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      state = std::make_unique<OnlineState>(config.max_speakers);
      continue;
    }
    try {
      Utterance u;
      try {
        const json j = json::parse(line);
        u.speaker = j.at("speaker").get<std::string>();
        u.tokens = j.at("tokens").get<std::vector<std::string>>();
      } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed utterance: ") +
                                    e.what());
      }
      if (u.speaker.empty()) throw std::invalid_argument("empty speaker");
      for (const std::string& t : u.tokens) {
        if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
          throw std::invalid_argument("invalid token '" + t + "'");
        }
      }
      out << to_json(decode_turn(*state, u, scorer, config)) << '\n';
    } catch (const std::exception& e) {
      out << json({{"error", e.what()}}).dump() << '\n';
    }
    out.flush();
  }
}

int run_cli(int argc, const char* const* argv, std::istream& in,
            std::ostream& out, std::ostream& err) {
  CLI::App app{"Online coreference resolution for dialogue", "ocoref"};
  app.require_subcommand(1);

  GenFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate synthetic dialogues");
  gen.add_to(gen_cmd);

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train.add_to(train_cmd);

  EvalFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "decode and score a corpus");
  eval.add_to(eval_cmd, true);

  EvalFlags stream;
  CLI::App* stream_cmd =
      app.add_subcommand("stream", "decode utterances from standard input");
  stream.add_to(stream_cmd, false);

  std::string config_file;
  for (CLI::App* sub : {train_cmd, eval_cmd, stream_cmd}) {
    sub->add_option("--config", config_file,
                    "key=value configuration file (flags take precedence)")
        ->check(CLI::ExistingFile);
  }

  ScoreFlags score;
  CLI::App* score_cmd =
      app.add_subcommand("score", "score predicted clusters against gold");
  score.add_to(score_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << "run with --help for usage\n";
    return kExitUsage;
  }
  if (!config_file.empty()) {
    try {
      for (CLI::App* sub : {train_cmd, eval_cmd, stream_cmd}) {
        if (app.got_subcommand(sub)) apply_config_file(*sub, config_file);
      }
    } catch (const std::exception& e) {
      err << "error: " << config_file << ": " << e.what() << '\n';
      return kExitUsage;
    }
  }

  try {
    if (app.got_subcommand(gen_cmd)) return cmd_gen(gen, out);
    if (app.got_subcommand(train_cmd)) return cmd_train(train, err);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(eval, out, err);
    if (app.got_subcommand(stream_cmd)) return cmd_stream(stream, in, out);
    if (app.got_subcommand(score_cmd)) return cmd_score(score, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ocoref
