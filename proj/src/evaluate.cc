#include "ocoref/evaluate.h"

#include "json.hpp"

namespace ocoref {

namespace {

void score_into(Scorer& scorer, const Dialogue& gold,
                const std::vector<Cluster>& predicted,
                const EvalOptions& options) {
  const Clustering gold_scored = drop_singletons(gold.clusters);
  const Clustering pred_scored = drop_singletons(predicted);
  scorer.add(gold_scored, pred_scored,
             options.gold_singletons_in_mentions ? &gold.clusters : nullptr);
}

}  // namespace

EvalResult evaluate(std::span<const Dialogue> corpus, const ScorerFactory& make,
                    const DecodeConfig& config, const EvalOptions& options) {
  EvalResult out;
  Scorer scorer;
  for (const Dialogue& d : corpus) {
    std::unique_ptr<TurnScorer> turn_scorer = make(d);
    OnlineState state(config.max_speakers);
    DialogueResult r;
    r.doc_id = d.doc_id;
    r.turns = decode_dialogue(d.utterances, *turn_scorer, config, &state);
    r.predicted = state.store().clusters();
    score_into(scorer, d, r.predicted, options);
    out.dialogues.push_back(std::move(r));
  }
  out.report = scorer.report();
  return out;
}

EvalResult evaluate(std::span<const Dialogue> corpus, const CorefModel& model,
                    const EvalOptions& options) {
  if (options.mode == EvalMode::kOnline) {
    return evaluate(
        corpus,
        [&](const Dialogue&) -> std::unique_ptr<TurnScorer> {
          return std::make_unique<NeuralScorer>(model);
        },
        model.config().decode, options);
  }
  EvalResult out;
  Scorer scorer;
  for (const Dialogue& d : corpus) {
    DialogueResult r;
    r.doc_id = d.doc_id;
    r.predicted = decode_document(d, model);
    score_into(scorer, d, r.predicted, options);
    out.dialogues.push_back(std::move(r));
  }
  out.report = scorer.report();
  return out;
}

std::string clusters_json(const std::string& doc_id,
                          const std::vector<Cluster>& clusters) {
  nlohmann::json cs = nlohmann::json::array();
  for (const Cluster& c : clusters) {
    nlohmann::json ms = nlohmann::json::array();
    for (const MentionAddress& m : c) {
      ms.push_back({m.utterance, m.start, m.end});
    }
    cs.push_back(std::move(ms));
  }
  return nlohmann::json({{"doc_id", doc_id}, {"clusters", std::move(cs)}})
      .dump();
}

}  // namespace ocoref
