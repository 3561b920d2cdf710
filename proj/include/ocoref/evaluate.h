#ifndef OCOREF_EVALUATE_H_
#define OCOREF_EVALUATE_H_

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ocoref/ingest.h"
#include "ocoref/metrics.h"
#include "ocoref/model.h"
#include "ocoref/online.h"

namespace ocoref {

enum class EvalMode { kOnline, kNonOnline };

struct EvalOptions {
  EvalMode mode = EvalMode::kOnline;
  // Count gold singletons on the gold side of mention precision/recall.
  bool gold_singletons_in_mentions = false;
};

struct DialogueResult {
  std::string doc_id;
  std::vector<TurnResult> turns;  // empty in non-online mode
  std::vector<Cluster> predicted;  // every predicted cluster
};

struct EvalResult {
  ScoreReport report;
  std::vector<DialogueResult> dialogues;
};

using ScorerFactory = std::function<std::unique_ptr<TurnScorer>(const Dialogue&)>;

// Online decoding with a scorer per dialogue; predicted and gold singleton
// clusters are dropped before scoring.
EvalResult evaluate(std::span<const Dialogue> corpus, const ScorerFactory& make,
                    const DecodeConfig& config, const EvalOptions& options = {});
EvalResult evaluate(std::span<const Dialogue> corpus, const CorefModel& model,
                    const EvalOptions& options = {});

// {"doc_id": str, "clusters": [[[u,s,e], ...], ...]}
std::string clusters_json(const std::string& doc_id,
                          const std::vector<Cluster>& clusters);

}  // namespace ocoref

#endif  // OCOREF_EVALUATE_H_
