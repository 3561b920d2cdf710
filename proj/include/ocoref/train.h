#ifndef OCOREF_TRAIN_H_
#define OCOREF_TRAIN_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "ocoref/autodiff.h"
#include "ocoref/ingest.h"
#include "ocoref/model.h"
#include "ocoref/scoring.h"

namespace ocoref {

struct LossWeights {
  double coref = 1.0;    // alpha_c
  double mention = 0.1;  // alpha_m
  double speaker = 0.1;  // alpha_s
};

// Variant-effective weights: alpha_m = 0 without the mention loss, alpha_s = 0
// without the speaker head.
LossWeights effective_weights(const LossWeights& w, Variant v);

// Antecedent target of each pair (true = same gold cluster). A candidate
// whose row has no true entry targets the dummy.
// Returns sum over candidates of logsumexp(all) - logsumexp(gold), with the
// dummy scored 0.
Var coref_loss(Tape& tape, Var pair_scores, const AntecedentPairs& pairs,
               const std::vector<bool>& gold);

struct BceLoss {
  Var loss;
  bool empty = false;      // no positives and no negatives: loss is 0
  bool one_sided = false;  // only one of the two sets is present
};

// Mean binary cross-entropy with sigmoid over rows of `scores`: rows in
// `positives` target 1, rows in `negatives` target 0.
BceLoss bce_loss(Tape& tape, Var scores, std::span<const std::size_t> positives,
                 std::span<const std::size_t> negatives);

// Uniform sample without replacement of min(count, pool.size()) entries,
// kept in pool order.
std::vector<std::size_t> sample_negatives(std::size_t count,
                                          std::span<const std::size_t> pool,
                                          std::mt19937_64& rng);

Var total_loss(Var coref, Var mention, Var speaker, const LossWeights& w);
double total_loss(double coref, double mention, double speaker,
                  const LossWeights& w);

struct TrainConfig {
  double lr_encoder = 1e-3;
  double lr_task = 1e-2;
  double dropout = 0.3;
  int epochs = 30;
  int accumulation = 16;
  // Rescales the averaged gradient to this global L2 norm when larger;
  // 0 disables clipping.
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  LossWeights weights;
  // Use every negative span in the mention loss instead of a balanced sample.
  bool full_negatives = false;
  bool shuffle = true;
};

// What one loss evaluation covered, for inspection.
struct LossScope {
  int dialogue = 0;
  int turn = -1;  // -1 in document mode
  int window_start = 0;
  std::vector<MentionAddress> carried;
  std::vector<MentionAddress> candidates;   // pool entries scored as anaphors
  std::vector<MentionAddress> mention_spans;  // spans in the mention loss
};

struct StepLoss {
  double coref = 0.0;
  double mention = 0.0;
  double speaker = 0.0;
  double total = 0.0;
};

struct EpochStats {
  int epoch = 0;
  int steps = 0;
  int updates = 0;
  StepLoss mean;
};

// Gold cluster index of every gold mention address.
class GoldIndex {
 public:
  explicit GoldIndex(const Dialogue& dialogue);
  int label(const MentionAddress& m) const;
  // Gold mentions of utterances [first, last], document order.
  std::vector<std::pair<MentionAddress, int>> range(int first, int last) const;

 private:
  std::vector<std::pair<MentionAddress, int>> labels_;
};

class Trainer {
 public:
  Trainer(CorefModel& model, TrainConfig config);

  // Runs config.epochs epochs; teacher-forced online steps for OR variants,
  // whole-document steps otherwise.
  std::vector<EpochStats> train(std::span<const Dialogue> corpus);
  EpochStats run_epoch(std::span<const Dialogue> corpus);

  // Loss of one document (all utterances at once) or of turn `turn`
  // under teacher forcing. Adds gradients when `backward` is set.
  StepLoss document_step(const Dialogue& dialogue, int index, bool backward);
  StepLoss turn_step(const Dialogue& dialogue, int index, int turn,
                     bool backward);

  // Applies accumulated gradients averaged over the pending steps.
  void apply_update();

  int updates() const { return updates_; }
  int pending() const { return pending_; }

  std::ostream* log = nullptr;
  std::function<void(const LossScope&)> observer;

 private:
  StepLoss finish_step(Tape& tape, const PoolGraph& graph,
                       const GoldIndex& gold, bool backward, LossScope scope,
                       const Dialogue& dialogue);

  CorefModel& model_;
  TrainConfig config_;
  LossWeights weights_;
  std::mt19937_64 order_rng_;
  std::mt19937_64 dropout_rng_;
  std::mt19937_64 mention_rng_;
  std::mt19937_64 speaker_rng_;
  int epoch_ = 0;
  int updates_ = 0;
  int pending_ = 0;
  StepLoss pending_loss_;
};

// Balanced accuracy of the s_m > 0 decision over every enumerated span
// (gold mentions positive), computed per utterance.
double mention_accuracy(const CorefModel& model,
                        std::span<const Dialogue> corpus);

}  // namespace ocoref

#endif  // OCOREF_TRAIN_H_
