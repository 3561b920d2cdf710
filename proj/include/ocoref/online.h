#ifndef OCOREF_ONLINE_H_
#define OCOREF_ONLINE_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocoref/encoder.h"
#include "ocoref/ingest.h"
#include "ocoref/model.h"
#include "ocoref/scoring.h"

namespace ocoref {

// Append-only clusters with stable ids (index of creation).
class ClusterStore {
 public:
  int create(const MentionAddress& first);
  void append(int cluster, const MentionAddress& m);

  int size() const { return static_cast<int>(clusters_.size()); }
  const Cluster& cluster(int id) const { return clusters_.at(id); }
  const std::vector<Cluster>& clusters() const { return clusters_; }

 private:
  std::vector<Cluster> clusters_;
};

struct EmittedMention {
  MentionAddress span;
  int cluster = -1;
  std::optional<MentionAddress> antecedent;

  bool operator==(const EmittedMention&) const = default;
};

struct TurnResult {
  int turn = 0;          // 0-based utterance index
  int window_start = 0;  // k
  std::vector<EmittedMention> mentions;

  bool operator==(const TurnResult&) const = default;
};

// {"turn": i, "mentions": [{"span": [u,s,e], "cluster": id,
//  "antecedent": [u,s,e] | null}]}
std::string to_json(const TurnResult& result);

// Inputs of one turn handed to a scorer.
struct TurnContext {
  std::span<const Utterance> utterances;  // u_0 .. u_i
  std::span<const int> speakers;          // dialogue-global speaker indices
  int current = 0;                        // i
  int window_start = 0;                   // k
  const DecodeConfig* config = nullptr;
};

// Scores of one candidate pool. `scores` is aligned with `pairs`.
struct TurnScores {
  CandidatePool pool;
  AntecedentPairs pairs;
  std::vector<double> scores;
};

// Produces the pool for turn i: `carried` is the emitted record with
// entries of utterances < k marked frozen. Implementations must keep the
// carried entries first and in the given order.
class TurnScorer {
 public:
  virtual ~TurnScorer() = default;
  virtual TurnScores score_turn(const TurnContext& context,
                                std::vector<PoolEntry> carried) = 0;
};

// Pool = carried (document order) followed by current candidates
// (document order). Throws std::invalid_argument on duplicates or when a
// current candidate precedes a carried mention.
CandidatePool build_candidate_pool(std::vector<PoolEntry> carried,
                                   std::vector<SpanCandidate> current);

// Per-dialogue session state.
class OnlineState {
 public:
  explicit OnlineState(int max_speakers = 16) : speaker_map_(max_speakers) {}

  int turn() const { return static_cast<int>(utterances_.size()); }
  const std::vector<Utterance>& utterances() const { return utterances_; }
  const std::vector<int>& speakers() const { return speakers_; }
  const ClusterStore& store() const { return store_; }
  // Emitted mentions in document order with their last representation.
  const std::vector<PoolEntry>& emitted() const { return emitted_; }

 private:
  friend TurnResult decode_turn(OnlineState&, const Utterance&, TurnScorer&,
                                const DecodeConfig&);
  std::vector<Utterance> utterances_;
  std::vector<int> speakers_;
  SpeakerMap speaker_map_;
  ClusterStore store_;
  std::vector<PoolEntry> emitted_;
};

// Argmax antecedent per current pool entry (index into the pool, or -1 for
// the dummy). Real scores must exceed 0; ties go to the nearest.
std::vector<int> choose_antecedents(const CandidatePool& pool,
                                    const AntecedentPairs& pairs,
                                    std::span<const double> scores);

// Which current entries are emitted: linked ones, ones chosen as an
// antecedent, and (with `singletons`) unlinked ones with s_m > threshold.
std::vector<bool> emitted_candidates(const CandidatePool& pool,
                                     std::span<const int> antecedents,
                                     bool singletons, double threshold = 0.0);

TurnResult decode_turn(OnlineState& state, const Utterance& utterance,
                       TurnScorer& scorer, const DecodeConfig& config);

struct FinalClusters {
  std::vector<Cluster> scored;      // size >= 2
  std::vector<Cluster> singletons;  // size 1
};

FinalClusters finalize_dialogue(const OnlineState& state);
FinalClusters split_singletons(const std::vector<Cluster>& clusters);

// Decodes every turn of `utterances` in a fresh state.
std::vector<TurnResult> decode_dialogue(std::span<const Utterance> utterances,
                                        TurnScorer& scorer,
                                        const DecodeConfig& config,
                                        OnlineState* final_state = nullptr);

// Scorer backed by a trained model.
class NeuralScorer : public TurnScorer {
 public:
  explicit NeuralScorer(const CorefModel& model) : model_(model) {}
  TurnScores score_turn(const TurnContext& context,
                        std::vector<PoolEntry> carried) override;

 private:
  const CorefModel& model_;
};

// Non-online inference: whole-document segments, document-wide pruning,
// every candidate decided in one pass. Returns all predicted clusters.
std::vector<Cluster> decode_document(const Dialogue& dialogue,
                                     const CorefModel& model);

// Width-1 candidates; s_m = +1 for capitalized tokens and -1 otherwise;
// s(x, y) = +1 for identical surface strings, -1 otherwise.
class StringMatchScorer : public TurnScorer {
 public:
  TurnScores score_turn(const TurnContext& context,
                        std::vector<PoolEntry> carried) override;
};

// Perfect model for one dialogue: candidates are the gold mentions of u_i,
// s_m = +1, and s(x, y) = +1 exactly when x and y share a gold cluster.
class OracleScorer : public TurnScorer {
 public:
  explicit OracleScorer(const Dialogue& gold);
  TurnScores score_turn(const TurnContext& context,
                        std::vector<PoolEntry> carried) override;

 private:
  std::vector<std::pair<MentionAddress, int>> labels_;
  int label(const MentionAddress& m) const;
};

}  // namespace ocoref

#endif  // OCOREF_ONLINE_H_
