#ifndef OCOREF_MODEL_H_
#define OCOREF_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocoref/autodiff.h"
#include "ocoref/encoder.h"
#include "ocoref/ingest.h"
#include "ocoref/scoring.h"

namespace ocoref {

enum class Variant { kBL, kSR, kOR, kORSG, kORSGSA };

struct VariantTraits {
  bool online_training = false;  // teacher-forced per-turn training
  bool singletons = false;       // keep unlinked candidates with s_m > 0
  bool mention_loss = false;
  bool speaker_loss = false;
  bool self_attention = false;
  bool separator = false;        // [SEP] before the current utterance
};

VariantTraits traits(Variant v);
std::string_view variant_name(Variant v);
// Accepts "BL", "SR", "OR", "OR+SG", "OR+SG+SA" (case-insensitive).
std::optional<Variant> parse_variant(std::string_view name);

// Span and decoding knobs shared by training and decoding.
struct DecodeConfig {
  Variant variant = Variant::kORSGSA;
  int window_tokens = 384;       // Upsilon, utterance tokens per window
  double top_span_ratio = 0.4;   // lambda
  int max_span_width = 6;        // L
  int max_antecedents = 20;      // K
  int max_speakers = 16;
  bool speaker_tokens = true;
};

struct ModelConfig {
  EncoderConfig encoder;
  ScoringConfig scoring;
  DecodeConfig decode;
};

// Everything the scorers compute for one candidate pool.
struct PoolGraph {
  CandidatePool pool;          // representation/mention_score values filled
  AntecedentPairs pairs;
  std::vector<MentionAddress> enumerated;  // every span of the current scope
  Var enumerated_scores;       // s_m per enumerated span
  std::vector<std::size_t> kept;  // indices into enumerated, pool order
  Var g;                       // pool rows (carried, then current)
  Var mention;                 // s_m per pool row
  Var contextual;              // G' under self-attention, else G
  Var pair;                    // s(x, y) per antecedent pair
};

// Parameters of every variant plus the vocabulary. All variants share one
// parameter layout, so any checkpoint restores into any variant.
class CorefModel {
 public:
  CorefModel(ModelConfig config, Vocab vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.decode.variant; }
  void set_variant(Variant v) { config_.decode.variant = v; }
  const Vocab& vocab() const { return vocab_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const EncoderParams& encoder() const { return encoder_; }
  const ScoringParams& scoring() const { return scoring_; }
  int span_width() const;

  WindowOptions window_options() const;
  // Document segments: consecutive utterances packed up to window_tokens
  // each, no [SEP].
  std::vector<WindowInput> segments(std::span<const Utterance> utterances,
                                    std::span<const int> speakers) const;
  // Decoding window for turn `current` starting at `first`.
  WindowInput turn_window(std::span<const Utterance> utterances,
                          std::span<const int> speakers, int first,
                          int current) const;

  // Builds the pool X = carried + pruned spans of `scope` and scores it.
  // Carried entries marked frozen contribute their stored representation
  // and mention score as constants; the others are recomputed in the
  // window containing their utterance. `budget` is the token count the
  // pruning ratio applies to.
  PoolGraph build_pool(Tape& tape, std::span<const WindowInput> windows,
                       std::span<const Utterance> utterances,
                       std::span<const int> speakers,
                       std::span<const int> scope,
                       std::vector<PoolEntry> carried,
                       const Dropout& dropout = {}) const;

  std::string meta_json() const;
  void save(const std::string& path) const;
  // Restores config, vocabulary and parameters.
  static CorefModel load(const std::string& path);
  static CorefModel from_checkpoint(const Checkpoint& ckpt);

 private:
  ModelConfig config_;
  Vocab vocab_;
  ParameterSet params_;
  EncoderParams encoder_;
  ScoringParams scoring_;
};

}  // namespace ocoref

#endif  // OCOREF_MODEL_H_
