#ifndef OCOREF_SCORING_H_
#define OCOREF_SCORING_H_

#include <random>
#include <span>
#include <vector>

#include "ocoref/autodiff.h"
#include "ocoref/encoder.h"
#include "ocoref/ingest.h"

namespace ocoref {

// Inclusive token span inside one utterance.
struct TokenSpan {
  int start = 0;
  int end = 0;

  int width() const { return end - start + 1; }
  auto operator<=>(const TokenSpan&) const = default;
};

// Every span of width <= max_width, in (start, end) order.
std::vector<TokenSpan> enumerate_spans(int length, int max_width);

inline constexpr int kWidthBuckets = 8;
inline constexpr int kDistanceBuckets = 5;

// 1, 2, 3, 4, 5-7, 8-15, 16-31, 32+
int width_bucket(int width);
// Turn distance 0, 1, 2, 3, 4+
int distance_bucket(int turn_distance);

struct SpanCandidate {
  MentionAddress address;
  std::vector<double> representation;  // g, width d_g (empty for stubs)
  double mention_score = 0.0;          // s_m
  int speaker = -1;
};

struct PoolEntry {
  SpanCandidate candidate;
  bool carried = false;  // member of the previously emitted mentions
  bool frozen = false;   // carried from outside the window
  int cluster = -1;
};

// Carried mentions first, then current-turn candidates; both in document
// order.
struct CandidatePool {
  std::vector<PoolEntry> entries;
  std::size_t num_carried = 0;

  std::size_t size() const { return entries.size(); }
  std::size_t num_current() const { return entries.size() - num_carried; }
};

// Keeps the top ceil(ratio * length) spans by score (ties: earlier
// (start, end) first), then drops spans crossing a better-scored kept span.
// Returns indices into `spans` sorted by (start, end).
std::vector<std::size_t> prune_top_spans(std::span<const TokenSpan> spans,
                                         std::span<const double> scores,
                                         int length, double ratio);

// Partial overlap where neither span contains the other.
bool spans_cross(const TokenSpan& a, const TokenSpan& b);

// Antecedent candidates for each current-turn pool entry: the K nearest
// preceding entries, nearest first. Carried entries never act as anaphors,
// so no (carried, carried) pair exists.
struct AntecedentPairs {
  std::vector<std::size_t> anaphor;
  std::vector<std::size_t> antecedent;
  std::vector<std::size_t> bucket;
  // pairs of current entry j are [row_begin[j], row_begin[j + 1])
  std::vector<std::size_t> row_begin;

  std::size_t size() const { return anaphor.size(); }
  std::size_t max_row() const;
};

AntecedentPairs antecedent_pairs(const CandidatePool& pool,
                                 int max_antecedents);

struct ScoringConfig {
  int width_dim = 4;
  int distance_dim = 4;
  int mention_hidden = 32;
};

struct ScoringParams {
  Parameter* span_attention = nullptr;  // d x 1 token attention head
  Parameter* width = nullptr;           // kWidthBuckets x width_dim
  Parameter* mention_in = nullptr;
  Parameter* mention_in_bias = nullptr;
  Parameter* mention_out = nullptr;
  Parameter* mention_out_bias = nullptr;
  Parameter* pair = nullptr;            // (3 d_g + distance_dim) x 1
  Parameter* distance = nullptr;        // kDistanceBuckets x distance_dim
  Parameter* attn_query = nullptr;      // d_g x d_g
  Parameter* attn_key = nullptr;
  Parameter* attn_value = nullptr;
  Parameter* speaker = nullptr;         // 4 d_g x 1

  static ScoringParams create(ParameterSet& params, int token_dim,
                              const ScoringConfig& config,
                              std::mt19937_64& rng);
  static ScoringParams bind(ParameterSet& params);
};

// d_g = 3 d + width_dim
inline int span_dim(int token_dim, int width_dim) {
  return 3 * token_dim + width_dim;
}

// Inverted dropout; identity when rate is 0 or no generator is attached.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  Var apply(Tape& tape, Var x) const;
};

// One row per span: [h_start, h_end, attention-weighted mean, width
// embedding]. `spans` are window positions; a span covering a special
// token throws std::invalid_argument.
Var span_representations(Tape& tape, Var tokens, const WindowInput& window,
                         std::span<const MentionAddress> spans,
                         const ScoringParams& params);

// s_m for each row of G (n x 1).
Var mention_scores(Tape& tape, Var g, const ScoringParams& params);

struct Attended {
  Var output;   // G'
  Var weights;  // softmax((G Wq)(G Wk)^T / sqrt(d))
};

// G' = softmax((G Wq)(G Wk)^T / sqrt(d)) (G Wv), d = columns of G.
Attended self_attend(Tape& tape, Var g, const ScoringParams& params);

// s(x, y) = s_m(x) + s_m(y) + w_c . [g'_x, g'_y, g'_x * g'_y, phi(dist)]
Var pair_scores(Tape& tape, Var contextual, Var mention, const AntecedentPairs& pairs,
                const ScoringParams& params, const Dropout& dropout = {});

// s_s(x, y) = w_s . [g_x, g_y, g_x * g_y, g_x - g_y] for row pairs.
Var speaker_scores(Tape& tape, Var g, std::span<const std::size_t> xs,
                   std::span<const std::size_t> ys,
                   const ScoringParams& params);
double speaker_score(std::span<const double> gx, std::span<const double> gy,
                     std::span<const double> weights);

}  // namespace ocoref

#endif  // OCOREF_SCORING_H_
