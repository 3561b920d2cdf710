#include "ocoref/scoring.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ocoref {

std::vector<TokenSpan> enumerate_spans(int length, int max_width) {
  std::vector<TokenSpan> spans;
  for (int s = 0; s < length; ++s) {
    for (int e = s; e < length && e - s + 1 <= max_width; ++e) {
      spans.push_back({s, e});
    }
  }
  return spans;
}

int width_bucket(int width) {
  if (width <= 4) return std::max(0, width - 1);
  const int log2 = static_cast<int>(std::floor(std::log2(width)));
  return std::min(kWidthBuckets - 1, 2 + log2);
}

int distance_bucket(int turn_distance) {
  return std::clamp(turn_distance, 0, kDistanceBuckets - 1);
}

bool spans_cross(const TokenSpan& a, const TokenSpan& b) {
  return (a.start < b.start && b.start <= a.end && a.end < b.end) ||
         (b.start < a.start && a.start <= b.end && b.end < a.end);
}

std::vector<std::size_t> prune_top_spans(std::span<const TokenSpan> spans,
                                         std::span<const double> scores,
                                         int length, double ratio) {
  if (spans.size() != scores.size()) {
    throw std::invalid_argument("prune_top_spans: spans and scores differ");
  }
  const auto keep = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(length) - 1e-9));
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (scores[a] != scores[b]) return scores[a] > scores[b];
                     return spans[a] < spans[b];
                   });
  order.resize(std::min(keep, order.size()));
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const bool crosses = std::any_of(kept.begin(), kept.end(), [&](auto k) {
      return spans_cross(spans[idx], spans[k]);
    });
    if (!crosses) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return spans[a] < spans[b];
  });
  return kept;
}

std::size_t AntecedentPairs::max_row() const {
  std::size_t best = 0;
  for (std::size_t j = 0; j + 1 < row_begin.size(); ++j) {
    best = std::max(best, row_begin[j + 1] - row_begin[j]);
  }
  return best;
}

AntecedentPairs antecedent_pairs(const CandidatePool& pool,
                                 int max_antecedents) {
  AntecedentPairs pairs;
  for (std::size_t x = pool.num_carried; x < pool.size(); ++x) {
    pairs.row_begin.push_back(pairs.size());
    const int ux = pool.entries[x].candidate.address.utterance;
    for (std::size_t back = 1;
         back <= x && back <= static_cast<std::size_t>(max_antecedents);
         ++back) {
      const std::size_t y = x - back;
      pairs.anaphor.push_back(x);
      pairs.antecedent.push_back(y);
      pairs.bucket.push_back(static_cast<std::size_t>(
          distance_bucket(ux - pool.entries[y].candidate.address.utterance)));
    }
  }
  pairs.row_begin.push_back(pairs.size());
  return pairs;
}

ScoringParams ScoringParams::create(ParameterSet& params, int token_dim,
                                    const ScoringConfig& config,
                                    std::mt19937_64& rng) {
  const auto d = static_cast<std::size_t>(token_dim);
  const auto dg = static_cast<std::size_t>(span_dim(token_dim, config.width_dim));
  const auto h = static_cast<std::size_t>(config.mention_hidden);
  const double sg = 1.0 / std::sqrt(static_cast<double>(dg));
  params.add("span.attention", random_matrix(d, 1, 0.1, rng));
  params.add("span.width", random_matrix(kWidthBuckets, config.width_dim, 0.5, rng));
  params.add("mention.in", random_matrix(dg, h, sg, rng));
  params.add("mention.in_bias", Matrix(1, h));
  params.add("mention.out",
             random_matrix(h, 1, 1.0 / std::sqrt(static_cast<double>(h)), rng));
  params.add("mention.out_bias", Matrix(1, 1));
  params.add("pair.weights",
             random_matrix(3 * dg + config.distance_dim, 1, 0.1 * sg, rng));
  params.add("pair.distance",
             random_matrix(kDistanceBuckets, config.distance_dim, 0.5, rng));
  // Near-identity projections: attention starts focused on each row itself.
  const Matrix identity = Matrix::identity(dg);
  for (const char* name : {"attention.query", "attention.key", "attention.value"}) {
    Matrix m = random_matrix(dg, dg, 0.1 * sg, rng);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += identity[i];
    params.add(name, std::move(m));
  }
  params.add("speaker.weights", random_matrix(4 * dg, 1, 0.1 * sg, rng));
  return bind(params);
}

ScoringParams ScoringParams::bind(ParameterSet& params) {
  ScoringParams p;
  p.span_attention = &params.at("span.attention");
  p.width = &params.at("span.width");
  p.mention_in = &params.at("mention.in");
  p.mention_in_bias = &params.at("mention.in_bias");
  p.mention_out = &params.at("mention.out");
  p.mention_out_bias = &params.at("mention.out_bias");
  p.pair = &params.at("pair.weights");
  p.distance = &params.at("pair.distance");
  p.attn_query = &params.at("attention.query");
  p.attn_key = &params.at("attention.key");
  p.attn_value = &params.at("attention.value");
  p.speaker = &params.at("speaker.weights");
  return p;
}

Var Dropout::apply(Tape& tape, Var x) const {
  if (rate <= 0.0 || rng == nullptr) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  const double kept = 1.0 / (1.0 - rate);
  for (double& v : mask.values()) v = keep(*rng) ? kept : 0.0;
  return multiply(x, tape.constant(std::move(mask)));
}

Var span_representations(Tape& tape, Var tokens, const WindowInput& window,
                         std::span<const MentionAddress> spans,
                         const ScoringParams& params) {
  const std::size_t count = spans.size();
  std::vector<std::size_t> starts, ends, buckets;
  int lo = static_cast<int>(window.size()), hi = -1;
  for (const MentionAddress& m : spans) {
    if (!window.contains(m.utterance) || m.start < 0 || m.end < m.start) {
      throw std::invalid_argument("span " + to_string(m) +
                                  " is not inside the window");
    }
    const int ps = window.position(m.utterance, m.start);
    const int pe = window.position(m.utterance, m.end);
    for (int p = ps; p <= pe; ++p) {
      if (p >= static_cast<int>(window.size()) ||
          window.sources[p].role != TokenRole::kWord ||
          window.sources[p].utterance != m.utterance) {
        throw std::invalid_argument("span " + to_string(m) +
                                    " crosses a special token");
      }
    }
    starts.push_back(static_cast<std::size_t>(ps));
    ends.push_back(static_cast<std::size_t>(pe));
    buckets.push_back(static_cast<std::size_t>(width_bucket(m.width())));
    lo = std::min(lo, ps);
    hi = std::max(hi, pe);
  }
  if (count == 0) {
    const std::size_t dg = 3 * tokens.cols() + params.width->value.cols();
    return tape.constant(Matrix(0, dg));
  }

  std::vector<std::size_t> covered;
  for (int p = lo; p <= hi; ++p) covered.push_back(static_cast<std::size_t>(p));
  const std::size_t m = covered.size();
  Var local = gather_rows(tokens, std::move(covered));
  Var logits = matmul(local, tape.parameter(*params.span_attention));  // m x 1
  Var tiled = matmul(tape.constant(Matrix(count, 1, 1.0)), transpose(logits));
  Matrix mask(count, m, -1e30);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t p = starts[s]; p <= ends[s]; ++p) mask(s, p - lo) = 0.0;
  }
  Var weights = softmax_rows(add(tiled, tape.constant(std::move(mask))));
  Var pooled = matmul(weights, local);

  const Var parts[] = {gather_rows(tokens, std::move(starts)),
                       gather_rows(tokens, std::move(ends)), pooled,
                       gather_rows(tape.parameter(*params.width),
                                   std::move(buckets))};
  return concat_columns(parts);
}

Var mention_scores(Tape& tape, Var g, const ScoringParams& params) {
  Var hidden = tanh(add_row_bias(matmul(g, tape.parameter(*params.mention_in)),
                                 tape.parameter(*params.mention_in_bias)));
  return add_row_bias(matmul(hidden, tape.parameter(*params.mention_out)),
                      tape.parameter(*params.mention_out_bias));
}

Attended self_attend(Tape& tape, Var g, const ScoringParams& params) {
  Var q = matmul(g, tape.parameter(*params.attn_query));
  Var k = matmul(g, tape.parameter(*params.attn_key));
  Var v = matmul(g, tape.parameter(*params.attn_value));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(g.cols()));
  Var weights = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
  return {matmul(weights, v), weights};
}

Var pair_scores(Tape& tape, Var contextual, Var mention,
                const AntecedentPairs& pairs, const ScoringParams& params,
                const Dropout& dropout) {
  Var gx = gather_rows(contextual, pairs.anaphor);
  Var gy = gather_rows(contextual, pairs.antecedent);
  const Var parts[] = {gx, gy, multiply(gx, gy),
                       gather_rows(tape.parameter(*params.distance),
                                   pairs.bucket)};
  Var features = dropout.apply(tape, concat_columns(parts));
  Var pair = matmul(features, tape.parameter(*params.pair));
  return add(pair, add(gather_rows(mention, pairs.anaphor),
                       gather_rows(mention, pairs.antecedent)));
}

Var speaker_scores(Tape& tape, Var g, std::span<const std::size_t> xs,
                   std::span<const std::size_t> ys,
                   const ScoringParams& params) {
  Var gx = gather_rows(g, {xs.begin(), xs.end()});
  Var gy = gather_rows(g, {ys.begin(), ys.end()});
  const Var parts[] = {gx, gy, multiply(gx, gy), subtract(gx, gy)};
  return matmul(concat_columns(parts), tape.parameter(*params.speaker));
}

double speaker_score(std::span<const double> gx, std::span<const double> gy,
                     std::span<const double> weights) {
  const std::size_t d = gx.size();
  if (gy.size() != d || weights.size() != 4 * d) {
    throw DimensionError("speaker_score: expected widths d, d, 4d");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    s += weights[j] * gx[j] + weights[d + j] * gy[j] +
         weights[2 * d + j] * gx[j] * gy[j] +
         weights[3 * d + j] * (gx[j] - gy[j]);
  }
  return s;
}

}  // namespace ocoref
