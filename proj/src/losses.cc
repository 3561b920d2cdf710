#include <algorithm>
#include <iterator>

#include "ocoref/train.h"

namespace ocoref {

namespace {

constexpr double kMasked = -1e30;

}  // namespace

LossWeights effective_weights(const LossWeights& w, Variant v) {
  const VariantTraits t = traits(v);
  LossWeights out = w;
  if (!t.mention_loss) out.mention = 0.0;
  if (!t.speaker_loss) out.speaker = 0.0;
  return out;
}

Var coref_loss(Tape& tape, Var pair_scores, const AntecedentPairs& pairs,
               const std::vector<bool>& gold) {
  if (gold.size() != pairs.size() || pair_scores.rows() != pairs.size()) {
    throw DimensionError("coref_loss: " + std::to_string(pairs.size()) +
                         " pairs, " + std::to_string(gold.size()) +
                         " labels, scores " + pair_scores.value().shape());
  }
  const std::size_t candidates =
      pairs.row_begin.empty() ? 0 : pairs.row_begin.size() - 1;
  if (candidates == 0) return tape.constant(Matrix(1, 1));
  const std::size_t width = 1 + pairs.max_row();

  // Slot 0 of each row is the dummy (source row 0, a constant 0).
  const Var parts[] = {tape.constant(Matrix(1, 1)), pair_scores};
  Var source = concat_rows(parts);
  std::vector<std::size_t> index(candidates * width, 0);
  Matrix all_mask(candidates, width, kMasked);
  Matrix gold_mask(candidates, width, kMasked);
  for (std::size_t j = 0; j < candidates; ++j) {
    all_mask(j, 0) = 0.0;
    bool any = false;
    for (std::size_t p = pairs.row_begin[j]; p < pairs.row_begin[j + 1]; ++p) {
      const std::size_t slot = 1 + p - pairs.row_begin[j];
      index[j * width + slot] = 1 + p;
      all_mask(j, slot) = 0.0;
      if (gold[p]) {
        gold_mask(j, slot) = 0.0;
        any = true;
      }
    }
    if (!any) gold_mask(j, 0) = 0.0;
  }
  Var table = reshape(gather_rows(source, std::move(index)), candidates, width);
  Var all = logsumexp_rows(add(table, tape.constant(std::move(all_mask))));
  Var correct = logsumexp_rows(add(table, tape.constant(std::move(gold_mask))));
  return sum(subtract(all, correct));
}

BceLoss bce_loss(Tape& tape, Var scores, std::span<const std::size_t> positives,
                 std::span<const std::size_t> negatives) {
  BceLoss out;
  const std::size_t total = positives.size() + negatives.size();
  if (total == 0) {
    out.loss = tape.constant(Matrix(1, 1));
    out.empty = true;
    return out;
  }
  out.one_sided = positives.empty() || negatives.empty();
  std::vector<Var> terms;
  if (!positives.empty()) {
    terms.push_back(log_sigmoid(
        gather_rows(scores, {positives.begin(), positives.end()})));
  }
  if (!negatives.empty()) {
    terms.push_back(log_sigmoid(scale(
        gather_rows(scores, {negatives.begin(), negatives.end()}), -1.0)));
  }
  out.loss = scale(sum(concat_rows(terms)), -1.0 / static_cast<double>(total));
  return out;
}

std::vector<std::size_t> sample_negatives(std::size_t count,
                                          std::span<const std::size_t> pool,
                                          std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  std::sample(pool.begin(), pool.end(), std::back_inserter(out),
              std::min(count, pool.size()), rng);
  return out;
}

Var total_loss(Var coref, Var mention, Var speaker, const LossWeights& w) {
  return add(add(scale(coref, w.coref), scale(mention, w.mention)),
             scale(speaker, w.speaker));
}

double total_loss(double coref, double mention, double speaker,
                  const LossWeights& w) {
  return w.coref * coref + w.mention * mention + w.speaker * speaker;
}

}  // namespace ocoref
