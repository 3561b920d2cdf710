#include "ocoref/train.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace ocoref {

GoldIndex::GoldIndex(const Dialogue& dialogue) {
  for (std::size_t c = 0; c < dialogue.clusters.size(); ++c) {
    for (const MentionAddress& m : dialogue.clusters[c]) {
      labels_.emplace_back(m, static_cast<int>(c));
    }
  }
  std::sort(labels_.begin(), labels_.end());
}

int GoldIndex::label(const MentionAddress& m) const {
  auto it = std::lower_bound(
      labels_.begin(), labels_.end(), m,
      [](const auto& entry, const MentionAddress& key) {
        return entry.first < key;
      });
  return it != labels_.end() && it->first == m ? it->second : -1;
}

std::vector<std::pair<MentionAddress, int>> GoldIndex::range(int first,
                                                             int last) const {
  std::vector<std::pair<MentionAddress, int>> out;
  for (const auto& entry : labels_) {
    if (entry.first.utterance >= first && entry.first.utterance <= last) {
      out.push_back(entry);
    }
  }
  return out;
}

namespace {

// Independent generator per random decision, so enabling one loss does not
// shift the shuffling or dropout of another run.
std::uint64_t stream_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

Trainer::Trainer(CorefModel& model, TrainConfig config)
    : model_(model),
      config_(config),
      weights_(effective_weights(config.weights, model.variant())),
      order_rng_(stream_seed(config.seed, 0)),
      dropout_rng_(stream_seed(config.seed, 1)),
      mention_rng_(stream_seed(config.seed, 2)),
      speaker_rng_(stream_seed(config.seed, 3)) {
  if (config_.accumulation < 1) {
    throw std::invalid_argument("accumulation must be at least 1");
  }
  if (config_.lr_encoder < 0 || config_.lr_task < 0) {
    throw std::invalid_argument("learning rates must be non-negative");
  }
}

StepLoss Trainer::finish_step(Tape& tape, const PoolGraph& graph,
                              const GoldIndex& gold, bool backward,
                              LossScope scope, const Dialogue& dialogue) {
  const CandidatePool& pool = graph.pool;
  std::vector<int> labels;
  for (const PoolEntry& e : pool.entries) {
    labels.push_back(gold.label(e.candidate.address));
  }
  std::vector<bool> gold_pairs(graph.pairs.size());
  for (std::size_t p = 0; p < graph.pairs.size(); ++p) {
    const int lx = labels[graph.pairs.anaphor[p]];
    gold_pairs[p] = lx >= 0 && lx == labels[graph.pairs.antecedent[p]];
  }
  Var lc = coref_loss(tape, graph.pair, graph.pairs, gold_pairs);

  Var lm = tape.constant(Matrix(1, 1));
  if (weights_.mention > 0.0) {
    std::vector<std::size_t> positives, negatives;
    for (std::size_t s = 0; s < graph.enumerated.size(); ++s) {
      (gold.label(graph.enumerated[s]) >= 0 ? positives : negatives).push_back(s);
    }
    if (!config_.full_negatives) {
      negatives = sample_negatives(positives.size(), negatives, mention_rng_);
    }
    lm = bce_loss(tape, graph.enumerated_scores, positives, negatives).loss;
    scope.mention_spans = graph.enumerated;
  }

  Var ls = tape.constant(Matrix(1, 1));
  if (weights_.speaker > 0.0) {
    std::vector<std::size_t> xs, ys, positives, negatives;
    for (std::size_t x = pool.num_carried; x < pool.size(); ++x) {
      for (std::size_t y = 0; y < x; ++y) {
        const bool same = pool.entries[x].candidate.speaker ==
                          pool.entries[y].candidate.speaker;
        (same ? positives : negatives).push_back(xs.size());
        xs.push_back(x);
        ys.push_back(y);
      }
    }
    if (!xs.empty()) {
      negatives = sample_negatives(std::max<std::size_t>(positives.size(), 1),
                                   negatives, speaker_rng_);
      Var scores = speaker_scores(tape, graph.contextual, xs, ys,
                                  model_.scoring());
      ls = bce_loss(tape, scores, positives, negatives).loss;
    }
  }

  Var total = total_loss(lc, lm, ls, weights_);
  StepLoss out{lc.scalar(), lm.scalar(), ls.scalar(), total.scalar()};
  if (!std::isfinite(out.total)) {
    throw NumericError("non-finite loss in " + dialogue.doc_id +
                       (scope.turn >= 0 ? " turn " + std::to_string(scope.turn)
                                        : std::string()) +
                       ": L_c=" + std::to_string(out.coref) +
                       " L_m=" + std::to_string(out.mention) +
                       " L_s=" + std::to_string(out.speaker));
  }
  if (observer) {
    for (std::size_t x = pool.num_carried; x < pool.size(); ++x) {
      scope.candidates.push_back(pool.entries[x].candidate.address);
    }
    observer(scope);
  }
  if (backward) tape.backward(total);
  return out;
}

StepLoss Trainer::document_step(const Dialogue& dialogue, int index,
                                bool backward) {
  const DecodeConfig& dc = model_.config().decode;
  const std::vector<int> speakers =
      speaker_indices(dialogue.utterances, dc.max_speakers);
  const std::vector<WindowInput> windows =
      model_.segments(dialogue.utterances, speakers);
  std::vector<int> scope(dialogue.utterances.size());
  std::iota(scope.begin(), scope.end(), 0);
  Tape tape;
  const Dropout dropout{config_.dropout, &dropout_rng_};
  const PoolGraph graph = model_.build_pool(tape, windows, dialogue.utterances,
                                            speakers, scope, {}, dropout);
  LossScope ls;
  ls.dialogue = index;
  return finish_step(tape, graph, GoldIndex(dialogue), backward, std::move(ls),
                     dialogue);
}

StepLoss Trainer::turn_step(const Dialogue& dialogue, int index, int turn,
                            bool backward) {
  const DecodeConfig& dc = model_.config().decode;
  const std::vector<int> speakers =
      speaker_indices(dialogue.utterances, dc.max_speakers);
  std::vector<int> lengths;
  for (int u = 0; u <= turn; ++u) {
    lengths.push_back(static_cast<int>(dialogue.utterances[u].tokens.size()));
  }
  const int k = select_window_start(lengths, turn, dc.window_tokens);
  const WindowInput window =
      model_.turn_window(dialogue.utterances, speakers, k, turn);

  const GoldIndex gold(dialogue);
  std::vector<PoolEntry> carried;
  LossScope ls;
  ls.dialogue = index;
  ls.turn = turn;
  ls.window_start = k;
  for (const auto& [m, c] : gold.range(k, turn - 1)) {
    PoolEntry e;
    e.candidate.address = m;
    e.carried = true;
    e.cluster = c;
    carried.push_back(std::move(e));
    ls.carried.push_back(m);
  }
  Tape tape;
  const Dropout dropout{config_.dropout, &dropout_rng_};
  const int scope[] = {turn};
  const PoolGraph graph =
      model_.build_pool(tape, std::span(&window, 1), dialogue.utterances,
                        speakers, scope, std::move(carried), dropout);
  return finish_step(tape, graph, gold, backward, std::move(ls), dialogue);
}

void Trainer::apply_update() {
  if (pending_ == 0) return;
  ParameterSet& params = model_.params();
  double inv = 1.0 / static_cast<double>(pending_);
  const double loss_inv = inv;
  if (config_.clip_norm > 0.0) {
    double squared = 0.0;
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (double g : params[b].grad.values()) squared += g * g;
    }
    const double norm = std::sqrt(squared) * inv;
    if (norm > config_.clip_norm) inv *= config_.clip_norm / norm;
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    Parameter& p = params[b];
    const bool encoder = p.name.starts_with(kEncoderPrefix);
    const double lr = (encoder ? config_.lr_encoder : config_.lr_task) * inv;
    if (p.grad.size() != p.value.size()) continue;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      p.value[j] -= lr * p.grad[j];
    }
  }
  params.zero_grad();
  ++updates_;
  if (log != nullptr) {
    *log << "epoch=" << epoch_ << " step=" << updates_
         << " L_c=" << pending_loss_.coref * loss_inv
         << " L_m=" << pending_loss_.mention * loss_inv
         << " L_s=" << pending_loss_.speaker * loss_inv
         << " L=" << pending_loss_.total * loss_inv << '\n';
  }
  pending_ = 0;
  pending_loss_ = {};
}

EpochStats Trainer::run_epoch(std::span<const Dialogue> corpus) {
  ++epoch_;
  EpochStats stats;
  stats.epoch = epoch_;
  const int start_updates = updates_;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  if (config_.shuffle) std::shuffle(order.begin(), order.end(), order_rng_);

  const bool online = traits(model_.variant()).online_training;
  auto record = [&](const StepLoss& l) {
    ++stats.steps;
    ++pending_;
    stats.mean.coref += l.coref;
    stats.mean.mention += l.mention;
    stats.mean.speaker += l.speaker;
    stats.mean.total += l.total;
    pending_loss_.coref += l.coref;
    pending_loss_.mention += l.mention;
    pending_loss_.speaker += l.speaker;
    pending_loss_.total += l.total;
  };
  for (std::size_t d : order) {
    const Dialogue& dialogue = corpus[d];
    const int index = static_cast<int>(d);
    if (online) {
      for (int i = 0; i < static_cast<int>(dialogue.utterances.size()); ++i) {
        record(turn_step(dialogue, index, i, true));
        if (pending_ >= config_.accumulation) apply_update();
      }
    } else {
      record(document_step(dialogue, index, true));
      apply_update();
    }
  }
  apply_update();
  stats.updates = updates_ - start_updates;
  if (stats.steps > 0) {
    const double inv = 1.0 / stats.steps;
    stats.mean.coref *= inv;
    stats.mean.mention *= inv;
    stats.mean.speaker *= inv;
    stats.mean.total *= inv;
  }
  if (log != nullptr) {
    *log << "epoch=" << stats.epoch << " steps=" << stats.steps
         << " updates=" << stats.updates << " L_c=" << stats.mean.coref
         << " L_m=" << stats.mean.mention << " L_s=" << stats.mean.speaker
         << " L=" << stats.mean.total << '\n';
  }
  return stats;
}

std::vector<EpochStats> Trainer::train(std::span<const Dialogue> corpus) {
  std::vector<EpochStats> out;
  for (int e = 0; e < config_.epochs; ++e) out.push_back(run_epoch(corpus));
  return out;
}

double mention_accuracy(const CorefModel& model,
                        std::span<const Dialogue> corpus) {
  double tp = 0, pos = 0, tn = 0, neg = 0;
  for (const Dialogue& dialogue : corpus) {
    const std::vector<int> speakers = speaker_indices(
        dialogue.utterances, model.config().decode.max_speakers);
    const std::vector<WindowInput> windows =
        model.segments(dialogue.utterances, speakers);
    std::vector<int> scope(dialogue.utterances.size());
    std::iota(scope.begin(), scope.end(), 0);
    Tape tape;
    const PoolGraph graph = model.build_pool(tape, windows, dialogue.utterances,
                                             speakers, scope, {});
    const GoldIndex gold(dialogue);
    const Matrix& s = graph.enumerated_scores.value();
    for (std::size_t j = 0; j < graph.enumerated.size(); ++j) {
      const bool is_gold = gold.label(graph.enumerated[j]) >= 0;
      const bool predicted = s(j, 0) > 0.0;
      if (is_gold) {
        pos += 1;
        tp += predicted ? 1 : 0;
      } else {
        neg += 1;
        tn += predicted ? 0 : 1;
      }
    }
  }
  const double tpr = pos > 0 ? tp / pos : 0.0;
  const double tnr = neg > 0 ? tn / neg : 0.0;
  return 0.5 * (tpr + tnr);
}

}  // namespace ocoref
