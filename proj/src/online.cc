#include "ocoref/online.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "json.hpp"

namespace ocoref {

using nlohmann::json;

int ClusterStore::create(const MentionAddress& first) {
  clusters_.push_back({first});
  return size() - 1;
}

void ClusterStore::append(int cluster, const MentionAddress& m) {
  clusters_.at(cluster).push_back(m);
}

namespace {

json address_json(const MentionAddress& m) {
  return json::array({m.utterance, m.start, m.end});
}

}  // namespace

std::string to_json(const TurnResult& result) {
  json mentions = json::array();
  for (const EmittedMention& m : result.mentions) {
    mentions.push_back(
        {{"span", address_json(m.span)},
         {"cluster", m.cluster},
         {"antecedent",
          m.antecedent ? address_json(*m.antecedent) : json(nullptr)}});
  }
  return json({{"turn", result.turn}, {"mentions", std::move(mentions)}})
      .dump();
}

CandidatePool build_candidate_pool(std::vector<PoolEntry> carried,
                                   std::vector<SpanCandidate> current) {
  CandidatePool pool;
  pool.num_carried = carried.size();
  for (PoolEntry& e : carried) {
    e.carried = true;
    pool.entries.push_back(std::move(e));
  }
  for (SpanCandidate& c : current) {
    PoolEntry e;
    e.candidate = std::move(c);
    pool.entries.push_back(std::move(e));
  }
  for (std::size_t j = 1; j < pool.size(); ++j) {
    const auto& prev = pool.entries[j - 1].candidate.address;
    const auto& here = pool.entries[j].candidate.address;
    if (!(prev < here)) {
      throw std::invalid_argument("candidate pool out of document order at " +
                                  to_string(here));
    }
  }
  return pool;
}

std::vector<int> choose_antecedents(const CandidatePool& pool,
                                    const AntecedentPairs& pairs,
                                    std::span<const double> scores) {
  if (scores.size() != pairs.size() ||
      pairs.row_begin.size() != pool.num_current() + 1) {
    throw std::invalid_argument("choose_antecedents: score table mismatch");
  }
  std::vector<int> chosen(pool.num_current(), -1);
  for (std::size_t j = 0; j < pool.num_current(); ++j) {
    double best = 0.0;
    for (std::size_t p = pairs.row_begin[j]; p < pairs.row_begin[j + 1]; ++p) {
      if (scores[p] > best) {
        best = scores[p];
        chosen[j] = static_cast<int>(pairs.antecedent[p]);
      }
    }
  }
  return chosen;
}

std::vector<bool> emitted_candidates(const CandidatePool& pool,
                                     std::span<const int> antecedents,
                                     bool singletons, double threshold) {
  std::vector<bool> out(pool.num_current(), false);
  for (std::size_t j = 0; j < antecedents.size(); ++j) {
    const int y = antecedents[j];
    if (y < 0) continue;
    out[j] = true;
    if (static_cast<std::size_t>(y) >= pool.num_carried) {
      out[static_cast<std::size_t>(y) - pool.num_carried] = true;
    }
  }
  if (singletons) {
    for (std::size_t j = 0; j < out.size(); ++j) {
      if (pool.entries[pool.num_carried + j].candidate.mention_score > threshold) {
        out[j] = true;
      }
    }
  }
  return out;
}

TurnResult decode_turn(OnlineState& state, const Utterance& utterance,
                       TurnScorer& scorer, const DecodeConfig& config) {
  if (utterance.tokens.empty()) {
    throw std::invalid_argument("decode_turn: empty utterance");
  }
  SpeakerMap map = state.speaker_map_;
  const int speaker = map.assign(utterance.speaker);

  std::vector<int> lengths;
  for (const Utterance& u : state.utterances_) {
    lengths.push_back(static_cast<int>(u.tokens.size()));
  }
  lengths.push_back(static_cast<int>(utterance.tokens.size()));
  const int i = state.turn();
  const int k = select_window_start(lengths, i, config.window_tokens);

  state.speaker_map_ = std::move(map);
  state.utterances_.push_back(utterance);
  state.speakers_.push_back(speaker);

  std::vector<PoolEntry> carried = state.emitted_;
  for (PoolEntry& e : carried) {
    e.carried = true;
    e.frozen = e.candidate.address.utterance < k;
  }
  TurnContext context{state.utterances_, state.speakers_, i, k, &config};
  TurnScores scored = scorer.score_turn(context, std::move(carried));
  CandidatePool& pool = scored.pool;
  if (pool.num_carried != state.emitted_.size()) {
    throw std::logic_error("scorer changed the carried mentions");
  }
  for (std::size_t c = 0; c < pool.num_carried; ++c) {
    if (pool.entries[c].candidate.address !=
        state.emitted_[c].candidate.address) {
      throw std::logic_error("scorer reordered the carried mentions");
    }
  }
  for (std::size_t j = pool.num_carried; j < pool.size(); ++j) {
    if (pool.entries[j].candidate.address.utterance != i) {
      throw std::logic_error("current candidate outside the current turn");
    }
  }

  const std::vector<int> antecedents =
      choose_antecedents(pool, scored.pairs, scored.scores);
  const std::vector<bool> emit =
      emitted_candidates(pool, antecedents, traits(config.variant).singletons);

  // Carried mentions inside the window take their recomputed values.
  for (std::size_t c = 0; c < pool.num_carried; ++c) {
    if (!pool.entries[c].frozen) {
      state.emitted_[c].candidate.representation =
          pool.entries[c].candidate.representation;
      state.emitted_[c].candidate.mention_score =
          pool.entries[c].candidate.mention_score;
    }
  }

  TurnResult result;
  result.turn = i;
  result.window_start = k;
  for (std::size_t j = 0; j < emit.size(); ++j) {
    if (!emit[j]) continue;
    PoolEntry& e = pool.entries[pool.num_carried + j];
    EmittedMention m;
    m.span = e.candidate.address;
    if (antecedents[j] >= 0) {
      const PoolEntry& y = pool.entries[antecedents[j]];
      m.antecedent = y.candidate.address;
      m.cluster = y.cluster;
      state.store_.append(m.cluster, m.span);
    } else {
      m.cluster = state.store_.create(m.span);
    }
    e.cluster = m.cluster;
    e.carried = false;
    e.frozen = false;
    state.emitted_.push_back(e);
    result.mentions.push_back(std::move(m));
  }
  return result;
}

FinalClusters split_singletons(const std::vector<Cluster>& clusters) {
  FinalClusters out;
  for (const Cluster& c : clusters) {
    if (c.size() >= 2) {
      out.scored.push_back(c);
    } else if (c.size() == 1) {
      out.singletons.push_back(c);
    }
  }
  return out;
}

FinalClusters finalize_dialogue(const OnlineState& state) {
  return split_singletons(state.store().clusters());
}

std::vector<TurnResult> decode_dialogue(std::span<const Utterance> utterances,
                                        TurnScorer& scorer,
                                        const DecodeConfig& config,
                                        OnlineState* final_state) {
  OnlineState state(config.max_speakers);
  std::vector<TurnResult> results;
  for (const Utterance& u : utterances) {
    results.push_back(decode_turn(state, u, scorer, config));
  }
  if (final_state != nullptr) *final_state = std::move(state);
  return results;
}

TurnScores NeuralScorer::score_turn(const TurnContext& context,
                                    std::vector<PoolEntry> carried) {
  Tape tape;
  const WindowInput window =
      model_.turn_window(context.utterances, context.speakers,
                         context.window_start, context.current);
  const int scope[] = {context.current};
  PoolGraph graph =
      model_.build_pool(tape, std::span(&window, 1), context.utterances,
                        context.speakers, scope, std::move(carried));
  TurnScores out;
  out.pool = std::move(graph.pool);
  out.pairs = std::move(graph.pairs);
  out.scores = graph.pair.value().values();
  return out;
}

std::vector<Cluster> decode_document(const Dialogue& dialogue,
                                     const CorefModel& model) {
  const DecodeConfig& config = model.config().decode;
  const std::vector<int> speakers =
      speaker_indices(dialogue.utterances, config.max_speakers);
  const std::vector<WindowInput> windows =
      model.segments(dialogue.utterances, speakers);
  std::vector<int> scope(dialogue.utterances.size());
  for (std::size_t u = 0; u < scope.size(); ++u) scope[u] = static_cast<int>(u);

  Tape tape;
  PoolGraph graph = model.build_pool(tape, windows, dialogue.utterances,
                                     speakers, scope, {});
  const std::vector<double>& scores = graph.pair.value().values();
  const std::vector<int> antecedents =
      choose_antecedents(graph.pool, graph.pairs, scores);
  const std::vector<bool> emit = emitted_candidates(
      graph.pool, antecedents, traits(config.variant).singletons);

  ClusterStore store;
  std::vector<int> cluster(graph.pool.size(), -1);
  for (std::size_t j = 0; j < emit.size(); ++j) {
    if (!emit[j]) continue;
    const MentionAddress& m = graph.pool.entries[j].candidate.address;
    if (antecedents[j] >= 0) {
      cluster[j] = cluster[antecedents[j]];
      store.append(cluster[j], m);
    } else {
      cluster[j] = store.create(m);
    }
  }
  return store.clusters();
}

namespace {

template <typename PairScore>
TurnScores score_with(std::vector<PoolEntry> carried,
                      std::vector<SpanCandidate> current,
                      const TurnContext& context, PairScore&& pair_score) {
  TurnScores out;
  out.pool = build_candidate_pool(std::move(carried), std::move(current));
  for (PoolEntry& e : out.pool.entries) {
    e.candidate.speaker = context.speakers[e.candidate.address.utterance];
  }
  out.pairs = antecedent_pairs(out.pool, context.config->max_antecedents);
  for (std::size_t p = 0; p < out.pairs.size(); ++p) {
    out.scores.push_back(
        pair_score(out.pool.entries[out.pairs.anaphor[p]].candidate.address,
                   out.pool.entries[out.pairs.antecedent[p]].candidate.address));
  }
  return out;
}

}  // namespace

TurnScores StringMatchScorer::score_turn(const TurnContext& context,
                                         std::vector<PoolEntry> carried) {
  const auto& tokens = context.utterances[context.current].tokens;
  const int n = static_cast<int>(tokens.size());
  std::vector<TokenSpan> spans = enumerate_spans(n, 1);
  std::vector<double> scores;
  for (const TokenSpan& s : spans) {
    const unsigned char c = static_cast<unsigned char>(tokens[s.start][0]);
    scores.push_back(std::isupper(c) ? 1.0 : -1.0);
  }
  std::vector<SpanCandidate> current;
  for (std::size_t k : prune_top_spans(spans, scores, n,
                                       context.config->top_span_ratio)) {
    SpanCandidate c;
    c.address = {context.current, spans[k].start, spans[k].end};
    c.mention_score = scores[k];
    current.push_back(std::move(c));
  }
  auto surface = [&](const MentionAddress& m) -> const std::string& {
    return context.utterances[m.utterance].tokens[m.start];
  };
  return score_with(std::move(carried), std::move(current), context,
                    [&](const MentionAddress& x, const MentionAddress& y) {
                      return surface(x) == surface(y) ? 1.0 : -1.0;
                    });
}

OracleScorer::OracleScorer(const Dialogue& gold) {
  for (std::size_t c = 0; c < gold.clusters.size(); ++c) {
    for (const MentionAddress& m : gold.clusters[c]) {
      labels_.emplace_back(m, static_cast<int>(c));
    }
  }
  std::sort(labels_.begin(), labels_.end());
}

int OracleScorer::label(const MentionAddress& m) const {
  auto it = std::lower_bound(
      labels_.begin(), labels_.end(), m,
      [](const auto& entry, const MentionAddress& key) {
        return entry.first < key;
      });
  return it != labels_.end() && it->first == m ? it->second : -1;
}

TurnScores OracleScorer::score_turn(const TurnContext& context,
                                    std::vector<PoolEntry> carried) {
  std::vector<SpanCandidate> current;
  for (const auto& [m, c] : labels_) {
    if (m.utterance != context.current) continue;
    SpanCandidate cand;
    cand.address = m;
    cand.mention_score = 1.0;
    current.push_back(std::move(cand));
  }
  return score_with(std::move(carried), std::move(current), context,
                    [&](const MentionAddress& x, const MentionAddress& y) {
                      const int lx = label(x);
                      return lx >= 0 && lx == label(y) ? 1.0 : -1.0;
                    });
}

}  // namespace ocoref
