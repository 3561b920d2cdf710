#include "support.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ocoref/cli.h"
#include "ocoref/scoring.h"
#include "ocoref/train.h"

namespace ocoref::testing {

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  return g > 1 ? Rational{num / g, den / g} : Rational{num, den};
}

Rational Rational::operator+(const Rational& o) const {
  const std::int64_t l = std::lcm(den, o.den);
  return make(num * (l / den) + o.num * (l / o.den), l);
}

bool Rational::operator<(const Rational& o) const {
  return num * o.den < o.num * den;
}

Rational phi4_exact(const Cluster& k, const Cluster& r) {
  std::set<MentionAddress> sk(k.begin(), k.end());
  std::int64_t common = 0;
  for (const MentionAddress& m : r) common += static_cast<std::int64_t>(sk.count(m));
  return Rational::make(2 * common, static_cast<std::int64_t>(k.size() + r.size()));
}

Rational ceaf_brute_force(const Clustering& gold, const Clustering& pred) {
  // Permute the larger side over the slots of the smaller one.
  const bool gold_small = gold.size() <= pred.size();
  const Clustering& small = gold_small ? gold : pred;
  const Clustering& large = gold_small ? pred : gold;
  std::vector<std::size_t> perm(large.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rational best;
  do {
    Rational total;
    for (std::size_t i = 0; i < small.size(); ++i) {
      total = total + phi4_exact(small[i], large[perm[i]]);
    }
    if (best < total) best = total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Rational ceaf_solver_total(const Clustering& gold, const Clustering& pred) {
  std::vector<std::vector<double>> sim(gold.size(),
                                       std::vector<double>(pred.size()));
  for (std::size_t g = 0; g < gold.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) sim[g][p] = phi4(gold[g], pred[p]);
  }
  const std::vector<int> a = max_assignment(sim);
  Rational total;
  std::set<int> used;
  for (std::size_t g = 0; g < a.size(); ++g) {
    if (a[g] < 0) continue;
    if (!used.insert(a[g]).second) return Rational::make(-1, 1);
    total = total + phi4_exact(gold[g], pred[a[g]]);
  }
  return total;
}

MentionAddress mention(int u, int s, int e) { return {u, s, e}; }

Clustering random_clustering(std::mt19937_64& rng, int max_clusters,
                             int max_size, int address_pool) {
  std::vector<MentionAddress> pool;
  for (int i = 0; i < address_pool; ++i) pool.push_back({i / 4, i % 4, i % 4});
  std::shuffle(pool.begin(), pool.end(), rng);
  const int clusters = std::uniform_int_distribution<int>(0, max_clusters)(rng);
  Clustering out;
  std::size_t next = 0;
  for (int c = 0; c < clusters && next < pool.size(); ++c) {
    const int size = std::uniform_int_distribution<int>(1, max_size)(rng);
    Cluster cluster;
    for (int j = 0; j < size && next < pool.size(); ++j) {
      cluster.push_back(pool[next++]);
    }
    out.push_back(std::move(cluster));
  }
  return out;
}

TempDir::TempDir() {
  static int counter = 0;
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("ocoref-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name) const {
  return (path_ / name).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

CliRun run(const std::vector<std::string>& args, const std::string& input) {
  std::vector<const char*> argv{"ocoref"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

ModelConfig tiny_config(Variant variant, int dim) {
  ModelConfig c;
  c.encoder.dim = dim;
  c.encoder.hidden = 2 * dim;
  c.encoder.max_positions = 66;
  c.scoring.width_dim = 2;
  c.scoring.distance_dim = 2;
  c.scoring.mention_hidden = 6;
  c.decode.variant = variant;
  c.decode.window_tokens = 64;
  c.decode.max_span_width = 3;
  c.decode.max_antecedents = 8;
  return c;
}

std::function<Var(Tape&)> composite_loss(const CorefModel& model,
                                         const Dialogue& dialogue, int turn,
                                         std::uint64_t seed) {
  const DecodeConfig& dc = model.config().decode;
  auto speakers = std::make_shared<std::vector<int>>(
      speaker_indices(dialogue.utterances, dc.max_speakers));
  const GoldIndex gold(dialogue);

  std::vector<MentionAddress> carried, current;
  for (const auto& [m, c] : gold.range(0, turn - 1)) carried.push_back(m);
  std::set<MentionAddress> chosen;
  for (const auto& [m, c] : gold.range(turn, turn)) chosen.insert(m);
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(dialogue.utterances[turn].tokens.size());
  const std::vector<TokenSpan> spans = enumerate_spans(n, dc.max_span_width);
  for (int extra = 0; extra < 3 && !spans.empty(); ++extra) {
    const TokenSpan& s =
        spans[std::uniform_int_distribution<std::size_t>(0, spans.size() - 1)(rng)];
    chosen.insert({turn, s.start, s.end});
  }
  current.assign(chosen.begin(), chosen.end());

  std::vector<MentionAddress> rows = carried;
  rows.insert(rows.end(), current.begin(), current.end());
  std::vector<MentionAddress> enumerated;
  for (const TokenSpan& s : spans) enumerated.push_back({turn, s.start, s.end});

  CandidatePool pool;
  pool.num_carried = carried.size();
  std::vector<int> labels;
  for (const MentionAddress& m : rows) {
    PoolEntry e;
    e.candidate.address = m;
    e.candidate.speaker = (*speakers)[m.utterance];
    e.carried = pool.entries.size() < carried.size();
    pool.entries.push_back(e);
    labels.push_back(gold.label(m));
  }
  const AntecedentPairs pairs = antecedent_pairs(pool, dc.max_antecedents);
  std::vector<bool> gold_pairs(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const int lx = labels[pairs.anaphor[p]];
    gold_pairs[p] = lx >= 0 && lx == labels[pairs.antecedent[p]];
  }
  std::vector<std::size_t> m_pos, m_neg;
  for (std::size_t s = 0; s < enumerated.size(); ++s) {
    (gold.label(enumerated[s]) >= 0 ? m_pos : m_neg).push_back(s);
  }
  std::vector<std::size_t> xs, ys, s_pos, s_neg;
  for (std::size_t x = pool.num_carried; x < pool.size(); ++x) {
    for (std::size_t y = 0; y < x; ++y) {
      const bool same =
          pool.entries[x].candidate.speaker == pool.entries[y].candidate.speaker;
      (same ? s_pos : s_neg).push_back(xs.size());
      xs.push_back(x);
      ys.push_back(y);
    }
  }
  const LossWeights weights = effective_weights(LossWeights{}, model.variant());
  const bool attend = traits(model.variant()).self_attention;

  return [=, &model, &dialogue](Tape& tape) {
    const WindowInput window =
        model.turn_window(dialogue.utterances, *speakers, 0, turn);
    Var tokens = encode(tape, window, model.encoder());
    Var g = span_representations(tape, tokens, window, rows, model.scoring());
    Var s_m = mention_scores(tape, g, model.scoring());
    Var contextual = attend ? self_attend(tape, g, model.scoring()).output : g;
    Var lc = pairs.size() == 0
                 ? tape.constant(Matrix(1, 1))
                 : coref_loss(tape,
                              pair_scores(tape, contextual, s_m, pairs,
                                          model.scoring()),
                              pairs, gold_pairs);
    Var enum_g =
        span_representations(tape, tokens, window, enumerated, model.scoring());
    Var lm = bce_loss(tape, mention_scores(tape, enum_g, model.scoring()), m_pos,
                      m_neg)
                 .loss;
    Var ls = xs.empty() ? tape.constant(Matrix(1, 1))
                        : bce_loss(tape,
                                   speaker_scores(tape, contextual, xs, ys,
                                                  model.scoring()),
                                   s_pos, s_neg)
                              .loss;
    return total_loss(lc, lm, ls, weights);
  };
}

TurnScores RandomScorer::score_turn(const TurnContext& context,
                                    std::vector<PoolEntry> carried) {
  contexts.push_back(context);
  received.push_back(carried);
  std::mt19937_64 rng(seed_ * 1000003ULL + static_cast<std::uint64_t>(context.current));
  const int i = context.current;
  const int n = static_cast<int>(context.utterances[i].tokens.size());
  std::vector<TokenSpan> spans = enumerate_spans(n, 3);
  std::shuffle(spans.begin(), spans.end(), rng);
  spans.resize(std::min<std::size_t>(
      spans.size(), std::uniform_int_distribution<std::size_t>(0, 4)(rng)));
  std::sort(spans.begin(), spans.end());

  // Coarse values so that ties and zero scores occur.
  std::uniform_int_distribution<int> level(-2, 2);
  std::vector<SpanCandidate> current;
  for (const TokenSpan& s : spans) {
    SpanCandidate c;
    c.address = {i, s.start, s.end};
    c.mention_score = 0.5 * level(rng);
    c.speaker = context.speakers[i];
    c.representation = {static_cast<double>(i), static_cast<double>(s.start)};
    current.push_back(std::move(c));
  }
  TurnScores out;
  out.pool = build_candidate_pool(std::move(carried), std::move(current));
  out.pairs = antecedent_pairs(out.pool, max_antecedents_);
  for (std::size_t p = 0; p < out.pairs.size(); ++p) {
    out.scores.push_back(0.5 * level(rng));
  }
  history.push_back(out);
  return out;
}

std::vector<Utterance> random_utterances(std::mt19937_64& rng, int turns,
                                         int speakers, int max_length) {
  static const char* words[] = {"Ross", "Monica", "I", "me", "the", "a",
                                "coffee", "was", "there", "my", "you", "it"};
  std::uniform_int_distribution<int> length(1, max_length);
  std::uniform_int_distribution<int> speaker(0, speakers - 1);
  std::uniform_int_distribution<int> word(0, 11);
  std::vector<Utterance> out;
  for (int t = 0; t < turns; ++t) {
    Utterance u;
    u.speaker = "spk" + std::to_string(speaker(rng));
    const int n = length(rng);
    for (int j = 0; j < n; ++j) u.tokens.push_back(words[word(rng)]);
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace ocoref::testing
