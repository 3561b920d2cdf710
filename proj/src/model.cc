#include "ocoref/model.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>

#include "json.hpp"

namespace ocoref {

using nlohmann::json;

VariantTraits traits(Variant v) {
  VariantTraits t;
  switch (v) {
    case Variant::kBL:
      break;
    case Variant::kSR:
      t.singletons = t.mention_loss = true;
      break;
    case Variant::kORSGSA:
      t.self_attention = true;
      [[fallthrough]];
    case Variant::kORSG:
      t.speaker_loss = true;
      [[fallthrough]];
    case Variant::kOR:
      t.online_training = t.singletons = t.mention_loss = t.separator = true;
      break;
  }
  return t;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kBL: return "BL";
    case Variant::kSR: return "SR";
    case Variant::kOR: return "OR";
    case Variant::kORSG: return "OR+SG";
    case Variant::kORSGSA: return "OR+SG+SA";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) c = static_cast<char>(std::toupper(c));
  for (Variant v : {Variant::kBL, Variant::kSR, Variant::kOR, Variant::kORSG,
                    Variant::kORSGSA}) {
    if (upper == variant_name(v)) return v;
  }
  return std::nullopt;
}

CorefModel::CorefModel(ModelConfig config, Vocab vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  if (vocab_.max_speakers() < config_.decode.max_speakers) {
    throw std::invalid_argument("vocabulary has fewer speaker tokens than "
                                "max_speakers");
  }
  std::mt19937_64 rng(seed);
  encoder_ = EncoderParams::create(params_, vocab_.size(), config_.encoder, rng);
  scoring_ = ScoringParams::create(params_, config_.encoder.dim,
                                   config_.scoring, rng);
}

int CorefModel::span_width() const {
  return span_dim(config_.encoder.dim, config_.scoring.width_dim);
}

WindowOptions CorefModel::window_options() const {
  return {config_.decode.speaker_tokens, traits(variant()).separator};
}

std::vector<WindowInput> CorefModel::segments(
    std::span<const Utterance> utterances,
    std::span<const int> speakers) const {
  const int cap = config_.decode.window_tokens;
  std::vector<WindowInput> out;
  const int n = static_cast<int>(utterances.size());
  int first = 0;
  while (first < n) {
    int total = static_cast<int>(utterances[first].tokens.size());
    if (total > cap) {
      throw WindowOverflowError("utterance " + std::to_string(first) +
                                " has " + std::to_string(total) +
                                " tokens, more than the budget of " +
                                std::to_string(cap));
    }
    int last = first;
    while (last + 1 < n &&
           total + static_cast<int>(utterances[last + 1].tokens.size()) <= cap) {
      total += static_cast<int>(utterances[++last].tokens.size());
    }
    out.push_back(assemble_window(utterances, first, last, speakers, vocab_,
                                  {config_.decode.speaker_tokens, false}));
    first = last + 1;
  }
  return out;
}

WindowInput CorefModel::turn_window(std::span<const Utterance> utterances,
                                    std::span<const int> speakers, int first,
                                    int current) const {
  return assemble_window(utterances, first, current, speakers, vocab_,
                         window_options());
}

namespace {

int window_of(std::span<const WindowInput> windows, int utterance) {
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (windows[w].contains(utterance)) return static_cast<int>(w);
  }
  return -1;
}

}  // namespace

PoolGraph CorefModel::build_pool(Tape& tape,
                                 std::span<const WindowInput> windows,
                                 std::span<const Utterance> utterances,
                                 std::span<const int> speakers,
                                 std::span<const int> scope,
                                 std::vector<PoolEntry> carried,
                                 const Dropout& dropout) const {
  const std::size_t dg = static_cast<std::size_t>(span_width());
  PoolGraph out;

  // Spans to represent per window; row ids refer to the stacked blocks.
  std::vector<std::vector<MentionAddress>> requests(windows.size());
  std::vector<std::pair<int, std::size_t>> carried_slot(carried.size());
  std::vector<std::pair<int, std::size_t>> enum_slot;
  auto request = [&](const MentionAddress& m) {
    const int w = window_of(windows, m.utterance);
    if (w < 0) {
      throw std::invalid_argument("mention " + to_string(m) +
                                  " is outside every window");
    }
    requests[w].push_back(m);
    return std::pair<int, std::size_t>(w, requests[w].size() - 1);
  };

  std::vector<std::vector<double>> frozen_rows;
  std::vector<double> frozen_scores;
  for (std::size_t c = 0; c < carried.size(); ++c) {
    const PoolEntry& e = carried[c];
    if (e.frozen) {
      if (e.candidate.representation.size() != dg) {
        throw DimensionError("frozen mention " + to_string(e.candidate.address) +
                             " has no stored representation");
      }
      frozen_rows.push_back(e.candidate.representation);
      frozen_scores.push_back(e.candidate.mention_score);
      carried_slot[c] = {-1, frozen_rows.size() - 1};
    } else {
      carried_slot[c] = request(e.candidate.address);
    }
  }

  // Enumerate the scope in document order with global token offsets.
  std::vector<TokenSpan> global;
  int offset = 0;
  for (int u : scope) {
    const int n = static_cast<int>(utterances[u].tokens.size());
    for (const TokenSpan& s : enumerate_spans(n, config_.decode.max_span_width)) {
      out.enumerated.push_back({u, s.start, s.end});
      global.push_back({offset + s.start, offset + s.end});
      enum_slot.push_back(request(out.enumerated.back()));
    }
    offset += n;
  }

  // Stack frozen rows, then each window's block.
  std::vector<Var> g_blocks, s_blocks;
  std::vector<std::size_t> block_base(windows.size(), 0);
  std::size_t rows = 0;
  if (!frozen_rows.empty()) {
    Matrix fg(frozen_rows.size(), dg), fs(frozen_rows.size(), 1);
    for (std::size_t r = 0; r < frozen_rows.size(); ++r) {
      std::copy(frozen_rows[r].begin(), frozen_rows[r].end(), fg.row(r).begin());
      fs(r, 0) = frozen_scores[r];
    }
    g_blocks.push_back(tape.constant(std::move(fg)));
    s_blocks.push_back(tape.constant(std::move(fs)));
    rows = frozen_rows.size();
  }
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (requests[w].empty()) continue;
    Var tokens = encode(tape, windows[w], encoder_);
    Var g = dropout.apply(
        tape, span_representations(tape, tokens, windows[w], requests[w],
                                   scoring_));
    g_blocks.push_back(g);
    s_blocks.push_back(mention_scores(tape, g, scoring_));
    block_base[w] = rows;
    rows += requests[w].size();
  }
  auto row_of = [&](std::pair<int, std::size_t> slot) {
    return slot.first < 0 ? slot.second : block_base[slot.first] + slot.second;
  };
  Var all_g = concat_rows(g_blocks);
  Var all_s = concat_rows(s_blocks);

  std::vector<std::size_t> enum_rows;
  for (const auto& slot : enum_slot) enum_rows.push_back(row_of(slot));
  out.enumerated_scores = gather_rows(all_s, enum_rows);

  const Matrix& scores = out.enumerated_scores.value();
  out.kept = prune_top_spans(global, scores.values(), offset,
                             config_.decode.top_span_ratio);

  std::vector<std::size_t> pool_rows;
  out.pool.num_carried = carried.size();
  for (std::size_t c = 0; c < carried.size(); ++c) {
    pool_rows.push_back(row_of(carried_slot[c]));
    out.pool.entries.push_back(std::move(carried[c]));
  }
  for (std::size_t k : out.kept) {
    PoolEntry e;
    e.candidate.address = out.enumerated[k];
    pool_rows.push_back(enum_rows[k]);
    out.pool.entries.push_back(std::move(e));
  }
  out.g = gather_rows(all_g, pool_rows);
  out.mention = gather_rows(all_s, pool_rows);
  for (std::size_t r = 0; r < out.pool.size(); ++r) {
    SpanCandidate& c = out.pool.entries[r].candidate;
    const auto row = out.g.value().row(r);
    c.representation.assign(row.begin(), row.end());
    c.mention_score = out.mention.value()(r, 0);
    c.speaker = speakers[c.address.utterance];
  }

  out.contextual = out.g;
  if (traits(variant()).self_attention && out.pool.size() > 0) {
    out.contextual = self_attend(tape, out.g, scoring_).output;
  }
  out.pairs = antecedent_pairs(out.pool, config_.decode.max_antecedents);
  out.pair = out.pairs.size() == 0
                 ? tape.constant(Matrix(0, 1))
                 : pair_scores(tape, out.contextual, out.mention, out.pairs,
                               scoring_, dropout);
  return out;
}

std::string CorefModel::meta_json() const {
  const ModelConfig& c = config_;
  json meta = {
      {"variant", variant_name(c.decode.variant)},
      {"encoder",
       {{"dim", c.encoder.dim},
        {"hidden", c.encoder.hidden},
        {"max_positions", c.encoder.max_positions}}},
      {"scoring",
       {{"width_dim", c.scoring.width_dim},
        {"distance_dim", c.scoring.distance_dim},
        {"mention_hidden", c.scoring.mention_hidden}}},
      {"decode",
       {{"window_tokens", c.decode.window_tokens},
        {"top_span_ratio", c.decode.top_span_ratio},
        {"max_span_width", c.decode.max_span_width},
        {"max_antecedents", c.decode.max_antecedents},
        {"max_speakers", c.decode.max_speakers},
        {"speaker_tokens", c.decode.speaker_tokens}}},
      {"vocab", vocab_.tokens()},
  };
  return meta.dump();
}

void CorefModel::save(const std::string& path) const {
  save_checkpoint(path, params_, meta_json());
}

CorefModel CorefModel::from_checkpoint(const Checkpoint& ckpt) {
  try {
    const json meta = json::parse(ckpt.meta_json);
    ModelConfig c;
    const auto variant = parse_variant(meta.at("variant").get<std::string>());
    if (!variant) throw CheckpointError("unknown variant in checkpoint");
    c.decode.variant = *variant;
    const json& e = meta.at("encoder");
    c.encoder.dim = e.at("dim");
    c.encoder.hidden = e.at("hidden");
    c.encoder.max_positions = e.at("max_positions");
    const json& s = meta.at("scoring");
    c.scoring.width_dim = s.at("width_dim");
    c.scoring.distance_dim = s.at("distance_dim");
    c.scoring.mention_hidden = s.at("mention_hidden");
    const json& d = meta.at("decode");
    c.decode.window_tokens = d.at("window_tokens");
    c.decode.top_span_ratio = d.at("top_span_ratio");
    c.decode.max_span_width = d.at("max_span_width");
    c.decode.max_antecedents = d.at("max_antecedents");
    c.decode.max_speakers = d.at("max_speakers");
    c.decode.speaker_tokens = d.at("speaker_tokens");
    Vocab vocab =
        Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    CorefModel model(c, std::move(vocab), 0);
    restore_parameters(model.params_, ckpt);
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata: ") + e.what());
  }
}

CorefModel CorefModel::load(const std::string& path) {
  return from_checkpoint(load_checkpoint(path));
}

}  // namespace ocoref
