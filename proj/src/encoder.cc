#include "ocoref/encoder.h"

#include <cmath>
#include <istream>
#include <ostream>

namespace ocoref {

Vocab::Vocab(int max_speakers) : max_speakers_(max_speakers) {
  if (max_speakers < 1) throw std::invalid_argument("max_speakers < 1");
  tokens_ = {"[UNK]", "[SEP]"};
  for (int s = 1; s <= max_speakers; ++s) {
    tokens_.push_back("[S" + std::to_string(s) + "]");
  }
}

Vocab Vocab::build(std::span<const Dialogue> dialogues, int max_speakers) {
  Vocab v(max_speakers);
  for (const Dialogue& d : dialogues) {
    for (const Utterance& u : d.utterances) {
      for (const std::string& tok : u.tokens) v.add(tok);
    }
  }
  return v;
}

int Vocab::add(const std::string& word) {
  auto [it, inserted] = words_.emplace(word, size());
  if (inserted) tokens_.push_back(word);
  return it->second;
}

int Vocab::id(std::string_view word) const {
  auto it = words_.find(std::string(word));
  return it == words_.end() ? kUnknown : it->second;
}

int Vocab::speaker_id(int speaker_index) const {
  if (speaker_index < 0 || speaker_index >= max_speakers_) {
    throw CapacityError("speaker index " + std::to_string(speaker_index) +
                        " exceeds the " + std::to_string(max_speakers_) +
                        " speaker tokens");
  }
  return kFirstSpeaker + speaker_index;
}

void Vocab::write(std::ostream& out) const {
  for (const std::string& t : tokens_) out << t << '\n';
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  int speakers = 0;
  while (static_cast<std::size_t>(kFirstSpeaker + speakers) < tokens.size() &&
         tokens[kFirstSpeaker + speakers] ==
             "[S" + std::to_string(speakers + 1) + "]") {
    ++speakers;
  }
  if (tokens.size() < 2 || tokens[0] != "[UNK]" || tokens[1] != "[SEP]" ||
      speakers == 0) {
    throw std::runtime_error("vocabulary does not start with the specials");
  }
  Vocab v(speakers);
  for (std::size_t i = kFirstSpeaker + speakers; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != static_cast<int>(i)) {
      throw std::runtime_error("duplicate vocabulary entry '" + tokens[i] +
                               "'");
    }
  }
  return v;
}

Vocab Vocab::read(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return from_tokens(tokens);
}

int SpeakerMap::assign(const std::string& speaker) {
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    if (labels_[j] == speaker) return static_cast<int>(j);
  }
  if (size() >= capacity_) {
    throw CapacityError("speaker '" + speaker + "' exceeds the capacity of " +
                        std::to_string(capacity_) + " speakers");
  }
  labels_.push_back(speaker);
  return size() - 1;
}

std::vector<int> speaker_indices(std::span<const Utterance> utterances,
                                 int capacity) {
  SpeakerMap map(capacity);
  std::vector<int> out;
  out.reserve(utterances.size());
  for (const Utterance& u : utterances) out.push_back(map.assign(u.speaker));
  return out;
}

int WindowInput::separator_position() const {
  for (std::size_t p = 0; p < sources.size(); ++p) {
    if (sources[p].role == TokenRole::kSeparator) return static_cast<int>(p);
  }
  return -1;
}

int select_window_start(std::span<const int> lengths, int current, int cap) {
  if (current < 0 || current >= static_cast<int>(lengths.size())) {
    throw std::out_of_range("select_window_start: turn out of range");
  }
  if (lengths[current] > cap) {
    throw WindowOverflowError("utterance " + std::to_string(current) +
                              " has " + std::to_string(lengths[current]) +
                              " tokens, more than the budget of " +
                              std::to_string(cap));
  }
  int k = current;
  int total = lengths[current];
  while (k > 0 && total + lengths[k - 1] <= cap) {
    total += lengths[k - 1];
    --k;
  }
  return k;
}

WindowInput assemble_window(std::span<const Utterance> utterances, int first,
                            int last, std::span<const int> speakers,
                            const Vocab& vocab, WindowOptions options) {
  if (first < 0 || first > last ||
      last >= static_cast<int>(utterances.size()) ||
      speakers.size() < utterances.size()) {
    throw std::out_of_range("assemble_window: bad utterance range");
  }
  WindowInput w;
  w.first = first;
  w.last = last;
  w.has_separator = options.separator;
  for (int u = first; u <= last; ++u) {
    int offset = 0;
    auto push = [&](int id, TokenRole role, int token) {
      w.ids.push_back(id);
      w.sources.push_back({role, u, token});
      w.block_offset.push_back(offset++);
    };
    if (u == last && options.separator) {
      push(Vocab::kSeparator, TokenRole::kSeparator, -1);
    }
    if (options.speaker_tokens) {
      push(vocab.speaker_id(speakers[u]), TokenRole::kSpeaker, -1);
    }
    w.utterance_start.push_back(static_cast<int>(w.ids.size()));
    const auto& tokens = utterances[u].tokens;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      push(vocab.id(tokens[t]), TokenRole::kWord, static_cast<int>(t));
    }
  }
  return w;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, double stddev,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

EncoderParams EncoderParams::create(ParameterSet& params, int vocab_size,
                                    const EncoderConfig& config,
                                    std::mt19937_64& rng) {
  const auto d = static_cast<std::size_t>(config.dim);
  const auto h = static_cast<std::size_t>(config.hidden);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  params.add("encoder.word", random_matrix(vocab_size, d, s, rng));
  params.add("encoder.position",
             random_matrix(config.max_positions, d, 0.5 * s, rng));
  params.add("encoder.query", random_matrix(d, d, s, rng));
  params.add("encoder.key", random_matrix(d, d, s, rng));
  params.add("encoder.value", random_matrix(d, d, s, rng));
  params.add("encoder.ff_in", random_matrix(d, h, s, rng));
  params.add("encoder.ff_in_bias", Matrix(1, h));
  params.add("encoder.ff_out",
             random_matrix(h, d, 0.5 / std::sqrt(static_cast<double>(h)), rng));
  params.add("encoder.ff_out_bias", Matrix(1, d));
  return bind(params);
}

EncoderParams EncoderParams::bind(ParameterSet& params) {
  EncoderParams p;
  p.word = &params.at("encoder.word");
  p.position = &params.at("encoder.position");
  p.query = &params.at("encoder.query");
  p.key = &params.at("encoder.key");
  p.value = &params.at("encoder.value");
  p.ff_in = &params.at("encoder.ff_in");
  p.ff_in_bias = &params.at("encoder.ff_in_bias");
  p.ff_out = &params.at("encoder.ff_out");
  p.ff_out_bias = &params.at("encoder.ff_out_bias");
  return p;
}

Var encode(Tape& tape, const WindowInput& window, const EncoderParams& p) {
  const std::size_t n = window.size();
  if (n == 0) throw DimensionError("encode: empty window");
  const auto vocab_rows = p.word->value.rows();
  const auto position_rows = p.position->value.rows();
  std::vector<std::size_t> ids(n), positions(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (window.ids[j] < 0 ||
        static_cast<std::size_t>(window.ids[j]) >= vocab_rows) {
      throw DimensionError("encode: token id " + std::to_string(window.ids[j]) +
                           " outside a vocabulary of " +
                           std::to_string(vocab_rows));
    }
    if (static_cast<std::size_t>(window.block_offset[j]) >= position_rows) {
      throw DimensionError("encode: utterance block longer than the " +
                           std::to_string(position_rows) +
                           " position embeddings");
    }
    ids[j] = static_cast<std::size_t>(window.ids[j]);
    positions[j] = static_cast<std::size_t>(window.block_offset[j]);
  }
  Var x = add(gather_rows(tape.parameter(*p.word), std::move(ids)),
              gather_rows(tape.parameter(*p.position), std::move(positions)));

  Var q = matmul(x, tape.parameter(*p.query));
  Var k = matmul(x, tape.parameter(*p.key));
  Var v = matmul(x, tape.parameter(*p.value));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.cols()));

  // Attention stays inside each utterance block; blocks are contiguous.
  std::vector<Var> blocks;
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && window.sources[end].utterance ==
                          window.sources[begin].utterance) {
      ++end;
    }
    std::vector<std::size_t> rows;
    for (std::size_t r = begin; r < end; ++r) rows.push_back(r);
    Var qb = gather_rows(q, rows);
    Var kb = gather_rows(k, rows);
    Var vb = gather_rows(v, std::move(rows));
    Var attn = softmax_rows(scale(matmul(qb, transpose(kb)), inv_sqrt_d));
    blocks.push_back(matmul(attn, vb));
    begin = end;
  }
  Var h = add(x, concat_rows(blocks));
  Var inner = tanh(add_row_bias(matmul(h, tape.parameter(*p.ff_in)),
                                tape.parameter(*p.ff_in_bias)));
  Var ff = add_row_bias(matmul(inner, tape.parameter(*p.ff_out)),
                        tape.parameter(*p.ff_out_bias));
  return add(h, ff);
}

}  // namespace ocoref
