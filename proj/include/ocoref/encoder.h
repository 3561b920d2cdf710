#ifndef OCOREF_ENCODER_H_
#define OCOREF_ENCODER_H_

#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ocoref/autodiff.h"
#include "ocoref/ingest.h"

namespace ocoref {

// More distinct speakers than the vocabulary has speaker tokens.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The current utterance alone exceeds the token budget.
class WindowOverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Token ids. Specials come first in a fixed order:
//   0 "[UNK]", 1 "[SEP]", 2.. "[S1]" ... "[S<max_speakers>]", then words.
class Vocab {
 public:
  static constexpr int kUnknown = 0;
  static constexpr int kSeparator = 1;
  static constexpr int kFirstSpeaker = 2;

  explicit Vocab(int max_speakers = 16);

  // Words of every utterance in `dialogues`, in first-seen order.
  static Vocab build(std::span<const Dialogue> dialogues, int max_speakers);

  int add(const std::string& word);
  int id(std::string_view word) const;
  // 0-based speaker index -> id of S_{index+1}.
  int speaker_id(int speaker_index) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  int max_speakers() const { return max_speakers_; }
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, specials first.
  void write(std::ostream& out) const;
  static Vocab read(std::istream& in);
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  int max_speakers_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> words_;
};

// Speaker labels -> 0-based indices by order of first appearance.
class SpeakerMap {
 public:
  explicit SpeakerMap(int capacity = 16) : capacity_(capacity) {}

  // Throws CapacityError when a new label exceeds the capacity.
  int assign(const std::string& speaker);
  int size() const { return static_cast<int>(labels_.size()); }
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  std::vector<std::string> labels_;
};

// Speaker index of every utterance of `utterances`.
std::vector<int> speaker_indices(std::span<const Utterance> utterances,
                                 int capacity);

enum class TokenRole { kWord, kSpeaker, kSeparator };

struct SourceRef {
  TokenRole role = TokenRole::kWord;
  int utterance = 0;  // owning utterance (specials belong to the next one)
  int token = -1;     // index in the utterance, -1 for specials
};

// Encoder input for utterances [first, last]. For a decoding window the
// layout is  S_k u_k ... S_{i-1} u_{i-1} [SEP] S_i u_i ; a document segment
// has no [SEP].
struct WindowInput {
  std::vector<int> ids;
  std::vector<SourceRef> sources;
  std::vector<int> block_offset;      // position inside the utterance block
  std::vector<int> utterance_start;   // position of token 0, per utterance
  int first = 0;                      // k
  int last = 0;                       // i
  bool has_separator = false;

  std::size_t size() const { return ids.size(); }
  bool contains(int utterance) const {
    return utterance >= first && utterance <= last;
  }
  int position(int utterance, int token) const {
    return utterance_start[utterance - first] + token;
  }
  int separator_position() const;
};

// Smallest k such that sum(lengths[k..current]) <= cap (0-based indices).
int select_window_start(std::span<const int> lengths, int current, int cap);

struct WindowOptions {
  bool speaker_tokens = true;
  bool separator = true;
};

// `speakers[j]` is the dialogue-global speaker index of utterance j.
WindowInput assemble_window(std::span<const Utterance> utterances, int first,
                            int last, std::span<const int> speakers,
                            const Vocab& vocab, WindowOptions options = {});

struct EncoderConfig {
  int dim = 16;
  int hidden = 32;
  int max_positions = 386;
};

// Word + block-position embeddings, one scaled dot-product self-attention
// block restricted to each utterance block, and a residual feed-forward map:
//   x = E[w] + P[p];  h = x + A v;  out = h + tanh(h F1 + b1) F2 + b2
struct EncoderParams {
  Parameter* word = nullptr;
  Parameter* position = nullptr;
  Parameter* query = nullptr;
  Parameter* key = nullptr;
  Parameter* value = nullptr;
  Parameter* ff_in = nullptr;
  Parameter* ff_in_bias = nullptr;
  Parameter* ff_out = nullptr;
  Parameter* ff_out_bias = nullptr;

  static EncoderParams create(ParameterSet& params, int vocab_size,
                              const EncoderConfig& config,
                              std::mt19937_64& rng);
  static EncoderParams bind(ParameterSet& params);
};

inline constexpr std::string_view kEncoderPrefix = "encoder.";

// positions x dim. Pure function of (window, parameter values).
Var encode(Tape& tape, const WindowInput& window, const EncoderParams& params);

// Gaussian initialiser shared by the model blocks.
Matrix random_matrix(std::size_t rows, std::size_t cols, double stddev,
                     std::mt19937_64& rng);

}  // namespace ocoref

#endif  // OCOREF_ENCODER_H_
