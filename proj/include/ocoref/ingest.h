#ifndef OCOREF_INGEST_H_
#define OCOREF_INGEST_H_

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ocoref {

// A mention lives inside one utterance: tokens [start, end], both inclusive.
struct MentionAddress {
  int utterance = 0;
  int start = 0;
  int end = 0;

  int width() const { return end - start + 1; }
  auto operator<=>(const MentionAddress&) const = default;
};

using Cluster = std::vector<MentionAddress>;

std::string to_string(const MentionAddress& address);

struct Utterance {
  std::string speaker;
  std::vector<std::string> tokens;

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string doc_id;
  std::vector<Utterance> utterances;
  std::vector<Cluster> clusters;

  bool operator==(const Dialogue&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A mention address shared by two clusters.
class PluralLinkError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ParseOptions {
  // Drop mentions that belong to more than one cluster instead of failing.
  bool drop_plural_links = false;
  // Receives one message per dropped mention or carried-forward speaker.
  std::vector<std::string>* warnings = nullptr;
};

// Throws ValidationError (or PluralLinkError) when an invariant is broken.
void validate(const Dialogue& dialogue);

// Removes every mention address that appears in more than one cluster and
// returns the removed addresses. Clusters left empty are erased.
std::vector<MentionAddress> drop_plural_links(Dialogue& dialogue);

// One JSON object per line:
//   {"doc_id": str, "utterances": [{"speaker": str, "tokens": [...]}],
//    "clusters": [[[u, s, e], ...], ...]}
// Blank lines are skipped.
std::vector<Dialogue> parse_dialogue_jsonl(std::istream& in,
                                           const ParseOptions& options = {});
std::string to_jsonl(const Dialogue& dialogue);
void write_dialogue_jsonl(std::ostream& out, std::span<const Dialogue> dialogues);

// CoNLL-2012 column format. Only the document id, word (column 3), speaker
// (column 9) and the last (coreference) column are read; every sentence
// becomes one utterance. A "-" speaker carries the previous speaker forward.
std::vector<Dialogue> parse_conll(std::istream& in,
                                  const ParseOptions& options = {});

// Dispatches on extension: ".conll" (and "*_conll") go to parse_conll, the
// rest to parse_dialogue_jsonl. Throws std::runtime_error when unreadable.
std::vector<Dialogue> read_dialogues(const std::string& path,
                                     const ParseOptions& options = {});

// Synthetic dialogue generator.
//
// Gold coreference follows three rules: occurrences of the same name string
// corefer dialogue-wide; first-person pronouns ("I", "me", "my") corefer with
// every other first-person pronoun of the same speaker; a singleton_rate
// fraction of name slots use a name that occurs once and forms a size-1
// cluster.
struct GenSpec {
  std::uint64_t seed = 1;
  int num_dialogues = 10;
  int min_speakers = 2;
  int max_speakers = 4;
  int min_utterances = 6;
  int max_utterances = 12;
  int name_vocab_size = 40;
  double singleton_rate = 0.2;
  double first_person_rate = 0.4;
  // Filler (non-mention) words per utterance.
  int min_fillers = 3;
  int max_fillers = 7;
  int max_mentions_per_utterance = 2;
  // When false, size-1 gold clusters are not written (CoNLL-style data).
  bool annotate_singletons = true;

  void validate() const;
};

std::vector<Dialogue> generate_synthetic(const GenSpec& spec);

bool is_first_person_pronoun(const std::string& token);

}  // namespace ocoref

#endif  // OCOREF_INGEST_H_
