#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <optional>
#include <sstream>

#include "ocoref/ingest.h"

namespace ocoref {
namespace {

constexpr std::size_t kWordColumn = 3;
constexpr std::size_t kSpeakerColumn = 9;
// doc, part, index, word, pos, parse, lemma, frame, sense, speaker, coref
constexpr std::size_t kMinColumns = 11;

std::string parse_doc_id(const std::string& line, std::size_t line_no) {
  const auto open = line.find('(');
  const auto close = line.find(')', open == std::string::npos ? 0 : open);
  if (open == std::string::npos || close == std::string::npos) {
    throw ParseError("malformed '#begin document' header", line_no);
  }
  std::string id = line.substr(open + 1, close - open - 1);
  const auto part = line.find("part", close);
  if (part != std::string::npos) {
    std::istringstream rest(line.substr(part + 4));
    int number = 0;
    if (rest >> number) id += "_" + std::to_string(number);
  }
  return id;
}

class DocumentBuilder {
 public:
  DocumentBuilder(std::string doc_id, const ParseOptions& options)
      : options_(options) {
    dialogue_.doc_id = std::move(doc_id);
  }

  void add_token(const std::vector<std::string>& cols, std::size_t line_no) {
    if (cols.size() < kMinColumns) {
      throw ParseError("missing speaker column (expected at least " +
                           std::to_string(kMinColumns) + " columns, got " +
                           std::to_string(cols.size()) + ")",
                       line_no);
    }
    if (tokens_.empty()) sentence_speaker_ = cols[kSpeakerColumn];
    const int index = static_cast<int>(tokens_.size());
    tokens_.push_back(cols[kWordColumn]);
    parse_coref(cols.back(), index, line_no);
  }

  void end_sentence(std::size_t line_no) {
    if (tokens_.empty()) return;
    for (const auto& [id, stack] : open_) {
      if (!stack.empty()) {
        throw ParseError("unbalanced coreference bracket for id " +
                             std::to_string(id) + " at sentence end",
                         line_no);
      }
    }
    Utterance u;
    if (sentence_speaker_ == "-" || sentence_speaker_ == "_") {
      u.speaker = last_speaker_.empty() ? "-" : last_speaker_;
      if (options_.warnings) {
        options_.warnings->push_back(
            "document '" + dialogue_.doc_id + "': sentence " +
            std::to_string(dialogue_.utterances.size()) +
            " has no speaker; using '" + u.speaker + "'");
      }
    } else {
      u.speaker = sentence_speaker_;
    }
    last_speaker_ = u.speaker;
    u.tokens = std::move(tokens_);
    tokens_.clear();
    dialogue_.utterances.push_back(std::move(u));
  }

  Dialogue finish(std::size_t line_no) {
    end_sentence(line_no);
    // Clusters ordered by first mention, mentions in document order.
    std::vector<Cluster> clusters;
    for (auto& [id, mentions] : mentions_) {
      std::sort(mentions.begin(), mentions.end());
      clusters.push_back(std::move(mentions));
    }
    std::sort(clusters.begin(), clusters.end(),
              [](const Cluster& a, const Cluster& b) { return a[0] < b[0]; });
    dialogue_.clusters = std::move(clusters);
    if (options_.drop_plural_links) {
      for (const MentionAddress& m : drop_plural_links(dialogue_)) {
        if (options_.warnings) {
          options_.warnings->push_back("document '" + dialogue_.doc_id +
                                       "': dropped plural-link mention " +
                                       to_string(m));
        }
      }
    }
    validate(dialogue_);
    return std::move(dialogue_);
  }

 private:
  static int parse_id(const std::string& text, std::size_t line_no) {
    if (text.empty() ||
        !std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
      throw ParseError("bad coreference id '" + text + "'", line_no);
    }
    return std::stoi(text);
  }

  void parse_coref(const std::string& column, int index, std::size_t line_no) {
    if (column == "-" || column == "_") return;
    std::size_t pos = 0;
    while (pos <= column.size()) {
      const auto bar = std::min(column.find('|', pos), column.size());
      const std::string part = column.substr(pos, bar - pos);
      pos = bar + 1;
      if (part.empty()) throw ParseError("empty coreference entry", line_no);
      const bool opens = part.front() == '(';
      const bool closes = part.back() == ')';
      if (!opens && !closes) {
        throw ParseError("bad coreference entry '" + part + "'", line_no);
      }
      const std::size_t from = opens ? 1 : 0;
      const std::size_t len = part.size() - from - (closes ? 1 : 0);
      const int id = parse_id(part.substr(from, len), line_no);
      const int utt = static_cast<int>(dialogue_.utterances.size());
      if (opens && closes) {
        mentions_[id].push_back({utt, index, index});
      } else if (opens) {
        open_[id].push_back(index);
      } else {
        auto& stack = open_[id];
        if (stack.empty()) {
          throw ParseError("closing bracket without opening for id " +
                               std::to_string(id),
                           line_no);
        }
        mentions_[id].push_back({utt, stack.back(), index});
        stack.pop_back();
      }
    }
  }

  const ParseOptions& options_;
  Dialogue dialogue_;
  std::vector<std::string> tokens_;
  std::string sentence_speaker_;
  std::string last_speaker_;
  std::map<int, std::vector<int>> open_;
  std::map<int, Cluster> mentions_;
};

std::vector<std::string> split_columns(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> cols;
  std::string col;
  while (in >> col) cols.push_back(col);
  return cols;
}

}  // namespace

std::vector<Dialogue> parse_conll(std::istream& in,
                                  const ParseOptions& options) {
  std::vector<Dialogue> out;
  std::optional<DocumentBuilder> doc;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with("#begin document")) {
      if (doc) throw ParseError("nested '#begin document'", line_no);
      doc.emplace(parse_doc_id(line, line_no), options);
      continue;
    }
    if (line.starts_with("#end document")) {
      if (!doc) throw ParseError("'#end document' without begin", line_no);
      out.push_back(doc->finish(line_no));
      doc.reset();
      continue;
    }
    const auto cols = split_columns(line);
    if (cols.empty()) {
      if (doc) doc->end_sentence(line_no);
      continue;
    }
    if (cols[0].starts_with("#")) continue;
    if (!doc) throw ParseError("token line outside a document", line_no);
    doc->add_token(cols, line_no);
  }
  if (doc) throw ParseError("missing '#end document'", line_no);
  return out;
}

}  // namespace ocoref
