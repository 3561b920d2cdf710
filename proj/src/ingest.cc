#include "ocoref/ingest.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "json.hpp"

namespace ocoref {

using nlohmann::json;

std::string to_string(const MentionAddress& address) {
  return "(" + std::to_string(address.utterance) + "," +
         std::to_string(address.start) + "," + std::to_string(address.end) +
         ")";
}

namespace {

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  });
}

void check_address(const Dialogue& d, const MentionAddress& m) {
  const bool in_range =
      m.utterance >= 0 &&
      m.utterance < static_cast<int>(d.utterances.size()) && m.start >= 0 &&
      m.start <= m.end &&
      m.end < static_cast<int>(d.utterances[m.utterance].tokens.size());
  if (!in_range) {
    throw ValidationError("document '" + d.doc_id + "': mention " +
                          to_string(m) + " is out of range");
  }
}

}  // namespace

void validate(const Dialogue& d) {
  if (d.doc_id.empty()) throw ValidationError("empty doc_id");
  for (std::size_t u = 0; u < d.utterances.size(); ++u) {
    const Utterance& utt = d.utterances[u];
    if (utt.speaker.empty()) {
      throw ValidationError("document '" + d.doc_id + "': utterance " +
                            std::to_string(u) + " has an empty speaker");
    }
    if (utt.tokens.empty()) {
      throw ValidationError("document '" + d.doc_id + "': utterance " +
                            std::to_string(u) + " has no tokens");
    }
    for (const std::string& tok : utt.tokens) {
      if (tok.empty() || has_whitespace(tok)) {
        throw ValidationError("document '" + d.doc_id + "': utterance " +
                              std::to_string(u) + " has an invalid token '" +
                              tok + "'");
      }
    }
  }
  std::map<MentionAddress, std::size_t> owner;
  for (std::size_t c = 0; c < d.clusters.size(); ++c) {
    if (d.clusters[c].empty()) {
      throw ValidationError("document '" + d.doc_id + "': cluster " +
                            std::to_string(c) + " is empty");
    }
    std::set<MentionAddress> seen;
    for (const MentionAddress& m : d.clusters[c]) {
      check_address(d, m);
      if (!seen.insert(m).second) {
        throw ValidationError("document '" + d.doc_id + "': mention " +
                              to_string(m) + " repeated in cluster " +
                              std::to_string(c));
      }
      auto [it, inserted] = owner.emplace(m, c);
      if (!inserted) {
        throw PluralLinkError("document '" + d.doc_id + "': mention " +
                              to_string(m) + " belongs to clusters " +
                              std::to_string(it->second) + " and " +
                              std::to_string(c));
      }
    }
  }
}

std::vector<MentionAddress> drop_plural_links(Dialogue& d) {
  std::map<MentionAddress, int> count;
  for (const Cluster& c : d.clusters) {
    std::set<MentionAddress> unique(c.begin(), c.end());
    for (const MentionAddress& m : unique) ++count[m];
  }
  std::vector<MentionAddress> dropped;
  for (const auto& [m, n] : count) {
    if (n > 1) dropped.push_back(m);
  }
  if (dropped.empty()) return dropped;
  const std::set<MentionAddress> drop(dropped.begin(), dropped.end());
  for (Cluster& c : d.clusters) {
    std::erase_if(c, [&](const MentionAddress& m) { return drop.contains(m); });
  }
  std::erase_if(d.clusters, [](const Cluster& c) { return c.empty(); });
  return dropped;
}

namespace {

Dialogue dialogue_from_json(const json& j) {
  Dialogue d;
  d.doc_id = j.at("doc_id").get<std::string>();
  for (const json& u : j.at("utterances")) {
    Utterance utt;
    utt.speaker = u.at("speaker").get<std::string>();
    utt.tokens = u.at("tokens").get<std::vector<std::string>>();
    d.utterances.push_back(std::move(utt));
  }
  if (j.contains("clusters")) {
    for (const json& c : j.at("clusters")) {
      Cluster cluster;
      for (const json& m : c) {
        if (!m.is_array() || m.size() != 3) {
          throw json::other_error::create(
              501, "mention address must be [u, s, e]", &m);
        }
        cluster.push_back({m[0].get<int>(), m[1].get<int>(), m[2].get<int>()});
      }
      d.clusters.push_back(std::move(cluster));
    }
  }
  return d;
}

}  // namespace

std::vector<Dialogue> parse_dialogue_jsonl(std::istream& in,
                                           const ParseOptions& options) {
  std::vector<Dialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Dialogue d;
    try {
      d = dialogue_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (options.drop_plural_links) {
      for (const MentionAddress& m : drop_plural_links(d)) {
        if (options.warnings) {
          options.warnings->push_back("document '" + d.doc_id +
                                      "': dropped plural-link mention " +
                                      to_string(m));
        }
      }
    }
    validate(d);
    out.push_back(std::move(d));
  }
  return out;
}

std::string to_jsonl(const Dialogue& d) {
  json utterances = json::array();
  for (const Utterance& u : d.utterances) {
    utterances.push_back({{"speaker", u.speaker}, {"tokens", u.tokens}});
  }
  json clusters = json::array();
  for (const Cluster& c : d.clusters) {
    json cluster = json::array();
    for (const MentionAddress& m : c) {
      cluster.push_back({m.utterance, m.start, m.end});
    }
    clusters.push_back(std::move(cluster));
  }
  json j = {{"doc_id", d.doc_id},
            {"utterances", std::move(utterances)},
            {"clusters", std::move(clusters)}};
  return j.dump();
}

void write_dialogue_jsonl(std::ostream& out,
                          std::span<const Dialogue> dialogues) {
  for (const Dialogue& d : dialogues) out << to_jsonl(d) << '\n';
}

std::vector<Dialogue> read_dialogues(const std::string& path,
                                     const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  const bool conll = path.ends_with(".conll") || path.ends_with("_conll");
  return conll ? parse_conll(in, options) : parse_dialogue_jsonl(in, options);
}

}  // namespace ocoref
