#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ocoref/ingest.h"
#include "support.h"

namespace ocoref {
namespace {

using testing::mention;

Dialogue sample() {
  Dialogue d;
  d.doc_id = "d1";
  d.utterances = {{"A", {"Alice", "met", "Bob"}}, {"B", {"Bob", "called", "me"}}};
  d.clusters = {{mention(0, 2, 2), mention(1, 0, 0)}, {mention(0, 0, 0)}};
  return d;
}

std::vector<Dialogue> parse(const std::string& text, ParseOptions options = {}) {
  std::istringstream in(text);
  return parse_dialogue_jsonl(in, options);
}

std::vector<Dialogue> parse_conll_text(const std::string& text) {
  std::istringstream in(text);
  return parse_conll(in);
}

std::string conll_line(const std::string& word, int index,
                       const std::string& speaker, const std::string& coref) {
  return "doc 0 " + std::to_string(index) + " " + word +
         " NN * - - - " + speaker + " " + coref + "\n";
}

TEST_SUITE("ingest") {

TEST_CASE("minimal jsonl line") {
  const auto ds = parse(
      R"({"doc_id":"d1","utterances":[{"speaker":"A","tokens":["Hi"]}],"clusters":[]})");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].doc_id == "d1");
  CHECK(ds[0].utterances.size() == 1);
  CHECK(ds[0].clusters.empty());
}

TEST_CASE("jsonl round trip") {
  const Dialogue d = sample();
  const auto back = parse(to_jsonl(d));
  REQUIRE(back.size() == 1);
  CHECK(back[0] == d);

  GenSpec spec;
  spec.num_dialogues = 20;
  const auto corpus = generate_synthetic(spec);
  std::ostringstream out;
  write_dialogue_jsonl(out, corpus);
  CHECK(parse(out.str()) == corpus);
}

TEST_CASE("out of range mention is a validation error") {
  CHECK_THROWS_AS(
      parse(R"({"doc_id":"d","utterances":[{"speaker":"A","tokens":["a","b"]}],"clusters":[[[0,5,5]]]})"),
      ValidationError);
  CHECK_THROWS_AS(
      parse(R"({"doc_id":"d","utterances":[{"speaker":"A","tokens":["a","b"]}],"clusters":[[[1,0,0]]]})"),
      ValidationError);
}

TEST_CASE("validation error names doc and address") {
  try {
    parse(R"({"doc_id":"doc-x","utterances":[{"speaker":"A","tokens":["a","b"]}],"clusters":[[[0,1,5]]]})");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("doc-x") != std::string::npos);
  }
}

TEST_CASE("malformed json reports the line") {
  const std::string good =
      R"({"doc_id":"d","utterances":[{"speaker":"A","tokens":["a"]}],"clusters":[]})";
  try {
    parse(good + "\n" + good + "\n{not json\n");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("plural links rejected or dropped") {
  const std::string line =
      R"({"doc_id":"d","utterances":[{"speaker":"A","tokens":["a","b","c"]}],"clusters":[[[0,0,0],[0,1,1]],[[0,1,1],[0,2,2]]]})";
  CHECK_THROWS_AS(parse(line), PluralLinkError);
  std::vector<std::string> warnings;
  ParseOptions options;
  options.drop_plural_links = true;
  options.warnings = &warnings;
  const auto ds = parse(line, options);
  REQUIRE(ds.size() == 1);
  for (const Cluster& c : ds[0].clusters) {
    for (const MentionAddress& m : c) CHECK(m != mention(0, 1, 1));
  }
  CHECK(warnings.size() == 1);
}

TEST_CASE("conll bracket grammar") {
  const std::string doc = "#begin document (test); part 000\n" +
                          conll_line("the", 0, "A", "(3") +
                          conll_line("big", 1, "A", "-") +
                          conll_line("dog", 2, "A", "3)") + "\n" +
                          conll_line("it", 0, "B", "(3)") +
                          conll_line("ran", 1, "B", "-") + "\n#end document\n";
  const auto ds = parse_conll_text(doc);
  REQUIRE(ds.size() == 1);
  REQUIRE(ds[0].utterances.size() == 2);
  CHECK(ds[0].utterances[1].speaker == "B");
  REQUIRE(ds[0].clusters.size() == 1);
  CHECK(ds[0].clusters[0] == Cluster{mention(0, 0, 2), mention(1, 0, 0)});
}

TEST_CASE("conll single token and nesting") {
  const std::string doc = "#begin document (n);\n" +
                          conll_line("John", 0, "A", "(1)|(2") +
                          conll_line("'s", 1, "A", "-") +
                          conll_line("dog", 2, "A", "2)") +
                          "\n#end document\n";
  const auto ds = parse_conll_text(doc);
  REQUIRE(ds.size() == 1);
  std::set<Cluster> clusters(ds[0].clusters.begin(), ds[0].clusters.end());
  CHECK(clusters.count(Cluster{mention(0, 0, 0)}));
  CHECK(clusters.count(Cluster{mention(0, 0, 2)}));
}

TEST_CASE("conll without marks and with errors") {
  const std::string plain = "#begin document (p);\n" + conll_line("hi", 0, "A", "-") +
                            "\n#end document\n";
  const auto ds = parse_conll_text(plain);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].clusters.empty());

  const std::string unbalanced = "#begin document (u);\n" +
                                 conll_line("hi", 0, "A", "(4") +
                                 "\n#end document\n";
  CHECK_THROWS_AS(parse_conll_text(unbalanced), ParseError);
  CHECK_THROWS_AS(parse_conll_text("#begin document (s);\ndoc 0 0 hi NN\n\n#end document\n"),
                  ParseError);
}

TEST_CASE("conll dash speaker carries forward") {
  const std::string doc = "#begin document (c);\n" + conll_line("a", 0, "Ann", "-") +
                          "\n" + conll_line("b", 0, "-", "-") + "\n#end document\n";
  std::vector<std::string> warnings;
  ParseOptions options;
  options.warnings = &warnings;
  std::istringstream in(doc);
  const auto ds = parse_conll(in, options);
  REQUIRE(ds[0].utterances.size() == 2);
  CHECK(ds[0].utterances[1].speaker == "Ann");
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("generator is deterministic") {
  GenSpec spec;
  spec.seed = 42;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  std::ostringstream sa, sb;
  write_dialogue_jsonl(sa, a);
  write_dialogue_jsonl(sb, b);
  CHECK(sa.str() == sb.str());
  spec.seed = 43;
  std::ostringstream sc;
  write_dialogue_jsonl(sc, generate_synthetic(spec));
  CHECK(sc.str() != sa.str());
}

TEST_CASE("generator without pronouns or singletons") {
  GenSpec spec;
  spec.first_person_rate = 0.0;
  spec.singleton_rate = 0.0;
  spec.num_dialogues = 30;
  for (const Dialogue& d : generate_synthetic(spec)) {
    for (const Cluster& c : d.clusters) {
      CHECK(c.size() >= 2);
      std::set<std::string> names;
      for (const MentionAddress& m : c) {
        names.insert(d.utterances[m.utterance].tokens[m.start]);
      }
      CHECK(names.size() == 1);
    }
  }
}

TEST_CASE("generator construction rules") {
  GenSpec spec;
  spec.num_dialogues = 40;
  spec.seed = 9;
  for (const Dialogue& d : generate_synthetic(spec)) {
    validate(d);
    std::map<MentionAddress, int> cluster_of;
    for (std::size_t c = 0; c < d.clusters.size(); ++c) {
      for (const MentionAddress& m : d.clusters[c]) {
        CHECK(cluster_of.emplace(m, static_cast<int>(c)).second);
      }
    }
    // Rule (b): first-person pronouns group exactly by speaker.
    std::map<std::string, std::set<int>> by_speaker;
    std::map<std::string, std::set<int>> by_name;
    for (const auto& [m, c] : cluster_of) {
      const std::string& token = d.utterances[m.utterance].tokens[m.start];
      if (is_first_person_pronoun(token)) {
        by_speaker[d.utterances[m.utterance].speaker].insert(c);
      } else {
        by_name[token].insert(c);
      }
    }
    for (const auto& [speaker, clusters] : by_speaker) CHECK(clusters.size() == 1);
    for (const auto& [name, clusters] : by_name) CHECK(clusters.size() == 1);
    std::set<int> speaker_clusters;
    for (const auto& [speaker, clusters] : by_speaker) {
      CHECK(speaker_clusters.insert(*clusters.begin()).second);
    }
  }
}

TEST_CASE("unannotated singletons are omitted") {
  GenSpec spec;
  spec.num_dialogues = 20;
  spec.annotate_singletons = false;
  for (const Dialogue& d : generate_synthetic(spec)) {
    for (const Cluster& c : d.clusters) CHECK(c.size() >= 2);
  }
}

TEST_CASE("invalid gen spec") {
  GenSpec spec;
  spec.singleton_rate = 1.5;
  CHECK_THROWS(spec.validate());
  spec = GenSpec{};
  spec.min_speakers = 5;
  spec.max_speakers = 2;
  CHECK_THROWS(spec.validate());
}

}  // TEST_SUITE

}  // namespace
}  // namespace ocoref
