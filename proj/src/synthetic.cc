#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "ocoref/ingest.h"

namespace ocoref {
namespace {

constexpr std::array kSpeakerLabels = {
    "Ross",  "Rachel", "Monica", "Chandler", "Joey",  "Phoebe",
    "Carol", "Susan",  "Janice", "Gunther",  "Emily", "Mike"};

constexpr std::array kNames = {
    "Alice",  "Bob",    "Carla",  "Dave",   "Erin",   "Frank",  "Grace",
    "Hank",   "Irene",  "Jack",   "Karen",  "Leo",    "Mona",   "Nate",
    "Olga",   "Paul",   "Quinn",  "Rosa",   "Sam",    "Tina",   "Uma",
    "Victor", "Wendy",  "Xavier", "Yara",   "Zack",   "Anna",   "Ben",
    "Cleo",   "Dan",    "Eva",    "Fred",   "Gina",   "Hugo",   "Ivy",
    "Jon",    "Kim",    "Liam",   "Maya",   "Noah",   "Omar",   "Pia",
    "Ralph",  "Sara",   "Tom",    "Ursula", "Vera",   "Walt",   "Xena",
    "Yusuf",  "Zoe",    "Abel",   "Bella",  "Cyrus",  "Dora",   "Elias",
    "Fiona",  "Gus",    "Hazel",  "Igor"};

constexpr std::array kFillers = {
    "think",  "that",  "really", "saw",   "the",    "park",   "yesterday",
    "said",   "was",   "about",  "going", "to",     "with",   "and",
    "maybe",  "later", "called", "again", "never",  "likes",  "coffee",
    "so",     "well",  "okay",   "just",  "there",  "today",  "movie",
    "know",   "right", "funny",  "work",  "home",   "dinner", "tonight",
    "oh",     "yeah",  "not",    "sure",  "wait"};

constexpr std::array kFirstPerson = {"I", "me", "my"};

std::string name_for(int index) {
  if (index < static_cast<int>(kNames.size())) return kNames[index];
  return "Name" + std::to_string(index);
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

// The decoder keeps at most ceil(0.4 * n) candidates per utterance.
int mention_capacity(int tokens) {
  return static_cast<int>(std::ceil(0.4 * tokens - 1e-9));
}

enum class SlotKind { kFirstPerson, kEntity, kSingleton };

struct Slot {
  SlotKind kind;
  int entity = -1;
};

struct PlannedUtterance {
  int speaker = 0;
  int fillers = 0;
  std::vector<Slot> slots;
};

Dialogue generate_one(const GenSpec& spec, int index, std::mt19937_64& rng) {
  const int num_speakers = uniform(rng, spec.min_speakers, spec.max_speakers);
  std::vector<std::string> speakers(kSpeakerLabels.begin(),
                                    kSpeakerLabels.end());
  std::shuffle(speakers.begin(), speakers.end(), rng);
  speakers.resize(num_speakers);

  const int turns = uniform(rng, spec.min_utterances, spec.max_utterances);
  std::vector<PlannedUtterance> plan(turns);
  // Every speaker opens once, then turns are drawn at random.
  int previous = -1;
  for (int t = 0; t < turns; ++t) {
    PlannedUtterance& u = plan[t];
    int s = t;
    if (t >= num_speakers) {
      s = uniform(rng, 0, num_speakers - 1);
      if (num_speakers > 1 && s == previous) s = (s + 1) % num_speakers;
    }
    previous = u.speaker = s;
    u.fillers = uniform(rng, spec.min_fillers, spec.max_fillers);
    int m = uniform(rng, 1, spec.max_mentions_per_utterance);
    while (m > 1 && m > mention_capacity(u.fillers + m)) --m;
    for (int j = 0; j < m; ++j) {
      const bool fp = coin(rng, spec.first_person_rate);
      u.slots.push_back({fp ? SlotKind::kFirstPerson : SlotKind::kEntity});
    }
  }

  // Decide singletons, then make sure every entity is mentioned twice.
  std::vector<Slot*> entity_slots;
  for (PlannedUtterance& u : plan) {
    for (Slot& slot : u.slots) {
      if (slot.kind != SlotKind::kEntity) continue;
      if (coin(rng, spec.singleton_rate)) {
        slot.kind = SlotKind::kSingleton;
      } else {
        entity_slots.push_back(&slot);
      }
    }
  }
  if (entity_slots.size() == 1) {
    std::vector<int> open;
    for (int t = 0; t < turns; ++t) {
      const int m = static_cast<int>(plan[t].slots.size()) + 1;
      if (m <= spec.max_mentions_per_utterance &&
          m <= mention_capacity(plan[t].fillers + m)) {
        open.push_back(t);
      }
    }
    if (open.empty()) {
      entity_slots[0]->kind = SlotKind::kSingleton;
      entity_slots.clear();
    } else {
      const int t = open[uniform(rng, 0, static_cast<int>(open.size()) - 1)];
      plan[t].slots.push_back({SlotKind::kEntity});
      entity_slots.clear();
      for (PlannedUtterance& u : plan) {
        for (Slot& slot : u.slots) {
          if (slot.kind == SlotKind::kEntity) entity_slots.push_back(&slot);
        }
      }
    }
  }
  const int num_slots = static_cast<int>(entity_slots.size());
  const int num_entities =
      num_slots == 0 ? 0 : uniform(rng, 1, std::max(1, num_slots / 2));
  std::vector<int> assignment;
  for (int e = 0; e < num_entities; ++e) {
    assignment.push_back(e);
    assignment.push_back(e);
  }
  while (static_cast<int>(assignment.size()) < num_slots) {
    assignment.push_back(uniform(rng, 0, num_entities - 1));
  }
  std::shuffle(assignment.begin(), assignment.end(), rng);
  for (int j = 0; j < num_slots; ++j) entity_slots[j]->entity = assignment[j];

  std::vector<int> name_order(spec.name_vocab_size);
  for (int j = 0; j < spec.name_vocab_size; ++j) name_order[j] = j;
  std::shuffle(name_order.begin(), name_order.end(), rng);
  std::size_t next_name = static_cast<std::size_t>(num_entities);

  Dialogue d;
  d.doc_id = "synthetic-" + std::to_string(spec.seed) + "-" +
             std::to_string(index);
  std::map<std::string, Cluster> by_name;
  std::map<int, Cluster> by_speaker;
  std::vector<Cluster> singletons;
  for (int t = 0; t < turns; ++t) {
    const PlannedUtterance& u = plan[t];
    std::vector<std::string> tokens;
    for (int j = 0; j < u.fillers; ++j) {
      tokens.push_back(
          kFillers[uniform(rng, 0, static_cast<int>(kFillers.size()) - 1)]);
    }
    std::vector<int> slot_positions;
    for (std::size_t j = 0; j < u.slots.size(); ++j) {
      const int pos = uniform(rng, 0, static_cast<int>(tokens.size()));
      for (int& p : slot_positions) {
        if (p >= pos) ++p;
      }
      slot_positions.push_back(pos);
      tokens.insert(tokens.begin() + pos, std::string());
    }
    for (std::size_t j = 0; j < u.slots.size(); ++j) {
      const Slot& slot = u.slots[j];
      const int pos = slot_positions[j];
      const MentionAddress address{t, pos, pos};
      switch (slot.kind) {
        case SlotKind::kFirstPerson:
          tokens[pos] = kFirstPerson[uniform(rng, 0, 2)];
          by_speaker[u.speaker].push_back(address);
          break;
        case SlotKind::kEntity:
          tokens[pos] = name_for(name_order[slot.entity]);
          by_name[tokens[pos]].push_back(address);
          break;
        case SlotKind::kSingleton:
          if (next_name < name_order.size()) {
            tokens[pos] = name_for(name_order[next_name++]);
            singletons.push_back({address});
          } else if (num_entities > 0) {
            // Out of unused names: fall back to an existing entity.
            tokens[pos] = name_for(
                name_order[uniform(rng, 0, num_entities - 1)]);
            by_name[tokens[pos]].push_back(address);
          } else {
            tokens[pos] = kFirstPerson[0];
            by_speaker[u.speaker].push_back(address);
          }
          break;
      }
    }
    d.utterances.push_back({speakers[u.speaker], std::move(tokens)});
  }

  for (auto& [name, c] : by_name) d.clusters.push_back(std::move(c));
  for (auto& [speaker, c] : by_speaker) d.clusters.push_back(std::move(c));
  for (Cluster& c : singletons) d.clusters.push_back(std::move(c));
  for (Cluster& c : d.clusters) std::sort(c.begin(), c.end());
  if (!spec.annotate_singletons) {
    std::erase_if(d.clusters, [](const Cluster& c) { return c.size() < 2; });
  }
  std::sort(d.clusters.begin(), d.clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a[0] < b[0]; });
  return d;
}

}  // namespace

void GenSpec::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid GenSpec: " + what);
  };
  if (num_dialogues < 0) fail("num_dialogues < 0");
  if (min_speakers < 1 || min_speakers > max_speakers) fail("speaker range");
  if (max_speakers > static_cast<int>(kSpeakerLabels.size())) {
    fail("at most " + std::to_string(kSpeakerLabels.size()) + " speakers");
  }
  if (min_utterances < 1 || min_utterances > max_utterances) {
    fail("utterance range");
  }
  if (name_vocab_size < 2) fail("name_vocab_size < 2");
  if (!(singleton_rate >= 0.0 && singleton_rate <= 1.0)) {
    fail("singleton_rate outside [0,1]");
  }
  if (!(first_person_rate >= 0.0 && first_person_rate <= 1.0)) {
    fail("first_person_rate outside [0,1]");
  }
  if (min_fillers < 2 || min_fillers > max_fillers) fail("filler range");
  if (max_mentions_per_utterance < 1) fail("max_mentions_per_utterance < 1");
}

std::vector<Dialogue> generate_synthetic(const GenSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Dialogue> out;
  out.reserve(spec.num_dialogues);
  for (int j = 0; j < spec.num_dialogues; ++j) {
    out.push_back(generate_one(spec, j, rng));
  }
  return out;
}

bool is_first_person_pronoun(const std::string& token) {
  return std::find(kFirstPerson.begin(), kFirstPerson.end(), token) !=
         kFirstPerson.end();
}

}  // namespace ocoref
