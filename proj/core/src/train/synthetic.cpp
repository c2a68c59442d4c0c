#include "jpt/train/synthetic.hpp"

#include "jpt/util/error.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {

SyntheticGrammar SyntheticGrammar::standard() {
  SyntheticGrammar g;
  g.names = {"Paris",   "Jordan",  "Georgia", "Victoria", "Florence",  "Sydney", "Chelsea",  "Austin",
             "Madison", "Lincoln", "Dallas",  "Orlando",  "Charlotte", "Savannah", "Phoenix", "Aurora"};
  g.lead_ins = {"", "Yesterday", "Last week", "Everyone agreed that", "We heard that", "As expected"};
  g.fillers = {"", "finally", "apparently", "once again"};
  g.person_cues = {"released a new album", "won the singing contest", "signed a contract with the label",
                   "gave a long interview", "wrote a best selling novel", "married her childhood friend"};
  g.location_cues = {"is a beautiful city", "has many old bridges", "attracts millions of tourists",
                     "hosted the summer festival", "lies near the river delta", "built a new harbour"};
  g.tails = {{"", "", false},
             {"according to Maria", "Maria", true},
             {"near New York", "New York", false},
             {"said Thomas Berg", "Thomas Berg", true},
             {"", "", false}};
  return g;
}

EntitySchema synthetic_schema() {
  EntitySchema s;
  s.types = {{"PERSON", "A named individual human being, such as an artist, writer or public figure"},
             {"LOCATION", "A named geographical place such as a city, region, country, or landmark"}};
  return s;
}

namespace {

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

std::size_t word_count(const std::string& s) { return pre_tokenize(s).size(); }

DatasetRecord make_record(const std::string& lead, const std::string& name, const std::string& filler,
                          const std::string& cue, const SyntheticGrammar::Tail& tail, bool person) {
  std::string text;
  auto append = [&](const std::string& part) {
    if (part.empty()) return;
    if (!text.empty()) text += ' ';
    text += part;
  };
  append(lead);
  const int name_index = static_cast<int>(word_count(text));
  append(name);
  append(filler);
  append(cue);
  const int tail_start = static_cast<int>(word_count(text));
  append(tail.text);

  DatasetRecord r;
  r.text = pre_tokenize(text);
  r.gold.spans.push_back({name_index, name_index + 1, person ? 1 : 2});
  if (!tail.entity.empty()) {
    const std::size_t offset = tail.text.find(tail.entity);
    const int start = tail_start + static_cast<int>(word_count(tail.text.substr(0, offset)));
    r.gold.spans.push_back({start, start + static_cast<int>(word_count(tail.entity)), tail.is_person ? 1 : 2});
  }
  r.ambiguous.assign(r.text.size(), false);
  r.ambiguous[static_cast<std::size_t>(name_index)] = true;
  return r;
}

}  // namespace

Dataset generate_synthetic(const SyntheticGrammar& grammar, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw UsageError("synthetic corpus size must be at least 1");
  if (grammar.names.empty() || grammar.person_cues.empty() || grammar.location_cues.empty() ||
      grammar.lead_ins.empty() || grammar.fillers.empty() || grammar.tails.empty()) {
    throw UsageError("synthetic grammar has an empty slot list");
  }
  Rng rng(seed);
  Dataset d;
  d.schemas.push_back(synthetic_schema());
  for (std::size_t i = 0; i < count; i += 2) {
    const std::string& lead = pick(grammar.lead_ins, rng);
    const std::string& name = pick(grammar.names, rng);
    const std::string& filler = pick(grammar.fillers, rng);
    const std::string& person_cue = pick(grammar.person_cues, rng);
    const std::string& location_cue = pick(grammar.location_cues, rng);
    const auto& tail = grammar.tails[static_cast<std::size_t>(rng.below(grammar.tails.size()))];
    // Which reading comes first alternates so an odd count stays balanced.
    const bool person_first = (i / 2) % 2 == 0;
    for (int k = 0; k < 2 && i + static_cast<std::size_t>(k) < count; ++k) {
      const bool person = (k == 0) == person_first;
      DatasetRecord r = make_record(lead, name, filler, person ? person_cue : location_cue, tail, person);
      r.id = "syn-" + std::to_string(i + static_cast<std::size_t>(k));
      d.records.push_back(std::move(r));
    }
  }
  return d;
}

}  // namespace jpt
