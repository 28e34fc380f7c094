#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/parser.hpp"
#include "slg/relation.hpp"

namespace slg {

// Sentence-shape mix of operator utterances.
struct CorpusStyle {
  double subject_predicate = 0.830;  // remainder existential
  double active_voice = 0.697;
  double contraction = 0.5;          // share of "is" written as "'s"
  double typo = 0.325;               // sentences with exactly one typo
  double negation = 0.25;
  double conjunction = 0.15;         // two-clause sentences
};

struct CorpusEntry {
  std::string sentence;
  std::vector<SpatialObservation> expected;
  bool subject_predicate = true;
  bool active = true;
  bool has_typo = false;
};

// Relation draw weights, biased toward the prepositions operators use most.
inline constexpr std::array<double, kRelationCount> kRelationUsage = {
    /*at*/ 0.6, /*near*/ 1.6, /*close_to*/ 1.4, /*far_from*/ 0.4, /*in_front_of*/ 2.0,
    /*behind*/ 0.8, /*next_to*/ 1.2, /*beside*/ 1.2, /*by*/ 0.6, /*around*/ 1.2};

struct Utterance {
  std::string target;
  Relation relation;
  std::string landmark_name;  // as written, e.g. "Building 4"
  std::string landmark_id;
  bool negated = false;
};

namespace detail {

// Exactly round(n * p) of n slots set, in random order.
inline std::vector<char> stratified(std::size_t n, double p, std::mt19937_64& rng) {
  std::vector<char> flags(n, 0);
  const auto k = static_cast<std::size_t>(std::llround(p * static_cast<double>(n)));
  std::fill_n(flags.begin(), std::min(k, n), 1);
  std::shuffle(flags.begin(), flags.end(), rng);
  return flags;
}

inline bool coin(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Writes "is" or its contraction onto the preceding word.
inline std::string is_after(const std::string& word, bool contract) {
  return contract ? word + "'s" : word + " is";
}

inline std::string relation_text(Relation r, bool& negation_absorbed, bool negated, std::mt19937_64& rng) {
  negation_absorbed = false;
  if (negated && (r == Relation::near) && coin(rng, 0.5)) {
    negation_absorbed = true;
    return "nowhere near";
  }
  if (r == Relation::beside && coin(rng, 0.4)) return "alongside";
  return std::string(phrase_of(r));
}

// One clause. Returns words with the landmark appended.
inline std::string clause(const Utterance& u, bool subject_predicate, bool active, bool first,
                          const CorpusStyle& style, std::mt19937_64& rng) {
  bool absorbed = false;
  const std::string rel = relation_text(u.relation, absorbed, u.negated, rng);
  const bool neg = u.negated && !absorbed;
  const bool contract = coin(rng, style.contraction);
  const std::string the = first ? "The" : "the";
  const std::string tail = rel + " " + u.landmark_name;
  std::string s;
  if (!subject_predicate) {
    const std::string there = first ? "There" : "there";
    if (active) {
      if (neg)
        s = coin(rng, 0.5) ? is_after(there, contract) + " no " + u.target + " " + tail
                           : there + " isn't a " + u.target + " " + tail;
      else
        s = is_after(there, contract) + " a " + u.target + " " + tail;
    } else {
      s = is_after(there, contract) + " a " + u.target + " that can " + (neg ? "not " : "") + "be found " +
          tail;
    }
    return s;
  }
  if (active) {
    if (coin(rng, 0.3)) {
      const std::string you = first ? "You" : "you";
      s = you + (neg ? " won't" : " can") + " find the " + u.target + " " + tail;
    } else {
      const std::string subj = the + " " + u.target;
      if (neg)
        s = coin(rng, 0.5) ? is_after(subj, contract) + " not " + tail : subj + " isn't " + tail;
      else
        s = is_after(subj, contract) + " " + tail;
    }
  } else {
    const std::string subj = the + " " + u.target;
    if (coin(rng, 0.6))
      s = subj + (neg ? (coin(rng, 0.5) ? " can't" : " cannot") : " can") + " be found " + tail;
    else
      s = is_after(subj, contract) + (neg ? " not" : "") + " located " + tail;
  }
  return s;
}

// One substitution, transposition or deletion inside a random alphabetic word
// of at least two letters. Numbers are never touched.
inline std::string inject_typo(const std::string& sentence, std::mt19937_64& rng) {
  struct Word {
    std::size_t begin, end;
  };
  std::vector<Word> words;
  for (std::size_t i = 0; i < sentence.size();) {
    if (!std::isalpha(static_cast<unsigned char>(sentence[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < sentence.size() && std::isalpha(static_cast<unsigned char>(sentence[j]))) ++j;
    if (j - i >= 2) words.push_back({i, j});
    i = j;
  }
  if (words.empty()) return sentence;
  const Word w = words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
  std::string out = sentence;
  const std::size_t len = w.end - w.begin;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const int op = std::uniform_int_distribution<int>(0, 2)(rng);
    if (op == 0) {
      const std::size_t k = w.begin + std::uniform_int_distribution<std::size_t>(0, len - 1)(rng);
      char ch;
      do {
        ch = static_cast<char>('a' + std::uniform_int_distribution<int>(0, 25)(rng));
      } while (ch == std::tolower(static_cast<unsigned char>(out[k])));
      out[k] = ch;
      return out;
    }
    if (op == 1) {
      const std::size_t k = w.begin + std::uniform_int_distribution<std::size_t>(0, len - 2)(rng);
      if (out[k] == out[k + 1]) continue;
      std::swap(out[k], out[k + 1]);
      return out;
    }
    const std::size_t k = w.begin + std::uniform_int_distribution<std::size_t>(0, len - 1)(rng);
    out.erase(k, 1);
    return out;
  }
  out.erase(w.begin, 1);
  return out;
}

}  // namespace detail

// Renders one utterance (single clause) in a randomly chosen style.
inline std::string render_sentence(const std::vector<Utterance>& clauses, bool subject_predicate, bool active,
                                   const CorpusStyle& style, std::mt19937_64& rng) {
  std::string s;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    if (i > 0) s += ", and ";
    // Follow-on clauses keep the plain subject-predicate form.
    s += detail::clause(clauses[i], i == 0 ? subject_predicate : true, i == 0 ? active : true, i == 0, style,
                        rng);
  }
  return s + ".";
}

// Landmarks are (name as written, id) pairs; names follow "Building <n>".
inline std::vector<CorpusEntry> generate_corpus(std::uint64_t seed, std::size_t n,
                                                const std::vector<std::pair<std::string, std::string>>& landmarks,
                                                const CorpusStyle& style = {},
                                                const std::vector<std::string>& targets = default_targets()) {
  std::vector<CorpusEntry> out;
  if (n == 0 || landmarks.empty()) return out;
  std::mt19937_64 rng(seed);
  const auto sp = detail::stratified(n, style.subject_predicate, rng);
  const auto active = detail::stratified(n, style.active_voice, rng);
  const auto typo = detail::stratified(n, style.typo, rng);
  std::discrete_distribution<int> rel_dist(kRelationUsage.begin(), kRelationUsage.end());
  std::uniform_int_distribution<std::size_t> lm_dist(0, landmarks.size() - 1);
  // Common report targets dominate; the rest of the vocabulary appears too.
  std::uniform_int_distribution<std::size_t> tgt_dist(0, targets.size() - 1);

  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Utterance> us;
    const int count = detail::coin(rng, style.conjunction) ? 2 : 1;
    for (int k = 0; k < count; ++k) {
      Utterance u;
      u.target = detail::coin(rng, 0.6) ? std::string("bag") : targets[tgt_dist(rng)];
      u.relation = static_cast<Relation>(rel_dist(rng));
      const auto& lm = landmarks[lm_dist(rng)];
      u.landmark_name = detail::coin(rng, 0.7) ? lm.first : to_lower(lm.first);
      u.landmark_id = lm.second;
      u.negated = detail::coin(rng, style.negation);
      us.push_back(u);
    }
    CorpusEntry e;
    e.subject_predicate = sp[i] != 0;
    e.active = active[i] != 0;
    e.sentence = render_sentence(us, e.subject_predicate, e.active, style, rng);
    if (typo[i]) {
      e.sentence = detail::inject_typo(e.sentence, rng);
      e.has_typo = true;
    }
    for (const auto& u : us)
      e.expected.push_back(SpatialObservation{u.target, u.relation, u.landmark_id, u.negated, {}});
    out.push_back(std::move(e));
  }
  return out;
}

inline nlohmann::json to_json(const CorpusEntry& e) {
  auto expected = nlohmann::json::array();
  for (const auto& o : e.expected) expected.push_back(to_json(o));
  return {{"sentence", e.sentence}, {"expected", expected}};
}

inline std::vector<std::pair<std::string, std::string>> named_landmarks(const WorldMap& map) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& lm : map.landmarks) out.emplace_back(lm.name, lm.id);
  return out;
}

// Fraction of entries whose parse equals the expected tuples exactly.
inline double parse_accuracy(const std::vector<CorpusEntry>& corpus, const Lexicon& lexicon) {
  if (corpus.empty()) return 1.0;
  std::size_t ok = 0;
  for (const auto& e : corpus) {
    try {
      if (parse(e.sentence, lexicon) == e.expected) ++ok;
    } catch (const ParseError&) {
    }
  }
  return static_cast<double>(ok) / static_cast<double>(corpus.size());
}

}  // namespace slg
