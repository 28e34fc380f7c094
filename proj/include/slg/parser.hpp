#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slg/error.hpp"
#include "slg/map.hpp"
#include "slg/relation.hpp"
#include "slg/text.hpp"

namespace slg {

struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

struct SpatialObservation {
  std::string target;
  Relation relation = Relation::near;
  std::string landmark_id;
  bool negated = false;
  TextSpan raw_span{};

  // raw_span is provenance only and does not take part in equality.
  friend bool operator==(const SpatialObservation& a, const SpatialObservation& b) {
    return a.target == b.target && a.relation == b.relation && a.landmark_id == b.landmark_id &&
           a.negated == b.negated;
  }
};

// Typed failure of the sentence front-end. `phrase` names the offending text.
class ParseError : public Error {
 public:
  ParseError(std::string kind, std::string phrase, const std::string& what)
      : Error(std::move(kind), what), phrase_(std::move(phrase)) {}
  const std::string& phrase() const noexcept { return phrase_; }

 private:
  std::string phrase_;
};

inline nlohmann::json to_json(const SpatialObservation& o) {
  return {{"target", o.target},
          {"relation", std::string(name_of(o.relation))},
          {"landmark", o.landmark_id},
          {"negated", o.negated}};
}

inline SpatialObservation observation_from_json(const nlohmann::json& j) {
  SpatialObservation o;
  o.target = j.at("target").get<std::string>();
  o.relation = relation_named(j.at("relation").get<std::string>());
  o.landmark_id = j.at("landmark").get<std::string>();
  o.negated = j.value("negated", false);
  return o;
}

// --- vocabulary -------------------------------------------------------------

struct RelationAlias {
  std::string_view surface;
  Relation relation;
  bool negated;
};

inline constexpr std::array<RelationAlias, 22> kRelationAliases = {{
    {"at", Relation::at, false},
    {"near", Relation::near, false},
    {"nearby", Relation::near, false},
    {"close by", Relation::near, false},
    {"nowhere near", Relation::near, true},
    {"close to", Relation::close_to, false},
    {"nowhere close to", Relation::close_to, true},
    {"far from", Relation::far_from, false},
    {"far away from", Relation::far_from, false},
    {"away from", Relation::far_from, false},
    {"in front of", Relation::in_front_of, false},
    {"in the front of", Relation::in_front_of, false},
    {"in front", Relation::in_front_of, false},
    {"behind", Relation::behind, false},
    {"in back of", Relation::behind, false},
    {"next to", Relation::next_to, false},
    {"adjacent to", Relation::next_to, false},
    {"beside", Relation::beside, false},
    {"alongside", Relation::beside, false},
    {"by", Relation::by, false},
    {"around", Relation::around, false},
    {"surrounding", Relation::around, false},
}};

// Objects people report on; misspelt targets within one edit snap to these.
inline const std::vector<std::string>& default_targets() {
  static const std::vector<std::string> targets = {
      "bag",     "backpack", "suitcase", "package", "box",    "robot",  "bicycle",
      "laptop",  "umbrella", "phone",    "wallet",  "person", "parcel", "briefcase"};
  return targets;
}

struct NormalizedRelation {
  Relation relation;
  bool negated = false;
  int distance = 0;
};

namespace detail {

// Edits between a surface form and an alias: whole-string distance, or the
// summed per-token distance when token counts agree and each token is within
// one edit.
inline int alias_distance(std::string_view surface, std::string_view alias) {
  int best = text::damerau_levenshtein(surface, alias);
  const auto split = [](std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && s[i] == ' ') ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ') ++j;
      if (j > i) out.push_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  };
  const auto st = split(surface), at = split(alias);
  if (st.size() == at.size() && st.size() > 1) {
    int sum = 0;
    for (std::size_t k = 0; k < st.size() && sum <= best; ++k) {
      const int d = text::damerau_levenshtein(st[k], at[k]);
      if (d > 1) {
        sum = best + 1;
        break;
      }
      sum += d;
    }
    best = std::min(best, sum);
  }
  return best;
}

inline std::string squeeze(std::string_view s) {
  std::string out;
  bool space = false;
  for (char ch : to_lower(s)) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += ch;
  }
  return out;
}

}  // namespace detail

// Exact alias first, else the unique alias within one edit.
inline std::optional<NormalizedRelation> try_normalize_relation(std::string_view surface,
                                                                int max_distance = 1) {
  const std::string s = detail::squeeze(surface);
  for (const auto& a : kRelationAliases)
    if (a.surface == s) return NormalizedRelation{a.relation, a.negated, 0};
  std::optional<NormalizedRelation> best;
  bool ambiguous = false;
  for (const auto& a : kRelationAliases) {
    const int d = detail::alias_distance(s, a.surface);
    if (d > max_distance) continue;
    if (!best || d < best->distance) {
      best = NormalizedRelation{a.relation, a.negated, d};
      ambiguous = false;
    } else if (d == best->distance && (a.relation != best->relation || a.negated != best->negated)) {
      ambiguous = true;
    }
  }
  if (ambiguous)
    throw ParseError("AmbiguousRelation", s, "relation '" + s + "' is ambiguous");
  return best;
}

inline NormalizedRelation normalize_relation(std::string_view surface) {
  if (auto r = try_normalize_relation(surface)) return *r;
  const std::string s = detail::squeeze(surface);
  throw ParseError("UnknownRelation", s, "unknown relation '" + s + "'");
}

// Case-insensitive lexicon lookup; "building <n>" tolerates one edit in the
// word but never in the number.
inline std::string resolve_landmark(std::string_view phrase, const Lexicon& lexicon) {
  const std::string p = detail::squeeze(phrase);
  if (auto it = lexicon.find(p); it != lexicon.end()) return it->second;
  std::vector<std::string> words;
  {
    std::size_t i = 0;
    while (i < p.size()) {
      std::size_t j = p.find(' ', i);
      if (j == std::string::npos) j = p.size();
      words.push_back(p.substr(i, j - i));
      i = j + 1;
    }
  }
  std::string found;
  int matches = 0;
  for (const auto& [name, id] : lexicon) {
    std::vector<std::string> name_words;
    std::size_t i = 0;
    while (i < name.size()) {
      std::size_t j = name.find(' ', i);
      if (j == std::string::npos) j = name.size();
      name_words.push_back(name.substr(i, j - i));
      i = j + 1;
    }
    if (name_words.size() != words.size()) continue;
    bool ok = true;
    for (std::size_t k = 0; k < words.size() && ok; ++k) {
      if (text::is_number(name_words[k]) || text::is_number(words[k]))
        ok = name_words[k] == words[k];
      else
        ok = text::damerau_levenshtein(name_words[k], words[k]) <= (name_words[k].size() >= 4 ? 1 : 0);
    }
    if (ok && found != id) {
      found = id;
      ++matches;
    }
  }
  if (matches == 1) return found;
  throw ParseError("UnknownLandmark", p, "unknown landmark '" + p + "'");
}

// --- sentence grammar -------------------------------------------------------

namespace detail {

struct Token {
  std::string text;
  TextSpan span;
};

inline std::vector<Token> tokenize(std::string_view sentence) {
  // Typographic apostrophe (U+2019) to ASCII; `source` maps back to input offsets.
  std::string s;
  std::vector<std::size_t> source;
  for (std::size_t k = 0; k < sentence.size(); ++k) {
    if (sentence.substr(k, 3) == "\xE2\x80\x99") {
      s += '\'';
      source.push_back(k);
      k += 2;
      continue;
    }
    s += sentence[k];
    source.push_back(k);
  }
  source.push_back(sentence.size());
  std::vector<Token> out;
  std::size_t i = 0;
  const auto word_char = [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '\'' || ch == '-';
  };
  while (i < s.size()) {
    const char ch = s[i];
    if (ch == ',' || ch == ';') {
      out.push_back({",", {source[i], source[i + 1]}});
      ++i;
      continue;
    }
    if (!word_char(ch)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && word_char(s[j])) ++j;
    std::string w = to_lower(std::string_view(s).substr(i, j - i));
    while (!w.empty() && (w.front() == '\'' || w.front() == '-')) w.erase(w.begin());
    while (!w.empty() && (w.back() == '-')) w.pop_back();
    const TextSpan span{source[i], source[j]};
    i = j;
    if (w.empty()) continue;
    const auto push = [&](std::string t) { out.push_back({std::move(t), span}); };
    const auto ends_with = [&](std::string_view suf) {
      return w.size() > suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
    };
    if (w == "cannot") {
      push("can");
      push("not");
    } else if (w == "isnt" || w == "aint") {
      push("is");
      push("not");
    } else if (ends_with("'t") || w == "n't") {
      std::string base = w.substr(0, w.size() - 2);
      if (!base.empty() && base.back() == 'n') base.pop_back();
      if (base == "ca") base = "can";
      if (base == "wo") base = "will";
      if (!base.empty()) push(base);
      push("not");
    } else if (ends_with("'s")) {
      push(w.substr(0, w.size() - 2));
      push("is");
    } else if (ends_with("'ll")) {
      push(w.substr(0, w.size() - 3));
      push("will");
    } else if (ends_with("'re")) {
      push(w.substr(0, w.size() - 3));
      push("are");
    } else {
      std::erase(w, '\'');
      if (!w.empty()) push(w);
    }
  }
  return out;
}

inline bool near_word(std::string_view tok, std::string_view word) {
  if (tok == word) return true;
  if (word.size() < 3 || tok.size() < 2) return false;
  return text::damerau_levenshtein(tok, word) <= 1;
}

inline bool near_any(std::string_view tok, std::initializer_list<std::string_view> words) {
  return std::any_of(words.begin(), words.end(), [&](std::string_view w) { return near_word(tok, w); });
}

inline bool is_article(std::string_view tok) {
  return tok == "a" || tok == "an" || tok == "the" || (tok.size() >= 2 && near_word(tok, "the"));
}

// Words of the sentence grammar; a one-edit neighbour of "not" that is one of
// these is never read as a negation.
inline bool is_grammar_word(std::string_view tok) {
  static constexpr std::array<std::string_view, 24> words = {
      "is",  "the",   "can",   "be",    "found", "there", "a",    "you",
      "i",   "we",    "find",  "see",   "spot",  "will",  "an",   "which",
      "that", "located", "to", "on",   "also",  "are",   "it",   "and"};
  return std::find(words.begin(), words.end(), tok) != words.end();
}

inline bool is_negation(std::string_view tok) {
  if (tok == "not" || tok == "no" || tok == "never" || tok == "nowhere") return true;
  if (is_grammar_word(tok)) return false;
  if (tok.size() >= 2 && text::damerau_levenshtein(tok, "not") <= 1) return true;
  return tok.size() >= 5 && text::damerau_levenshtein(tok, "nowhere") <= 1;
}

inline bool is_building_word(std::string_view tok) {
  return tok == "bldg" || near_word(tok, "building");
}

struct LandmarkMatch {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last token
  std::string phrase;
};

// First landmark phrase at or after `from`: a "building <n>" pattern or an
// exact multi-word lexicon name.
inline std::optional<LandmarkMatch> find_landmark(const std::vector<Token>& toks, std::size_t from,
                                                  std::size_t to, const Lexicon& lexicon) {
  std::size_t longest_name = 1;
  for (const auto& [name, id] : lexicon)
    longest_name = std::max<std::size_t>(longest_name, std::count(name.begin(), name.end(), ' ') + 1);
  for (std::size_t i = from; i < to; ++i) {
    if (i + 1 < to && is_building_word(toks[i].text) && text::is_number(toks[i + 1].text))
      return LandmarkMatch{i, i + 2, toks[i].text + " " + toks[i + 1].text};
    for (std::size_t len = std::min(longest_name, to - i); len >= 1; --len) {
      std::string phrase;
      for (std::size_t k = i; k < i + len; ++k) phrase += (k > i ? " " : "") + toks[k].text;
      if (lexicon.count(phrase)) return LandmarkMatch{i, i + len, phrase};
    }
  }
  return std::nullopt;
}

struct RelationMatch {
  std::size_t begin = 0;
  std::size_t end = 0;
  NormalizedRelation rel;
};

// Relation phrase ending right before the landmark phrase, optionally with a
// trailing article skipped. Exact matches beat typo matches; longer spans
// beat shorter ones at equal distance.
inline std::optional<RelationMatch> find_relation(const std::vector<Token>& toks, std::size_t lo,
                                                  std::size_t landmark_begin) {
  std::vector<std::size_t> ends;
  {
    std::size_t e = landmark_begin;
    while (e > lo && is_article(toks[e - 1].text)) --e;
    ends.push_back(e);
    if (e != landmark_begin) ends.push_back(landmark_begin);
  }
  constexpr std::size_t kMaxSpan = 4;
  for (int max_d : {0, 1}) {
    for (std::size_t end : ends) {
      std::optional<RelationMatch> best;
      for (std::size_t len = std::min(kMaxSpan, end - lo); len >= 1; --len) {
        const std::size_t begin = end - len;
        std::string surface;
        for (std::size_t k = begin; k < end; ++k) surface += (k > begin ? " " : "") + toks[k].text;
        auto rel = try_normalize_relation(surface, max_d);
        if (!rel) continue;
        if (!best || rel->distance < best->rel.distance) best = RelationMatch{begin, end, *rel};
      }
      if (best) return best;
    }
  }
  return std::nullopt;
}

inline std::string extract_target(const std::vector<Token>& toks, std::size_t lo, std::size_t hi,
                                  const std::vector<std::string>& vocabulary) {
  std::size_t i = lo;
  while (i < hi && (near_word(toks[i].text, "and") || toks[i].text == "also" || toks[i].text == "but"))
    ++i;
  while (i < hi && is_article(toks[i].text) && !(toks[i].text.size() >= 2 && near_word(toks[i].text, "there")))
    ++i;
  if (i >= hi) return {};
  const auto& first = toks[i].text;
  std::size_t t = i;
  if (near_word(first, "there") || first == "here") {
    t = i + 1;
    while (t < hi && (toks[t].text == "is" || toks[t].text == "are" || near_word(toks[t].text, "is") ||
                      is_negation(toks[t].text) || is_article(toks[t].text)))
      ++t;
  } else if (first == "i" || first == "we" || near_any(first, {"you"}) || first == "u" || first == "they") {
    std::size_t v = i + 1;
    while (v < hi && !near_any(toks[v].text, {"find", "see", "spot", "found", "notice", "saw"})) ++v;
    t = v < hi ? v + 1 : i + 1;
    while (t < hi && is_article(toks[t].text)) ++t;
  }
  if (t >= hi) return {};
  std::string target = toks[t].text;
  std::string snapped;
  int hits = 0;
  for (const auto& v : vocabulary) {
    if (v == target) return target;
    if (target.size() >= 2 && text::damerau_levenshtein(v, target) <= 1) {
      snapped = v;
      ++hits;
    }
  }
  return hits == 1 ? snapped : target;
}

}  // namespace detail

// Splits a sentence into clauses on "and" / "," and reads one
// (target, relation, landmark, negation) tuple per clause.
inline std::vector<SpatialObservation> parse(std::string_view sentence, const Lexicon& lexicon,
                                             const std::vector<std::string>& targets = default_targets()) {
  if (lexicon.empty()) throw ParseError("NoObservationFound", "", "empty landmark lexicon");
  const auto toks = detail::tokenize(sentence);

  std::vector<std::pair<std::size_t, std::size_t>> clauses;
  {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= toks.size(); ++i) {
      if (i == toks.size() || toks[i].text == "," || toks[i].text == "and") {
        if (i > start) clauses.emplace_back(start, i);
        start = i + 1;
      }
    }
  }

  std::vector<SpatialObservation> out;
  std::string last_target;
  for (auto [lo, hi] : clauses) {
    // A clause can still hold several tuples when a separator was misspelt.
    while (lo < hi) {
      auto lm = detail::find_landmark(toks, lo, hi, lexicon);
      if (!lm) {
        // Relation without a resolvable landmark name.
        for (std::size_t b = lo; b < hi; ++b)
          for (std::size_t len = 1; len <= 4 && b + len <= hi; ++len) {
            std::string surface;
            for (std::size_t k = b; k < b + len; ++k) surface += (k > b ? " " : "") + toks[k].text;
            bool exact = false;
            for (const auto& a : kRelationAliases) exact = exact || a.surface == surface;
            if (exact && b + len < hi) {
              std::string rest;
              std::size_t r = b + len;
              while (r < hi && detail::is_article(toks[r].text)) ++r;
              for (std::size_t k = r; k < hi; ++k) rest += (k > r ? " " : "") + toks[k].text;
              if (!rest.empty())
                throw ParseError("UnknownLandmark", rest, "unknown landmark '" + rest + "'");
            }
          }
        break;
      }
      auto rel = detail::find_relation(toks, lo, lm->begin);
      if (!rel) {
        const std::string surface = lm->begin > lo ? toks[lm->begin - 1].text : std::string();
        if (surface.empty())
          throw ParseError("NoObservationFound", lm->phrase, "no relation before '" + lm->phrase + "'");
        throw ParseError("UnknownRelation", surface, "unknown relation '" + surface + "'");
      }
      const std::string landmark_id = resolve_landmark(lm->phrase, lexicon);
      SpatialObservation obs;
      obs.relation = rel->rel.relation;
      obs.landmark_id = landmark_id;
      obs.negated = rel->rel.negated;
      for (std::size_t k = lo; k < rel->begin; ++k)
        if (detail::is_negation(toks[k].text)) obs.negated = true;
      obs.target = detail::extract_target(toks, lo, rel->begin, targets);
      if (obs.target.empty() || detail::is_negation(obs.target)) obs.target = last_target;
      if (obs.target.empty()) obs.target = "target";
      last_target = obs.target;
      obs.raw_span = {toks[lo].span.begin, toks[lm->end - 1].span.end};
      out.push_back(std::move(obs));
      lo = lm->end;
    }
  }
  if (out.empty())
    throw ParseError("NoObservationFound", std::string(sentence), "no spatial observation found");
  return out;
}

}  // namespace slg
