#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "slg/error.hpp"

namespace slg {

enum class Relation : int {
  at = 0,
  near,
  close_to,
  far_from,
  in_front_of,
  behind,
  next_to,
  beside,
  by,
  around,
};

inline constexpr int kRelationCount = 10;

inline constexpr std::array<Relation, kRelationCount> kAllRelations = {
    Relation::at,     Relation::near,    Relation::close_to, Relation::far_from, Relation::in_front_of,
    Relation::behind, Relation::next_to, Relation::beside,   Relation::by,       Relation::around};

inline constexpr std::array<std::string_view, kRelationCount> kRelationNames = {
    "at", "near", "close_to", "far_from", "in_front_of", "behind", "next_to", "beside", "by", "around"};

// How the relation reads in an English sentence.
inline constexpr std::array<std::string_view, kRelationCount> kRelationPhrases = {
    "at", "near", "close to", "far from", "in front of", "behind", "next to", "beside", "by", "around"};

constexpr int index_of(Relation r) { return static_cast<int>(r); }
constexpr std::string_view name_of(Relation r) { return kRelationNames[index_of(r)]; }
constexpr std::string_view phrase_of(Relation r) { return kRelationPhrases[index_of(r)]; }

inline std::optional<Relation> relation_from_name(std::string_view name) {
  for (int i = 0; i < kRelationCount; ++i)
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  return std::nullopt;
}

inline Relation relation_named(std::string_view name) {
  if (auto r = relation_from_name(name)) return *r;
  throw Error("UnknownRelation", "unknown relation '" + std::string(name) + "'");
}

// Proximity relations share the sigmoid-of-distance form.
constexpr bool is_proximity(Relation r) {
  return r == Relation::near || r == Relation::close_to || r == Relation::by ||
         r == Relation::next_to || r == Relation::beside || r == Relation::at;
}

}  // namespace slg
