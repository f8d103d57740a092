#pragma once

// PDDL domain parsing plus the domain metrics: executability, normalized
// Levenshtein similarity and component-wise F1.
//
// Supported subset: :strips, :typing, :negative-preconditions (and :equality
// for the built-in "=" predicate). Identifiers are lowercased; nested "and"
// conjunctions are flattened.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "a2w/util.hpp"

namespace a2w {

// Closed error taxonomy for PDDL artifacts.
enum class PddlErrorClass {
  UndefinedConstant,
  TypeMismatch,
  IncorrectParentheses,
  UndefinedType,
  UnsupportedFeature,
  DuplicateDefinition,
};

std::string to_string(PddlErrorClass c);
std::optional<PddlErrorClass> pddl_error_class_from_string(std::string_view s);
const std::vector<PddlErrorClass>& all_pddl_error_classes();

class PddlError : public Error {
 public:
  PddlError(PddlErrorClass cls, const std::string& message, int line = 0, int column = 0);
  PddlErrorClass error_class() const noexcept { return cls_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  PddlErrorClass cls_;
  int line_, column_;
  std::string detail_;
};

struct TypedName {
  std::string name;
  std::string type = "object";

  bool operator==(const TypedName&) const = default;
};

struct PddlAtom {
  std::string predicate;
  std::vector<std::string> args;  // "?var" or constant / object names

  bool operator==(const PddlAtom&) const = default;
};

struct PddlLiteral {
  bool negated = false;
  PddlAtom atom;

  bool operator==(const PddlLiteral&) const = default;
};

struct PredicateSig {
  std::string name;
  std::vector<TypedName> params;

  bool operator==(const PredicateSig&) const = default;
};

struct ActionDef {
  std::string name;
  std::vector<TypedName> params;
  std::vector<PddlLiteral> precondition;
  std::vector<PddlLiteral> effect;

  bool operator==(const ActionDef&) const = default;
};

struct PddlDomainAst {
  std::string name;
  std::set<std::string> requirements;
  std::vector<TypedName> types;  // child -> parent, declaration order
  std::vector<TypedName> constants;
  std::vector<PredicateSig> predicates;
  std::vector<ActionDef> actions;

  bool operator==(const PddlDomainAst&) const = default;

  const PredicateSig* find_predicate(std::string_view n) const;
  const ActionDef* find_action(std::string_view n) const;
  bool is_subtype(std::string_view child, std::string_view ancestor) const;
};

/// Throws PddlError classified into the taxonomy above.
PddlDomainAst parse_domain(std::string_view source);

/// Canonical source text; parse_domain(print_domain(d)) == d.
std::string print_domain(const PddlDomainAst& d);

/// nullopt when the domain parses and validates.
std::optional<PddlError> check_domain(std::string_view source);
bool executability(std::string_view source);

struct PddlProblem {
  std::string name;
  std::string domain;
  std::vector<TypedName> objects;
  std::vector<PddlAtom> init;
  std::vector<PddlLiteral> goal;
};

/// Parses a problem against its domain (objects typed, atoms declared).
PddlProblem parse_problem(std::string_view source, const PddlDomainAst& domain);

/// True when the goal already holds in the initial state (closed world).
bool goal_holds_initially(const PddlProblem& p);

/// Builds the empty-goal problem for `domain` and checks that it is accepted
/// and trivially solved.
bool solvability_probe(const PddlDomainAst& domain);

/// Levenshtein distance over Unicode code points (invalid UTF-8 bytes count
/// as single symbols).
std::size_t levenshtein(std::string_view a, std::string_view b);
/// 1 - Lev(a,b)/max(|a|,|b|); two empty strings give 1.
double similarity(std::string_view a, std::string_view b);

struct ComponentF1 {
  double f1_pred = 0.0;
  double f1_param = 0.0;
  double f1_precond = 0.0;
  double f1_eff = 0.0;
  double f1_avg = 0.0;

  bool operator==(const ComponentF1&) const = default;
};

void to_json(json& j, const ComponentF1& f);

/// Multiset F1 computed as 2|A∩B| / (|A|+|B|); 1 when both are empty.
double multiset_f1(const std::vector<std::string>& gen, const std::vector<std::string>& gold);

/// Canonical comparison items.
std::vector<std::string> predicate_items(const PddlDomainAst& d);
std::vector<std::string> parameter_items(const ActionDef& a);
std::vector<std::string> literal_items(const ActionDef& a, const std::vector<PddlLiteral>& literals);

/// Predicates compared over the whole domain; actions paired by name and
/// macro-averaged over the union of action names (unpaired actions score 0).
ComponentF1 component_f1(const PddlDomainAst& gen, const PddlDomainAst& gold);

}  // namespace a2w
