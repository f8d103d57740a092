#include "a2w/pddl.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

namespace a2w {

std::string to_string(PddlErrorClass c) {
  switch (c) {
    case PddlErrorClass::UndefinedConstant: return "undefined-constant";
    case PddlErrorClass::TypeMismatch: return "type-mismatch";
    case PddlErrorClass::IncorrectParentheses: return "incorrect-parentheses";
    case PddlErrorClass::UndefinedType: return "undefined-type";
    case PddlErrorClass::UnsupportedFeature: return "unsupported-feature";
    case PddlErrorClass::DuplicateDefinition: return "duplicate-definition";
  }
  return "incorrect-parentheses";
}

const std::vector<PddlErrorClass>& all_pddl_error_classes() {
  static const std::vector<PddlErrorClass> all = {
      PddlErrorClass::UndefinedConstant,  PddlErrorClass::TypeMismatch,       PddlErrorClass::IncorrectParentheses,
      PddlErrorClass::UndefinedType,      PddlErrorClass::UnsupportedFeature, PddlErrorClass::DuplicateDefinition};
  return all;
}

std::optional<PddlErrorClass> pddl_error_class_from_string(std::string_view s) {
  for (auto c : all_pddl_error_classes()) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

PddlError::PddlError(PddlErrorClass cls, const std::string& message, int line, int column)
    : Error(to_string(cls) + (line ? " at " + std::to_string(line) + ":" + std::to_string(column) : "") + ": " + message),
      cls_(cls),
      line_(line),
      column_(column),
      detail_(message) {}

namespace {

// ---- s-expressions ----

struct SExpr {
  bool list = false;
  std::string atom;
  std::vector<SExpr> items;
  int line = 0, col = 0;

  bool is_atom(std::string_view s) const { return !list && atom == s; }
};

[[noreturn]] void fail(PddlErrorClass c, const std::string& msg, const SExpr& at) {
  throw PddlError(c, msg, at.line, at.col);
}

[[noreturn]] void syntax(const std::string& msg, const SExpr& at) { fail(PddlErrorClass::IncorrectParentheses, msg, at); }

SExpr read_sexpr(std::string_view src) {
  std::vector<SExpr> stack;
  std::optional<SExpr> top;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](char c) {
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == ';') {
      while (i < src.size() && src[i] != '\n') ++i, ++col;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(c);
      ++i;
      continue;
    }
    if (top) throw PddlError(PddlErrorClass::IncorrectParentheses, "content after the closing parenthesis of the definition", line, col);
    if (c == '(') {
      SExpr e;
      e.list = true;
      e.line = line;
      e.col = col;
      stack.push_back(std::move(e));
      advance(c);
      ++i;
      continue;
    }
    if (c == ')') {
      if (stack.empty()) throw PddlError(PddlErrorClass::IncorrectParentheses, "unmatched ')'", line, col);
      SExpr done = std::move(stack.back());
      stack.pop_back();
      if (stack.empty()) top = std::move(done);
      else stack.back().items.push_back(std::move(done));
      advance(c);
      ++i;
      continue;
    }
    SExpr a;
    a.line = line;
    a.col = col;
    std::size_t start = i;
    while (i < src.size() && !std::isspace(static_cast<unsigned char>(src[i])) && src[i] != '(' && src[i] != ')' &&
           src[i] != ';') {
      advance(src[i]);
      ++i;
    }
    a.atom = to_lower(src.substr(start, i - start));
    if (stack.empty()) throw PddlError(PddlErrorClass::IncorrectParentheses, "atom '" + a.atom + "' outside any list", a.line, a.col);
    stack.back().items.push_back(std::move(a));
  }
  if (!stack.empty()) {
    throw PddlError(PddlErrorClass::IncorrectParentheses, "unclosed '(' (" + std::to_string(stack.size()) + " missing ')')",
                    stack.back().line, stack.back().col);
  }
  if (!top) throw PddlError(PddlErrorClass::IncorrectParentheses, "empty source", line, col);
  return std::move(*top);
}

const std::set<std::string> kSupportedRequirements = {":strips", ":typing", ":negative-preconditions", ":equality"};

const std::set<std::string> kUnsupportedSections = {":functions", ":derived", ":durative-action", ":axiom",
                                                    ":constraints", ":process", ":event"};

const std::set<std::string> kUnsupportedConnectives = {"or",        "imply",    "exists",   "forall",  "when",
                                                       "preference", "increase", "decrease", "assign", "scale-up",
                                                       "scale-down", "either"};

struct TypedGroup {
  std::vector<const SExpr*> names;
  std::string type;
  const SExpr* type_at = nullptr;
};

// "a b - t c" -> [{a,b:t}, {c:object}]
std::vector<TypedGroup> typed_list(const std::vector<SExpr>& items, std::size_t from) {
  std::vector<TypedGroup> out;
  TypedGroup cur;
  for (std::size_t i = from; i < items.size(); ++i) {
    const auto& it = items[i];
    if (it.is_atom("-")) {
      if (i + 1 >= items.size()) syntax("'-' without a type", it);
      const auto& t = items[i + 1];
      if (t.list) {
        if (!t.items.empty() && t.items[0].is_atom("either")) fail(PddlErrorClass::UnsupportedFeature, "either-types are not supported", t);
        syntax("malformed type", t);
      }
      if (cur.names.empty()) syntax("type '" + t.atom + "' names nothing", t);
      cur.type = t.atom;
      cur.type_at = &t;
      out.push_back(std::move(cur));
      cur = {};
      ++i;
      continue;
    }
    if (it.list) syntax("unexpected list in typed list", it);
    cur.names.push_back(&it);
  }
  if (!cur.names.empty()) {
    cur.type = "object";
    out.push_back(std::move(cur));
  }
  return out;
}

class DomainBuilder {
 public:
  PddlDomainAst d;

  void build(const SExpr& root) {
    if (!root.list || root.items.size() < 2 || !root.items[0].is_atom("define")) syntax("expected (define (domain ...) ...)", root);
    const auto& head = root.items[1];
    if (!head.list || head.items.size() != 2 || !head.items[0].is_atom("domain") || head.items[1].list) {
      if (head.list && !head.items.empty() && head.items[0].is_atom("problem")) syntax("this is a problem, not a domain", head);
      syntax("expected (domain <name>)", head);
    }
    d.name = head.items[1].atom;
    for (std::size_t i = 2; i < root.items.size(); ++i) section(root.items[i]);
  }

 private:
  std::map<std::string, std::string> parent_;
  std::set<std::string> implicit_;
  std::map<std::string, std::string> constants_;
  std::set<std::string> seen_sections_;

  bool type_declared(const std::string& t) const { return t == "object" || parent_.contains(t); }

  void require_type(const std::string& t, const SExpr& at) {
    if (!type_declared(t)) fail(PddlErrorClass::UndefinedType, "type '" + t + "' is not declared", at);
  }

  void section(const SExpr& s) {
    if (!s.list || s.items.empty() || s.items[0].list) syntax("expected a domain section", s);
    const std::string& kw = s.items[0].atom;
    if (kUnsupportedSections.contains(kw)) fail(PddlErrorClass::UnsupportedFeature, "section " + kw + " is not supported", s);
    if (kw != ":action" && !seen_sections_.insert(kw).second) {
      fail(PddlErrorClass::DuplicateDefinition, "section " + kw + " appears twice", s);
    }
    if (kw == ":requirements") requirements(s);
    else if (kw == ":types") types(s);
    else if (kw == ":constants") constants(s);
    else if (kw == ":predicates") predicates(s);
    else if (kw == ":action") action(s);
    else syntax("unknown section " + kw, s);
  }

  void requirements(const SExpr& s) {
    for (std::size_t i = 1; i < s.items.size(); ++i) {
      const auto& r = s.items[i];
      if (r.list) syntax("malformed requirement", r);
      if (!kSupportedRequirements.contains(r.atom)) fail(PddlErrorClass::UnsupportedFeature, "requirement " + r.atom + " is not supported", r);
      d.requirements.insert(r.atom);
    }
  }

  void types(const SExpr& s) {
    for (const auto& g : typed_list(s.items, 1)) {
      if (g.type != "object" && !parent_.contains(g.type)) {
        parent_[g.type] = "object";
        implicit_.insert(g.type);
        d.types.push_back({g.type, "object"});
      }
      for (const auto* n : g.names) {
        if (n->atom == "object") continue;
        if (n->atom.starts_with("?")) syntax("type names cannot be variables", *n);
        if (parent_.contains(n->atom)) {
          if (!implicit_.erase(n->atom)) fail(PddlErrorClass::DuplicateDefinition, "type '" + n->atom + "' declared twice", *n);
          if (g.type != "object") {
            parent_[n->atom] = g.type;
            for (auto& t : d.types) {
              if (t.name == n->atom) t.type = g.type;
            }
          }
          continue;
        }
        parent_[n->atom] = g.type;
        d.types.push_back({n->atom, g.type});
      }
    }
    // Cycles make the hierarchy meaningless.
    for (const auto& [t, _] : parent_) {
      std::string cur = t;
      for (std::size_t k = 0; k <= parent_.size() && cur != "object"; ++k) cur = parent_[cur];
      if (cur != "object") fail(PddlErrorClass::TypeMismatch, "type hierarchy has a cycle through '" + t + "'", s);
    }
    // Parents before children, otherwise declaration order; printing then re-parsing is a fixpoint.
    std::vector<TypedName> ordered;
    std::set<std::string> placed{"object"};
    while (ordered.size() < d.types.size()) {
      for (const auto& t : d.types) {
        if (!placed.contains(t.name) && placed.contains(t.type)) {
          ordered.push_back(t);
          placed.insert(t.name);
          break;
        }
      }
    }
    d.types = std::move(ordered);
  }

  void constants(const SExpr& s) {
    for (const auto& g : typed_list(s.items, 1)) {
      require_type(g.type, g.type_at ? *g.type_at : s);
      for (const auto* n : g.names) {
        if (n->atom.starts_with("?")) syntax("constants cannot be variables", *n);
        if (!constants_.emplace(n->atom, g.type).second) {
          fail(PddlErrorClass::DuplicateDefinition, "constant '" + n->atom + "' declared twice", *n);
        }
        d.constants.push_back({n->atom, g.type});
      }
    }
  }

  std::vector<TypedName> variables(const std::vector<SExpr>& items, std::size_t from, const SExpr& at) {
    std::vector<TypedName> out;
    std::set<std::string> seen;
    for (const auto& g : typed_list(items, from)) {
      require_type(g.type, g.type_at ? *g.type_at : at);
      for (const auto* n : g.names) {
        if (!n->atom.starts_with("?")) syntax("expected a variable, got '" + n->atom + "'", *n);
        if (!seen.insert(n->atom).second) fail(PddlErrorClass::DuplicateDefinition, "variable " + n->atom + " declared twice", *n);
        out.push_back({n->atom, g.type});
      }
    }
    return out;
  }

  void predicates(const SExpr& s) {
    for (std::size_t i = 1; i < s.items.size(); ++i) {
      const auto& p = s.items[i];
      if (!p.list || p.items.empty() || p.items[0].list) syntax("malformed predicate declaration", p);
      PredicateSig sig;
      sig.name = p.items[0].atom;
      if (d.find_predicate(sig.name)) fail(PddlErrorClass::DuplicateDefinition, "predicate '" + sig.name + "' declared twice", p);
      sig.params = variables(p.items, 1, p);
      d.predicates.push_back(std::move(sig));
    }
  }

  std::string term_type(const SExpr& term, const std::vector<TypedName>& params) {
    if (term.list) syntax("nested term", term);
    if (term.atom.starts_with("?")) {
      for (const auto& p : params) {
        if (p.name == term.atom) return p.type;
      }
      fail(PddlErrorClass::UndefinedConstant, "variable " + term.atom + " is not bound by the action parameters", term);
    }
    auto it = constants_.find(term.atom);
    if (it == constants_.end()) fail(PddlErrorClass::UndefinedConstant, "constant '" + term.atom + "' is not declared", term);
    return it->second;
  }

  PddlAtom atom(const SExpr& e, const std::vector<TypedName>& params) {
    if (!e.list || e.items.empty() || e.items[0].list) syntax("malformed atom", e);
    PddlAtom a;
    a.predicate = e.items[0].atom;
    if (kUnsupportedConnectives.contains(a.predicate)) fail(PddlErrorClass::UnsupportedFeature, "'" + a.predicate + "' is not supported", e);
    std::vector<std::string> arg_types;
    for (std::size_t i = 1; i < e.items.size(); ++i) {
      arg_types.push_back(term_type(e.items[i], params));
      a.args.push_back(e.items[i].atom);
    }
    if (a.predicate == "=") {
      if (a.args.size() != 2) fail(PddlErrorClass::TypeMismatch, "'=' takes two arguments", e);
      return a;
    }
    const auto* sig = d.find_predicate(a.predicate);
    if (!sig) fail(PddlErrorClass::UndefinedConstant, "predicate '" + a.predicate + "' is not declared", e);
    if (sig->params.size() != a.args.size()) {
      fail(PddlErrorClass::TypeMismatch, "predicate '" + a.predicate + "' takes " + std::to_string(sig->params.size()) +
                                             " arguments, got " + std::to_string(a.args.size()), e);
    }
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (!d.is_subtype(arg_types[i], sig->params[i].type)) {
        fail(PddlErrorClass::TypeMismatch, "argument " + a.args[i] + " of '" + a.predicate + "' has type " + arg_types[i] +
                                               ", expected " + sig->params[i].type, e.items[i + 1]);
      }
    }
    return a;
  }

  void formula(const SExpr& e, const std::vector<TypedName>& params, std::vector<PddlLiteral>& out, bool effect) {
    if (!e.list) syntax("expected a formula, got '" + e.atom + "'", e);
    if (e.items.empty()) return;
    if (e.items[0].list) syntax("malformed formula", e);
    const std::string& head = e.items[0].atom;
    if (head == "and") {
      for (std::size_t i = 1; i < e.items.size(); ++i) formula(e.items[i], params, out, effect);
      return;
    }
    if (head == "not") {
      if (e.items.size() != 2) syntax("'not' takes one argument", e);
      const auto& inner = e.items[1];
      if (inner.list && !inner.items.empty() && !inner.items[0].list &&
          (inner.items[0].atom == "and" || inner.items[0].atom == "not" || kUnsupportedConnectives.contains(inner.items[0].atom))) {
        fail(PddlErrorClass::UnsupportedFeature, "negation of a compound formula is not supported", inner);
      }
      out.push_back({true, atom(inner, params)});
      return;
    }
    out.push_back({false, atom(e, params)});
  }

  void action(const SExpr& s) {
    if (s.items.size() < 2 || s.items[1].list) syntax("action without a name", s);
    ActionDef a;
    a.name = s.items[1].atom;
    if (d.find_action(a.name)) fail(PddlErrorClass::DuplicateDefinition, "action '" + a.name + "' declared twice", s);
    std::set<std::string> seen;
    const SExpr* pre = nullptr;
    const SExpr* eff = nullptr;
    for (std::size_t i = 2; i < s.items.size(); i += 2) {
      const auto& key = s.items[i];
      if (key.list) syntax("expected an action keyword", key);
      if (i + 1 >= s.items.size()) syntax("keyword " + key.atom + " without a value", key);
      const auto& val = s.items[i + 1];
      if (!seen.insert(key.atom).second) fail(PddlErrorClass::DuplicateDefinition, key.atom + " given twice in action " + a.name, key);
      if (key.atom == ":parameters") {
        if (!val.list) syntax(":parameters expects a list", val);
        a.params = variables(val.items, 0, val);
      } else if (key.atom == ":precondition") {
        pre = &val;
      } else if (key.atom == ":effect") {
        eff = &val;
      } else if (key.atom == ":duration" || key.atom == ":condition") {
        fail(PddlErrorClass::UnsupportedFeature, key.atom + " is not supported", key);
      } else {
        syntax("unknown action keyword " + key.atom, key);
      }
    }
    if (pre) formula(*pre, a.params, a.precondition, false);
    if (eff) formula(*eff, a.params, a.effect, true);
    d.actions.push_back(std::move(a));
  }
};

std::string join_typed(const std::vector<TypedName>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ' ';
    out += names[i].name + " - " + names[i].type;
  }
  return out;
}

std::string print_atom(const PddlAtom& a) {
  std::string out = "(" + a.predicate;
  for (const auto& x : a.args) out += " " + x;
  return out + ")";
}

std::string print_literal(const PddlLiteral& l) {
  return l.negated ? "(not " + print_atom(l.atom) + ")" : print_atom(l.atom);
}

std::string print_conjunction(const std::vector<PddlLiteral>& ls, const std::string& indent) {
  std::string out = "(and";
  for (const auto& l : ls) out += "\n" + indent + "  " + print_literal(l);
  return out + ")";
}

}  // namespace

const PredicateSig* PddlDomainAst::find_predicate(std::string_view n) const {
  for (const auto& p : predicates) {
    if (p.name == n) return &p;
  }
  return nullptr;
}

const ActionDef* PddlDomainAst::find_action(std::string_view n) const {
  for (const auto& a : actions) {
    if (a.name == n) return &a;
  }
  return nullptr;
}

bool PddlDomainAst::is_subtype(std::string_view child, std::string_view ancestor) const {
  if (ancestor == "object" || child == ancestor) return true;
  std::string cur(child);
  for (std::size_t guard = 0; guard <= types.size(); ++guard) {
    auto it = std::find_if(types.begin(), types.end(), [&](const TypedName& t) { return t.name == cur; });
    if (it == types.end()) return false;
    cur = it->type;
    if (cur == ancestor) return true;
    if (cur == "object") return false;
  }
  return false;
}

PddlDomainAst parse_domain(std::string_view source) {
  auto root = read_sexpr(source);
  DomainBuilder b;
  b.build(root);
  return std::move(b.d);
}

std::string print_domain(const PddlDomainAst& d) {
  std::string out = "(define (domain " + d.name + ")\n";
  if (!d.requirements.empty()) {
    out += "  (:requirements";
    for (const auto& r : d.requirements) out += " " + r;
    out += ")\n";
  }
  if (!d.types.empty()) {
    out += "  (:types";
    for (const auto& t : d.types) out += "\n    " + t.name + " - " + t.type;
    out += ")\n";
  }
  if (!d.constants.empty()) out += "  (:constants " + join_typed(d.constants) + ")\n";
  if (!d.predicates.empty()) {
    out += "  (:predicates";
    for (const auto& p : d.predicates) {
      out += "\n    (" + p.name;
      if (!p.params.empty()) out += " " + join_typed(p.params);
      out += ")";
    }
    out += ")\n";
  }
  for (const auto& a : d.actions) {
    out += "  (:action " + a.name + "\n";
    out += "    :parameters (" + join_typed(a.params) + ")\n";
    out += "    :precondition " + print_conjunction(a.precondition, "    ") + "\n";
    out += "    :effect " + print_conjunction(a.effect, "    ") + ")\n";
  }
  return out + ")\n";
}

std::optional<PddlError> check_domain(std::string_view source) {
  try {
    parse_domain(source);
    return std::nullopt;
  } catch (const PddlError& e) {
    return e;
  }
}

bool executability(std::string_view source) { return !check_domain(source).has_value(); }

// ---- problems ----

PddlProblem parse_problem(std::string_view source, const PddlDomainAst& domain) {
  auto root = read_sexpr(source);
  if (!root.list || root.items.size() < 2 || !root.items[0].is_atom("define")) syntax("expected (define (problem ...) ...)", root);
  const auto& head = root.items[1];
  if (!head.list || head.items.size() != 2 || !head.items[0].is_atom("problem")) syntax("expected (problem <name>)", head);
  PddlProblem p;
  p.name = head.items[1].atom;
  std::map<std::string, std::string> objects;
  for (const auto& c : domain.constants) objects[c.name] = c.type;

  auto check_atom = [&](const SExpr& e) {
    if (!e.list || e.items.empty() || e.items[0].list) syntax("malformed atom", e);
    PddlAtom a;
    a.predicate = e.items[0].atom;
    const auto* sig = domain.find_predicate(a.predicate);
    if (!sig) fail(PddlErrorClass::UndefinedConstant, "predicate '" + a.predicate + "' is not declared", e);
    if (sig->params.size() + 1 != e.items.size()) fail(PddlErrorClass::TypeMismatch, "wrong arity for '" + a.predicate + "'", e);
    for (std::size_t i = 1; i < e.items.size(); ++i) {
      const auto& t = e.items[i];
      if (t.list || t.atom.starts_with("?")) syntax("problem atoms must be ground", t);
      auto it = objects.find(t.atom);
      if (it == objects.end()) fail(PddlErrorClass::UndefinedConstant, "object '" + t.atom + "' is not declared", t);
      if (!domain.is_subtype(it->second, sig->params[i - 1].type)) fail(PddlErrorClass::TypeMismatch, "object '" + t.atom + "' has the wrong type", t);
      a.args.push_back(t.atom);
    }
    return a;
  };
  std::function<void(const SExpr&)> goal = [&](const SExpr& e) {
    if (!e.list) syntax("malformed goal", e);
    if (e.items.empty()) return;
    if (e.items[0].is_atom("and")) {
      for (std::size_t i = 1; i < e.items.size(); ++i) goal(e.items[i]);
    } else if (e.items[0].is_atom("not")) {
      if (e.items.size() != 2) syntax("'not' takes one argument", e);
      p.goal.push_back({true, check_atom(e.items[1])});
    } else if (!e.items[0].list && kUnsupportedConnectives.contains(e.items[0].atom)) {
      fail(PddlErrorClass::UnsupportedFeature, "'" + e.items[0].atom + "' goals are not supported", e);
    } else {
      p.goal.push_back({false, check_atom(e)});
    }
  };

  bool have_goal = false;
  for (std::size_t i = 2; i < root.items.size(); ++i) {
    const auto& s = root.items[i];
    if (!s.list || s.items.empty() || s.items[0].list) syntax("expected a problem section", s);
    const auto& kw = s.items[0].atom;
    if (kw == ":domain") {
      if (s.items.size() != 2) syntax("(:domain <name>) expected", s);
      p.domain = s.items[1].atom;
      if (p.domain != domain.name) fail(PddlErrorClass::UndefinedConstant, "problem targets domain '" + p.domain + "'", s);
    } else if (kw == ":objects") {
      for (const auto& g : typed_list(s.items, 1)) {
        bool known = g.type == "object" || std::any_of(domain.types.begin(), domain.types.end(), [&](const TypedName& t) { return t.name == g.type; });
        if (!known) fail(PddlErrorClass::UndefinedType, "type '" + g.type + "' is not declared", g.type_at ? *g.type_at : s);
        for (const auto* n : g.names) {
          if (!objects.emplace(n->atom, g.type).second) fail(PddlErrorClass::DuplicateDefinition, "object '" + n->atom + "' declared twice", *n);
          p.objects.push_back({n->atom, g.type});
        }
      }
    } else if (kw == ":init") {
      for (std::size_t k = 1; k < s.items.size(); ++k) p.init.push_back(check_atom(s.items[k]));
    } else if (kw == ":goal") {
      if (s.items.size() != 2) syntax("(:goal <formula>) expected", s);
      goal(s.items[1]);
      have_goal = true;
    } else {
      fail(PddlErrorClass::UnsupportedFeature, "problem section " + kw + " is not supported", s);
    }
  }
  if (!have_goal) syntax("problem has no :goal", root);
  return p;
}

bool goal_holds_initially(const PddlProblem& p) {
  std::set<std::string> facts;
  for (const auto& a : p.init) facts.insert(print_atom(a));
  return std::all_of(p.goal.begin(), p.goal.end(),
                     [&](const PddlLiteral& l) { return facts.contains(print_atom(l.atom)) != l.negated; });
}

bool solvability_probe(const PddlDomainAst& domain) {
  const std::string probe = "(define (problem probe) (:domain " + domain.name + ") (:objects) (:init) (:goal (and)))";
  try {
    return goal_holds_initially(parse_problem(probe, domain));
  } catch (const PddlError&) {
    return false;
  }
}

// ---- similarity ----

namespace {

std::vector<std::uint32_t> code_points(std::string_view s) {
  std::vector<std::uint32_t> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    bool ok = len > 0 && i + len <= s.size();
    for (int k = 1; ok && k < len; ++k) ok = (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    if (!ok) {
      out.push_back(0x80000000u | c);  // stray byte: its own symbol
      ++i;
      continue;
    }
    std::uint32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  auto x = code_points(a), y = code_points(b);
  if (x.size() < y.size()) std::swap(x, y);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

double similarity(std::string_view a, std::string_view b) {
  const auto n = std::max(code_points(a).size(), code_points(b).size());
  if (n == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(n);
}

// ---- component F1 ----

void to_json(json& j, const ComponentF1& f) {
  j = json{{"f1_pred", f.f1_pred}, {"f1_param", f.f1_param}, {"f1_precond", f.f1_precond}, {"f1_eff", f.f1_eff},
           {"f1_avg", f.f1_avg}};
}

double multiset_f1(const std::vector<std::string>& gen, const std::vector<std::string>& gold) {
  if (gen.empty() && gold.empty()) return 1.0;
  if (gen.empty() || gold.empty()) return 0.0;
  std::map<std::string, int> count;
  for (const auto& g : gold) ++count[g];
  std::size_t common = 0;
  for (const auto& g : gen) {
    auto it = count.find(g);
    if (it != count.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(gen.size() + gold.size());
}

std::vector<std::string> predicate_items(const PddlDomainAst& d) {
  std::vector<std::string> out;
  for (const auto& p : d.predicates) {
    std::string s = p.name + "(";
    for (std::size_t i = 0; i < p.params.size(); ++i) s += (i ? "," : "") + p.params[i].type;
    out.push_back(s + ")");
  }
  return out;
}

std::vector<std::string> parameter_items(const ActionDef& a) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < a.params.size(); ++i) out.push_back(std::to_string(i) + ":" + a.params[i].type);
  return out;
}

std::vector<std::string> literal_items(const ActionDef& a, const std::vector<PddlLiteral>& literals) {
  std::map<std::string, std::string> rename;
  for (std::size_t i = 0; i < a.params.size(); ++i) rename[a.params[i].name] = "?" + std::to_string(i);
  std::vector<std::string> out;
  for (const auto& l : literals) {
    std::string s = (l.negated ? "not " : "") + l.atom.predicate + "(";
    for (std::size_t i = 0; i < l.atom.args.size(); ++i) {
      auto it = rename.find(l.atom.args[i]);
      s += (i ? "," : "") + (it != rename.end() ? it->second : l.atom.args[i]);
    }
    out.push_back(s + ")");
  }
  return out;
}

ComponentF1 component_f1(const PddlDomainAst& gen, const PddlDomainAst& gold) {
  ComponentF1 f;
  f.f1_pred = multiset_f1(predicate_items(gen), predicate_items(gold));
  std::set<std::string> names;
  for (const auto& a : gen.actions) names.insert(a.name);
  for (const auto& a : gold.actions) names.insert(a.name);
  if (names.empty()) {
    f.f1_param = f.f1_precond = f.f1_eff = 1.0;
  } else {
    double param = 0, pre = 0, eff = 0;
    for (const auto& n : names) {
      const auto* g = gen.find_action(n);
      const auto* t = gold.find_action(n);
      if (!g || !t) continue;
      param += multiset_f1(parameter_items(*g), parameter_items(*t));
      pre += multiset_f1(literal_items(*g, g->precondition), literal_items(*t, t->precondition));
      eff += multiset_f1(literal_items(*g, g->effect), literal_items(*t, t->effect));
    }
    const double k = static_cast<double>(names.size());
    f.f1_param = param / k;
    f.f1_precond = pre / k;
    f.f1_eff = eff / k;
  }
  f.f1_avg = (f.f1_pred + f.f1_param + f.f1_precond + f.f1_eff) / 4.0;
  return f;
}

}  // namespace a2w
