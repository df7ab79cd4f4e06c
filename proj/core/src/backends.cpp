// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/backends.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace eev {

CardConstraint fold_card_constants(const CardConstraint& c) {
  CardConstraint out;
  out.target = c.target;
  out.bound = c.bound;
  for (Lit l : c.operands) {
    if (l.is_constant()) {
      if (l.constant_value()) --out.bound;
      continue;
    }
    out.operands.push_back(l);
  }
  return out;
}

// --- sequential counters --------------------------------------------------------

namespace {

class Gates {
 public:
  Gates(CnfSystem& out, std::int32_t origin) : out_(out), origin_(origin) {}

  Lit make_or(Lit a, Lit b) {
    if (a == Lit::True() || b == Lit::True()) return Lit::True();
    if (a == Lit::False()) return b;
    if (b == Lit::False()) return a;
    if (a == b) return a;
    if (a == ~b) return Lit::True();
    Lit s = fresh();
    add({~a, s});
    add({~b, s});
    add({~s, a, b});
    return s;
  }

  // a | (c & l)
  Lit make_or_and(Lit a, Lit c, Lit l) {
    if (c == Lit::False() || l == Lit::False()) return a;
    if (c == Lit::True()) return make_or(a, l);
    if (l == Lit::True()) return make_or(a, c);
    if (a == Lit::True()) return Lit::True();
    if (a == Lit::False()) return make_and(c, l);
    Lit s = fresh();
    add({~a, s});
    add({~c, ~l, s});
    add({~s, a, c});
    add({~s, a, l});
    return s;
  }

  Lit make_and(Lit a, Lit b) { return ~make_or(~a, ~b); }

  void equate(Lit y, Lit x) {
    if (y.is_constant() && x.is_constant()) {
      if (y != x) out_.clauses.push_back({});
      return;
    }
    if (y.is_constant()) {
      out_.clauses.push_back({y.constant_value() ? x : ~x});
      return;
    }
    if (x.is_constant()) {
      out_.clauses.push_back({x.constant_value() ? y : ~y});
      return;
    }
    if (y == x) return;
    if (y == ~x) {
      out_.clauses.push_back({});
      return;
    }
    add({~y, x});
    add({y, ~x});
  }

  std::int64_t aux() const { return aux_; }

 private:
  Lit fresh() {
    ++aux_;
    return out_.new_aux(origin_);
  }
  void add(std::initializer_list<Lit> c) { out_.clauses.emplace_back(c); }

  CnfSystem& out_;
  std::int32_t origin_;
  std::int64_t aux_ = 0;
};

}  // namespace

std::int64_t seqcnt_encode(const CardConstraint& card, CnfSystem& out, std::int32_t origin) {
  CardConstraint c = fold_card_constants(card);
  const auto n = static_cast<std::int64_t>(c.operands.size());
  Gates g(out, origin);
  if (c.bound < 0) {
    g.equate(c.target, Lit::False());
    return 0;
  }
  if (c.bound >= n) {
    g.equate(c.target, Lit::True());
    return 0;
  }
  const std::int64_t need = c.bound + 1;
  // reg[j] = "at least j of the operands seen so far are true", j = 0..need.
  // Registers with j < need - (remaining operands) can no longer reach the
  // overflow register and are not materialized.
  std::vector<Lit> reg(static_cast<std::size_t>(need + 1), Lit::False());
  reg[0] = Lit::True();
  for (std::int64_t i = 1; i <= n; ++i) {
    const Lit l = c.operands[static_cast<std::size_t>(i - 1)];
    const std::int64_t lowest = std::max<std::int64_t>(1, need - (n - i));
    const std::int64_t highest = std::min(need, i);
    for (std::int64_t j = highest; j >= lowest; --j) {
      auto ju = static_cast<std::size_t>(j);
      reg[ju] = g.make_or_and(reg[ju], reg[ju - 1], l);
    }
  }
  g.equate(c.target, ~reg[static_cast<std::size_t>(need)]);
  return g.aux();
}

CnfSystem cnf_lower(const ConstraintSystem& sys) {
  CnfSystem cnf;
  cnf.num_vars = sys.num_vars;
  cnf.original_vars = sys.num_vars;
  for (const auto& cl : sys.clauses) {
    std::vector<Lit> c;
    bool sat = false;
    for (Lit l : cl) {
      if (l.is_constant()) {
        sat |= l.constant_value();
        continue;
      }
      c.push_back(l);
    }
    if (!sat) cnf.clauses.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < sys.cards.size(); ++i)
    seqcnt_encode(sys.cards[i], cnf, static_cast<std::int32_t>(i));
  return cnf;
}

// --- pseudo-Boolean ----------------------------------------------------------------

bool pb_holds(const PbConstraint& c, std::span<const LBool> assignment) {
  std::int64_t sum = 0;
  for (const auto& t : c.terms)
    if (lit_value(t.lit, assignment) == LBool::True) sum += t.coef;
  return sum >= c.rhs;
}

std::array<PbConstraint, 2> pb_export_at_least(Lit y, std::span<const Lit> operands,
                                               std::int64_t bound) {
  const auto n = static_cast<std::int64_t>(operands.size());
  std::array<PbConstraint, 2> out;
  if (bound > 0) {
    for (Lit l : operands) out[0].terms.push_back({1, l});
    out[0].terms.push_back({bound, ~y});
    out[0].rhs = bound;
  }
  if (bound <= n) {
    const std::int64_t c = n - bound + 1;
    out[1].terms.push_back({c, y});
    for (Lit l : operands) out[1].terms.push_back({1, ~l});
    out[1].rhs = c;
  }
  return out;
}

std::array<PbConstraint, 2> pb_export(const CardConstraint& card) {
  CardConstraint c = fold_card_constants(card);
  std::vector<Lit> flipped;
  flipped.reserve(c.operands.size());
  for (Lit l : c.operands) flipped.push_back(~l);
  return pb_export_at_least(c.target, flipped,
                            static_cast<std::int64_t>(c.operands.size()) - c.bound);
}

// --- formats ---------------------------------------------------------------------

FormatError::FormatError(const std::string& what, std::int64_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

namespace {

std::string lit_token(Lit l) {
  if (l.is_constant()) return l.constant_value() ? "T" : "F";
  return std::to_string(l.to_dimacs());
}

void write_lits(std::ostream& out, std::span<const Lit> lits) {
  for (Lit l : lits) out << ' ' << lit_token(l);
  out << " 0\n";
}

template <typename T>
bool parse_int(std::string_view tok, T& value) {
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  return ec == std::errc() && p == tok.data() + tok.size();
}

class LineReader {
 public:
  LineReader(std::string_view text, std::int64_t line) : text_(text), line_(line) {}

  bool next(std::string_view& tok) {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r'))
      ++pos_;
    if (pos_ >= text_.size()) return false;
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != '\r')
      ++pos_;
    tok = text_.substr(start, pos_ - start);
    return true;
  }
  std::string_view expect(const char* what) {
    std::string_view tok;
    if (!next(tok)) fail(std::string("expected ") + what);
    return tok;
  }
  std::int64_t integer(const char* what) {
    std::string_view tok = expect(what);
    std::int64_t v = 0;
    if (!parse_int(tok, v)) fail(std::string("bad ") + what + " '" + std::string(tok) + "'");
    return v;
  }
  Lit lit(std::string_view tok, std::int32_t num_vars) {
    if (tok == "T") return Lit::True();
    if (tok == "F") return Lit::False();
    std::int64_t v = 0;
    if (!parse_int(tok, v) || v == 0) fail("bad literal '" + std::string(tok) + "'");
    if (v > num_vars || -v > num_vars)
      fail("literal " + std::string(tok) + " exceeds variable count");
    return Lit::from_dimacs(static_cast<int>(v));
  }
  // Literals up to the terminating 0, which must end the line.
  std::vector<Lit> lits(std::int32_t num_vars) {
    std::vector<Lit> out;
    for (;;) {
      std::string_view tok;
      if (!next(tok)) fail("missing terminating 0");
      if (tok == "0") break;
      out.push_back(lit(tok, num_vars));
    }
    std::string_view extra;
    if (next(extra)) fail("trailing token '" + std::string(extra) + "'");
    return out;
  }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, line_); }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::int64_t line_;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return f;
}

}  // namespace

void write_native(const ConstraintSystem& sys, std::ostream& out) {
  out << "p cnf+card " << sys.num_vars << '\n';
  for (const auto& cl : sys.clauses) {
    out << 'c';
    write_lits(out, cl);
  }
  for (const auto& k : sys.cards) {
    out << "k " << lit_token(k.target) << " <= " << k.bound;
    write_lits(out, k.operands);
  }
  for (const auto& in : sys.inputs) {
    out << "i " << in.base;
    write_lits(out, in.bits);
  }
  for (std::size_t m = 0; m < sys.activations.size(); ++m)
    for (std::size_t l = 0; l < sys.activations[m].size(); ++l) {
      out << "a " << m << ' ' << l;
      write_lits(out, sys.activations[m][l]);
    }
  if (!sys.goal.empty()) {
    out << 'g';
    write_lits(out, sys.goal);
  }
}

ConstraintSystem read_native(std::istream& in) {
  ConstraintSystem sys;
  bool header = false;
  std::string text;
  std::int64_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    LineReader r(text, line_no);
    std::string_view kw;
    if (!r.next(kw) || kw[0] == '#') continue;
    if (kw == "p") {
      if (header) r.fail("duplicate header");
      if (r.expect("format") != "cnf+card") r.fail("expected 'p cnf+card VARS'");
      std::int64_t v = r.integer("variable count");
      if (v < 0 || v > INT32_MAX / 2) r.fail("variable count out of range");
      sys.num_vars = static_cast<std::int32_t>(v);
      std::string_view extra;
      if (r.next(extra)) r.fail("trailing token '" + std::string(extra) + "'");
      header = true;
      continue;
    }
    if (!header) r.fail("constraint before header");
    if (kw == "c") {
      sys.clauses.push_back(r.lits(sys.num_vars));
    } else if (kw == "k") {
      CardConstraint k;
      k.target = r.lit(r.expect("target"), sys.num_vars);
      if (r.expect("'<='") != "<=") r.fail("expected '<='");
      k.bound = r.integer("bound");
      k.operands = r.lits(sys.num_vars);
      sys.cards.push_back(std::move(k));
    } else if (kw == "i") {
      InputBlock b;
      std::int64_t base = r.integer("base");
      if (base < INT32_MIN || base > INT32_MAX) r.fail("base out of range");
      b.base = static_cast<std::int32_t>(base);
      b.bits = r.lits(sys.num_vars);
      sys.inputs.push_back(std::move(b));
    } else if (kw == "a") {
      std::int64_t m = r.integer("model index");
      std::int64_t l = r.integer("layer index");
      if (m < 0 || l < 0 || m > 1 << 16 || l > 1 << 16) r.fail("activation index out of range");
      auto mu = static_cast<std::size_t>(m);
      auto lu = static_cast<std::size_t>(l);
      if (sys.activations.size() <= mu) sys.activations.resize(mu + 1);
      if (sys.activations[mu].size() <= lu) sys.activations[mu].resize(lu + 1);
      sys.activations[mu][lu] = r.lits(sys.num_vars);
    } else if (kw == "g") {
      sys.goal = r.lits(sys.num_vars);
    } else if (kw == "n") {
      r.fail("cardinality-network lines ('n') are reserved and not supported");
    } else {
      r.fail("unknown line type '" + std::string(kw) + "'");
    }
  }
  if (!header) throw FormatError("missing 'p cnf+card' header", 0);
  return sys;
}

void write_native(const ConstraintSystem& sys, const std::filesystem::path& path) {
  auto f = open_out(path);
  write_native(sys, f);
}

ConstraintSystem read_native(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_native(f);
}

void write_dimacs(const CnfSystem& cnf, std::ostream& out) {
  out << "p cnf " << cnf.num_vars << ' ' << cnf.clauses.size() << '\n';
  for (const auto& cl : cnf.clauses) {
    for (Lit l : cl) {
      if (l.is_constant()) throw std::invalid_argument("write_dimacs: constant literal in clause");
      out << l.to_dimacs() << ' ';
    }
    out << "0\n";
  }
}

void write_dimacs(const CnfSystem& cnf, const std::filesystem::path& path) {
  auto f = open_out(path);
  write_dimacs(cnf, f);
}

CnfSystem read_dimacs(std::istream& in) {
  CnfSystem cnf;
  bool header = false;
  std::int64_t declared = 0;
  std::string text;
  std::int64_t line_no = 0;
  std::vector<Lit> pending;
  while (std::getline(in, text)) {
    ++line_no;
    LineReader r(text, line_no);
    std::string_view tok;
    if (!r.next(tok) || tok[0] == 'c' || tok[0] == '%') continue;
    if (tok == "p") {
      if (header) r.fail("duplicate header");
      if (r.expect("format") != "cnf") r.fail("expected 'p cnf VARS CLAUSES'");
      std::int64_t v = r.integer("variable count");
      declared = r.integer("clause count");
      if (v < 0 || v > INT32_MAX / 2 || declared < 0) r.fail("header out of range");
      cnf.num_vars = cnf.original_vars = static_cast<std::int32_t>(v);
      header = true;
      continue;
    }
    if (!header) r.fail("clause before header");
    do {
      std::int64_t v = 0;
      if (!parse_int(tok, v)) r.fail("bad literal '" + std::string(tok) + "'");
      if (v == 0) {
        cnf.clauses.push_back(std::move(pending));
        pending.clear();
      } else {
        if (v > cnf.num_vars || -v > cnf.num_vars) r.fail("literal exceeds variable count");
        pending.push_back(Lit::from_dimacs(static_cast<int>(v)));
      }
    } while (r.next(tok));
  }
  if (!header) throw FormatError("missing 'p cnf' header", 0);
  if (!pending.empty()) throw FormatError("unterminated final clause", line_no);
  if (static_cast<std::int64_t>(cnf.clauses.size()) != declared)
    throw FormatError("header declares " + std::to_string(declared) + " clauses, found " +
                          std::to_string(cnf.clauses.size()),
                      0);
  return cnf;
}

namespace {

// Merges repeated literals, folds constants and cancels complementary
// pairs (c*x + d*~x = min(c,d) + |c-d| * one of them).
std::optional<PbConstraint> normalize_pb(const PbConstraint& c) {
  std::map<Var, std::pair<std::int64_t, std::int64_t>> coef;  // positive, negative
  std::int64_t rhs = c.rhs;
  for (const auto& t : c.terms) {
    if (t.lit.is_constant()) {
      if (t.lit.constant_value()) rhs -= t.coef;
      continue;
    }
    auto& e = coef[t.lit.var()];
    (t.lit.negated() ? e.second : e.first) += t.coef;
  }
  PbConstraint out;
  for (const auto& [v, pn] : coef) {
    std::int64_t common = std::min(pn.first, pn.second);
    rhs -= common;
    if (pn.first > common) out.terms.push_back({pn.first - common, Lit::make(v)});
    if (pn.second > common) out.terms.push_back({pn.second - common, Lit::make(v, true)});
  }
  out.rhs = rhs;
  if (rhs <= 0) return std::nullopt;
  return out;
}

void write_pb_line(std::ostream& out, const PbConstraint& c) {
  if (c.terms.empty()) {
    // Unsatisfiable: an empty left-hand side cannot reach a positive rhs.
    out << "+1 x1 +1 ~x1 >= 2 ;\n";
    return;
  }
  for (const auto& t : c.terms)
    out << '+' << t.coef << ' ' << (t.lit.negated() ? "~x" : "x") << t.lit.var() + 1 << ' ';
  out << ">= " << c.rhs << " ;\n";
}

}  // namespace

void write_opb(const ConstraintSystem& sys, std::ostream& out) {
  std::vector<PbConstraint> rows;
  for (const auto& cl : sys.clauses) {
    PbConstraint c;
    for (Lit l : cl) c.terms.push_back({1, l});
    c.rhs = 1;
    if (auto n = normalize_pb(c)) rows.push_back(std::move(*n));
  }
  for (const auto& k : sys.cards)
    for (const auto& c : pb_export(k)) {
      if (c.terms.empty() && c.rhs <= 0) continue;
      if (auto n = normalize_pb(c)) rows.push_back(std::move(*n));
    }
  const std::int32_t vars = std::max(sys.num_vars, 1);
  out << "* #variable= " << vars << " #constraint= " << rows.size() << '\n';
  for (const auto& r : rows) write_pb_line(out, r);
}

void write_opb(const ConstraintSystem& sys, const std::filesystem::path& path) {
  auto f = open_out(path);
  write_opb(sys, f);
}

std::vector<PbConstraint> read_opb(std::istream& in, std::int32_t* num_vars) {
  std::vector<PbConstraint> rows;
  std::string text;
  std::int64_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    LineReader r(text, line_no);
    if (!text.empty() && text[0] == '*') {
      auto pos = text.find("#variable=");
      if (num_vars && pos != std::string::npos) {
        std::istringstream s(text.substr(pos + 10));
        s >> *num_vars;
      }
      continue;
    }
    std::string_view tok;
    if (!r.next(tok)) continue;
    PbConstraint c;
    for (;;) {
      if (tok == ">=") {
        c.rhs = r.integer("rhs");
        if (r.expect("';'") != ";") r.fail("expected ';'");
        break;
      }
      std::int64_t coef = 0;
      if (!parse_int(tok[0] == '+' ? tok.substr(1) : tok, coef)) r.fail("bad coefficient");
      std::string_view var = r.expect("variable");
      bool neg = false;
      if (!var.empty() && var[0] == '~') {
        neg = true;
        var.remove_prefix(1);
      }
      std::int64_t index = 0;
      if (var.size() < 2 || var[0] != 'x' || !parse_int(var.substr(1), index) || index < 1)
        r.fail("bad variable '" + std::string(var) + "'");
      c.terms.push_back({coef, Lit::make(static_cast<Var>(index - 1), neg)});
      tok = r.expect("term or '>='");
    }
    rows.push_back(std::move(c));
  }
  return rows;
}

}  // namespace eev
