// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace eev {

namespace {

// Finite subsequences of the Luby sequence: 1, 1, 2, 1, 1, 2, 4, ...
double luby(double y, int x) {
  int size = 1;
  int seq = 0;
  for (; size < x + 1; seq++, size = 2 * size + 1) {
  }
  while (size - 1 != x) {
    size = (size - 1) >> 1;
    seq--;
    x = x % size;
  }
  return std::pow(y, seq);
}

constexpr std::uint8_t kPhaseUnset = 2;

}  // namespace

Solver::Solver(SolverConfig config) : config_(std::move(config)), rng_(config_.seed) {}

Var Solver::new_var() {
  Var v = num_vars();
  assigns_.push_back(LBool::Undef);
  level_.push_back(0);
  reason_.push_back(kNoReason);
  trail_pos_.push_back(0);
  saved_phase_.push_back(kPhaseUnset);
  activity_.push_back(0.0);
  seen_.push_back(0);
  heap_index_.push_back(-1);
  watches_.emplace_back();
  watches_.emplace_back();
  card_occ_.emplace_back();
  card_occ_.emplace_back();
  heap_insert(v);
  return v;
}

void Solver::reserve_vars(std::int32_t n) {
  while (num_vars() < n) new_var();
}

// --- clause storage -----------------------------------------------------------

Solver::CRef Solver::alloc_clause(std::span<const Lit> lits, bool learnt) {
  auto cr = static_cast<CRef>(headers_.size());
  headers_.push_back({static_cast<std::uint32_t>(clause_mem_.size()),
                      static_cast<std::uint32_t>(lits.size()), 0.0f, learnt, false});
  clause_mem_.insert(clause_mem_.end(), lits.begin(), lits.end());
  return cr;
}

void Solver::attach_clause(CRef cr) {
  auto c = clause_lits(cr);
  watches_[(~c[0]).index()].push_back({cr, c[1]});
  watches_[(~c[1]).index()].push_back({cr, c[0]});
}

bool Solver::locked(CRef cr) {
  Lit first = clause_lits(cr)[0];
  return reason_[static_cast<std::size_t>(first.var())] == cr && value(first) == LBool::True;
}

void Solver::reduce_db() {
  double extra_lim = cla_inc_ / static_cast<double>(learnts_.size());
  std::sort(learnts_.begin(), learnts_.end(), [&](CRef a, CRef b) {
    const auto& ha = headers_[a];
    const auto& hb = headers_[b];
    return ha.size > 2 && (hb.size == 2 || ha.activity < hb.activity);
  });
  std::size_t j = 0;
  for (std::size_t i = 0; i < learnts_.size(); ++i) {
    CRef cr = learnts_[i];
    auto& h = headers_[cr];
    if (h.size > 2 && !locked(cr) && (i < learnts_.size() / 2 || h.activity < extra_lim)) {
      h.deleted = true;
      wasted_lits_ += h.size;
    } else {
      learnts_[j++] = cr;
    }
  }
  learnts_.resize(j);
  if (wasted_lits_ > clause_mem_.size() / 5) collect_garbage();
}

void Solver::collect_garbage() {
  std::vector<Lit> mem;
  std::vector<ClauseHeader> headers;
  std::vector<CRef> remap(headers_.size(), kNoReason);
  mem.reserve(clause_mem_.size() - wasted_lits_);
  for (CRef cr = 0; cr < headers_.size(); ++cr) {
    const auto& h = headers_[cr];
    if (h.deleted) continue;
    remap[cr] = static_cast<CRef>(headers.size());
    headers.push_back({static_cast<std::uint32_t>(mem.size()), h.size, h.activity, h.learnt, false});
    mem.insert(mem.end(), clause_mem_.begin() + h.start, clause_mem_.begin() + h.start + h.size);
  }
  for (Lit p : trail_) {
    auto& r = reason_[static_cast<std::size_t>(p.var())];
    if (r != kNoReason && (r & kCardTag) == 0) r = remap[r];
  }
  for (auto& cr : problem_clauses_) cr = remap[cr];
  for (auto& cr : learnts_) cr = remap[cr];
  clause_mem_ = std::move(mem);
  headers_ = std::move(headers);
  wasted_lits_ = 0;
  for (auto& ws : watches_) ws.clear();
  for (CRef cr = 0; cr < headers_.size(); ++cr) attach_clause(cr);
}

// --- adding constraints -------------------------------------------------------

bool Solver::add_clause(std::span<const Lit> lits) {
  original_clauses_.emplace_back(lits.begin(), lits.end());
  if (!ok_) return false;
  std::vector<Lit> ps;
  ps.reserve(lits.size());
  for (Lit l : lits) {
    if (l.is_constant()) {
      if (l.constant_value()) return true;
      continue;
    }
    if (l.var() >= num_vars()) throw std::invalid_argument("add_clause: unallocated variable");
    ps.push_back(l);
  }
  std::sort(ps.begin(), ps.end());
  std::size_t j = 0;
  Lit prev;
  for (Lit l : ps) {
    LBool v = value(l);
    if (v == LBool::True || l == ~prev) return true;
    if (v != LBool::False && l != prev) ps[j++] = prev = l;
  }
  ps.resize(j);
  if (ps.empty()) return ok_ = false;
  if (ps.size() == 1) {
    enqueue(ps[0], kNoReason);
    return ok_ = propagate();
  }
  CRef cr = alloc_clause(ps, false);
  problem_clauses_.push_back(cr);
  attach_clause(cr);
  return true;
}

bool Solver::add_card(Lit target, std::span<const Lit> operands, std::int64_t bound) {
  original_cards_.push_back({target, {operands.begin(), operands.end()}, bound});
  if (!ok_) return false;
  if (target.is_undef()) throw std::invalid_argument("add_card: undefined target");
  if (target.is_constant()) {
    Lit fixed = Lit::make(new_var());
    if (!add_clause({target.constant_value() ? fixed : ~fixed})) return false;
    original_clauses_.pop_back();
    target = fixed;
  }
  if (target.var() >= num_vars()) throw std::invalid_argument("add_card: unallocated target");

  // Fold constants, then cancel complementary pairs (x + ~x = 1).
  std::vector<Lit> ps;
  for (Lit l : operands) {
    if (l.is_constant()) {
      if (l.constant_value()) --bound;
      continue;
    }
    if (l.var() >= num_vars()) throw std::invalid_argument("add_card: unallocated operand");
    if (l.var() == target.var())
      throw std::invalid_argument("add_card: target variable occurs among operands");
    ps.push_back(l);
  }
  std::sort(ps.begin(), ps.end());
  Card card;
  card.target = target;
  card.total = 0;
  card.max_mult = 0;
  for (std::size_t i = 0; i < ps.size();) {
    Var v = ps[i].var();
    std::int32_t pos = 0, neg = 0;
    for (; i < ps.size() && ps[i].var() == v; ++i) (ps[i].negated() ? neg : pos)++;
    bound -= std::min(pos, neg);
    std::int32_t m = std::abs(pos - neg);
    if (m == 0) continue;
    Lit l = Lit::make(v, neg > pos);
    LBool val = value(l);
    if (val == LBool::True) {
      bound -= m;
    } else if (val == LBool::Undef) {
      card.ops.push_back(l);
      card.mult.push_back(m);
      card.total += m;
      card.max_mult = std::max(card.max_mult, m);
    }
  }
  card.bound = bound;
  if (bound < 0 || bound >= card.total) {
    Lit forced = bound < 0 ? ~target : target;
    if (value(forced) == LBool::False) return ok_ = false;
    if (value(forced) == LBool::Undef) {
      enqueue(forced, kNoReason);
      return ok_ = propagate();
    }
    return true;
  }

  auto ci = static_cast<std::uint32_t>(cards_.size());
  for (std::size_t i = 0; i < card.ops.size(); ++i) {
    card_occ_[card.ops[i].index()].push_back({ci, card.mult[i], OccKind::OpTrue});
    card_occ_[(~card.ops[i]).index()].push_back({ci, card.mult[i], OccKind::OpFalse});
  }
  card_occ_[target.index()].push_back({ci, 0, OccKind::TargetTrue});
  card_occ_[(~target).index()].push_back({ci, 0, OccKind::TargetFalse});
  cards_.push_back(std::move(card));

  // The target may already be fixed at level 0 and processed.
  const Card& c = cards_[ci];
  if (value(target) == LBool::True && c.max_mult > c.bound) scan_operands(ci, true);
  else if (value(target) == LBool::False && c.max_mult > c.total - c.bound - 1)
    scan_operands(ci, false);
  return ok_ = propagate();
}

bool Solver::load(const ConstraintSystem& sys) {
  reserve_vars(sys.num_vars);
  for (const auto& cl : sys.clauses)
    if (!add_clause(cl)) return false;
  for (const auto& c : sys.cards)
    if (!add_card(c)) return false;
  return ok_;
}

// --- propagation --------------------------------------------------------------

void Solver::enqueue(Lit p, std::uint32_t reason) {
  auto v = static_cast<std::size_t>(p.var());
  assigns_[v] = to_lbool(!p.negated());
  level_[v] = decision_level();
  reason_[v] = reason;
  trail_pos_[v] = static_cast<std::uint32_t>(trail_.size());
  trail_.push_back(p);
}

bool Solver::propagate() {
  while (qhead_ < trail_.size()) {
    Lit p = trail_[qhead_++];
    ++stats_.propagations;
    for (const CardOcc& o : card_occ_[p.index()]) {
      if (o.kind == OccKind::OpTrue) cards_[o.card].num_true += o.mult;
      else if (o.kind == OccKind::OpFalse) cards_[o.card].num_false += o.mult;
    }
    if (!propagate_clauses(p)) return false;
    if (!check_card_rules(p)) return false;
  }
  return true;
}

bool Solver::propagate_clauses(Lit p) {
  auto& ws = watches_[p.index()];
  const Lit false_lit = ~p;
  std::size_t i = 0, j = 0;
  const std::size_t n = ws.size();
  while (i < n) {
    Watcher w = ws[i];
    if (value(w.blocker) == LBool::True) {
      ws[j++] = ws[i++];
      continue;
    }
    const auto& h = headers_[w.cref];
    if (h.deleted) {
      ++i;
      continue;
    }
    Lit* c = clause_mem_.data() + h.start;
    if (c[0] == false_lit) {
      c[0] = c[1];
      c[1] = false_lit;
    }
    ++i;
    Lit first = c[0];
    Watcher nw{w.cref, first};
    if (first != w.blocker && value(first) == LBool::True) {
      ws[j++] = nw;
      continue;
    }
    bool moved = false;
    for (std::uint32_t k = 2; k < h.size; ++k) {
      if (value(c[k]) != LBool::False) {
        c[1] = c[k];
        c[k] = false_lit;
        watches_[(~c[1]).index()].push_back(nw);
        moved = true;
        break;
      }
    }
    if (moved) continue;
    ws[j++] = nw;
    if (value(first) == LBool::False) {
      conflict_.present = true;
      conflict_.lits.assign(c, c + h.size);
      while (i < n) ws[j++] = ws[i++];
      ws.resize(j);
      return false;
    }
    enqueue(first, w.cref);
    ++stats_.clause_propagations;
  }
  ws.resize(j);
  return true;
}

bool Solver::check_card_rules(Lit p) {
  for (const CardOcc& o : card_occ_[p.index()]) {
    const std::uint32_t ci = o.card;
    const Card& c = cards_[ci];
    switch (o.kind) {
      case OccKind::OpTrue:
        if (c.num_true > c.bound) {
          if (!imply_from_card(ci, ~c.target, CardRule::TargetToFalse)) return false;
        } else if (value(c.target) == LBool::True && c.num_true + c.max_mult > c.bound) {
          scan_operands(ci, true);
        }
        break;
      case OccKind::OpFalse:
        if (c.total - c.num_false <= c.bound) {
          if (!imply_from_card(ci, c.target, CardRule::TargetToTrue)) return false;
        } else if (value(c.target) == LBool::False &&
                   c.num_false + c.max_mult > c.total - c.bound - 1) {
          scan_operands(ci, false);
        }
        break;
      case OccKind::TargetTrue:
        if (c.num_true > c.bound) {
          if (!imply_from_card(ci, ~c.target, CardRule::TargetToFalse)) return false;
        } else if (c.num_true + c.max_mult > c.bound) {
          scan_operands(ci, true);
        }
        break;
      case OccKind::TargetFalse:
        if (c.total - c.num_false <= c.bound) {
          if (!imply_from_card(ci, c.target, CardRule::TargetToTrue)) return false;
        } else if (c.num_false + c.max_mult > c.total - c.bound - 1) {
          scan_operands(ci, false);
        }
        break;
    }
  }
  return true;
}

bool Solver::imply_from_card(std::uint32_t ci, Lit q, CardRule rule) {
  LBool v = value(q);
  if (v == LBool::True) return true;
  if (v == LBool::False) {
    conflict_.present = true;
    synthesize_card_reason(ci, q, trail_.size(), conflict_.lits);
    return false;
  }
  enqueue(q, kCardTag | ci);
  ++stats_.card_rule_propagations[static_cast<std::size_t>(rule)];
  ++stats_.card_propagations;
  return true;
}

void Solver::scan_operands(std::uint32_t ci, bool target_true) {
  const Card& c = cards_[ci];
  ++stats_.card_scans;
  // Operand l is forced once assigning it the other way would overflow:
  //   target true:  num_true + mult(l) > bound        => l false
  //   target false: num_false + mult(l) > total-bound-1 => l true
  const std::int64_t slack = target_true ? c.bound - c.num_true : c.total - c.bound - 1 - c.num_false;
  for (std::size_t i = 0; i < c.ops.size(); ++i) {
    ++stats_.card_scan_steps;
    if (c.mult[i] <= slack || value(c.ops[i]) != LBool::Undef) continue;
    Lit q = target_true ? ~c.ops[i] : c.ops[i];
    enqueue(q, kCardTag | ci);
    auto rule = target_true ? CardRule::OperandToFalse : CardRule::OperandToTrue;
    ++stats_.card_rule_propagations[static_cast<std::size_t>(rule)];
    ++stats_.card_propagations;
  }
}

void Solver::synthesize_card_reason(std::uint32_t ci, Lit implied, std::size_t limit_pos,
                                    std::vector<Lit>& out) const {
  const Card& c = cards_[ci];
  out.clear();
  out.push_back(implied);
  bool want_true;  // collect true operands (else false operands)
  std::int64_t need;
  std::size_t exclude = c.ops.size();
  if (implied.var() == c.target.var()) {
    want_true = implied == ~c.target;
    need = want_true ? c.bound + 1 : c.total - c.bound;
  } else {
    std::size_t j = 0;
    while (j < c.ops.size() && c.ops[j].var() != implied.var()) ++j;
    if (j == c.ops.size()) throw SolverInvariantError("card reason: literal not in constraint");
    exclude = j;
    want_true = implied == ~c.ops[j];
    out.push_back(want_true ? ~c.target : c.target);
    need = want_true ? c.bound - c.mult[j] + 1 : c.total - c.bound - c.mult[j];
  }
  if (need <= 0) return;
  // Earliest-assigned sufficient trigger set.
  std::vector<std::pair<std::uint32_t, std::size_t>> cand;
  const LBool wanted = to_lbool(want_true);
  for (std::size_t i = 0; i < c.ops.size(); ++i) {
    if (i == exclude || value(c.ops[i]) != wanted) continue;
    auto pos = trail_pos_[static_cast<std::size_t>(c.ops[i].var())];
    if (pos < limit_pos) cand.emplace_back(pos, i);
  }
  std::sort(cand.begin(), cand.end());
  for (const auto& [pos, i] : cand) {
    out.push_back(want_true ? ~c.ops[i] : c.ops[i]);
    need -= c.mult[i];
    if (need <= 0) return;
  }
  throw SolverInvariantError("card reason: trigger set insufficient");
}

void Solver::cancel_until(int level) {
  if (decision_level() <= level) return;
  const std::size_t stop = trail_lim_[static_cast<std::size_t>(level)];
  for (std::size_t c = trail_.size(); c-- > stop;) {
    Lit p = trail_[c];
    if (c < qhead_) {
      for (const CardOcc& o : card_occ_[p.index()]) {
        if (o.kind == OccKind::OpTrue) cards_[o.card].num_true -= o.mult;
        else if (o.kind == OccKind::OpFalse) cards_[o.card].num_false -= o.mult;
      }
    }
    auto x = static_cast<std::size_t>(p.var());
    assigns_[x] = LBool::Undef;
    reason_[x] = kNoReason;
    if (config_.phase_saving) saved_phase_[x] = p.negated() ? 1 : 0;
    heap_insert(p.var());
  }
  qhead_ = stop;
  trail_.resize(stop);
  trail_lim_.resize(static_cast<std::size_t>(level));
}

// --- conflict analysis --------------------------------------------------------

void Solver::reason_lits(Var v, std::vector<Lit>& out) {
  std::uint32_t r = reason_[static_cast<std::size_t>(v)];
  out.clear();
  if (r == kNoReason) return;
  Lit implied = Lit::make(v, assigns_[static_cast<std::size_t>(v)] == LBool::False);
  if (r & kCardTag) {
    synthesize_card_reason(r & ~kCardTag, implied, trail_pos_[static_cast<std::size_t>(v)], out);
    return;
  }
  auto c = clause_lits(r);
  out.push_back(implied);
  for (Lit l : c)
    if (l.var() != v) out.push_back(l);
}

std::vector<Lit> Solver::reason_clause(Var v) {
  std::vector<Lit> out;
  if (assigns_[static_cast<std::size_t>(v)] != LBool::Undef) reason_lits(v, out);
  return out;
}

void Solver::analyze(std::vector<Lit>& out_learnt, int& out_btlevel) {
  out_learnt.clear();
  out_learnt.emplace_back();
  int path_count = 0;
  Lit p;
  std::size_t index = trail_.size();
  std::vector<Lit> current = conflict_.lits;

  do {
    for (Lit q : current) {
      if (!p.is_undef() && q.var() == p.var()) continue;
      auto v = static_cast<std::size_t>(q.var());
      if (!seen_[v] && level_[v] > 0) {
        bump_var(q.var());
        seen_[v] = 1;
        if (level_[v] >= decision_level()) ++path_count;
        else out_learnt.push_back(q);
      }
    }
    while (!seen_[static_cast<std::size_t>(trail_[--index].var())]) {
    }
    p = trail_[index];
    seen_[static_cast<std::size_t>(p.var())] = 0;
    --path_count;
    if (path_count > 0) {
      std::uint32_t r = reason_[static_cast<std::size_t>(p.var())];
      if (r != kNoReason && !(r & kCardTag) && headers_[r].learnt) bump_clause(r);
      reason_lits(p.var(), current);
    }
  } while (path_count > 0);
  out_learnt[0] = ~p;

  // Drop literals implied by the rest of the clause.
  analyze_toclear_.assign(out_learnt.begin(), out_learnt.end());
  std::uint32_t levels = 0;
  for (std::size_t i = 1; i < out_learnt.size(); ++i) levels |= abstract_level(out_learnt[i].var());
  std::size_t j = 1;
  for (std::size_t i = 1; i < out_learnt.size(); ++i) {
    Var v = out_learnt[i].var();
    if (reason_[static_cast<std::size_t>(v)] == kNoReason || !lit_redundant(out_learnt[i], levels))
      out_learnt[j++] = out_learnt[i];
  }
  out_learnt.resize(j);
  for (Lit l : analyze_toclear_)
    if (!l.is_undef()) seen_[static_cast<std::size_t>(l.var())] = 0;

  if (out_learnt.size() == 1) {
    out_btlevel = 0;
  } else {
    std::size_t max_i = 1;
    for (std::size_t i = 2; i < out_learnt.size(); ++i)
      if (level_[static_cast<std::size_t>(out_learnt[i].var())] >
          level_[static_cast<std::size_t>(out_learnt[max_i].var())])
        max_i = i;
    std::swap(out_learnt[1], out_learnt[max_i]);
    out_btlevel = level_[static_cast<std::size_t>(out_learnt[1].var())];
  }
  conflict_.present = false;
}

bool Solver::lit_redundant(Lit p, std::uint32_t levels) {
  analyze_stack_.clear();
  analyze_stack_.push_back(p);
  const std::size_t top = analyze_toclear_.size();
  while (!analyze_stack_.empty()) {
    Var v = analyze_stack_.back().var();
    analyze_stack_.pop_back();
    reason_lits(v, scratch_reason_);
    for (std::size_t k = 1; k < scratch_reason_.size(); ++k) {
      Lit q = scratch_reason_[k];
      auto u = static_cast<std::size_t>(q.var());
      if (seen_[u] || level_[u] == 0) continue;
      if (reason_[u] != kNoReason && (abstract_level(q.var()) & levels) != 0) {
        seen_[u] = 1;
        analyze_stack_.push_back(q);
        analyze_toclear_.push_back(q);
      } else {
        for (std::size_t i = top; i < analyze_toclear_.size(); ++i)
          seen_[static_cast<std::size_t>(analyze_toclear_[i].var())] = 0;
        analyze_toclear_.resize(top);
        return false;
      }
    }
  }
  return true;
}

bool Solver::assume(Lit p) {
  // Contradicting an existing assignment opens no level and leaves no conflict.
  if (value(p) == LBool::False) return false;
  trail_lim_.push_back(trail_.size());
  if (value(p) == LBool::Undef) enqueue(p, kNoReason);
  return propagate();
}

Solver::Learned Solver::analyze_conflict() {
  if (!conflict_.present) throw std::logic_error("analyze_conflict: no pending conflict");
  if (decision_level() == 0) throw std::logic_error("analyze_conflict: conflict at level 0");
  Learned out;
  analyze(out.clause, out.backjump_level);
  return out;
}

void Solver::backtrack(int level) { cancel_until(level); }

bool Solver::counters_consistent() const {
  for (const Card& c : cards_) {
    std::int64_t t = 0, f = 0;
    for (std::size_t i = 0; i < c.ops.size(); ++i) {
      auto v = static_cast<std::size_t>(c.ops[i].var());
      if (assigns_[v] == LBool::Undef || trail_pos_[v] >= qhead_) continue;
      (value(c.ops[i]) == LBool::True ? t : f) += c.mult[i];
    }
    if (t != c.num_true || f != c.num_false) return false;
  }
  return true;
}

// --- search -------------------------------------------------------------------

void Solver::bump_var(Var v) {
  auto i = static_cast<std::size_t>(v);
  if ((activity_[i] += var_inc_) > 1e100) {
    for (double& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (heap_index_[i] >= 0) heap_up(static_cast<std::size_t>(heap_index_[i]));
}

void Solver::bump_clause(CRef cr) {
  auto& h = headers_[cr];
  if ((h.activity += static_cast<float>(cla_inc_)) > 1e20f) {
    for (CRef l : learnts_) headers_[l].activity *= 1e-20f;
    cla_inc_ *= 1e-20;
  }
}

Lit Solver::pick_branch_lit() {
  Var next = -1;
  while (next < 0 || assigns_[static_cast<std::size_t>(next)] != LBool::Undef) {
    if (heap_.empty()) return Lit();
    next = heap_pop();
  }
  auto i = static_cast<std::size_t>(next);
  bool negated;
  if (config_.phase_saving && saved_phase_[i] != kPhaseUnset) {
    negated = saved_phase_[i] == 1;
  } else {
    switch (config_.polarity) {
      case Polarity::Random: negated = (rng_() & 1) != 0; break;
      case Polarity::Negative: negated = true; break;
      default: negated = false; break;
    }
  }
  return Lit::make(next, negated);
}

bool Solver::budget_exhausted() {
  if (config_.conflict_budget >= 0 &&
      stats_.conflicts - conflicts_at_start_ >= static_cast<std::uint64_t>(config_.conflict_budget))
    return true;
  return has_deadline_ && std::chrono::steady_clock::now() >= deadline_;
}

Solver::SearchResult Solver::search(std::int64_t conflict_limit) {
  std::int64_t conflicts_here = 0;
  std::vector<Lit> learnt;
  for (;;) {
    if (!propagate()) {
      ++stats_.conflicts;
      ++conflicts_here;
      if (decision_level() == 0) return SearchResult::Unsat;
      int bt = 0;
      analyze(learnt, bt);
      cancel_until(bt);
      if (config_.on_learned) config_.on_learned(learnt);
      ++stats_.learned;
      stats_.learned_literals += learnt.size();
      if (learnt.size() == 1) {
        enqueue(learnt[0], kNoReason);
      } else {
        CRef cr = alloc_clause(learnt, true);
        learnts_.push_back(cr);
        attach_clause(cr);
        bump_clause(cr);
        enqueue(learnt[0], cr);
      }
      var_inc_ /= config_.var_decay;
      cla_inc_ /= config_.clause_decay;
      if (--learnt_adjust_cnt_ <= 0) {
        learnt_adjust_confl_ *= 1.5;
        learnt_adjust_cnt_ = static_cast<std::int64_t>(learnt_adjust_confl_);
        max_learnts_ *= 1.1;
      }
      if (config_.conflict_budget >= 0 &&
          stats_.conflicts - conflicts_at_start_ >= static_cast<std::uint64_t>(config_.conflict_budget))
        return SearchResult::Budget;
      if ((stats_.conflicts & 255) == 0 && budget_exhausted()) return SearchResult::Budget;
    } else {
      if (conflict_limit >= 0 && conflicts_here >= conflict_limit) {
        cancel_until(0);
        return SearchResult::Restart;
      }
      if (static_cast<double>(learnts_.size()) - static_cast<double>(trail_.size()) >= max_learnts_)
        reduce_db();
      Lit next = pick_branch_lit();
      if (next.is_undef()) return SearchResult::Sat;
      ++stats_.decisions;
      trail_lim_.push_back(trail_.size());
      enqueue(next, kNoReason);
    }
  }
}

SolveStatus Solver::solve() {
  const auto start = std::chrono::steady_clock::now();
  model_.clear();
  conflicts_at_start_ = stats_.conflicts;
  has_deadline_ = config_.time_budget.has_value();
  if (has_deadline_)
    deadline_ = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(*config_.time_budget));
  auto finish = [&](SolveStatus s) {
    stats_.solve_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
  };
  if (has_deadline_ && (*config_.time_budget <= 0 || std::chrono::steady_clock::now() >= deadline_))
    return finish(SolveStatus::Unknown);
  if (!ok_) return finish(SolveStatus::Unsat);

  max_learnts_ = std::max(
      static_cast<double>(problem_clauses_.size() + cards_.size()) / 3.0, 2000.0);
  learnt_adjust_confl_ = 100;
  learnt_adjust_cnt_ = 100;
  SolveStatus status = SolveStatus::Unknown;
  for (int restarts = 0;; ++restarts) {
    auto limit = static_cast<std::int64_t>(luby(2, restarts) * static_cast<double>(config_.restart_unit));
    SearchResult r = search(limit);
    if (r == SearchResult::Restart) {
      ++stats_.restarts;
      if (budget_exhausted()) break;
      continue;
    }
    if (r == SearchResult::Sat) {
      model_ = assigns_;
      verify_model();
      status = SolveStatus::Sat;
    } else if (r == SearchResult::Unsat) {
      ok_ = false;
      status = SolveStatus::Unsat;
    }
    break;
  }
  cancel_until(0);
  return finish(status);
}

void Solver::verify_model() const {
  for (std::size_t i = 0; i < original_clauses_.size(); ++i)
    if (!clause_holds(original_clauses_[i], model_))
      throw SolverInvariantError("model violates clause #" + std::to_string(i));
  for (std::size_t i = 0; i < original_cards_.size(); ++i)
    if (!card_holds(original_cards_[i], model_))
      throw SolverInvariantError("model violates cardinality constraint #" + std::to_string(i));
}

// --- activity heap ------------------------------------------------------------

void Solver::heap_insert(Var v) {
  auto i = static_cast<std::size_t>(v);
  if (heap_index_[i] >= 0) return;
  heap_index_[i] = static_cast<std::int32_t>(heap_.size());
  heap_.push_back(v);
  heap_up(heap_.size() - 1);
}

void Solver::heap_up(std::size_t i) {
  Var x = heap_[i];
  while (i > 0) {
    std::size_t parent = (i - 1) >> 1;
    if (!heap_less(x, heap_[parent])) break;
    heap_[i] = heap_[parent];
    heap_index_[static_cast<std::size_t>(heap_[i])] = static_cast<std::int32_t>(i);
    i = parent;
  }
  heap_[i] = x;
  heap_index_[static_cast<std::size_t>(x)] = static_cast<std::int32_t>(i);
}

void Solver::heap_down(std::size_t i) {
  Var x = heap_[i];
  const std::size_t n = heap_.size();
  while (2 * i + 1 < n) {
    std::size_t child = 2 * i + 1;
    if (child + 1 < n && heap_less(heap_[child + 1], heap_[child])) ++child;
    if (!heap_less(heap_[child], x)) break;
    heap_[i] = heap_[child];
    heap_index_[static_cast<std::size_t>(heap_[i])] = static_cast<std::int32_t>(i);
    i = child;
  }
  heap_[i] = x;
  heap_index_[static_cast<std::size_t>(x)] = static_cast<std::int32_t>(i);
}

Var Solver::heap_pop() {
  Var top = heap_[0];
  heap_index_[static_cast<std::size_t>(top)] = -1;
  Var last = heap_.back();
  heap_.pop_back();
  if (!heap_.empty()) {
    heap_[0] = last;
    heap_index_[static_cast<std::size_t>(last)] = 0;
    heap_down(0);
  }
  return top;
}

}  // namespace eev
