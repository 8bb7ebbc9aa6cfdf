#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "small/dataset.hpp"
#include "small/model.hpp"

namespace small {

struct Literal {
  int variable = 0;
  bool negated = false;
};

/// A disjunction of conjunctions over named Boolean variables. Assignments
/// are signed vectors: +1 for true, -1 for false.
struct DnfFormula {
  std::vector<std::vector<Literal>> terms;
  int variable_count = 0;
  std::vector<std::string> variable_names;  // optional; size variable_count when present
};

inline void validate_dnf(const DnfFormula& f) {
  if (f.terms.empty()) throw std::invalid_argument("dnf: formula has no terms");
  if (f.variable_count < 1) throw std::invalid_argument("dnf: variable count must be >= 1");
  for (std::size_t t = 0; t < f.terms.size(); ++t) {
    if (f.terms[t].empty()) {
      std::ostringstream msg;
      msg << "dnf: term " << t + 1 << " is empty";
      throw std::invalid_argument(msg.str());
    }
    std::set<int> seen;
    for (const Literal& lit : f.terms[t]) {
      if (lit.variable < 0 || lit.variable >= f.variable_count) {
        std::ostringstream msg;
        msg << "dnf: variable index " << lit.variable << " outside [0, " << f.variable_count << ")";
        throw std::invalid_argument(msg.str());
      }
      if (!seen.insert(lit.variable).second) {
        std::ostringstream msg;
        msg << "dnf: duplicate variable in term " << t + 1;
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

/// Parses "A & !B | !C & D": terms separated by '|', literals by '&',
/// negation by a '!' prefix. Variables are indexed by first appearance.
inline DnfFormula parse_dnf(const std::string& text) {
  DnfFormula f;
  std::map<std::string, int> index_of;

  std::vector<std::string> term_strings;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find('|', start);
    term_strings.push_back(text.substr(start, pos == std::string::npos ? pos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }

  for (const std::string& ts : term_strings) {
    std::vector<Literal> term;
    std::size_t lit_start = 0;
    while (true) {
      std::size_t pos = ts.find('&', lit_start);
      std::string tok(detail::trim(ts.substr(lit_start, pos == std::string::npos ? pos : pos - lit_start)));
      Literal lit;
      if (!tok.empty() && tok.front() == '!') {
        lit.negated = true;
        tok = std::string(detail::trim(std::string_view(tok).substr(1)));
      }
      if (tok.empty()) throw std::invalid_argument("parse_dnf: empty variable name in '" + ts + "'");
      auto [it, inserted] = index_of.try_emplace(tok, static_cast<int>(index_of.size()));
      lit.variable = it->second;
      term.push_back(lit);
      if (pos == std::string::npos) break;
      lit_start = pos + 1;
    }
    f.terms.push_back(std::move(term));
  }

  f.variable_count = static_cast<int>(index_of.size());
  f.variable_names.resize(index_of.size());
  for (const auto& [name, idx] : index_of) f.variable_names[static_cast<std::size_t>(idx)] = name;
  validate_dnf(f);
  return f;
}

inline std::string format_dnf(const DnfFormula& f) {
  std::ostringstream out;
  for (std::size_t t = 0; t < f.terms.size(); ++t) {
    if (t) out << " | ";
    for (std::size_t l = 0; l < f.terms[t].size(); ++l) {
      if (l) out << " & ";
      const Literal& lit = f.terms[t][l];
      if (lit.negated) out << '!';
      if (!f.variable_names.empty())
        out << f.variable_names[static_cast<std::size_t>(lit.variable)];
      else
        out << 'v' << lit.variable;
    }
  }
  return out.str();
}

struct DnfEncoding {
  Matrix W;          // p x n, entries in {-1, 0, 1}, exactly k non-zeros per row
  int threshold = 0; // term j satisfied iff w_j . x >= threshold (= k)
};

/// Encodes a strict k-DNF (all terms the same size) as signed indicator
/// rows: +1 where the variable appears positive, -1 where negated, 0
/// elsewhere. Term j is satisfied exactly when w_j . x >= k on signed
/// assignments.
inline DnfEncoding encode_dnf(const DnfFormula& f) {
  validate_dnf(f);
  const std::size_t k = f.terms.front().size();
  for (const auto& term : f.terms)
    if (term.size() != k)
      throw std::invalid_argument("encode_dnf: all terms must have the same size (strict k-DNF)");

  DnfEncoding enc;
  enc.threshold = static_cast<int>(k);
  enc.W = Matrix::Zero(static_cast<Eigen::Index>(f.terms.size()), f.variable_count);
  for (std::size_t t = 0; t < f.terms.size(); ++t)
    for (const Literal& lit : f.terms[t])
      enc.W(static_cast<Eigen::Index>(t), lit.variable) = lit.negated ? -1.0 : 1.0;
  return enc;
}

/// Direct logical evaluation on a signed assignment (+1 true, -1 false).
inline bool dnf_satisfied(const DnfFormula& f, const Vector& assignment) {
  validate_dnf(f);
  if (assignment.size() != f.variable_count)
    throw std::invalid_argument("dnf_satisfied: assignment length mismatch");
  for (Eigen::Index i = 0; i < assignment.size(); ++i)
    if (assignment[i] != 1.0 && assignment[i] != -1.0)
      throw std::invalid_argument("dnf_satisfied: assignment entries must be -1 or +1");

  for (const auto& term : f.terms) {
    bool all = true;
    for (const Literal& lit : term) {
      const bool truth = assignment[lit.variable] == 1.0;
      if (truth == lit.negated) { all = false; break; }
    }
    if (all) return true;
  }
  return false;
}

/// Thresholded evaluation through the encoding; agrees with dnf_satisfied on
/// signed assignments (scores are exact small integers in doubles).
inline bool encoded_dnf_satisfied(const DnfEncoding& enc, const Vector& assignment) {
  return (enc.W * assignment).maxCoeff() >= static_cast<double>(enc.threshold);
}

struct RuleLine {
  std::string feature;
  double weight = 0.0;
};

struct RuleReport {
  std::vector<std::vector<RuleLine>> prototypes;  // sorted by |weight|, truncated
  std::vector<std::string> shared_features;       // names appearing in several supports
};

/// Reads the non-zero weights of each prototype back as named rules.
inline RuleReport extract_rules(const TrainedModel& model, int top) {
  RuleReport rep;
  std::map<std::string, int> appearances;
  for (Eigen::Index j = 0; j < model.W.rows(); ++j) {
    std::vector<RuleLine> lines;
    for (Eigen::Index l = 0; l < model.W.cols(); ++l) {
      if (model.W(j, l) != 0.0) {
        lines.push_back({model.feature_names[static_cast<std::size_t>(l)], model.W(j, l)});
        ++appearances[model.feature_names[static_cast<std::size_t>(l)]];
      }
    }
    std::stable_sort(lines.begin(), lines.end(), [](const RuleLine& a, const RuleLine& b) {
      return std::abs(a.weight) > std::abs(b.weight);
    });
    if (top >= 0 && static_cast<int>(lines.size()) > top) lines.resize(static_cast<std::size_t>(top));
    rep.prototypes.push_back(std::move(lines));
  }
  for (const auto& [name, count] : appearances)
    if (count > 1) rep.shared_features.push_back(name);
  return rep;
}

inline std::string rule_report_text(const RuleReport& rep) {
  std::ostringstream out;
  out.precision(6);
  for (std::size_t j = 0; j < rep.prototypes.size(); ++j) {
    out << "prototype " << j + 1 << ":\n";
    for (const RuleLine& line : rep.prototypes[j])
      out << "  " << line.feature << ": " << (line.weight >= 0 ? "+" : "") << line.weight << "\n";
  }
  if (!rep.shared_features.empty()) {
    out << "shared features:";
    for (const auto& name : rep.shared_features) out << ' ' << name;
    out << "\n";
  }
  return out.str();
}

}  // namespace small
