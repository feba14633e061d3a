#pragma once

#include <algorithm>
#include <cmath>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

// ---------------------------------------------------------------------------
// Brute-force oracles. These re-implement the stated formulas from scratch,
// including their own tokenizer, and never touch the library's index
// structures. Sums run in sorted token order, like the implementation, so
// scores are comparable bit for bit.
// ---------------------------------------------------------------------------
namespace oracle {

std::vector<std::string> tokenize(const std::string& input) {
  std::vector<std::string> runs;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) runs.push_back(cur), cur.clear();
  };
  for (char c : input) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      cur += c;
    else
      flush();
  }
  flush();
  std::vector<std::string> out;
  for (const auto& run : runs) {
    std::vector<std::string> pieces;
    std::string piece;
    for (std::size_t i = 0; i < run.size(); ++i) {
      if (i > 0 && std::islower(static_cast<unsigned char>(run[i - 1])) &&
          std::isupper(static_cast<unsigned char>(run[i]))) {
        pieces.push_back(piece);
        piece.clear();
      }
      piece += run[i];
    }
    pieces.push_back(piece);
    for (auto& p : pieces) {
      if (p.size() < 2) continue;
      for (auto& ch : p) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      out.push_back(p);
    }
  }
  return out;
}

using Tf = std::map<std::string, int>;

Tf counts(const std::vector<std::string>& toks) {
  Tf tf;
  for (const auto& t : toks) ++tf[t];
  return tf;
}

// Cosine similarity of tf-idf vectors, computed pairwise from raw counts.
double cosine(const std::vector<std::string>& query_toks,
              const std::vector<std::string>& doc_toks,
              const std::vector<std::vector<std::string>>& all_docs) {
  const double n = static_cast<double>(all_docs.size());
  std::map<std::string, int> df;
  for (const auto& d : all_docs) {
    std::set<std::string> uniq(d.begin(), d.end());
    for (const auto& t : uniq) ++df[t];
  }
  auto idf = [&](const std::string& t) {
    const auto it = df.find(t);
    return std::log((n + 1.0) / ((it == df.end() ? 0 : it->second) + 1.0)) + 1.0;
  };
  const Tf qtf = counts(query_toks);
  const Tf dtf = counts(doc_toks);
  double qnorm = 0.0, dnorm = 0.0, dotp = 0.0;
  for (const auto& [t, c] : qtf) {
    const double w = c * idf(t);
    qnorm += w * w;
  }
  for (const auto& [t, c] : dtf) {
    const double w = c * idf(t);
    dnorm += w * w;
  }
  for (const auto& [t, c] : qtf) {
    const auto it = dtf.find(t);
    if (it == dtf.end()) continue;
    dotp += (c * idf(t) / std::sqrt(qnorm)) * (it->second * idf(t) / std::sqrt(dnorm));
  }
  if (qnorm == 0.0 || dnorm == 0.0) return 0.0;
  return dotp;
}

double bm25(const std::vector<std::string>& doc_toks, const std::vector<std::string>& query_toks,
            const std::vector<std::vector<std::string>>& all_docs) {
  const double n = static_cast<double>(all_docs.size());
  std::map<std::string, int> df;
  double total = 0.0;
  for (const auto& d : all_docs) {
    total += static_cast<double>(d.size());
    std::set<std::string> uniq(d.begin(), d.end());
    for (const auto& t : uniq) ++df[t];
  }
  const double avgdl = all_docs.empty() ? 0.0 : total / n;
  const double k1 = 1.5, b = 0.75;
  const Tf dtf = counts(doc_toks);
  const std::set<std::string> q(query_toks.begin(), query_toks.end());
  double score = 0.0;
  for (const auto& t : q) {
    const auto it = dtf.find(t);
    if (it == dtf.end()) continue;
    const int d = df.count(t) ? df[t] : 0;
    const double idf = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    const double f = it->second;
    const double dl = static_cast<double>(doc_toks.size());
    score += idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * (avgdl > 0.0 ? dl / avgdl : 0.0)));
  }
  return score;
}

}  // namespace oracle
