#pragma once

// Premise selection: TF-IDF vectors over premise statements, k-nearest-
// neighbor candidate selection by cosine similarity, and Okapi BM25
// reranking of the candidates against the theorem statement.
//
// Formulas, pinned so tests can check them against brute-force oracles:
//   idf(t)      = ln((N + 1) / (df(t) + 1)) + 1          (tf-idf, smoothed)
//   weight(t,d) = tf(t,d) * idf(t), vectors L2-normalized
//   bm25 idf(t) = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))   (never negative)
//   bm25(d,q)   = sum over unique q tokens of
//                 idf(t) * tf(t,d)*(k1+1) / (tf(t,d) + k1*(1 - b + b*|d|/avgdl))
//   k1 = 1.5, b = 0.75
//
// All score sums run in sorted token order so equal inputs produce
// bit-identical doubles on every platform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "palm/text.hpp"

namespace palm::retrieval {

constexpr double kBm25K1 = 1.5;
constexpr double kBm25B = 0.75;

// Split on non-alphanumerics, then on lower-to-upper camel-case boundaries;
// lowercase everything and drop tokens shorter than two characters.
inline std::vector<std::string> tokenize(std::string_view input) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : input) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);

  std::vector<std::string> out;
  for (const std::string& w : words) {
    std::string piece;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool boundary = i > 0 && std::islower(static_cast<unsigned char>(w[i - 1])) &&
                            std::isupper(static_cast<unsigned char>(w[i]));
      if (boundary && !piece.empty()) {
        if (piece.size() >= 2) out.push_back(text::lower(piece));
        piece.clear();
      }
      piece += w[i];
    }
    if (piece.size() >= 2) out.push_back(text::lower(piece));
  }
  return out;
}

struct PremiseDoc {
  std::string name;
  std::string statement;
  enum class Kind { Theorem, Definition, Inductive, Other } kind = Kind::Other;
  std::vector<std::string> tokens;                 // cached tokenize(statement)
  std::optional<std::string> proof;                // ground truth, when the corpus has one
};

inline PremiseDoc::Kind kind_from_string(std::string_view s) {
  if (s == "Theorem" || s == "Lemma") return PremiseDoc::Kind::Theorem;
  if (s == "Definition") return PremiseDoc::Kind::Definition;
  if (s == "Inductive") return PremiseDoc::Kind::Inductive;
  return PremiseDoc::Kind::Other;
}

struct DuplicateName : std::runtime_error {
  explicit DuplicateName(const std::string& name)
      : std::runtime_error("duplicate premise name: " + name) {}
};

using SparseVector = std::map<std::string, double>;  // ordered: deterministic sums

struct Corpus {
  std::vector<PremiseDoc> docs;
  std::map<std::string, int> df;
  std::vector<SparseVector> vectors;  // L2-normalized tf-idf, parallel to docs
  std::map<std::string, std::size_t> by_name;

  std::size_t size() const { return docs.size(); }

  double idf(const std::string& token) const {
    const auto it = df.find(token);
    const int d = it == df.end() ? 0 : it->second;
    return std::log((static_cast<double>(size()) + 1.0) / (d + 1.0)) + 1.0;
  }
};

namespace detail {

inline std::map<std::string, int> term_counts(const std::vector<std::string>& tokens) {
  std::map<std::string, int> tf;
  for (const std::string& t : tokens) ++tf[t];
  return tf;
}

inline SparseVector tfidf_vector(const std::vector<std::string>& tokens, const Corpus& corpus) {
  SparseVector v;
  for (const auto& [tok, count] : term_counts(tokens)) {
    v[tok] = count * corpus.idf(tok);
  }
  double norm_sq = 0.0;
  for (const auto& [tok, w] : v) norm_sq += w * w;
  const double norm = std::sqrt(norm_sq);
  if (norm > 0.0) {
    for (auto& [tok, w] : v) w /= norm;
  }
  return v;
}

// Always iterates the first argument (the query) in token order, so a given
// query yields bit-identical sums no matter the document.
inline double dot(const SparseVector& query, const SparseVector& doc) {
  double sum = 0.0;
  for (const auto& [tok, w] : query) {
    const auto it = doc.find(tok);
    if (it != doc.end()) sum += w * it->second;
  }
  return sum;
}

}  // namespace detail

inline Corpus build_index(std::vector<PremiseDoc> docs) {
  Corpus corpus;
  corpus.docs = std::move(docs);
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    PremiseDoc& d = corpus.docs[i];
    if (!corpus.by_name.emplace(d.name, i).second) throw DuplicateName(d.name);
    if (d.tokens.empty()) d.tokens = tokenize(d.statement);
    std::set<std::string> uniq(d.tokens.begin(), d.tokens.end());
    for (const std::string& t : uniq) ++corpus.df[t];
  }
  corpus.vectors.reserve(corpus.docs.size());
  for (const PremiseDoc& d : corpus.docs) {
    corpus.vectors.push_back(detail::tfidf_vector(d.tokens, corpus));
  }
  return corpus;
}

struct RankedPremise {
  PremiseDoc doc;
  double knn_score = 0.0;   // cosine similarity, in [0, 1]
  double bm25_score = 0.0;
};

inline std::vector<RankedPremise> knn_premises(const Corpus& corpus, std::string_view statement,
                                               std::size_t k) {
  std::vector<RankedPremise> ranked;
  if (k == 0 || corpus.size() == 0) return ranked;
  const SparseVector query = detail::tfidf_vector(tokenize(statement), corpus);
  ranked.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    RankedPremise r;
    r.doc = corpus.docs[i];
    r.knn_score = detail::dot(query, corpus.vectors[i]);
    ranked.push_back(std::move(r));
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedPremise& a, const RankedPremise& b) {
    if (a.knn_score != b.knn_score) return a.knn_score > b.knn_score;
    return a.doc.name < b.doc.name;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

namespace detail {

struct Bm25Stats {
  std::map<std::string, int> df;
  double avgdl = 0.0;
  std::size_t n = 0;

  double idf(const std::string& token) const {
    const auto it = df.find(token);
    const int d = it == df.end() ? 0 : it->second;
    return std::log(1.0 + (static_cast<double>(n) - d + 0.5) / (d + 0.5));
  }
};

inline Bm25Stats bm25_stats(const std::vector<std::vector<std::string>>& docs) {
  Bm25Stats stats;
  stats.n = docs.size();
  double total_len = 0.0;
  for (const auto& tokens : docs) {
    total_len += static_cast<double>(tokens.size());
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    for (const std::string& t : uniq) ++stats.df[t];
  }
  stats.avgdl = stats.n == 0 ? 0.0 : total_len / static_cast<double>(stats.n);
  return stats;
}

inline double bm25_score(const std::vector<std::string>& doc_tokens,
                         const std::set<std::string>& query_tokens, const Bm25Stats& stats) {
  const auto tf = term_counts(doc_tokens);
  const double dl = static_cast<double>(doc_tokens.size());
  const double len_factor = stats.avgdl > 0.0 ? dl / stats.avgdl : 0.0;
  double score = 0.0;
  for (const std::string& t : query_tokens) {  // std::set: sorted, deterministic
    const auto it = tf.find(t);
    if (it == tf.end()) continue;
    const double f = it->second;
    score += stats.idf(t) * (f * (kBm25K1 + 1.0)) /
             (f + kBm25K1 * (1.0 - kBm25B + kBm25B * len_factor));
  }
  return score;
}

}  // namespace detail

// Rerank KNN candidates by BM25 against the query; document statistics come
// from the candidate set itself. Ties fall back to knn score, then name.
inline std::vector<RankedPremise> bm25_rerank(std::vector<RankedPremise> candidates,
                                              std::string_view query) {
  for (auto& c : candidates) {
    if (c.doc.tokens.empty()) c.doc.tokens = tokenize(c.doc.statement);
  }
  std::vector<std::vector<std::string>> docs;
  docs.reserve(candidates.size());
  for (const auto& c : candidates) docs.push_back(c.doc.tokens);
  const auto stats = detail::bm25_stats(docs);
  const auto qtokens = tokenize(query);
  const std::set<std::string> qset(qtokens.begin(), qtokens.end());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].bm25_score = detail::bm25_score(docs[i], qset, stats);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RankedPremise& a, const RankedPremise& b) {
                     if (a.bm25_score != b.bm25_score) return a.bm25_score > b.bm25_score;
                     if (a.knn_score != b.knn_score) return a.knn_score > b.knn_score;
                     return a.doc.name < b.doc.name;
                   });
  return candidates;
}

// Rank identifier candidates by BM25 similarity of their tokenized names to
// the tokenized bad name; used by reference replacement.
inline std::vector<std::string> rank_names(const std::vector<std::string>& candidates,
                                           std::string_view bad) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(candidates.size());
  for (const auto& c : candidates) docs.push_back(tokenize(c));
  const auto stats = detail::bm25_stats(docs);
  const auto qtokens = tokenize(bad);
  const std::set<std::string> qset(qtokens.begin(), qtokens.end());
  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scored.emplace_back(detail::bm25_score(docs[i], qset, stats), candidates[i]);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (auto& [score, name] : scored) out.push_back(std::move(name));
  return out;
}

// KNN over theorems with known proofs: the nearest proved theorems vote for
// the premises their proofs mention. Behind a flag because it needs ground
// truth in the corpus.
inline std::vector<RankedPremise> knn_premises_by_proof_usage(const Corpus& corpus,
                                                              std::string_view statement,
                                                              std::size_t k) {
  std::vector<RankedPremise> out;
  if (k == 0 || corpus.size() == 0) return out;
  const SparseVector query = detail::tfidf_vector(tokenize(statement), corpus);
  std::vector<std::pair<double, std::size_t>> proved;  // similarity, doc index
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus.docs[i].proof) continue;
    proved.emplace_back(detail::dot(query, corpus.vectors[i]), i);
  }
  std::stable_sort(proved.begin(), proved.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return corpus.docs[a.second].name < corpus.docs[b.second].name;
  });
  std::set<std::string> seen;
  for (const auto& [sim, idx] : proved) {
    if (out.size() >= k) break;
    // Premise names are matched verbatim against words of the proof text.
    for (const std::string& word : text::split_ws(*corpus.docs[idx].proof)) {
      std::string w = word;
      while (!w.empty() && (w.back() == '.' || w.back() == ';' || w.back() == ',')) w.pop_back();
      const auto hit = corpus.by_name.find(w);
      if (hit == corpus.by_name.end()) continue;
      if (hit->second == idx) continue;
      if (!seen.insert(w).second) continue;
      RankedPremise r;
      r.doc = corpus.docs[hit->second];
      r.knn_score = sim;
      out.push_back(std::move(r));
      if (out.size() >= k) break;
    }
  }
  return out;
}

// Corpus file: one JSON object per line, {"name", "kind", "statement"[, "proof"]}.
inline std::vector<PremiseDoc> load_premises(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open premise corpus: " + path);
  std::vector<PremiseDoc> docs;
  std::set<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    PremiseDoc d;
    d.name = j.at("name").get<std::string>();
    d.statement = j.at("statement").get<std::string>();
    d.kind = kind_from_string(j.value("kind", "Other"));
    if (j.contains("proof")) d.proof = j["proof"].get<std::string>();
    if (!names.insert(d.name).second) throw DuplicateName(d.name);
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace palm::retrieval
