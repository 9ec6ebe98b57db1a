#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "loglens/log_ingest.hpp"
#include "loglens/tensor.hpp"

namespace loglens {

/// Fixed template vectors built from randomly initialized word vectors.
///
/// A word's vector is drawn uniformly from [-1, 1]^dim by a generator seeded
/// with (seed, hash(word)), so any word, including one first met after
/// training, gets the same vector in every run. A template vector is the mean
/// of its words' vectors, or the IDF-weighted mean when `tfidf` is set (IDF
/// frozen from the vocabulary given to build). Templates without words and the
/// unknown row map to zero.
class SemanticEncoder {
 public:
  SemanticEncoder() = default;
  /// Throws ConfigError when dim is zero.
  static SemanticEncoder build(const EventVocabulary& vocabulary, std::size_t dim, std::uint64_t seed,
                               bool tfidf = false);

  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  bool tfidf() const { return tfidf_; }
  std::size_t vocab_size() const { return rows_.empty() ? 0 : rows_.size() - 1; }

  std::vector<double> word_vector(const std::string& word) const;
  std::vector<double> template_vector(std::string_view text) const;

  /// [(n+1) x dim] lookup table with the zero unknown row last.
  Tensor table() const;
  /// Same word vectors and IDF, with rows for every template of `vocabulary`.
  SemanticEncoder extended(const EventVocabulary& vocabulary) const;

  bool operator==(const SemanticEncoder& other) const;

 private:
  double idf(const std::string& word) const;

  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  bool tfidf_ = false;
  std::size_t document_count_ = 0;
  std::unordered_map<std::string, std::size_t> document_frequency_;
  std::vector<std::vector<double>> rows_;
};

inline SemanticEncoder build_semantic_encoder(const EventVocabulary& vocabulary, std::size_t dim,
                                              std::uint64_t seed, bool tfidf = false) {
  return SemanticEncoder::build(vocabulary, dim, seed, tfidf);
}

}  // namespace loglens
