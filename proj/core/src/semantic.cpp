#include "loglens/semantic.hpp"

#include <cmath>
#include <set>

#include "loglens/errors.hpp"
#include "loglens/rng.hpp"

namespace loglens {

SemanticEncoder SemanticEncoder::build(const EventVocabulary& vocabulary, std::size_t dim, std::uint64_t seed,
                                       bool tfidf) {
  if (dim == 0) throw ConfigError("semantic dimension must be at least 1");
  SemanticEncoder enc;
  enc.dim_ = dim;
  enc.seed_ = seed;
  enc.tfidf_ = tfidf;
  enc.document_count_ = vocabulary.size();
  for (const auto& t : vocabulary.templates()) {
    const auto words = tokenize_template(t);
    for (const auto& w : std::set<std::string>(words.begin(), words.end())) ++enc.document_frequency_[w];
  }
  return enc.extended(vocabulary);
}

std::vector<double> SemanticEncoder::word_vector(const std::string& word) const {
  Rng rng(derive_seed(seed_, fnv1a(word)));
  std::vector<double> v(dim_);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double SemanticEncoder::idf(const std::string& word) const {
  auto it = document_frequency_.find(word);
  const double df = it == document_frequency_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((static_cast<double>(document_count_) + 1.0) / (df + 1.0)) + 1.0;
}

std::vector<double> SemanticEncoder::template_vector(std::string_view text) const {
  std::vector<double> out(dim_, 0.0);
  const auto words = tokenize_template(text);
  if (words.empty()) return out;
  double total = 0.0;
  for (const auto& w : words) {
    const double weight = tfidf_ ? idf(w) : 1.0;
    const auto v = word_vector(w);
    for (std::size_t i = 0; i < dim_; ++i) out[i] += weight * v[i];
    total += weight;
  }
  for (auto& x : out) x /= total;
  return out;
}

Tensor SemanticEncoder::table() const {
  std::vector<double> data;
  data.reserve(rows_.size() * dim_);
  for (const auto& r : rows_) data.insert(data.end(), r.begin(), r.end());
  return Tensor::from({rows_.size(), dim_}, std::move(data));
}

SemanticEncoder SemanticEncoder::extended(const EventVocabulary& vocabulary) const {
  SemanticEncoder out = *this;
  out.rows_.clear();
  out.rows_.reserve(vocabulary.size() + 1);
  for (const auto& t : vocabulary.templates()) out.rows_.push_back(template_vector(t));
  out.rows_.emplace_back(dim_, 0.0);
  return out;
}

bool SemanticEncoder::operator==(const SemanticEncoder& other) const {
  return dim_ == other.dim_ && seed_ == other.seed_ && tfidf_ == other.tfidf_ && rows_ == other.rows_;
}

}  // namespace loglens
