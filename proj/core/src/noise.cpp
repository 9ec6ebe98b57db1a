#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "builtin_synonyms.hpp"
#include "loglens/errors.hpp"
#include "loglens/eval.hpp"

namespace loglens {

namespace {

const char* const kFillers[] = {"now", "successfully", "again", "internal", "remote", "local", "pending", "async"};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
  return out;
}

std::string match_case(const std::string& like, std::string word) {
  if (!like.empty() && std::isupper(static_cast<unsigned char>(like[0])) && !word.empty()) {
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  }
  return word;
}

void run_bounds(std::size_t length, std::size_t lo, std::size_t hi, Rng& rng, std::size_t& start, std::size_t& run) {
  run = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  start = rng.below(length - run + 1);
}

}  // namespace

std::string_view strategy_name(NoiseStrategy strategy) {
  switch (strategy) {
    case NoiseStrategy::pseudo_event:
      return "pseudo_event";
    case NoiseStrategy::delete_run:
      return "delete";
    case NoiseStrategy::shuffle_run:
      return "shuffle";
    case NoiseStrategy::duplicate_run:
      return "duplicate";
  }
  return "pseudo_event";
}

NoiseStrategy parse_strategy(std::string_view name) {
  for (auto s : {NoiseStrategy::pseudo_event, NoiseStrategy::delete_run, NoiseStrategy::shuffle_run,
                 NoiseStrategy::duplicate_run})
    if (strategy_name(s) == name) return s;
  throw ConfigError("unknown noise strategy '" + std::string(name) + "'");
}

SynonymTable parse_synonyms(std::string_view tsv) {
  SynonymTable out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw FormatError("synonym table line " + std::to_string(line_no) + ": expected two tab-separated words");
    }
    out.emplace_back(lower(line.substr(0, tab)), lower(line.substr(tab + 1)));
  }
  return out;
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read synonym table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synonyms(ss.str());
}

const SynonymTable& builtin_synonyms() {
  static const SynonymTable table = parse_synonyms(detail::kBuiltinSynonymsTsv);
  return table;
}

std::string perturb_template(const std::string& text, const SynonymTable& synonyms, Rng& rng) {
  std::unordered_map<std::string, std::string> partner;
  for (const auto& [a, b] : synonyms) {
    partner.emplace(a, b);
    partner.emplace(b, a);
  }
  std::vector<std::string> tokens = split_ws(text);
  std::vector<std::size_t> replaceable, removable;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (partner.count(lower(tokens[i]))) replaceable.push_back(i);
    if (tokens[i] != "<*>") removable.push_back(i);
  }
  enum { add, remove, replace };
  std::vector<int> ops{add};
  if (removable.size() >= 2) ops.push_back(remove);
  if (!replaceable.empty()) ops.push_back(replace);

  switch (ops[rng.below(ops.size())]) {
    case replace: {
      const std::size_t i = replaceable[rng.below(replaceable.size())];
      tokens[i] = match_case(tokens[i], partner.at(lower(tokens[i])));
      break;
    }
    case remove:
      tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(removable[rng.below(removable.size())]));
      break;
    default: {
      const std::size_t at = rng.below(tokens.size() + 1);
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), kFillers[rng.below(std::size(kFillers))]);
    }
  }
  return join(tokens);
}

NoisyData inject_noise(const std::vector<EventSequence>& sequences, const NoiseSpec& spec,
                       const EventVocabulary& vocabulary) {
  if (!(spec.ratio >= 0.0)) throw ConfigError("noise ratio must be nonnegative");
  if (spec.strategies.empty()) throw ConfigError("noise injection needs at least one strategy");
  const bool only_pseudo = std::all_of(spec.strategies.begin(), spec.strategies.end(),
                                       [](NoiseStrategy s) { return s == NoiseStrategy::pseudo_event; });
  if (only_pseudo && spec.synonyms.empty()) {
    throw ConfigError("pseudo_event as the only strategy needs a non-empty synonym table");
  }

  NoisyData out;
  out.sequences = sequences;
  out.vocabulary = vocabulary;
  const auto count = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(sequences.size())));
  if (sequences.empty() || count == 0) return out;

  Rng rng(spec.seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& source = sequences[rng.below(sequences.size())];
    EventSequence copy = source;
    copy.origin = source.origin + "#noise" + std::to_string(i);
    auto& ev = copy.events;
    NoiseStrategy strategy = spec.strategies[rng.below(spec.strategies.size())];
    if ((strategy == NoiseStrategy::delete_run || strategy == NoiseStrategy::shuffle_run) && ev.size() < 2) {
      strategy = NoiseStrategy::duplicate_run;
    }
    std::size_t start = 0, run = 0;
    switch (strategy) {
      case NoiseStrategy::pseudo_event: {
        const std::size_t j = rng.below(ev.size());
        const std::string base = ev[j] < out.vocabulary.size() ? out.vocabulary.template_text(ev[j]) : "event";
        std::string text = perturb_template(base, spec.synonyms, rng);
        for (int tries = 0; tries < 8 && vocabulary.find(text); ++tries) text = perturb_template(text, spec.synonyms, rng);
        while (vocabulary.find(text)) text += std::string(" ") + kFillers[rng.below(std::size(kFillers))];
        ev[j] = out.vocabulary.intern(text);
        break;
      }
      case NoiseStrategy::delete_run:
        run_bounds(ev.size(), 1, std::min<std::size_t>(3, ev.size() - 1), rng, start, run);
        ev.erase(ev.begin() + static_cast<std::ptrdiff_t>(start), ev.begin() + static_cast<std::ptrdiff_t>(start + run));
        break;
      case NoiseStrategy::shuffle_run: {
        run_bounds(ev.size(), 2, std::min<std::size_t>(3, ev.size()), rng, start, run);
        std::span<std::size_t> part(ev.data() + start, run);
        const std::vector<std::size_t> before(part.begin(), part.end());
        rng.shuffle(part);
        if (std::equal(part.begin(), part.end(), before.begin())) std::rotate(part.begin(), part.begin() + 1, part.end());
        break;
      }
      case NoiseStrategy::duplicate_run: {
        run_bounds(ev.size(), 1, std::min<std::size_t>(3, ev.size()), rng, start, run);
        const std::vector<std::size_t> piece(ev.begin() + static_cast<std::ptrdiff_t>(start),
                                             ev.begin() + static_cast<std::ptrdiff_t>(start + run));
        ev.insert(ev.begin() + static_cast<std::ptrdiff_t>(start + run), piece.begin(), piece.end());
        break;
      }
    }
    out.sequences.push_back(std::move(copy));
  }
  out.injected = count;
  return out;
}

}  // namespace loglens
