#include "loglens/syngen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "loglens/errors.hpp"
#include "loglens/rng.hpp"

namespace loglens {

namespace {

using json = nlohmann::ordered_json;

constexpr std::int64_t kEpochBase = 1'600'000'000;

// Verbs come in the pairs of the built-in replacement table so that noise
// injection has words to swap.
const char* const kVerbs[] = {
    "Start",    "Stop",     "Open",     "Close",    "Send",     "Receive", "Connect", "Disconnect", "Begin",
    "End",      "Enable",   "Disable",  "Lock",     "Unlock",   "Accept",  "Reject",  "Upload",     "Download",
    "Load",     "Unload",   "Read",     "Write",    "Allocate", "Release", "Create",  "Destroy",    "Add",
    "Remove",   "Push",     "Pull",     "Mount",    "Unmount",  "Attach",  "Detach",  "Grant",      "Revoke",
    "Resume",   "Suspend",  "Commit",   "Rollback", "Verify",   "Schedule", "Flush",  "Register",   "Scan",
    "Update",   "Sync",     "Validate", "Refresh",  "Replicate"};

const char* const kNouns[] = {"session", "block",   "packet",     "connection", "file",    "socket",  "lease",
                              "transaction", "job", "task",       "volume",     "channel", "checkpoint",
                              "container",   "node", "request",   "buffer",     "segment", "cache",   "replica"};

const char* const kPatterns[] = {"{V} {N} <*> from <*>", "{V} {N} <*> of size <*>", "{V} {N} <*> for {M} <*>",
                                 "{V} {N} completed in <*> ms", "PacketResponder <*> {V} {N} <*>"};

constexpr const char* kErrorTemplate = "Exception while serving {N} <*> error code <*>";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
  return s;
}

std::vector<std::string> make_templates(std::size_t n, Rng& rng) {
  std::vector<std::string> candidates;
  for (const char* p : kPatterns)
    for (const char* v : kVerbs)
      for (std::size_t ni = 0; ni < std::size(kNouns); ++ni) {
        std::string t = replace_all(p, "{V}", v);
        t = replace_all(t, "{N}", kNouns[ni]);
        t = replace_all(t, "{M}", kNouns[(ni + 7) % std::size(kNouns)]);
        candidates.push_back(std::move(t));
      }
  rng.shuffle(candidates);
  candidates.resize(n - 1);
  candidates.push_back(replace_all(kErrorTemplate, "{N}", kNouns[rng.below(std::size(kNouns))]));
  return candidates;
}

std::string render(const std::string& tmpl, Rng& rng) {
  std::string out;
  std::size_t pos = 0;
  for (std::size_t hit; (hit = tmpl.find("<*>", pos)) != std::string::npos; pos = hit + 3) {
    out.append(tmpl, pos, hit - pos);
    switch (rng.below(4)) {
      case 0:
        out += std::to_string(rng.below(100000));
        break;
      case 1:
        out += "blk_" + std::to_string(rng.below(1'000'000'000));
        break;
      case 2:
        out += "10." + std::to_string(rng.below(256)) + "." + std::to_string(rng.below(256)) + "." +
               std::to_string(rng.below(256)) + ":" + std::to_string(1024 + rng.below(60000));
        break;
      default: {
        static const char* hex = "0123456789abcdef";
        std::string h = "0x";
        for (int i = 0; i < 8; ++i) h += hex[rng.below(16)];
        out += h;
      }
    }
  }
  out.append(tmpl, pos);
  return out;
}

Automaton make_automaton(std::vector<std::string> templates, std::size_t branching, Rng& rng) {
  Automaton a;
  const std::size_t normal = templates.size() - 1;
  a.templates = std::move(templates);
  a.start = 0;
  a.error_state = normal;

  // A random cycle through every normal state keeps all of them reachable.
  std::vector<std::size_t> cycle(normal);
  std::iota(cycle.begin(), cycle.end(), 0);
  std::span<std::size_t> tail(cycle.data() + 1, cycle.size() - 1);
  rng.shuffle(tail);
  std::vector<std::size_t> cycle_next(normal);
  for (std::size_t i = 0; i < normal; ++i) cycle_next[cycle[i]] = cycle[(i + 1) % normal];

  for (std::size_t s = 0; s < normal; ++s) {
    std::set<std::size_t> succ{cycle_next[s]};
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(branching))),
                                                   normal > 1 ? normal - 1 : 1);
    while (succ.size() < want) {
      const std::size_t t = rng.below(normal);
      if (t != s) succ.insert(t);
    }
    std::vector<double> weights;
    for (std::size_t i = 0; i < succ.size(); ++i) weights.push_back(rng.uniform(0.2, 1.0));
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::size_t i = 0;
    for (auto t : succ) a.transitions.push_back({s, t, weights[i++] / total});
  }
  return a;
}

std::size_t step(const Automaton& a, std::size_t state, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = state;
  for (const auto& t : a.transitions) {
    if (t.from != state) continue;
    acc += t.probability;
    last = t.to;
    if (u < acc) return t.to;
  }
  return last;
}

std::size_t invalid_count(const Automaton& a, const std::vector<std::size_t>& s, std::size_t lo, std::size_t hi) {
  std::size_t bad = 0;
  for (std::size_t i = std::max<std::size_t>(lo, 1); i <= hi && i < s.size(); ++i) bad += !a.has_transition(s[i - 1], s[i]);
  return bad;
}

Mutation pick_mutation(const MutationMix& mix, Rng& rng) {
  const double total = mix.insert + mix.swap + mix.truncate;
  const double u = rng.uniform() * total;
  if (u < mix.insert) return Mutation::insert;
  if (u < mix.insert + mix.swap) return Mutation::swap;
  return Mutation::truncate;
}

void apply_mutation(Mutation& kind, std::vector<std::size_t>& s, const Automaton& a, std::size_t hint, Rng& rng) {
  if (kind == Mutation::swap) {
    std::vector<std::size_t> best;
    std::size_t best_bad = 0;
    for (std::size_t i = hint; i + 1 < s.size(); ++i) {
      if (s[i] == s[i + 1]) continue;
      std::swap(s[i], s[i + 1]);
      const std::size_t bad = invalid_count(a, s, i, i + 2);
      std::swap(s[i], s[i + 1]);
      if (bad > best_bad) {
        best_bad = bad;
        best.clear();
      }
      if (bad == best_bad && bad > 0) best.push_back(i);
    }
    if (best.empty()) {
      kind = Mutation::insert;  // every swap would still be a valid walk
    } else {
      const std::size_t i = best[rng.below(best.size())];
      std::swap(s[i], s[i + 1]);
      return;
    }
  }
  if (kind == Mutation::insert) {
    const std::size_t p = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(hint), static_cast<std::int64_t>(s.size())));
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(p), a.error_state);
    return;
  }
  const std::size_t len =
      static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(std::max<std::size_t>(1, hint / 2)), static_cast<std::int64_t>(hint - 1)));
  s.resize(len);
}

double number(const json& v, const std::string& p) {
  if (!v.is_number()) throw ConfigError(p + ": expected a number");
  return v.get<double>();
}

std::uint64_t count(const json& v, const std::string& p) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(p + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

std::string_view mutation_name(Mutation mutation) {
  switch (mutation) {
    case Mutation::none:
      return "none";
    case Mutation::insert:
      return "insert";
    case Mutation::swap:
      return "swap";
    case Mutation::truncate:
      return "truncate";
  }
  return "none";
}

void GeneratorSpec::validate() const {
  if (n_templates < 3) throw ConfigError("n_templates must be at least 3");
  if (n_templates > std::size(kPatterns) * std::size(kVerbs) * std::size(kNouns)) {
    throw ConfigError("n_templates exceeds the template bank");
  }
  if (!(anomaly_rate >= 0.0 && anomaly_rate < 1.0)) throw ConfigError("anomaly_rate must lie in [0, 1)");
  if (automaton_branching < 1) throw ConfigError("automaton_branching must be at least 1");
  if (window_hint < 2) throw ConfigError("window_hint must be at least 2");
  if (mean_length < 1) throw ConfigError("mean_length must be at least 1");
  if (mix.insert < 0 || mix.swap < 0 || mix.truncate < 0 || mix.insert + mix.swap + mix.truncate <= 0) {
    throw ConfigError("mutation mix weights must be nonnegative with a positive sum");
  }
}

GeneratorSpec GeneratorSpec::from_json(std::string_view json_text, const std::string& pointer) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError((pointer.empty() ? "/" : pointer) + ": expected an object");
  GeneratorSpec s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string p = pointer + "/" + k;
    const json& v = it.value();
    if (k == "n_templates") {
      s.n_templates = count(v, p);
    } else if (k == "n_sequences") {
      s.n_sequences = count(v, p);
    } else if (k == "anomaly_rate") {
      s.anomaly_rate = number(v, p);
    } else if (k == "mean_length") {
      s.mean_length = count(v, p);
    } else if (k == "automaton_branching") {
      s.automaton_branching = count(v, p);
    } else if (k == "seed") {
      s.seed = count(v, p);
    } else if (k == "window_hint") {
      s.window_hint = count(v, p);
    } else if (k == "mix") {
      if (!v.is_object()) throw ConfigError(p + ": expected an object");
      for (auto m = v.begin(); m != v.end(); ++m) {
        const std::string mp = p + "/" + m.key();
        if (m.key() == "insert") {
          s.mix.insert = number(m.value(), mp);
        } else if (m.key() == "swap") {
          s.mix.swap = number(m.value(), mp);
        } else if (m.key() == "truncate") {
          s.mix.truncate = number(m.value(), mp);
        } else {
          throw ConfigError(mp + ": unknown key");
        }
      }
    } else {
      throw ConfigError(p + ": unknown key");
    }
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError((pointer.empty() ? "/" : pointer) + ": " + e.what());
  }
  return s;
}

std::string GeneratorSpec::to_json() const {
  json j;
  j["n_templates"] = n_templates;
  j["n_sequences"] = n_sequences;
  j["anomaly_rate"] = anomaly_rate;
  j["mean_length"] = mean_length;
  j["automaton_branching"] = automaton_branching;
  j["seed"] = seed;
  j["window_hint"] = window_hint;
  j["mix"] = {{"insert", mix.insert}, {"swap", mix.swap}, {"truncate", mix.truncate}};
  return j.dump();
}

bool Automaton::has_transition(std::size_t from, std::size_t to) const {
  auto it = std::lower_bound(transitions.begin(), transitions.end(), std::pair{from, to},
                             [](const Transition& t, const std::pair<std::size_t, std::size_t>& key) {
                               return std::pair{t.from, t.to} < key;
                             });
  return it != transitions.end() && it->from == from && it->to == to;
}

bool Automaton::is_walk(const std::vector<std::size_t>& states) const {
  if (states.empty() || states.front() != start) return false;
  for (std::size_t i = 1; i < states.size(); ++i)
    if (!has_transition(states[i - 1], states[i])) return false;
  return true;
}

std::vector<std::size_t> Automaton::states_of(const std::vector<std::size_t>& events,
                                              const EventVocabulary& vocabulary) const {
  std::vector<std::size_t> out;
  out.reserve(events.size());
  for (auto e : events) {
    const auto it = e < vocabulary.size() ? std::find(templates.begin(), templates.end(), vocabulary.template_text(e))
                                          : templates.end();
    out.push_back(it == templates.end() ? SIZE_MAX : static_cast<std::size_t>(it - templates.begin()));
  }
  return out;
}

std::string Automaton::to_json() const {
  json j;
  j["states"] = templates.size();
  j["start"] = start;
  j["error_template_id"] = error_state;
  j["templates"] = templates;
  json ts = json::array();
  for (const auto& t : transitions) ts.push_back({{"from", t.from}, {"to", t.to}, {"probability", t.probability}});
  j["transitions"] = std::move(ts);
  return j.dump(2);
}

Automaton Automaton::from_json(std::string_view json_text) {
  try {
    const auto j = json::parse(json_text);
    Automaton a;
    a.templates = j.at("templates").get<std::vector<std::string>>();
    a.start = j.at("start").get<std::size_t>();
    a.error_state = j.at("error_template_id").get<std::size_t>();
    for (const auto& t : j.at("transitions"))
      a.transitions.push_back({t.at("from").get<std::size_t>(), t.at("to").get<std::size_t>(),
                               t.at("probability").get<double>()});
    std::sort(a.transitions.begin(), a.transitions.end(),
              [](const Transition& x, const Transition& y) { return std::pair{x.from, x.to} < std::pair{y.from, y.to}; });
    return a;
  } catch (const json::exception& e) {
    throw FormatError(std::string("automaton description: ") + e.what());
  }
}

GeneratedLog generate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  GeneratedLog out;
  out.automaton = make_automaton(make_templates(spec.n_templates, rng), spec.automaton_branching, rng);
  const Automaton& a = out.automaton;

  const std::size_t n = spec.n_sequences;
  const std::size_t lo = std::max(spec.window_hint + 2, spec.mean_length / 2);
  const std::size_t hi = std::max(lo, 2 * spec.mean_length > lo ? 2 * spec.mean_length - lo : lo);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const auto n_anomalous = static_cast<std::size_t>(std::llround(spec.anomaly_rate * static_cast<double>(n)));
  std::vector<bool> anomalous(n, false);
  for (std::size_t i = 0; i < n_anomalous; ++i) anomalous[order[i]] = true;

  out.sequences.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& seq = out.sequences[i];
    char id[32];
    std::snprintf(id, sizeof id, "seq_%06zu", i);
    seq.identifier = id;
    const auto len = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    seq.states.push_back(a.start);
    while (seq.states.size() < len) seq.states.push_back(step(a, seq.states.back(), rng));
    if (anomalous[i]) {
      seq.label = Label::anomaly;
      seq.mutation = pick_mutation(spec.mix, rng);
      apply_mutation(seq.mutation, seq.states, a, spec.window_hint, rng);
    }
  }

  // Sequences overlap in time so that identifier partitioning has to
  // untangle interleaved lines.
  struct Pending {
    std::int64_t timestamp;
    std::size_t seq, pos;
  };
  std::vector<Pending> pending;
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t t = kEpochBase + static_cast<std::int64_t>(3 * i + rng.below(3));
    for (std::size_t p = 0; p < out.sequences[i].states.size(); ++p) {
      pending.push_back({t, i, p});
      t += 1 + static_cast<std::int64_t>(rng.below(3));
    }
  }
  std::sort(pending.begin(), pending.end(), [](const Pending& x, const Pending& y) {
    return std::tie(x.timestamp, x.seq, x.pos) < std::tie(y.timestamp, y.seq, y.pos);
  });
  out.records.reserve(pending.size());
  for (std::size_t r = 0; r < pending.size(); ++r) {
    const auto& pe = pending[r];
    const auto& seq = out.sequences[pe.seq];
    const std::string& tmpl = a.templates[seq.states[pe.pos]];
    LogRecord rec;
    rec.line_no = r + 1;
    rec.timestamp = pe.timestamp;
    rec.identifier = seq.identifier;
    rec.content = render(tmpl, rng);
    rec.event_id = out.vocabulary.intern(tmpl);
    rec.label = seq.label;
    out.records.push_back(std::move(rec));
  }
  return out;
}

void write_generated(const GeneratedLog& log, const std::filesystem::path& csv_path) {
  write_parsed(csv_path, log.records, log.vocabulary);
  const std::string side = csv_path.string() + ".automaton.json";
  std::ofstream out(side);
  if (!out) throw IoError("cannot write " + side);
  out << log.automaton.to_json() << '\n';
}

}  // namespace loglens
