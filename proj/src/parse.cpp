#include "dstconf/parse.hpp"

#include "dstconf/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace dstconf {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_state_key(const std::string& key, const std::string& domain) {
  static const char* aliases[] = {"state", "belief state", "belief_state", "beliefstate",
                                  "slots", "values"};
  for (const char* a : aliases) {
    if (key == a) return true;
  }
  return !domain.empty() && key == lower(domain);
}

bool is_conf_key(const std::string& key) {
  return key == "conf" || key == "confidence" || key == "confidences" || key == "conf_score";
}

bool is_none_value(const std::string& normalized) {
  static const char* nones[] = {"", "none", "null", "unknown", "not mentioned", "?", "n/a"};
  for (const char* n : nones) {
    if (normalized == n) return true;
  }
  return false;
}

/// Full-string numeric parse with percent support; nullopt when not a number.
std::optional<double> parse_number(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  bool percent = false;
  if (t.back() == '%') {
    percent = true;
    t = trim(t.substr(0, t.size() - 1));
    if (t.empty()) return std::nullopt;
  }
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return percent ? v / 100.0 : v;
}

/**
 * Recursive-descent reader over the first balanced-brace object. Treats end
 * of text as an implicit close so truncated generations still yield their
 * complete pairs.
 */
class LenientReader {
public:
  LenientReader(const std::string& text, std::size_t pos, const std::string& domain)
      : text_(text), pos_(pos), domain_(lower(domain)) {}

  struct RawPair {
    std::string key;                    // bare, lowercased
    std::string value;                  // raw scalar text
    std::optional<double> conf;         // attached per-pair confidence
  };

  std::vector<RawPair> pairs;
  std::map<std::string, double> conf_by_slot;
  std::optional<double> global_conf;
  std::vector<std::string> warnings;

  void run() {
    expect('{');
    read_object(/*in_state=*/false);
    if (truncated_) warnings.push_back("object not closed; read to end of text");
  }

private:
  const std::string& text_;
  std::size_t pos_;
  std::string domain_;
  bool truncated_ = false;

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void expect(char c) {
    if (!eof() && peek() == c) ++pos_;
  }

  void skip_ws_and_commas() {
    while (!eof() && (std::isspace(static_cast<unsigned char>(peek())) || peek() == ',')) ++pos_;
  }

  std::string read_quoted(char quote) {
    ++pos_;  // opening quote
    std::string out;
    while (!eof() && peek() != quote) {
      if (peek() == '\\' && pos_ + 1 < text_.size()) ++pos_;
      out += text_[pos_++];
    }
    if (eof()) truncated_ = true;
    expect(quote);
    return out;
  }

  /// Scalar text up to ',', '}' or '{' at this level; quoted runs pass
  /// through so values may contain those characters.
  std::string read_bare(bool stop_at_colon) {
    std::string out;
    while (!eof()) {
      char c = peek();
      if (c == ',' || c == '}' || c == '{') break;
      if (stop_at_colon && c == ':') break;
      if (c == '\'' || c == '"') {
        out += read_quoted(c);
        continue;
      }
      out += c;
      ++pos_;
    }
    return out;
  }

  void skip_balanced_object() {
    // pos_ is at '{'
    int depth = 0;
    while (!eof()) {
      char c = peek();
      if (c == '\'' || c == '"') {
        read_quoted(c);
        continue;
      }
      ++pos_;
      if (c == '{') ++depth;
      if (c == '}' && --depth == 0) return;
    }
    truncated_ = true;
  }

  /// After read_key(): when no ':' follows, consume whatever blocks progress
  /// and tell the caller to continue its loop.
  bool handle_stray(const std::string& key, const char* where) {
    if (!eof() && peek() == ':') return false;
    if (!key.empty()) {
      warnings.push_back("ignored stray token '" + key + "'" + where);
    }
    if (!eof() && peek() == '{') {
      skip_balanced_object();
    }
    return true;
  }

  void attach_conf(double value, int last_pair_in_object) {
    double clamped = std::clamp(value, 0.0, 1.0);
    if (clamped != value) {
      warnings.push_back("confidence " + std::to_string(value) + " clamped to [0,1]");
    }
    if (last_pair_in_object >= 0) {
      pairs[static_cast<std::size_t>(last_pair_in_object)].conf = clamped;
    } else {
      global_conf = clamped;
    }
  }

  /// {slot: conf, ...} confidence map.
  void read_conf_object() {
    expect('{');
    while (true) {
      skip_ws_and_commas();
      if (eof()) {
        truncated_ = true;
        return;
      }
      if (peek() == '}') {
        ++pos_;
        return;
      }
      std::string key = read_key();
      if (handle_stray(key, " in confidence object")) continue;
      ++pos_;  // ':'
      skip_ws_and_commas();
      if (!eof() && peek() == '{') {
        warnings.push_back("ignored nested object under confidence key '" + key + "'");
        skip_balanced_object();
        continue;
      }
      std::string scalar = trim(read_bare(/*stop_at_colon=*/false));
      if (auto num = parse_number(scalar)) {
        double clamped = std::clamp(*num, 0.0, 1.0);
        if (clamped != *num) {
          warnings.push_back("confidence " + scalar + " clamped to [0,1]");
        }
        conf_by_slot[key] = clamped;
      } else {
        warnings.push_back("non-numeric confidence '" + scalar + "' for '" + key + "'");
      }
    }
  }

  /// {value: ..., conf: ...} object standing in for a plain scalar value.
  void read_value_object(const std::string& slot_key) {
    expect('{');
    std::optional<std::string> value;
    std::optional<double> conf;
    while (true) {
      skip_ws_and_commas();
      if (eof()) {
        truncated_ = true;
        break;
      }
      if (peek() == '}') {
        ++pos_;
        break;
      }
      std::string key = read_key();
      if (handle_stray(key, " in value object")) continue;
      ++pos_;
      skip_ws_and_commas();
      if (!eof() && peek() == '{') {
        warnings.push_back("ignored nested object inside value object for '" + slot_key + "'");
        skip_balanced_object();
        continue;
      }
      std::string scalar = trim(read_bare(/*stop_at_colon=*/false));
      if (key == "value" || key == "val") {
        value = scalar;
      } else if (is_conf_key(key)) {
        if (auto num = parse_number(scalar)) {
          conf = std::clamp(*num, 0.0, 1.0);
          if (conf != *num) {
            warnings.push_back("confidence " + scalar + " clamped to [0,1]");
          }
        } else {
          warnings.push_back("non-numeric confidence '" + scalar + "' for '" + slot_key + "'");
        }
      } else {
        warnings.push_back("ignored key '" + key + "' in value object for '" + slot_key + "'");
      }
    }
    if (value) {
      pairs.push_back({slot_key, *value, conf});
    } else {
      warnings.push_back("value object for '" + slot_key + "' has no value field");
    }
  }

  std::string read_key() {
    skip_ws_and_commas();
    if (eof()) return {};
    char c = peek();
    std::string key;
    if (c == '\'' || c == '"') {
      key = read_quoted(c);
      // Whitespace between the closing quote and ':' is tolerated.
      while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    } else {
      key = read_bare(/*stop_at_colon=*/true);
    }
    return lower(trim(key));
  }

  void read_object(bool in_state) {
    int last_pair_in_object = -1;
    while (true) {
      skip_ws_and_commas();
      if (eof()) {
        truncated_ = true;
        return;
      }
      if (peek() == '}') {
        ++pos_;
        return;
      }
      std::string key = read_key();
      if (handle_stray(key, "")) continue;
      ++pos_;  // ':'
      skip_ws_and_commas();

      if (!eof() && peek() == '{') {
        if (is_conf_key(key)) {
          read_conf_object();
        } else if (!in_state && is_state_key(key, domain_)) {
          expect('{');
          read_object(/*in_state=*/true);
        } else if (in_state && !key.empty()) {
          read_value_object(key);
          last_pair_in_object = static_cast<int>(pairs.size()) - 1;
        } else {
          warnings.push_back("ignored nested object under key '" + key + "'");
          skip_balanced_object();
        }
        continue;
      }

      std::string scalar = trim(read_bare(/*stop_at_colon=*/false));
      if (is_conf_key(key)) {
        if (auto num = parse_number(scalar)) {
          attach_conf(*num, last_pair_in_object);
        } else {
          warnings.push_back("non-numeric confidence '" + scalar + "'");
        }
        continue;
      }
      if (key.empty()) {
        warnings.push_back("ignored value '" + scalar + "' with empty key");
        continue;
      }
      pairs.push_back({key, scalar, std::nullopt});
      last_pair_in_object = static_cast<int>(pairs.size()) - 1;
    }
  }
};

}  // namespace

ParsedPrediction parse_belief_output(const std::string& raw, const Schema& schema,
                                     const std::string& domain) {
  const std::size_t open = raw.find('{');
  if (open == std::string::npos) {
    throw ParseError("no brace-delimited object in model output");
  }

  LenientReader reader(raw, open, domain);
  reader.run();

  ParsedPrediction out;
  out.warnings = std::move(reader.warnings);
  const std::string domain_lc = lower(domain);

  for (auto& rp : reader.pairs) {
    std::string bare = rp.key;
    // A model may echo the fully qualified "domain-slot" key.
    if (bare.rfind(domain_lc + "-", 0) == 0) {
      bare = bare.substr(domain_lc.size() + 1);
    }
    std::optional<SlotRef> ref;
    try {
      ref.emplace(domain_lc, bare);
    } catch (const InvalidInputError&) {
      // Key is not even slot-shaped (spaces, empty); treat like unknown.
    }
    if (!ref || !schema.has_slot(*ref)) {
      out.warnings.push_back("dropped pair with unknown slot '" + bare + "' in domain '" +
                             domain_lc + "'");
      continue;
    }
    std::string value = normalize_value(rp.value);
    if (is_none_value(value)) {
      out.warnings.push_back("dropped none-like value for slot '" + bare + "'");
      continue;
    }
    std::optional<double> conf = rp.conf;
    if (!conf) {
      auto it = reader.conf_by_slot.find(bare);
      if (it != reader.conf_by_slot.end()) conf = it->second;
    }
    if (!conf) conf = reader.global_conf;

    // Later mention of the same slot wins.
    auto dup = std::find_if(out.pairs.begin(), out.pairs.end(),
                            [&](const ParsedPair& p) { return p.slot == *ref; });
    if (dup != out.pairs.end()) {
      out.warnings.push_back("duplicate slot '" + bare + "'; keeping the later value");
      out.pairs.erase(dup);
    }
    out.pairs.push_back({*ref, std::move(value), conf});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Self-probe confidence extraction
// ---------------------------------------------------------------------------

namespace {

/// All numbers in the text, left to right, percent-adjusted.
std::vector<double> scan_numbers(const std::string& raw) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < raw.size()) {
    const bool digit = std::isdigit(static_cast<unsigned char>(raw[i])) != 0;
    const bool dot_start = raw[i] == '.' && i + 1 < raw.size() &&
                           std::isdigit(static_cast<unsigned char>(raw[i + 1]));
    if (!digit && !dot_start) {
      ++i;
      continue;
    }
    char* end = nullptr;
    const double v = std::strtod(raw.c_str() + i, &end);
    std::size_t next = static_cast<std::size_t>(end - raw.c_str());
    if (next == i) {
      ++i;
      continue;
    }
    double value = v;
    if (next < raw.size() && raw[next] == '%') {
      value = v / 100.0;
      ++next;
    }
    if (std::isfinite(value)) out.push_back(value);
    i = next;
  }
  return out;
}

}  // namespace

std::vector<double> parse_self_probe(const std::string& raw, std::size_t n_pairs) {
  if (n_pairs == 0) return {};
  std::vector<double> numbers = scan_numbers(raw);

  std::vector<double> usable;
  for (double v : numbers) {
    if (v >= 0.0 && v <= 1.0) usable.push_back(v);
  }
  if (usable.empty() && !numbers.empty()) {
    // Out-of-scale answers like "confidence: 1.2" clamp rather than vanish.
    usable.push_back(std::clamp(numbers.back(), 0.0, 1.0));
  }
  if (usable.empty()) return {};

  std::vector<double> out;
  if (usable.size() >= n_pairs) {
    out.assign(usable.end() - static_cast<std::ptrdiff_t>(n_pairs), usable.end());
  } else {
    out.assign(n_pairs, usable.back());
  }
  return out;
}

std::optional<double> parse_self_probe_single(const std::string& raw) {
  auto v = parse_self_probe(raw, 1);
  if (v.empty()) return std::nullopt;
  return v.front();
}

// ---------------------------------------------------------------------------
// Difficulty labels
// ---------------------------------------------------------------------------

namespace {

std::size_t find_word(const std::string& haystack, const std::string& word) {
  std::size_t from = 0;
  while (true) {
    std::size_t pos = haystack.find(word, from);
    if (pos == std::string::npos) return std::string::npos;
    const bool left_ok =
        pos == 0 || !std::isalpha(static_cast<unsigned char>(haystack[pos - 1]));
    const std::size_t end = pos + word.size();
    const bool right_ok =
        end >= haystack.size() || !std::isalpha(static_cast<unsigned char>(haystack[end]));
    if (left_ok && right_ok) return pos;
    from = pos + 1;
  }
}

}  // namespace

std::optional<std::string> parse_domain(const std::string& raw,
                                        const std::vector<std::string>& domains) {
  const std::string text = lower(raw);
  std::optional<std::string> best;
  std::size_t best_pos = std::string::npos;
  for (const auto& domain : domains) {
    const std::size_t pos = find_word(text, lower(domain));
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best = domain;
    }
  }
  return best;
}

Difficulty parse_difficulty(const std::string& raw) {
  const std::string text = lower(raw);
  const std::size_t easy = find_word(text, "easy");
  const std::size_t medium = find_word(text, "medium");
  const std::size_t hard = find_word(text, "hard");
  const std::size_t best = std::min({easy, medium, hard});
  if (best == std::string::npos) return Difficulty::Other;
  if (best == easy) return Difficulty::Easy;
  if (best == medium) return Difficulty::Medium;
  return Difficulty::Hard;
}

std::string to_string(Difficulty level) {
  switch (level) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Medium: return "Medium";
    case Difficulty::Hard: return "Hard";
    case Difficulty::Other: return "Other";
  }
  return "Other";
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string serialize_prediction(const std::vector<ParsedPair>& pairs) {
  // ordered_json keeps pair order, so serialize/parse round-trips exactly.
  nlohmann::ordered_json state = nlohmann::ordered_json::object();
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (const auto& p : pairs) {
    state[p.slot.slot] = p.value;
    if (p.verbalized_conf) conf[p.slot.slot] = *p.verbalized_conf;
  }
  nlohmann::ordered_json out{{"state", std::move(state)}};
  if (!conf.empty()) out["conf"] = std::move(conf);
  return out.dump();
}

std::string render_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out = "{";
  bool first = true;
  for (const auto& [slot, value] : pairs) {
    if (!first) out += ", ";
    first = false;
    out += "'" + slot + "': '" + value + "'";
  }
  out += "}";
  return out;
}

}  // namespace dstconf
