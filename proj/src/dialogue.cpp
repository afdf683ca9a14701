#include "dstconf/dialogue.hpp"

#include <algorithm>
#include <cctype>

namespace dstconf {

std::string normalize_value(const std::string& raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string out = raw.substr(begin, end - begin);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

namespace {

bool is_clean_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (std::isspace(static_cast<unsigned char>(s.front())) ||
      std::isspace(static_cast<unsigned char>(s.back()))) {
    return false;
  }
  return true;
}

}  // namespace

SlotRef::SlotRef(std::string domain_, std::string slot_)
    : domain(std::move(domain_)), slot(std::move(slot_)) {
  if (!is_clean_identifier(domain) || !is_clean_identifier(slot)) {
    throw InvalidInputError("SlotRef parts must be non-empty with no surrounding whitespace: '" +
                            domain + "', '" + slot + "'");
  }
}

SlotRef SlotRef::from_key(const std::string& key) {
  auto dash = key.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 >= key.size()) {
    throw InvalidInputError("slot key must look like 'domain-slot': '" + key + "'");
  }
  return SlotRef(key.substr(0, dash), key.substr(dash + 1));
}

void BeliefState::set(const SlotRef& ref, const std::string& value) {
  std::string norm = normalize_value(value);
  if (norm.empty()) {
    throw InvalidInputError("belief state value for " + ref.key() + " is empty");
  }
  entries_[ref] = std::move(norm);
}

std::optional<std::string> BeliefState::get(const SlotRef& ref) const {
  auto it = entries_.find(ref);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

BeliefState carryover_merge(const BeliefState& prev, const BeliefState& turn_delta) {
  BeliefState merged = prev;
  for (const auto& [ref, value] : turn_delta.entries()) {
    merged.set(ref, value);
  }
  return merged;
}

bool is_subset(const BeliefState& inner, const BeliefState& outer) {
  for (const auto& [ref, value] : inner.entries()) {
    auto got = outer.get(ref);
    if (!got || *got != value) return false;
  }
  return true;
}

void Schema::add(const std::string& domain, const std::string& slot, SlotSpec spec) {
  if (spec.description.empty()) {
    throw SchemaError("schema entry " + domain + "-" + slot + " has an empty description");
  }
  domains_[domain][slot] = std::move(spec);
}

bool Schema::has_domain(const std::string& domain) const {
  return domains_.count(domain) > 0;
}

bool Schema::has_slot(const SlotRef& ref) const {
  auto it = domains_.find(ref.domain);
  if (it == domains_.end()) return false;
  return it->second.count(ref.slot) > 0;
}

const SlotSpec& Schema::slot_spec(const SlotRef& ref) const {
  auto it = domains_.find(ref.domain);
  if (it == domains_.end()) {
    throw SchemaError("unknown domain: " + ref.domain);
  }
  auto jt = it->second.find(ref.slot);
  if (jt == it->second.end()) {
    throw SchemaError("unknown slot: " + ref.key());
  }
  return jt->second;
}

std::vector<std::string> Schema::domains() const {
  std::vector<std::string> out;
  out.reserve(domains_.size());
  for (const auto& [name, slots] : domains_) out.push_back(name);
  return out;
}

std::vector<std::string> Schema::slots(const std::string& domain) const {
  auto it = domains_.find(domain);
  if (it == domains_.end()) {
    throw SchemaError("unknown domain: " + domain);
  }
  std::vector<std::string> out;
  out.reserve(it->second.size());
  for (const auto& [name, spec] : it->second) out.push_back(name);
  return out;
}

void ScoredSlotValue::validate() const {
  auto check_unit = [&](const std::optional<double>& v, const char* name) {
    if (v && (*v < 0.0 || *v > 1.0)) {
      throw InvalidInputError(std::string(name) + " out of [0,1] for " + slot.key());
    }
  };
  check_unit(conf_softmax, "conf_softmax");
  check_unit(conf_verbalized, "conf_verbalized");
  check_unit(conf_self_probe, "conf_self_probe");
  check_unit(conf_combined, "conf_combined");
  if (conf_minicons && *conf_minicons > 0.0) {
    throw InvalidInputError("conf_minicons must be a log-probability (<= 0) for " + slot.key());
  }
}

std::vector<ScoredSlotValue> label_correctness(std::vector<ScoredSlotValue> predicted,
                                               const BeliefState& gold) {
  for (auto& item : predicted) {
    auto got = gold.get(item.slot);
    item.correct = got && *got == normalize_value(item.value);
  }
  return predicted;
}

}  // namespace dstconf
