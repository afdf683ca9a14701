#pragma once

/**
 * Plain-text prompt templates with {name} placeholders.
 *
 * Templates are data, not code: wording lives in versioned .txt files so
 * experiments can vary phrasing without rebuilds. Each known template has a
 * required placeholder set; a file missing one of its required placeholders
 * fails at load time, not at first render.
 *
 * Braced text that is not a known placeholder passes through untouched,
 * which lets templates contain literal JSON like
 * "{state: {_entity_:_value_}, conf: X}".
 */

#include <map>
#include <string>
#include <vector>

namespace dstconf {

class TemplateSet {
public:
  /// Loads every known template file from `dir`:
  ///   domain_classification.txt, slot_all.txt, slot_one.txt,
  ///   self_probe_turn.txt, self_probe_slot.txt, difficulty.txt
  /// Throws TemplateError on a missing file or a missing required
  /// placeholder.
  static TemplateSet load(const std::string& dir);

  /// Substitutes {key} for every entry of `values`. All required
  /// placeholders of the template must be covered; unknown template name or
  /// uncovered placeholder throws TemplateError.
  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const;

  /// Raw template text (for tests and tooling).
  const std::string& text(const std::string& name) const;

  /// name -> required placeholder list for every known template.
  static const std::map<std::string, std::vector<std::string>>& required_placeholders();

private:
  std::map<std::string, std::string> templates_;
};

}  // namespace dstconf
