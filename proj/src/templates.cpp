#include "dstconf/templates.hpp"

#include "dstconf/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace dstconf {

const std::map<std::string, std::vector<std::string>>& TemplateSet::required_placeholders() {
  static const std::map<std::string, std::vector<std::string>> required = {
      {"domain_classification", {"domains", "examples", "history"}},
      {"slot_all", {"domain", "slot_descriptions", "examples", "history"}},
      {"slot_one", {"domain", "slot", "description", "examples", "history"}},
      {"self_probe_turn", {"history", "state"}},
      {"self_probe_slot", {"history", "pair"}},
      {"difficulty", {"utterance", "history_block"}},
  };
  return required;
}

TemplateSet TemplateSet::load(const std::string& dir) {
  TemplateSet set;
  for (const auto& [name, placeholders] : required_placeholders()) {
    const std::filesystem::path path = std::filesystem::path(dir) / (name + ".txt");
    std::ifstream in(path);
    if (!in) {
      throw TemplateError("missing template file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    for (const auto& placeholder : placeholders) {
      if (text.find("{" + placeholder + "}") == std::string::npos) {
        throw TemplateError("template '" + name + "' lacks required placeholder {" +
                            placeholder + "}");
      }
    }
    set.templates_[name] = std::move(text);
  }
  return set;
}

std::string TemplateSet::render(const std::string& name,
                                const std::map<std::string, std::string>& values) const {
  const std::string& tpl = text(name);
  for (const auto& placeholder : required_placeholders().at(name)) {
    if (!values.count(placeholder)) {
      throw TemplateError("render of '" + name + "' missing value for {" + placeholder + "}");
    }
  }
  std::string out = tpl;
  for (const auto& [key, value] : values) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

const std::string& TemplateSet::text(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw TemplateError("unknown template: " + name);
  }
  return it->second;
}

}  // namespace dstconf
