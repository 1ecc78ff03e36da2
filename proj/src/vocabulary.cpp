#include "flin/vocabulary.hpp"

#include "flin/error.hpp"
#include "flin/text.hpp"

namespace flin {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw ParseError("vocabulary must start with <pad>, <unk>");
  }
  for (const auto& t : tokens) {
    if (lookup_.count(t) != 0) throw ParseError("duplicate vocabulary entry \"" + t + "\"");
    add(t);
  }
}

nn::Index Vocabulary::add(std::string_view token) {
  auto [it, inserted] = lookup_.emplace(std::string(token), static_cast<nn::Index>(tokens_.size()));
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

nn::Index Vocabulary::index(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  return it == lookup_.end() ? kUnknown : it->second;
}

std::vector<nn::Index> Vocabulary::encode(std::string_view text) const {
  std::vector<nn::Index> ids;
  for (const auto& t : text::token_texts(text)) ids.push_back(index(t));
  return ids;
}

Vocabulary build_word_vocabulary(const std::vector<Example>& train, const SchemaSet& schemas) {
  Vocabulary vocab;
  auto add_all = [&](std::string_view s) {
    for (const auto& t : text::token_texts(s)) vocab.add(t);
  };
  for (const auto& site : schemas.sites()) {
    for (const auto& page : site.pages) {
      for (const auto& action : page.actions) {
        add_all(action.name);
        for (const auto& p : action.parameters) {
          add_all(p.name);
          for (const auto& v : p.domain) add_all(v);
        }
      }
    }
  }
  for (const auto& ex : train) add_all(ex.command);
  return vocab;
}

}  // namespace flin
