#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "flin/dataset.hpp"
#include "flin/nn/parameters.hpp"

namespace flin {

/// Token <-> index map. Index 0 is padding, index 1 the out-of-vocabulary
/// token.
class Vocabulary {
 public:
  static constexpr nn::Index kPad = 0;
  static constexpr nn::Index kUnknown = 1;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  nn::Index add(std::string_view token);
  nn::Index index(std::string_view token) const;
  const std::string& token(nn::Index i) const { return tokens_.at(static_cast<std::size_t>(i)); }
  nn::Index size() const { return static_cast<nn::Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Indices of text::token_texts(text).
  std::vector<nn::Index> encode(std::string_view text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, nn::Index> lookup_;
};

/// Words of training commands plus every action name, parameter name and
/// domain value of the schemas.
Vocabulary build_word_vocabulary(const std::vector<Example>& train, const SchemaSet& schemas);

}  // namespace flin
