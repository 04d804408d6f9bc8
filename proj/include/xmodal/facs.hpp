// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Facial Action Coding System: the action-unit codebook, AU combination
// strings such as "AU6+AU12", and the attribute phrases fed to the text
// branch.

namespace xmodal::facs {

struct ActionUnit {
  int id;
  std::string_view description;
};

/// The 30 coded action units, ordered by id.
std::span<const ActionUnit> codebook();

bool is_known(int id);
/// Table description with its original capitalization; throws UnknownAuError.
std::string_view description_of(int id);

/// Codebook as CSV with header `au_id,description`.
std::string codebook_csv();

/// Parses `AU<digits>` terms joined by '+', case-insensitive, whitespace
/// allowed around terms. Duplicates are dropped, first occurrence wins.
/// Throws ParseError (with character position) or UnknownAuError.
std::vector<int> parse_au_string(std::string_view text);

/// Inverse of parse_au_string: "AU6+AU12".
std::string format_au_string(std::span<const int> ids);

struct AttributePhrase {
  std::string text;
  std::vector<int> source_aus;
};

/// Lowercased descriptions joined with " and ". Throws ContractError on an
/// empty list and UnknownAuError on an id outside the codebook.
AttributePhrase describe(std::span<const int> ids);

class Vocabulary {
 public:
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kUnknownId = 1;

  /// Every word of the lowercased codebook plus the joiner "and".
  static Vocabulary from_codebook();

  std::int32_t id_of(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::int32_t, std::less<>> ids_;
};

/// Whitespace tokens mapped to ids, truncated or padded with kPadId to max_len.
std::vector<std::int32_t> tokenize(const AttributePhrase& phrase, const Vocabulary& vocab, std::size_t max_len);

}  // namespace xmodal::facs
