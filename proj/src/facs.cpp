// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/facs.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal::facs {

namespace {

// Descriptions are kept exactly as coded, including "Check Raiser" and
// "Check Puffer".
constexpr std::array<ActionUnit, 30> kCodebook{{
    {1, "Inner Brow Raiser"},
    {2, "Outer Brow Raiser"},
    {4, "Brow Lowerer"},
    {5, "Upper Lid Raiser"},
    {6, "Check Raiser"},
    {7, "Lid Tightener"},
    {9, "Nose Wrinkler"},
    {10, "Upper Lip Raiser"},
    {11, "Nasolabial Deepener"},
    {12, "Lip Corner Puller"},
    {13, "Check Puffer"},
    {14, "Dimpler"},
    {15, "Lip Corner Depressor"},
    {16, "Lower Lip Depressor"},
    {17, "Chin Raiser"},
    {18, "Lip Puckerer"},
    {20, "Lip stretcher"},
    {22, "Lip Funneler"},
    {23, "Lip Tightener"},
    {24, "Lip Pressor"},
    {25, "Lips part"},
    {26, "Jaw Drop"},
    {27, "Mouth Stretch"},
    {28, "Lip Suck"},
    {41, "Lid droop"},
    {42, "Slit"},
    {43, "Eyes Closed"},
    {44, "Squint"},
    {45, "Blink"},
    {46, "Wink"},
}};

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::span<const ActionUnit> codebook() { return kCodebook; }

bool is_known(int id) {
  return std::any_of(kCodebook.begin(), kCodebook.end(), [id](const ActionUnit& au) { return au.id == id; });
}

std::string_view description_of(int id) {
  for (const auto& au : kCodebook) {
    if (au.id == id) return au.description;
  }
  throw UnknownAuError(id);
}

std::string codebook_csv() {
  std::ostringstream os;
  os << "au_id,description\n";
  for (const auto& au : kCodebook) os << au.id << ',' << au.description << '\n';
  return os.str();
}

std::vector<int> parse_au_string(std::string_view text) {
  std::vector<int> ids;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < text.size() && is_space(text[pos])) ++pos;
  };
  while (true) {
    skip_space();
    if (pos + 2 > text.size() || std::tolower(static_cast<unsigned char>(text[pos])) != 'a' ||
        std::tolower(static_cast<unsigned char>(text[pos + 1])) != 'u') {
      throw ParseError("expected 'AU'", pos);
    }
    pos += 2;
    const std::size_t digits_at = pos;
    long value = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      value = value * 10 + (text[pos] - '0');
      if (value > 1'000'000) throw ParseError("action unit number too long", digits_at);
      ++pos;
    }
    if (pos == digits_at) throw ParseError("expected digits after 'AU'", pos);
    const int id = static_cast<int>(value);
    if (!is_known(id)) throw UnknownAuError(id);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    skip_space();
    if (pos == text.size()) break;
    if (text[pos] != '+') throw ParseError("expected '+'", pos);
    ++pos;
  }
  return ids;
}

std::string format_au_string(std::span<const int> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += '+';
    out += "AU" + std::to_string(ids[i]);
  }
  return out;
}

AttributePhrase describe(std::span<const int> ids) {
  if (ids.empty()) throw ContractError("describe: empty action-unit list");
  AttributePhrase phrase;
  for (int id : ids) {
    const auto desc = description_of(id);
    if (std::find(phrase.source_aus.begin(), phrase.source_aus.end(), id) != phrase.source_aus.end()) continue;
    if (!phrase.source_aus.empty()) phrase.text += " and ";
    phrase.text += lowercase(desc);
    phrase.source_aus.push_back(id);
  }
  return phrase;
}

Vocabulary Vocabulary::from_codebook() {
  std::set<std::string> words{"and"};
  for (const auto& au : kCodebook) {
    std::istringstream is(lowercase(au.description));
    std::string w;
    while (is >> w) words.insert(w);
  }
  Vocabulary vocab;
  vocab.tokens_ = {"<pad>", "<unk>"};
  vocab.tokens_.insert(vocab.tokens_.end(), words.begin(), words.end());
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    vocab.ids_.emplace(vocab.tokens_[i], static_cast<std::int32_t>(i));
  }
  return vocab;
}

std::int32_t Vocabulary::id_of(std::string_view token) const {
  const auto it = ids_.find(token);
  if (it == ids_.end() || it->second == kPadId) return kUnknownId;
  return it->second;
}

std::vector<std::int32_t> tokenize(const AttributePhrase& phrase, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw ContractError("tokenize: max_len must be at least 1");
  std::vector<std::int32_t> ids;
  ids.reserve(max_len);
  std::istringstream is(phrase.text);
  std::string w;
  while (ids.size() < max_len && is >> w) ids.push_back(vocab.id_of(w));
  ids.resize(max_len, Vocabulary::kPadId);
  return ids;
}

}  // namespace xmodal::facs
