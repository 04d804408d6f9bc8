// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "xmodal/errors.hpp"
#include "xmodal/facs.hpp"

using namespace xmodal;

namespace {

// Golden codebook, transcribed by hand; spellings are kept exactly as coded.
const std::vector<std::pair<int, std::string>> kGolden = {
    {1, "Inner Brow Raiser"},     {2, "Outer Brow Raiser"},   {4, "Brow Lowerer"},
    {5, "Upper Lid Raiser"},      {6, "Check Raiser"},        {7, "Lid Tightener"},
    {9, "Nose Wrinkler"},         {10, "Upper Lip Raiser"},   {11, "Nasolabial Deepener"},
    {12, "Lip Corner Puller"},    {13, "Check Puffer"},       {14, "Dimpler"},
    {15, "Lip Corner Depressor"}, {16, "Lower Lip Depressor"}, {17, "Chin Raiser"},
    {18, "Lip Puckerer"},         {20, "Lip stretcher"},      {22, "Lip Funneler"},
    {23, "Lip Tightener"},        {24, "Lip Pressor"},        {25, "Lips part"},
    {26, "Jaw Drop"},             {27, "Mouth Stretch"},      {28, "Lip Suck"},
    {41, "Lid droop"},            {42, "Slit"},               {43, "Eyes Closed"},
    {44, "Squint"},               {45, "Blink"},              {46, "Wink"},
};

}  // namespace

TEST_CASE("codebook matches the golden table entry by entry") {
  const auto book = facs::codebook();
  REQUIRE(book.size() == 30);
  for (std::size_t i = 0; i < kGolden.size(); ++i) {
    CAPTURE(kGolden[i].first);
    CHECK(book[i].id == kGolden[i].first);
    CHECK(std::string(book[i].description) == kGolden[i].second);
    CHECK(std::string(facs::description_of(kGolden[i].first)) == kGolden[i].second);
    CHECK(facs::is_known(kGolden[i].first));
  }
  for (int id : {0, 3, 8, 19, 21, 29, 40, 47, 99}) CHECK_FALSE(facs::is_known(id));
  CHECK_THROWS_AS(facs::description_of(3), UnknownAuError);
}

TEST_CASE("codebook exports as CSV") {
  const auto csv = facs::codebook_csv();
  CHECK(csv.rfind("au_id,description\n", 0) == 0);
  CHECK(csv.find("\n6,Check Raiser\n") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
}

TEST_CASE("AU strings parse") {
  CHECK(facs::parse_au_string("AU6+AU12") == std::vector<int>{6, 12});
  CHECK(facs::parse_au_string("AU4") == std::vector<int>{4});
  CHECK(facs::parse_au_string(" au12 + AU6 ") == std::vector<int>{12, 6});
  CHECK(facs::parse_au_string("AU4+AU4") == std::vector<int>{4});
  try {
    facs::parse_au_string("AU99");
    FAIL("expected an unknown-AU error");
  } catch (const UnknownAuError& e) {
    CHECK(e.id() == 99);
    CHECK(std::string(e.what()).find("99") != std::string::npos);
  }
  try {
    facs::parse_au_string("AU6+BU12");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 4);
  }
  CHECK_THROWS_AS(facs::parse_au_string(""), ParseError);
  CHECK_THROWS_AS(facs::parse_au_string("AU6+"), ParseError);
  CHECK_THROWS_AS(facs::parse_au_string("AU"), ParseError);
}

TEST_CASE("happiness AUs describe as the two codebook descriptions") {
  const auto phrase = facs::describe(facs::parse_au_string("AU6+AU12"));
  CHECK(phrase.text == "check raiser and lip corner puller");
  CHECK(phrase.source_aus == std::vector<int>{6, 12});
  CHECK(facs::describe(std::vector<int>{1}).text == "inner brow raiser");
  CHECK(facs::describe(facs::parse_au_string("AU4+AU4")).text == "brow lowerer");
  CHECK_THROWS_AS(facs::describe(std::vector<int>{}), ContractError);
  CHECK_THROWS_AS(facs::describe(std::vector<int>{3}), UnknownAuError);
}

TEST_CASE("tokenize pads, truncates and maps unknown words") {
  const auto vocab = facs::Vocabulary::from_codebook();
  const auto ids = facs::tokenize(facs::describe(std::vector<int>{1}), vocab, 5);
  CHECK(ids == std::vector<std::int32_t>{vocab.id_of("inner"), vocab.id_of("brow"), vocab.id_of("raiser"), 0, 0});
  CHECK(ids[0] > 1);
  const facs::AttributePhrase odd{"inner zebra raiser", {1}};
  const auto odd_ids = facs::tokenize(odd, vocab, 3);
  CHECK(odd_ids[1] == facs::Vocabulary::kUnknownId);
  CHECK(facs::tokenize(facs::describe(std::vector<int>{6, 12}), vocab, 2).size() == 2);
  CHECK(facs::tokenize(odd, vocab, 3) == odd_ids);
  CHECK_THROWS_AS(facs::tokenize(odd, vocab, 0), ContractError);
  CHECK(vocab.tokens() == facs::Vocabulary::from_codebook().tokens());
  CHECK(vocab.id_of("and") > 1);
}

TEST_CASE("format and parse are inverse on every pair of codes") {
  std::set<std::string> phrases;
  const auto book = facs::codebook();
  for (std::size_t i = 0; i < book.size(); ++i) {
    for (std::size_t j = i + 1; j < book.size(); ++j) {
      const std::vector<int> ids{book[i].id, book[j].id};
      CHECK(facs::parse_au_string(facs::format_au_string(ids)) == ids);
      phrases.insert(facs::describe(ids).text);
    }
  }
  // describe is injective on sorted pairs.
  CHECK(phrases.size() == book.size() * (book.size() - 1) / 2);
}
