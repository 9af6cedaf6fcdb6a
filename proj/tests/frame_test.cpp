#include <fstream>

#include "doctest.h"
#include "invparse/error.hpp"
#include "invparse/frame.hpp"
#include "test_support.hpp"

using namespace invparse;

namespace {

ErrorKind parse_error(std::string_view text) {
  try {
    parse_frame(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a parse error for: " << text);
  return ErrorKind::FrameParse;
}

}  // namespace

TEST_CASE("parse builds the expected tree") {
  const Frame f = parse_frame("[IN:CREATE_ALARM set [SL:DATE_TIME 6pm ] ]");
  const Frame want{FrameNode::intent(
      "CREATE_ALARM", {FrameNode::token("set"), FrameNode::slot("DATE_TIME", {FrameNode::token("6pm")})})};
  CHECK(f == want);
  CHECK(serialize_frame(f) == "[IN:CREATE_ALARM set [SL:DATE_TIME 6pm ] ]");
}

TEST_CASE("serialization normalizes whitespace and keeps case") {
  const Frame f = parse_frame("  [IN:GET_MESSAGE\t[SL:DATE_TIME   Tuesday ]\n]  ");
  CHECK(serialize_frame(f) == "[IN:GET_MESSAGE [SL:DATE_TIME Tuesday ] ]");
  CHECK(serialize_frame(parse_frame("[IN:A ]")) == "[IN:A ]");
}

TEST_CASE("malformed frames raise typed errors") {
  CHECK(parse_error("") == ErrorKind::EmptyFrame);
  CHECK(parse_error("   ") == ErrorKind::EmptyFrame);
  CHECK(parse_error("[IN:A [SL:B x ]") == ErrorKind::UnbalancedBrackets);
  CHECK(parse_error("[IN:A ] ]") == ErrorKind::UnbalancedBrackets);
  CHECK(parse_error("] [IN:A ]") == ErrorKind::UnbalancedBrackets);
  CHECK(parse_error("[SL:B x ]") == ErrorKind::RootNotIntent);
  CHECK(parse_error("hello [IN:A ]") == ErrorKind::RootNotIntent);
  CHECK(parse_error("[IN:A [ x ] ]") == ErrorKind::LabelMissing);
  CHECK(parse_error("[IN:A [XX:B x ] ]") == ErrorKind::MalformedLabel);
  CHECK(parse_error("[IN: ]") == ErrorKind::MalformedLabel);
}

TEST_CASE("index frames") {
  const Frame f = parse_index_frame("[ 1 [ 4 6pm ] ]");
  CHECK(f.root.kind == NodeKind::Pointer);
  CHECK(f.root.label == "1");
  CHECK(f.root.children.at(0).label == "4");
  CHECK(serialize_frame(f) == "[ 1 [ 4 6pm ] ]");
  CHECK_THROWS_AS(parse_index_frame("[ 0 ]"), Error);
  CHECK_THROWS_AS(parse_index_frame("[ x ]"), Error);
  CHECK_THROWS_AS(parse_index_frame("[ 1 [ 2 ]"), Error);
}

TEST_CASE("structure helpers") {
  const Frame nested = parse_frame("[IN:DELETE_ALARM [SL:ALARM_NAME [IN:GET_TIME [SL:DATE_TIME 6pm ] ] ] ]");
  CHECK(is_nested(nested));
  CHECK_FALSE(is_nested(parse_frame("[IN:DELETE_ALARM [SL:DATE_TIME 6pm ] ]")));
  CHECK(ontology_tokens(nested) ==
        std::vector<std::string>{"IN:DELETE_ALARM", "SL:ALARM_NAME", "IN:GET_TIME", "SL:DATE_TIME"});
  CHECK(ontology_tokens(parse_frame("[IN:A [SL:B x ] [SL:B y ] ]")) ==
        std::vector<std::string>{"IN:A", "SL:B", "SL:B"});
  CHECK(leaf_tokens(parse_frame("[IN:A hi [SL:B x y ] z ]")) == std::vector<std::string>{"hi", "x", "y", "z"});
}

TEST_CASE("validation reports issues without throwing") {
  CHECK(validate_frame(parse_frame("[IN:A [SL:B [IN:C x ] ] ]")).ok());

  Frame slot_in_slot{FrameNode::intent("A", {FrameNode::slot("B", {FrameNode::slot("C", {FrameNode::token("x")})})})};
  auto r = validate_frame(slot_in_slot);
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].code == IssueCode::SlotInSlot);
  CHECK(r.issues[0].path == std::vector<std::size_t>{0, 0});

  Frame intent_in_intent{FrameNode::intent("A", {FrameNode::intent("B")})};
  CHECK(validate_frame(intent_in_intent).issues.at(0).code == IssueCode::IntentInIntent);

  Frame slot_root{FrameNode::slot("B", {FrameNode::token("x")})};
  CHECK(validate_frame(slot_root).issues.at(0).code == IssueCode::RootNotIntent);
}

TEST_CASE("round trip on random frames") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Frame f = testing::random_frame(rng, 3);
    const std::string s = serialize_frame(f);
    CHECK(parse_frame(s) == f);
    CHECK(serialize_frame(parse_frame(s)) == s);
  }
}

TEST_CASE("round trip on the reference frames") {
  std::ifstream in(std::string(INVPARSE_FIXTURE_DIR) + "/reference_frames.txt");
  REQUIRE(in);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CHECK(serialize_frame(parse_frame(line)) == normalize_whitespace(line));
    ++n;
  }
  CHECK(n == 21);
}
