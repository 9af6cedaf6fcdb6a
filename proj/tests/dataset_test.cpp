#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "invparse/dataset.hpp"
#include "invparse/error.hpp"
#include "test_support.hpp"

using namespace invparse;
namespace fs = std::filesystem;

namespace {

const char* kTsv =
    "alarm\tset an alarm for 6pm\t[IN:CREATE_ALARM [SL:DATE_TIME 6pm ] ]\n"
    "weather\tweather in Paris\t[IN:GET_WEATHER [SL:LOCATION Paris ] ]\n"
    "\n"
    "alarm\tdelete my 6pm alarm\t[IN:DELETE_ALARM [SL:ALARM_NAME [IN:GET_TIME [SL:DATE_TIME 6pm ] ] ] ]\n";

ErrorKind error_kind(const std::string& text, std::string* message = nullptr) {
  try {
    parse_dataset(text);
  } catch (const Error& e) {
    if (message != nullptr) *message = e.what();
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("parse a small corpus") {
  const Dataset d = parse_dataset(kTsv);
  REQUIRE(d.size() == 3);
  CHECK(d.samples[1].domain == "weather");
  CHECK(d.samples[1].utterance == "weather in Paris");
  CHECK(serialize_frame(d.samples[2].frame) ==
        "[IN:DELETE_ALARM [SL:ALARM_NAME [IN:GET_TIME [SL:DATE_TIME 6pm ] ] ] ]");
  CHECK(domains(d) == std::vector<std::string>{"alarm", "weather"});
  CHECK(filter_domain(d, "alarm").size() == 2);
  CHECK(filter_domain(d, "music").empty());
}

TEST_CASE("errors carry line numbers") {
  std::string msg;
  CHECK(error_kind("a\tb\t[IN:A ]\nonly two\tfields\n", &msg) == ErrorKind::BadFieldCount);
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(error_kind("a\tb\t[IN:A ]\textra\n") == ErrorKind::BadFieldCount);
  CHECK(error_kind("a\tb\t[IN:A ]\n\na\tb\t[IN:A\n", &msg) == ErrorKind::FrameParse);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("UnbalancedBrackets") != std::string::npos);
}

TEST_CASE("ontology extraction and inventories") {
  const Dataset d = parse_dataset(kTsv);
  std::vector<std::string> raws;
  for (const auto& l : extract_ontology(d, "alarm")) raws.push_back(l.raw);
  CHECK(raws == std::vector<std::string>{"IN:CREATE_ALARM", "IN:DELETE_ALARM", "IN:GET_TIME", "SL:ALARM_NAME",
                                         "SL:DATE_TIME"});
  const auto inventories = build_inventories(d);
  CHECK(inventories.size() == 2);
  CHECK(inventories.at("weather").size() == 2);
  CHECK(inventories.at("alarm").index_of("SL:ALARM_NAME") == 4);
}

TEST_CASE("file round trip") {
  Rng rng(5);
  const Dataset d = testing::random_dataset(rng, 200);
  const fs::path path = fs::temp_directory_path() / "invparse_dataset_test.tsv";
  write_dataset(d, path);
  CHECK(load_dataset(path) == d);
  fs::remove(path);
  CHECK_THROWS_AS(load_dataset(path), Error);
}

TEST_CASE("leaf consistency is advisory") {
  const Dataset d = parse_dataset(
      "alarm\tSet an alarm\t[IN:CREATE_ALARM set ]\n"
      "alarm\tset an alarm\t[IN:CREATE_ALARM [SL:DATE_TIME noon ] ]\n");
  const auto warnings = check_leaf_consistency(d);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].index == 1);
  CHECK(warnings[0].message.find("noon") != std::string::npos);
}
