#include <map>
#include <set>

#include "doctest.h"
#include "invparse/error.hpp"
#include "invparse/evaluate.hpp"
#include "invparse/synth.hpp"

using namespace invparse;

namespace {

const char* kSpec = R"(# two tiny domains
[domain]
name = alarm
nesting_rate = 0.5
intent = CREATE_ALARM
intent = GET_TIME
slot = DATE_TIME
slot = ALARM_NAME
filler DATE_TIME = 6pm | tomorrow morning
filler ALARM_NAME = gym | yoga
template CREATE_ALARM = wake me up at {DATE_TIME}
template CREATE_ALARM = create an alarm named {ALARM_NAME}
nested ALARM_NAME GET_TIME = {DATE_TIME}

[domain]
name = weather
nesting_rate = 0
intent = GET_WEATHER
slot = LOCATION
filler LOCATION = in paris
template GET_WEATHER = weather {LOCATION}
)";

std::string error_message(const std::string& text) {
  try {
    parse_domain_specs(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSpec);
    return e.what();
  }
  FAIL("expected InvalidSpec");
  return {};
}

std::string header = "[domain]\nname = d\n";

}  // namespace

TEST_CASE("parse the spec format") {
  const auto specs = parse_domain_specs(kSpec);
  REQUIRE(specs.size() == 2);
  const auto& a = specs[0];
  CHECK(a.name == "alarm");
  CHECK(a.nesting_rate == 0.5);
  CHECK(a.intents == std::vector<std::string>{"CREATE_ALARM", "GET_TIME"});
  CHECK(a.slot_fillers.at("DATE_TIME") == std::vector<std::string>{"6pm", "tomorrow morning"});
  CHECK(a.carrier_templates.size() == 2);
  REQUIRE(a.nested_templates.size() == 1);
  CHECK(a.nested_templates[0].slot == "ALARM_NAME");
  CHECK(a.ontology_size() == 4);
  CHECK(specs[1].nested_templates.empty());
}

TEST_CASE("generated frames are valid and match their utterances") {
  const auto specs = parse_domain_specs(kSpec);
  const Dataset d = generate_domain(specs[0], 300, 5);
  CHECK(d.size() == 300);
  for (const auto& s : d.samples) {
    CHECK(s.domain == "alarm");
    CHECK(validate_frame(s.frame).ok());
  }
  CHECK(check_leaf_consistency(d).empty());
  CHECK(d == generate_domain(specs[0], 300, 5));
  CHECK_FALSE(d == generate_domain(specs[0], 300, 6));
  CHECK(generate_domain(specs[0], 0, 5).empty());
}

TEST_CASE("nested frames put an intent inside the hosting slot") {
  const auto specs = parse_domain_specs(kSpec);
  const Dataset d = generate_domain(specs[0], 200, 1);
  bool saw = false;
  for (const auto& s : d.samples) {
    if (!is_nested(s.frame)) continue;
    saw = true;
    CHECK(serialize_frame(s.frame).find("[SL:ALARM_NAME [IN:GET_TIME [SL:DATE_TIME") != std::string::npos);
  }
  CHECK(saw);
}

TEST_CASE("small n still covers every label") {
  const auto specs = parse_domain_specs(kSpec);
  const Dataset d = generate_domain(specs[0], 3, 9);
  CHECK(extract_ontology(d, "alarm").size() == specs[0].ontology_size());
}

TEST_CASE("default suite") {
  const auto specs = default_suite_specs();
  std::map<std::string, std::size_t> sizes;
  for (const auto& s : specs) sizes[s.name] = s.ontology_size();
  CHECK(sizes == std::map<std::string, std::size_t>{{"alarm", 8}, {"messaging", 13}, {"reminder", 18}, {"weather", 7}});

  const Dataset d = default_benchmark_suite(1, 1000);
  CHECK(d.size() == 4000);
  CHECK(domains(d) == std::vector<std::string>{"alarm", "weather", "messaging", "reminder"});
  CHECK(check_leaf_consistency(d).empty());
  for (const auto& spec : specs) {
    const DomainProfile p = domain_profile(d, spec.name);
    CHECK(p.ontology_size == spec.ontology_size());
    CHECK(std::abs(p.compositionality - spec.nesting_rate) <= 0.05);
  }
}

TEST_CASE("spec errors name the line") {
  CHECK(error_message("name = x\n").find("line 1") != std::string::npos);
  CHECK(error_message(header + "intent\n").find("line 3") != std::string::npos);
  CHECK(error_message(header + "colour = red\n").find("unknown key") != std::string::npos);
  CHECK(error_message(header + "nesting_rate = lots\n").find("line 3") != std::string::npos);
  CHECK(error_message(header + "filler X = a | | b\n").find("empty filler") != std::string::npos);

  // Semantic checks report the header line of the offending domain.
  const std::string undeclared = header + "intent = A\ntemplate A = go {S}\n";
  CHECK(error_message(undeclared).find("line 1") != std::string::npos);
  CHECK(error_message(undeclared).find("undeclared slot") != std::string::npos);
  CHECK(error_message(header + "intent = A\nintent = B\ntemplate A = go\n").find("never generated") !=
        std::string::npos);
  CHECK(error_message(header + "nesting_rate = 0.3\nintent = A\ntemplate A = go\n").find("nested") !=
        std::string::npos);
  CHECK(error_message(header + "intent = A\nslot = S\nfiller S = x\ntemplate A = go {S}\ntemplate A = go {S}\n"
                               "intent = A\n")
            .find("duplicate") != std::string::npos);
  CHECK(error_message(header + "nesting_rate = 1.5\nintent = A\ntemplate A = go\n").find("nesting_rate") !=
        std::string::npos);
  CHECK(error_message("[domain]\nname = two words\nintent = A\ntemplate A = go\n").find("single word") !=
        std::string::npos);
}
