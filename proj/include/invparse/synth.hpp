#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "invparse/dataset.hpp"

namespace invparse {

/// Utterance pattern for one intent. Holes are written `{SLOT_NAME}`.
struct CarrierTemplate {
  std::string intent;
  std::string text;
};

/// Pattern for an intent embedded inside `slot` (a nested frame).
struct NestedTemplate {
  std::string slot;
  std::string intent;
  std::string text;
};

struct DomainSpec {
  std::string name;
  std::vector<std::string> intents;  // bare names, e.g. CREATE_ALARM
  std::vector<std::string> slots;
  std::map<std::string, std::vector<std::string>> slot_fillers;
  std::vector<CarrierTemplate> carrier_templates;
  std::vector<NestedTemplate> nested_templates;
  double nesting_rate = 0.0;

  /// Throws InvalidSpec on the first violated invariant.
  void validate() const;
  std::size_t ontology_size() const { return intents.size() + slots.size(); }
};

/// Parses the domain spec format:
///
///     # comment
///     [domain]
///     name = alarm
///     nesting_rate = 0.2
///     intent = CREATE_ALARM
///     slot = DATE_TIME
///     filler DATE_TIME = 6pm | tomorrow
///     template CREATE_ALARM = create an alarm for {DATE_TIME}
///     nested ALARM_NAME GET_TIME = {DATE_TIME}
///
/// Each `[domain]` header opens a new spec. Errors name the line.
std::vector<DomainSpec> parse_domain_specs(const std::string& text);
std::vector<DomainSpec> load_domain_specs(const std::filesystem::path& path);

/// `n` samples. A frame is nested with probability `nesting_rate`; the
/// first samples walk every template once so each declared label occurs
/// whenever n covers the template count.
Dataset generate_domain(const DomainSpec& spec, std::size_t n, std::uint64_t seed);

/// Text of the built-in four-domain suite.
const std::string& default_suite_text();
std::vector<DomainSpec> default_suite_specs();

/// Built-in suite, `samples_per_domain` each (default 2000), domains
/// concatenated in spec order.
Dataset default_benchmark_suite(std::uint64_t seed, std::size_t samples_per_domain = 2000);
Dataset generate_suite(const std::vector<DomainSpec>& specs, std::uint64_t seed, std::size_t samples_per_domain);

}  // namespace invparse
