#include "invparse/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "invparse/error.hpp"
#include "invparse/rng.hpp"

namespace invparse {

namespace {

// Carrier text deliberately reuses words from label spans ("create ... alarm",
// "recipient", "weather"), the lexical stand-in for what a pre-trained
// encoder would recognize semantically.
const std::string kDefaultSuite = R"(# Built-in synthetic suite: four domains, 7-18 labels, nesting 0-0.4.

[domain]
name = alarm
nesting_rate = 0.2
intent = CREATE_ALARM
intent = DELETE_ALARM
intent = GET_ALARM
intent = SNOOZE_ALARM
intent = GET_TIME
slot = DATE_TIME
slot = ALARM_NAME
slot = DURATION
filler DATE_TIME = tomorrow | tonight | at 6pm | at noon | next monday | this weekend | on friday morning | in two days | at 7am | sunday night
filler ALARM_NAME = gym | wake up | medicine | school run | laundry | yoga
filler DURATION = ten minutes | five minutes | an hour | half an hour | two minutes
template CREATE_ALARM = create an alarm {DATE_TIME}
template CREATE_ALARM = please create a new alarm {DATE_TIME}
template CREATE_ALARM = create an alarm named {ALARM_NAME} {DATE_TIME}
template DELETE_ALARM = delete my {ALARM_NAME} alarm
template DELETE_ALARM = delete the alarm set {DATE_TIME}
template GET_ALARM = get my alarms {DATE_TIME}
template GET_ALARM = get the {ALARM_NAME} alarm
template SNOOZE_ALARM = snooze the alarm for {DURATION}
template SNOOZE_ALARM = snooze my {ALARM_NAME} alarm {DURATION}
nested ALARM_NAME GET_TIME = {DATE_TIME}

[domain]
name = weather
nesting_rate = 0.0
intent = GET_WEATHER
intent = GET_SUNRISE
intent = GET_SUNSET
slot = LOCATION
slot = DATE_TIME
slot = WEATHER_ATTRIBUTE
slot = WEATHER_TEMPERATURE_UNIT
filler LOCATION = in boston | in paris | in florida | at the office | in tokyo | near home | in letchworth
filler DATE_TIME = tomorrow | tonight | at 6pm | at noon | next monday | this weekend | on friday morning | in two days | at 7am | sunday night
filler WEATHER_ATTRIBUTE = rain | snow | wind | sunshine | humidity | pollen
filler WEATHER_TEMPERATURE_UNIT = in celsius | in fahrenheit
template GET_WEATHER = get the weather {LOCATION} {DATE_TIME}
template GET_WEATHER = what is the weather {DATE_TIME}
template GET_WEATHER = will the weather bring {WEATHER_ATTRIBUTE} {DATE_TIME}
template GET_WEATHER = get the weather temperature {LOCATION} {WEATHER_TEMPERATURE_UNIT}
template GET_SUNRISE = get sunrise time {LOCATION} {DATE_TIME}
template GET_SUNRISE = when is sunrise {DATE_TIME}
template GET_SUNSET = get the sunset {LOCATION}
template GET_SUNSET = when is sunset {DATE_TIME} {LOCATION}

[domain]
name = messaging
nesting_rate = 0.1
intent = SEND_MESSAGE
intent = GET_MESSAGE
intent = REACT_MESSAGE
intent = DELETE_MESSAGE
intent = GET_CONTACT
slot = RECIPIENT
slot = SENDER
slot = CONTENT_EXACT
slot = DATE_TIME
slot = RESOURCE
slot = TYPE_CONTENT
slot = CONTACT_RELATED
slot = TYPE_RELATION
filler RECIPIENT = lacey | derek | candy | sam | the team | grandma
filler SENDER = lacey | derek | candy | sam | the team | grandma
filler CONTACT_RELATED = lacey | derek | candy | sam
filler CONTENT_EXACT = i will be late | call me back | dinner is ready | see you soon | running ten minutes behind | happy birthday
filler DATE_TIME = tomorrow | tonight | at 6pm | at noon | next monday | this weekend | on friday morning | in two days | at 7am | sunday night
filler RESOURCE = twitter | whatsapp | facebook | messenger
filler TYPE_CONTENT = video | photo | voice | audio
filler TYPE_RELATION = mom | dad | sister | brother | boss | wife
template SEND_MESSAGE = send a message to recipient {RECIPIENT} saying {CONTENT_EXACT}
template SEND_MESSAGE = send {RECIPIENT} a {TYPE_CONTENT} message
template SEND_MESSAGE = send a message on {RESOURCE} to {RECIPIENT}
template SEND_MESSAGE = message {RECIPIENT} that {CONTENT_EXACT}
template GET_MESSAGE = get my messages from sender {SENDER}
template GET_MESSAGE = did i get any messages {DATE_TIME} on {RESOURCE}
template GET_MESSAGE = get the {TYPE_CONTENT} message from {SENDER}
template REACT_MESSAGE = react to the message from {SENDER} with a like
template REACT_MESSAGE = react with a heart to the message {DATE_TIME}
template DELETE_MESSAGE = delete the message from {SENDER}
template DELETE_MESSAGE = delete my messages {DATE_TIME}
nested RECIPIENT GET_CONTACT = my {TYPE_RELATION}
nested RECIPIENT GET_CONTACT = {CONTACT_RELATED} 's {TYPE_RELATION}
nested SENDER GET_CONTACT = my {TYPE_RELATION}

[domain]
name = reminder
nesting_rate = 0.4
intent = CREATE_REMINDER
intent = DELETE_REMINDER
intent = GET_REMINDER
intent = UPDATE_REMINDER
intent = GET_TODO
intent = GET_EVENT
slot = TODO
slot = DATE_TIME
slot = PERSON_REMINDED
slot = RECURRING_DATE_TIME
slot = ATTENDEE_EVENT
slot = LOCATION
slot = ORDINAL
slot = AMOUNT
slot = REMINDER_DATE_TIME
slot = CATEGORY_EVENT
slot = DATE_TIME_NEW
slot = METHOD_RETRIEVAL_REMINDER
filler TODO = pick up the kids | call the bank | pay rent | buy milk | water the plants | lunch plans | book flights
filler DATE_TIME = tomorrow | tonight | at 6pm | at noon | next monday | this weekend | on friday morning | in two days | at 7am | sunday night
filler PERSON_REMINDED = me | mom | lacey | derek | the team
filler RECURRING_DATE_TIME = every day | every monday | each morning | weekly
filler ATTENDEE_EVENT = derek | lacey | sam | grandma
filler LOCATION = in boston | in paris | in florida | at the office | in tokyo | near home | in letchworth
filler ORDINAL = first | second | last | next
filler AMOUNT = all | both | any
filler REMINDER_DATE_TIME = tomorrow | tonight | at 6pm | at noon | next monday
filler CATEGORY_EVENT = concert | party | meeting | game
filler DATE_TIME_NEW = tomorrow | tonight | at 6pm | at noon | next monday | this weekend
filler METHOD_RETRIEVAL_REMINDER = show | list | read
template CREATE_REMINDER = remind {PERSON_REMINDED} to {TODO} {DATE_TIME}
template CREATE_REMINDER = create a reminder to {TODO} {DATE_TIME}
template CREATE_REMINDER = create a reminder about {TODO} {RECURRING_DATE_TIME}
template CREATE_REMINDER = remind {PERSON_REMINDED} {RECURRING_DATE_TIME} about {TODO}
template DELETE_REMINDER = delete my reminder about {TODO}
template DELETE_REMINDER = delete the {ORDINAL} reminder
template DELETE_REMINDER = delete {AMOUNT} reminders {DATE_TIME}
template GET_REMINDER = get my reminders {DATE_TIME}
template GET_REMINDER = {METHOD_RETRIEVAL_REMINDER} the reminder about {TODO}
template GET_REMINDER = get {AMOUNT} reminders for {PERSON_REMINDED}
template UPDATE_REMINDER = update the reminder about {TODO} to {DATE_TIME_NEW}
template UPDATE_REMINDER = update my {REMINDER_DATE_TIME} reminder to {DATE_TIME_NEW}
nested TODO GET_TODO = {TODO} with {ATTENDEE_EVENT}
nested TODO GET_EVENT = the {CATEGORY_EVENT} {LOCATION}
)";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void spec_error(std::size_t line, const std::string& message) {
  throw Error(ErrorKind::InvalidSpec, "line " + std::to_string(line) + ": " + message);
}

bool is_hole(const std::string& word) { return word.size() > 2 && word.front() == '{' && word.back() == '}'; }
std::string hole_name(const std::string& word) { return word.substr(1, word.size() - 2); }

std::vector<std::string> holes(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& w : split_whitespace(text))
    if (is_hole(w)) out.push_back(hole_name(w));
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// Generated frame pieces for one template.
struct Expansion {
  std::vector<std::string> words;
  std::vector<FrameNode> children;
};

class DomainGenerator {
 public:
  DomainGenerator(const DomainSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {
    for (std::size_t i = 0; i < spec.carrier_templates.size(); ++i) {
      for (const auto& h : holes(spec.carrier_templates[i].text)) {
        if (has_nested(h)) {
          nestable_templates_.push_back(i);
          break;
        }
      }
    }
  }

  Sample random_sample() {
    const bool nested = spec_.nesting_rate > 0.0 && rng_.bernoulli(spec_.nesting_rate);
    if (nested && !nestable_templates_.empty()) {
      const auto t = nestable_templates_[rng_.below(nestable_templates_.size())];
      const auto& tmpl = spec_.carrier_templates[t];
      std::vector<std::size_t> positions;
      const auto hs = holes(tmpl.text);
      for (std::size_t i = 0; i < hs.size(); ++i)
        if (has_nested(hs[i])) positions.push_back(i);
      const auto hole = positions[rng_.below(positions.size())];
      const auto options = nested_for(hs[hole]);
      return build(tmpl, static_cast<long>(hole), options[rng_.below(options.size())]);
    }
    const auto& tmpl = spec_.carrier_templates[rng_.below(spec_.carrier_templates.size())];
    return build(tmpl, -1, 0);
  }

  // Every template once, then every nested template once.
  std::vector<Sample> coverage_samples() {
    std::vector<Sample> out;
    for (const auto& tmpl : spec_.carrier_templates) out.push_back(build(tmpl, -1, 0));
    for (std::size_t n = 0; n < spec_.nested_templates.size(); ++n) {
      const auto& nt = spec_.nested_templates[n];
      for (const auto& tmpl : spec_.carrier_templates) {
        const auto hs = holes(tmpl.text);
        auto it = std::find(hs.begin(), hs.end(), nt.slot);
        if (it == hs.end()) continue;
        out.push_back(build(tmpl, it - hs.begin(), n));
        break;
      }
    }
    return out;
  }

 private:
  bool has_nested(const std::string& slot) const {
    return std::any_of(spec_.nested_templates.begin(), spec_.nested_templates.end(),
                       [&](const NestedTemplate& n) { return n.slot == slot; });
  }

  std::vector<std::size_t> nested_for(const std::string& slot) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < spec_.nested_templates.size(); ++i)
      if (spec_.nested_templates[i].slot == slot) out.push_back(i);
    return out;
  }

  void fill(const std::string& slot, Expansion& out) {
    const auto& fillers = spec_.slot_fillers.at(slot);
    const auto words = split_whitespace(fillers[rng_.below(fillers.size())]);
    std::vector<FrameNode> leaves;
    for (const auto& w : words) {
      out.words.push_back(w);
      leaves.push_back(FrameNode::token(w));
    }
    out.children.push_back(FrameNode::slot(slot, std::move(leaves)));
  }

  Expansion expand(const std::string& text, long nested_hole, std::size_t nested_index) {
    Expansion out;
    long hole_no = 0;
    for (const auto& w : split_whitespace(text)) {
      if (!is_hole(w)) {
        out.words.push_back(w);
        continue;
      }
      const std::string slot = hole_name(w);
      if (hole_no++ == nested_hole) {
        const auto& nt = spec_.nested_templates[nested_index];
        Expansion inner = expand(nt.text, -1, 0);
        out.words.insert(out.words.end(), inner.words.begin(), inner.words.end());
        out.children.push_back(
            FrameNode::slot(slot, {FrameNode::intent(nt.intent, std::move(inner.children))}));
      } else {
        fill(slot, out);
      }
    }
    return out;
  }

  Sample build(const CarrierTemplate& tmpl, long nested_hole, std::size_t nested_index) {
    Expansion e = expand(tmpl.text, nested_hole, nested_index);
    Sample s;
    s.domain = spec_.name;
    for (const auto& w : e.words) {
      if (!s.utterance.empty()) s.utterance += ' ';
      s.utterance += w;
    }
    s.frame.root = FrameNode::intent(tmpl.intent, std::move(e.children));
    return s;
  }

  const DomainSpec& spec_;
  Rng& rng_;
  std::vector<std::size_t> nestable_templates_;
};

}  // namespace

void DomainSpec::validate() const {
  auto fail = [this](const std::string& msg) {
    throw Error(ErrorKind::InvalidSpec, "domain '" + name + "': " + msg);
  };
  if (name.empty() || name.find_first_of(" \t/") != std::string::npos) fail("domain name must be a single word");
  if (intents.empty()) fail("at least one intent is required");
  if (!(nesting_rate >= 0.0 && nesting_rate <= 1.0)) fail("nesting_rate must lie in [0, 1]");
  if (carrier_templates.empty()) fail("at least one template is required");
  std::set<std::string> seen;
  for (const auto& l : intents)
    if (!seen.insert("IN:" + l).second) fail("duplicate intent " + l);
  for (const auto& l : slots)
    if (!seen.insert("SL:" + l).second) fail("duplicate slot " + l);
  for (const auto& l : seen) OntologyLabel::parse(l);

  std::set<std::string> used_intents, used_slots;
  auto check_holes = [&](const std::string& text) {
    for (const auto& h : holes(text)) {
      if (!contains(slots, h)) fail("template hole {" + h + "} names an undeclared slot");
      auto it = slot_fillers.find(h);
      if (it == slot_fillers.end() || it->second.empty()) fail("slot " + h + " has no fillers");
      for (const auto& f : it->second)
        if (split_whitespace(f).empty()) fail("slot " + h + " has an empty filler");
      used_slots.insert(h);
    }
  };
  for (const auto& t : carrier_templates) {
    if (!contains(intents, t.intent)) fail("template for undeclared intent " + t.intent);
    check_holes(t.text);
    used_intents.insert(t.intent);
  }
  for (const auto& n : nested_templates) {
    if (!contains(intents, n.intent)) fail("nested template for undeclared intent " + n.intent);
    if (!contains(slots, n.slot)) fail("nested template under undeclared slot " + n.slot);
    check_holes(n.text);
    used_intents.insert(n.intent);
    used_slots.insert(n.slot);
    const bool hosted = std::any_of(carrier_templates.begin(), carrier_templates.end(), [&](const CarrierTemplate& t) {
      return contains(holes(t.text), n.slot);
    });
    if (!hosted) fail("no template has a {" + n.slot + "} hole to nest " + n.intent + " in");
  }
  if (nesting_rate > 0.0 && nested_templates.empty()) fail("nesting_rate > 0 needs at least one nested template");
  if (nesting_rate == 0.0 && !nested_templates.empty()) fail("nested templates declared but nesting_rate is 0");
  for (const auto& l : intents)
    if (!used_intents.contains(l)) fail("intent " + l + " is never generated");
  for (const auto& l : slots)
    if (!used_slots.contains(l)) fail("slot " + l + " is never generated");
}

std::vector<DomainSpec> parse_domain_specs(const std::string& text) {
  std::vector<DomainSpec> specs;
  std::vector<std::size_t> header_lines;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "[domain]") {
      specs.emplace_back();
      header_lines.push_back(line_no);
      continue;
    }
    if (specs.empty()) spec_error(line_no, "entry before the first [domain] header");
    const auto eq = line.find('=');
    if (eq == std::string::npos) spec_error(line_no, "expected 'key = value'");
    const auto key = split_whitespace(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) spec_error(line_no, "missing key");
    if (value.empty()) spec_error(line_no, "missing value for '" + key[0] + "'");
    DomainSpec& spec = specs.back();
    auto expect_args = [&](std::size_t n) {
      if (key.size() != n) spec_error(line_no, "'" + key[0] + "' takes " + std::to_string(n - 1) + " argument(s)");
    };
    if (key[0] == "name") {
      expect_args(1);
      spec.name = value;
    } else if (key[0] == "nesting_rate") {
      expect_args(1);
      try {
        std::size_t used = 0;
        spec.nesting_rate = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        spec_error(line_no, "nesting_rate is not a number");
      }
    } else if (key[0] == "intent") {
      expect_args(1);
      spec.intents.push_back(value);
    } else if (key[0] == "slot") {
      expect_args(1);
      spec.slots.push_back(value);
    } else if (key[0] == "filler") {
      expect_args(2);
      std::string rest = value;
      std::size_t start = 0;
      while (start <= rest.size()) {
        auto bar = rest.find('|', start);
        if (bar == std::string::npos) bar = rest.size();
        const std::string alt = trim(std::string_view(rest).substr(start, bar - start));
        if (alt.empty()) spec_error(line_no, "empty filler alternative");
        spec.slot_fillers[key[1]].push_back(normalize_whitespace(alt));
        start = bar + 1;
      }
    } else if (key[0] == "template") {
      expect_args(2);
      spec.carrier_templates.push_back({key[1], normalize_whitespace(value)});
    } else if (key[0] == "nested") {
      expect_args(3);
      spec.nested_templates.push_back({key[1], key[2], normalize_whitespace(value)});
    } else {
      spec_error(line_no, "unknown key '" + key[0] + "'");
    }
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      specs[i].validate();
    } catch (const Error& e) {
      spec_error(header_lines[i], e.what());
    }
  }
  return specs;
}

std::vector<DomainSpec> load_domain_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_domain_specs(buf.str());
}

Dataset generate_domain(const DomainSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  Dataset out;
  if (n == 0) return out;
  Rng rng(seed);
  DomainGenerator gen(spec, rng);
  for (auto& s : gen.coverage_samples()) {
    if (out.size() == n) break;
    out.samples.push_back(std::move(s));
  }
  while (out.size() < n) out.samples.push_back(gen.random_sample());
  return out;
}

const std::string& default_suite_text() { return kDefaultSuite; }

std::vector<DomainSpec> default_suite_specs() { return parse_domain_specs(kDefaultSuite); }

Dataset generate_suite(const std::vector<DomainSpec>& specs, std::uint64_t seed, std::size_t samples_per_domain) {
  Dataset out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Dataset d = generate_domain(specs[i], samples_per_domain, seed * 1000003ULL + i);
    out.samples.insert(out.samples.end(), std::make_move_iterator(d.samples.begin()),
                       std::make_move_iterator(d.samples.end()));
  }
  return out;
}

Dataset default_benchmark_suite(std::uint64_t seed, std::size_t samples_per_domain) {
  return generate_suite(default_suite_specs(), seed, samples_per_domain);
}

}  // namespace invparse
