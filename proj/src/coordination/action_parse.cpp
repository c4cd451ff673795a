#include "taskalloc/coordination/action_parse.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>
#include <set>

namespace taskalloc::coordination {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  static const char* ws = " \t\r\n\"'`";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::optional<std::string> canonical(const std::string& id, const std::vector<std::string>& known) {
  const auto l = lower(id);
  for (const auto& k : known) {
    if (lower(k) == l) return k;
  }
  return std::nullopt;
}

}  // namespace

RawDecision parse_action(const std::string& raw, const std::vector<AgentId>& roster,
                         const std::vector<kitchen::LocationId>& locations, const std::vector<kitchen::ItemId>& items) {
  static const std::regex re(R"(\b(goto|get|put|activate|noop)\s*\(([^()]*)\))", std::regex::icase);
  std::smatch last;
  bool found = false;
  for (auto it = std::sregex_iterator(raw.begin(), raw.end(), re); it != std::sregex_iterator(); ++it) {
    last = *it;
    found = true;
  }
  if (!found) return RawDecision::failure(raw);

  const auto verb = lower(last[1].str());
  std::vector<std::string> args;
  {
    const auto body = last[2].str();
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      args.push_back(trim(body.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (args.size() == 1 && args[0].empty()) args.clear();
  }

  const auto agent = args.empty() ? std::nullopt : canonical(args[0], roster);
  if (!agent) return RawDecision::failure(raw);

  auto location = [&](std::size_t k) { return k < args.size() ? canonical(args[k], locations) : std::nullopt; };

  if (verb == "noop") {
    // An optional second argument (a location) is tolerated and ignored.
    if (args.size() == 1 || (args.size() == 2 && location(1))) return RawDecision::of(kitchen::Noop{*agent}, raw);
    return RawDecision::failure(raw);
  }
  if (verb == "get") {
    if (args.size() != 3) return RawDecision::failure(raw);
    const auto loc = location(1);
    if (!loc || args[2].empty()) return RawDecision::failure(raw);
    std::string item = args[2];
    if (!items.empty()) {
      const auto c = canonical(item, items);
      if (!c) return RawDecision::failure(raw);
      item = *c;
    }
    return RawDecision::of(kitchen::Get{*agent, *loc, item}, raw);
  }
  if (args.size() != 2) return RawDecision::failure(raw);
  const auto loc = location(1);
  if (!loc) return RawDecision::failure(raw);
  if (verb == "goto") return RawDecision::of(kitchen::Goto{*agent, *loc}, raw);
  if (verb == "put") return RawDecision::of(kitchen::Put{*agent, *loc}, raw);
  return RawDecision::of(kitchen::Activate{*agent, *loc}, raw);
}

std::vector<kitchen::ItemId> level_items(const kitchen::LevelConfig& level) {
  std::set<kitchen::ItemId> s;
  for (const auto& l : level.locations) s.insert(l.contents.begin(), l.contents.end());
  for (const auto& r : level.recipes) {
    for (const auto& st : r.steps) {
      s.insert(st.inputs.begin(), st.inputs.end());
      s.insert(st.output);
    }
  }
  return {s.begin(), s.end()};
}

}  // namespace taskalloc::coordination
