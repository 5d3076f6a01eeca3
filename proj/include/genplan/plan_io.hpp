#pragma once

#include <cctype>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "genplan/errors.hpp"
#include "genplan/pddl/task.hpp"

namespace genplan {

// IPC plan format: one "(action obj ...)" per line and a trailing cost comment.
inline std::string format_plan(const pddl::Task& task, const std::vector<pddl::ActionId>& plan) {
  std::ostringstream o;
  for (pddl::ActionId a : plan) o << task.action_name(a) << '\n';
  o << "; cost = " << plan.size() << " (unit cost)\n";
  return o.str();
}

// Reads a plan in IPC format. Names are case-insensitive; ';' starts a comment.
inline std::vector<pddl::ActionId> parse_plan(const pddl::Task& task, const std::string& text) {
  auto canonical = [](std::string s) {
    std::string out;
    bool space = false;
    for (char c : s) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        space = !out.empty() && out.back() != '(';
        continue;
      }
      if (c == ')') space = false;
      if (space) out += ' ';
      space = false;
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
  };
  std::unordered_map<std::string, pddl::ActionId> by_name;
  for (pddl::ActionId a = 0; a < task.actions.size(); ++a) by_name.emplace(canonical(task.action_name(a)), a);
  std::vector<pddl::ActionId> plan;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = canonical(line.substr(0, line.find(';')));
    if (line.empty()) continue;
    auto it = by_name.find(line);
    if (it == by_name.end()) throw UnknownSymbol("unknown plan step '" + line + "'");
    plan.push_back(it->second);
  }
  return plan;
}

}  // namespace genplan
