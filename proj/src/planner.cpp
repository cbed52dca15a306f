#include "eventnav/planner.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>
#include <stdexcept>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"

namespace eventnav {

namespace {

constexpr std::string_view kPreamble =
    "You plan subtasks for a navigation agent that only received a coarse-grained task.\n"
    "Use the event knowledge (similar subtasks and the subtasks that followed them) to choose the next "
    "subtask.\n";

constexpr std::string_view kContract =
    "Reply with exactly one line: \"NEXT: <subtask>\" to give the next subtask, or \"DONE\" if the task "
    "is complete.\n";

std::string body(const PlanningContext& ctx) {
  std::string p(kPreamble);
  p += "\nTASK:\n" + single_line(ctx.coarse_task) + "\n";
  const std::string scene = single_line(ctx.scene_caption);
  p += "\nSCENE:\n" + (scene.empty() ? std::string("none") : scene) + "\n";
  p += "\nHISTORY:\n";
  if (ctx.history.empty()) p += "none\n";
  for (std::size_t i = 0; i < ctx.history.size(); ++i) {
    const auto& h = ctx.history[i];
    p += fmt::format("{}. {} [{}]\n", i + 1, single_line(h.text),
                     h.outcome == SubtaskOutcome::completed ? "completed" : "backtracked");
  }
  p += "\nKNOWLEDGE:\n" + format_knowledge(ctx.knowledge);
  return p;
}

std::vector<std::string> failed_list(const PlanningContext& ctx, const std::string& extra) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& s) {
    if (seen.insert(normalize_text(s)).second) out.push_back(single_line(s));
  };
  for (const auto& f : ctx.failed) add(f);
  add(extra);
  return out;
}

// Lines of a "NAME:" section up to the next blank line.
std::vector<std::string> section(const std::vector<std::string>& lines, std::string_view name) {
  std::vector<std::string> out;
  auto it = std::find(lines.begin(), lines.end(), std::string(name) + ":");
  if (it == lines.end()) return out;
  for (++it; it != lines.end() && !trim(*it).empty(); ++it) out.push_back(*it);
  return out;
}

// Text after "<n>. ", minus an optional trailing " [tag]".
std::string list_item(const std::string& line, bool strip_tag) {
  std::string s = line;
  const auto dot = s.find(". ");
  if (dot != std::string::npos) s = s.substr(dot + 2);
  if (strip_tag && !s.empty() && s.back() == ']') {
    const auto open = s.rfind(" [");
    if (open != std::string::npos) s = s.substr(0, open);
  }
  return s;
}

bool is_proposal_error(const Error& e) { return e.code() == Errc::unparseable_proposal; }

}  // namespace

std::string build_subtask_prompt(const PlanningContext& ctx) {
  return body(ctx) + "\n" + std::string(kContract);
}

std::string build_replan_prompt(const PlanningContext& ctx, const std::string& failed_subtask) {
  if (normalize_text(failed_subtask).empty()) throw std::invalid_argument("failed subtask must be non-empty");
  std::string p = body(ctx);
  p += "\nFAILED:\n";
  const auto failed = failed_list(ctx, failed_subtask);
  for (std::size_t i = 0; i < failed.size(); ++i) p += fmt::format("{}. {}\n", i + 1, failed[i]);
  p += "\nThe subtasks under FAILED could not be completed from the current position. Propose a different "
       "subtask.\n";
  p += kContract;
  return p;
}

SubtaskProposal parse_proposal(std::string_view text) {
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (to_lower(line) == "done") return {"", true};
    if (starts_with_ci(line, "next:")) {
      std::string s = single_line(line.substr(5));
      if (normalize_text(s).empty()) throw Error(Errc::unparseable_proposal, "NEXT: without a subtask");
      return {std::move(s), false};
    }
    break;
  }
  throw Error(Errc::unparseable_proposal, "expected 'NEXT: <subtask>' or 'DONE'");
}

SubtaskProposal propose_next(const TextBackend& backend, const PlanningContext& ctx, PlanMode mode,
                             const std::optional<std::string>& failed_subtask) {
  if (mode == PlanMode::replan && !failed_subtask) throw std::invalid_argument("replan mode needs the failed subtask");
  const std::string prompt =
      mode == PlanMode::fresh ? build_subtask_prompt(ctx) : build_replan_prompt(ctx, *failed_subtask);

  SubtaskProposal p;
  try {
    p = parse_proposal(backend.complete(prompt));
  } catch (const Error& e) {
    if (!is_proposal_error(e)) throw;
    p = parse_proposal(backend.complete(prompt + "\nYour previous reply could not be parsed (" + e.what() +
                                        "). Reply with exactly one line: NEXT: <subtask> or DONE.\n"));
  }
  if (mode == PlanMode::fresh || p.is_stop) return p;

  std::set<std::string> failed;
  for (const auto& f : failed_list(ctx, *failed_subtask)) failed.insert(normalize_text(f));
  if (!failed.count(normalize_text(p.text))) return p;
  SubtaskProposal again = parse_proposal(backend.complete(
      prompt + "\n\"" + p.text + "\" already failed at this position. Propose a subtask not listed under FAILED.\n"));
  if (!again.is_stop && failed.count(normalize_text(again.text))) {
    throw Error(Errc::duplicate_proposal, "backend re-proposed failed subtask '" + again.text + "'");
  }
  return again;
}

std::string MockPlannerBackend::complete(const std::string& prompt) const {
  const auto lines = split_lines(prompt);
  std::set<std::string> excluded;
  for (const auto& l : section(lines, "FAILED")) excluded.insert(normalize_text(list_item(l, false)));
  for (const auto& l : section(lines, "HISTORY")) {
    if (l.size() >= 12 && l.compare(l.size() - 12, 12, " [completed]") == 0) {
      excluded.insert(normalize_text(list_item(l, true)));
    }
  }
  // Highest weight wins; listing order (rank, then weight within a hit)
  // breaks ties.
  std::string best;
  unsigned long long best_weight = 0;
  for (const auto& l : section(lines, "KNOWLEDGE")) {
    if (l.empty() || l[0] != '[') continue;
    const auto arrow = l.find(" -> ");
    const auto weight = l.rfind(" (weight ");
    if (arrow == std::string::npos || weight == std::string::npos || weight < arrow) continue;
    const std::string successor = l.substr(arrow + 4, weight - arrow - 4);
    if (excluded.count(normalize_text(successor))) continue;
    const unsigned long long w = std::stoull(l.substr(weight + 9));
    if (best.empty() || w > best_weight) {
      best = successor;
      best_weight = w;
    }
  }
  if (!best.empty()) return "NEXT: " + best;
  return "DONE";
}

}  // namespace eventnav
