#pragma once
// Subtask planning loop: prompt assembly, proposal parsing and the
// deterministic mock proposer.

#include <optional>
#include <string>
#include <vector>

#include "eventnav/backend.hpp"
#include "eventnav/retrieval.hpp"

namespace eventnav {

enum class SubtaskOutcome { completed, backtracked };

struct HistoryEntry {
  std::string text;
  SubtaskOutcome outcome = SubtaskOutcome::completed;
};

struct PlanningContext {
  std::string coarse_task;
  std::string scene_caption;
  std::vector<HistoryEntry> history;
  std::vector<RetrievalHit> knowledge;
  std::vector<std::string> failed;  // rejected at the current position
  int replan_attempts = 0;
};

struct SubtaskProposal {
  std::string text;
  bool is_stop = false;
  friend bool operator==(const SubtaskProposal&, const SubtaskProposal&) = default;
};

// Sections in order: TASK, SCENE, HISTORY, KNOWLEDGE, then the output contract.
std::string build_subtask_prompt(const PlanningContext& ctx);

// Adds a FAILED section listing ctx.failed plus `failed_subtask`.
std::string build_replan_prompt(const PlanningContext& ctx, const std::string& failed_subtask);

// "NEXT: <subtask>" or "DONE"; anything else throws UnparseableProposal.
SubtaskProposal parse_proposal(std::string_view text);

enum class PlanMode { fresh, replan };

SubtaskProposal propose_next(const TextBackend& backend, const PlanningContext& ctx, PlanMode mode,
                             const std::optional<std::string>& failed_subtask = std::nullopt);

// Reads the KNOWLEDGE, HISTORY and FAILED sections of a planner prompt and
// proposes the highest-weight retrieved successor that is neither failed
// nor already completed; DONE when nothing is left.
class MockPlannerBackend final : public TextBackend {
 public:
  std::string identity() const override { return "mock-planner/v1"; }
  std::string complete(const std::string& prompt) const override;
};

}  // namespace eventnav
