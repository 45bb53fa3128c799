#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "clinctx/gateway.hpp"
#include "clinctx/session_log.hpp"
#include "clinctx/time.hpp"
#include "clinctx/timeline.hpp"

namespace clinctx::chat {

// Prior turns as sent to the model, followed by the new query:
//   "User: q0\nAssistant: r0\n\nUser: q1\nAssistant: r1\n\nUser: q2"
// A failed turn contributes "Assistant: [no response]".
std::string render_transcript(const std::vector<logs::TurnRecord>& prior, std::string_view query);

class ChatService {
 public:
  struct Options {
    std::string system_prompt;  // empty -> the shipped default
    std::optional<std::string> preferred_model;
    std::string id_prefix = "s";
  };

  ChatService(const timeline::TimelineStore& store, gateway::Gateway& gateway, Clock& clock, Options options);
  ChatService(const timeline::TimelineStore& store, gateway::Gateway& gateway, Clock& clock);

  // Throws Error(kUnknownPatient) or Error(kInvalidSelection).
  logs::SessionLog create_session(const timeline::ContextSelection& selection, std::string user_id = {},
                                  std::string department = {});
  // Throws Error(kUnknownSession) or Error(kEmptyQuery). A backend failure is
  // recorded on the returned turn (`error` set, empty response).
  logs::TurnRecord send_message(const std::string& session_id, const std::string& query);
  // Throws Error(kUnknownSession), Error(kUnknownTurn), Error(kDuplicateFeedback),
  // or Error(kInvalidParams) for a note without content.
  void record_feedback(const std::string& session_id, int turn_index, logs::Thumbs thumbs,
                       std::optional<std::string> note = std::nullopt);

  logs::SessionLog session(const std::string& session_id) const;
  std::vector<logs::SessionLog> sessions() const;  // sorted by id
  std::size_t size() const;

  // Sessions created within [from, to], one JSON line each, sorted by id.
  std::string export_logs(std::optional<Timestamp> from = std::nullopt,
                          std::optional<Timestamp> to = std::nullopt) const;
  // Writes export_logs() to `path`; returns the number of sessions written.
  std::size_t export_to(const std::filesystem::path& path) const;

  const std::string& system_prompt() const { return options_.system_prompt; }
  // Exactly what the gateway received as user content for the last call of a
  // session (record slice + transcript), single mode only.
  static std::string gateway_input(const logs::SessionLog& session, std::string_view query);

 private:
  struct Entry {
    std::mutex turn_mu;  // one writer per session
    logs::SessionLog log;
  };
  std::shared_ptr<Entry> find(const std::string& session_id) const;

  const timeline::TimelineStore& store_;
  gateway::Gateway& gateway_;
  Clock& clock_;
  Options options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

struct TrialCase {
  std::string patient_id;
  std::string question;
};

struct PromptVariantTrial {
  std::vector<std::string> variants;
  std::vector<TrialCase> cases;
  // (variant index, case index) -> 0, 0.5 or 1
  std::map<std::pair<std::size_t, std::size_t>, double> scores;
};

struct TrialResult {
  std::size_t winner = 0;
  std::vector<double> totals;  // per variant
};

// Throws Error(kIncompleteScores) when a (variant, case) score is missing and
// Error(kInvalidParams) for a score outside {0, 0.5, 1}. Ties go to the
// earlier variant.
TrialResult run_prompt_trial(const PromptVariantTrial& trial);

// One response per (variant, case), generated over the whole record, for
// reviewers to score. Indexed [variant][case].
std::vector<std::vector<std::string>> trial_responses(const PromptVariantTrial& trial, gateway::Gateway& gateway,
                                                      const timeline::TimelineStore& store);

}  // namespace clinctx::chat
