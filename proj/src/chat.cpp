#include "clinctx/chat.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

#include "clinctx/context.hpp"
#include "clinctx/error.hpp"
#include "clinctx/prompts.hpp"
#include "clinctx/text.hpp"

namespace clinctx::chat {

std::string render_transcript(const std::vector<logs::TurnRecord>& prior, std::string_view query) {
  std::string out;
  for (const auto& t : prior) {
    out += "User: ";
    out += t.query;
    out += "\nAssistant: ";
    out += t.error ? std::string("[no response]") : t.response;
    out += "\n\n";
  }
  out += "User: ";
  out += query;
  return out;
}

ChatService::ChatService(const timeline::TimelineStore& store, gateway::Gateway& gateway, Clock& clock,
                         Options options)
    : store_(store), gateway_(gateway), clock_(clock), options_(std::move(options)) {
  if (options_.system_prompt.empty()) options_.system_prompt = std::string(prompts::chat_system());
}

ChatService::ChatService(const timeline::TimelineStore& store, gateway::Gateway& gateway, Clock& clock)
    : ChatService(store, gateway, clock, Options{}) {}

std::shared_ptr<ChatService::Entry> ChatService::find(const std::string& session_id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, session_id);
  return it->second;
}

logs::SessionLog ChatService::create_session(const timeline::ContextSelection& selection, std::string user_id,
                                             std::string department) {
  selection.validate();
  auto started = clock_.now();
  auto tl = store_.get(selection.patient_id);
  if (!tl) throw Error(ErrorCode::kUnknownPatient, selection.patient_id);
  auto entry = std::make_shared<Entry>();
  auto& log = entry->log;
  log.context_text = timeline::serialize_for_context(timeline::filter(*tl, selection));
  log.context_assembly_ms = (clock_.now() - started).count();
  log.context_tokens = gateway_.options().tokenizer.count(log.context_text);
  log.user_id = std::move(user_id);
  log.department = std::move(department);
  log.patient_id = selection.patient_id;
  log.selection = selection;
  log.created_at = started;
  std::unique_lock lock(mu_);
  log.session_id = fmt::format("{}-{:06d}", options_.id_prefix, next_id_++);
  sessions_[log.session_id] = entry;
  return log;
}

logs::TurnRecord ChatService::send_message(const std::string& session_id, const std::string& query) {
  auto entry = find(session_id);
  if (text::trim(query).empty()) throw Error(ErrorCode::kEmptyQuery, "empty query");
  std::lock_guard turn_lock(entry->turn_mu);
  auto& log = entry->log;

  logs::TurnRecord turn;
  turn.turn_index = static_cast<int>(log.turns.size());
  turn.query = query;
  turn.at = clock_.now();
  std::string transcript = render_transcript(log.turns, query);
  turn.latency_assembly_ms = (clock_.now() - turn.at).count();
  if (turn.turn_index == 0) turn.latency_assembly_ms += log.context_assembly_ms;

  try {
    auto g = gateway_.complete(options_.system_prompt, std::move(transcript), log.context_text,
                               fmt::format("{}-t{}", session_id, turn.turn_index), options_.preferred_model);
    const auto& ex = g.execution;
    turn.model = g.model;
    turn.mode = std::string(context::to_string(g.mode));
    turn.chunk_count = g.chunk_count;
    turn.latency_inference_ms = ex.latency_ms;
    turn.tokens_sent = ex.tokens_sent();
    turn.tokens_received = ex.tokens_received();
    turn.cost = ex.total_cost();
    if (ex.ok()) {
      turn.response = *ex.response;
    } else {
      turn.error = ex.error_code;
    }
  } catch (const Error& e) {
    turn.error = std::string(to_string(e.code()));
  }
  log.turns.push_back(turn);
  return turn;
}

void ChatService::record_feedback(const std::string& session_id, int turn_index, logs::Thumbs thumbs,
                                  std::optional<std::string> note) {
  auto entry = find(session_id);
  std::lock_guard turn_lock(entry->turn_mu);
  auto& turns = entry->log.turns;
  if (turn_index < 0 || static_cast<std::size_t>(turn_index) >= turns.size()) {
    throw Error(ErrorCode::kUnknownTurn, fmt::format("{} turn {}", session_id, turn_index));
  }
  auto& turn = turns[static_cast<std::size_t>(turn_index)];
  if (turn.feedback) throw Error(ErrorCode::kDuplicateFeedback, fmt::format("{} turn {}", session_id, turn_index));
  if (note && text::trim(*note).empty()) note.reset();
  turn.feedback = logs::Feedback{thumbs, std::move(note), clock_.now()};
}

logs::SessionLog ChatService::session(const std::string& session_id) const {
  auto entry = find(session_id);
  std::lock_guard turn_lock(entry->turn_mu);
  return entry->log;
}

std::vector<logs::SessionLog> ChatService::sessions() const {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::shared_lock lock(mu_);
    for (const auto& [_, e] : sessions_) entries.push_back(e);
  }
  std::vector<logs::SessionLog> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    std::lock_guard turn_lock(e->turn_mu);
    out.push_back(e->log);
  }
  return out;
}

std::size_t ChatService::size() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

std::string ChatService::export_logs(std::optional<Timestamp> from, std::optional<Timestamp> to) const {
  std::string out;
  for (const auto& log : sessions()) {
    if (from && log.created_at < *from) continue;
    if (to && log.created_at > *to) continue;
    out += logs::to_json_line(log);
    out += '\n';
  }
  return out;
}

std::size_t ChatService::export_to(const std::filesystem::path& path) const {
  auto content = export_logs();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << content;
  return static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
}

std::string ChatService::gateway_input(const logs::SessionLog& session, std::string_view query) {
  std::vector<logs::TurnRecord> prior(session.turns.begin(), session.turns.end());
  return context::render_user_content(render_transcript(prior, query), session.context_text);
}

TrialResult run_prompt_trial(const PromptVariantTrial& trial) {
  if (trial.variants.empty() || trial.cases.empty()) {
    throw Error(ErrorCode::kIncompleteScores, "a trial needs at least one variant and one case");
  }
  TrialResult r;
  r.totals.assign(trial.variants.size(), 0.0);
  for (std::size_t v = 0; v < trial.variants.size(); ++v) {
    for (std::size_t c = 0; c < trial.cases.size(); ++c) {
      auto it = trial.scores.find({v, c});
      if (it == trial.scores.end()) {
        throw Error(ErrorCode::kIncompleteScores, fmt::format("no score for variant {} case {}", v, c));
      }
      double s = it->second;
      if (s != 0.0 && s != 0.5 && s != 1.0) {
        throw Error(ErrorCode::kInvalidParams, fmt::format("score {} for variant {} case {} not in {{0, 0.5, 1}}", s, v, c));
      }
      r.totals[v] += s;
    }
  }
  for (std::size_t v = 1; v < r.totals.size(); ++v) {
    if (r.totals[v] > r.totals[r.winner]) r.winner = v;
  }
  return r;
}

std::vector<std::vector<std::string>> trial_responses(const PromptVariantTrial& trial, gateway::Gateway& gateway,
                                                      const timeline::TimelineStore& store) {
  std::vector<std::vector<std::string>> out(trial.variants.size());
  for (std::size_t v = 0; v < trial.variants.size(); ++v) {
    for (std::size_t c = 0; c < trial.cases.size(); ++c) {
      const auto& tc = trial.cases[c];
      auto tl = store.get(tc.patient_id);
      if (!tl) throw Error(ErrorCode::kUnknownPatient, tc.patient_id);
      auto g = gateway.complete(trial.variants[v], tc.question, timeline::serialize_for_context(*tl),
                                fmt::format("trial-v{}-c{}", v, c));
      out[v].push_back(g.execution.response.value_or(""));
    }
  }
  return out;
}

}  // namespace clinctx::chat
