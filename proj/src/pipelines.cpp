#include "clinctx/pipelines.hpp"

#include <fmt/format.h>

#include "clinctx/concurrency.hpp"
#include "clinctx/error.hpp"

namespace clinctx::pipelines {

std::vector<claims::GenerationInput> generations_from_logs(const std::vector<logs::SessionLog>& sessions,
                                                           gateway::TextBackend& linguistic,
                                                           std::size_t parallelism) {
  std::vector<claims::GenerationInput> out;
  std::vector<std::string> queries;
  for (const auto& s : sessions) {
    for (const auto& t : s.turns) {
      if (t.error) continue;
      claims::GenerationInput g;
      g.generation_id = fmt::format("{}/{}", s.session_id, t.turn_index);
      g.session_id = s.session_id;
      g.output = t.response;
      g.source_text = s.context_text;
      out.push_back(std::move(g));
      queries.push_back(t.query);
    }
  }
  parallel_for(out.size(), parallelism, [&](std::size_t i) {
    try {
      out[i].linguistic_task = tasks::classify_linguistic(queries[i], linguistic);
    } catch (const Error&) {
      out[i].linguistic_task = 0;
    }
  });
  return out;
}

std::vector<tasks::QueryRecord> queries_from_logs(const std::vector<logs::SessionLog>& sessions) {
  std::vector<tasks::QueryRecord> out;
  for (const auto& s : sessions) {
    for (const auto& t : s.turns) {
      tasks::QueryRecord q;
      q.query_id = fmt::format("{}/{}", s.session_id, t.turn_index);
      q.text = t.query;
      if (t.feedback) q.thumbs_up = t.feedback->thumbs == logs::Thumbs::kUp;
      out.push_back(std::move(q));
    }
  }
  return out;
}

}  // namespace clinctx::pipelines
