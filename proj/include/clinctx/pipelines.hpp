#pragma once

#include <cstddef>
#include <vector>

#include "clinctx/backend.hpp"
#include "clinctx/claims.hpp"
#include "clinctx/session_log.hpp"
#include "clinctx/tasks.hpp"

// Adapters from exported session logs to the evaluation inputs.
namespace clinctx::pipelines {

// One generation per answered turn, id "<session>/<turn>", scored against the
// session's context text. The linguistic task comes from `linguistic`; a turn
// whose classification fails gets task 0.
std::vector<claims::GenerationInput> generations_from_logs(const std::vector<logs::SessionLog>& sessions,
                                                           gateway::TextBackend& linguistic,
                                                           std::size_t parallelism = 4);

// Every turn's query, id "<session>/<turn>", with its thumbs if any.
std::vector<tasks::QueryRecord> queries_from_logs(const std::vector<logs::SessionLog>& sessions);

}  // namespace clinctx::pipelines
