#pragma once

#include <string_view>

// Shipped prompt texts. Each is compiled in byte-for-byte from the matching
// file under data/prompts/; tests pin their SHA-256 digests.
namespace clinctx::prompts {

// Default system prompt for interactive sessions.
std::string_view chat_system();

// Entailment adjudication; placeholders {ai_content} and {source_chunks}.
std::string_view entailment();

// Hallucination/inaccuracy categorization and harm rating; placeholders
// {full_ai_output} and {expl_no_entail}.
std::string_view claim_classification();

// Medical-intent normalization against the task catalog; placeholder {USER_QUERY}.
std::string_view task_normalization();

// Five-way linguistic task selection; placeholder {user_question}.
std::string_view linguistic_task();

// One catalog entry per line, in catalog order.
std::string_view task_catalog();

}  // namespace clinctx::prompts
