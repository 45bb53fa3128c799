#include "clinctx/prompts.hpp"

namespace clinctx::embedded {
extern const std::string_view kChatSystem;
extern const std::string_view kEntailment;
extern const std::string_view kClaimClassification;
extern const std::string_view kTaskNormalization;
extern const std::string_view kLinguisticTask;
extern const std::string_view kTaskCatalog;
}  // namespace clinctx::embedded

namespace clinctx::prompts {

std::string_view chat_system() { return embedded::kChatSystem; }
std::string_view entailment() { return embedded::kEntailment; }
std::string_view claim_classification() { return embedded::kClaimClassification; }
std::string_view task_normalization() { return embedded::kTaskNormalization; }
std::string_view linguistic_task() { return embedded::kLinguisticTask; }
std::string_view task_catalog() { return embedded::kTaskCatalog; }

}  // namespace clinctx::prompts
