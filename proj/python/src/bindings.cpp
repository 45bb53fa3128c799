#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "clinctx/claims.hpp"
#include "clinctx/context.hpp"
#include "clinctx/error.hpp"
#include "clinctx/metrics.hpp"
#include "clinctx/prompts.hpp"
#include "clinctx/session_log.hpp"
#include "clinctx/tasks.hpp"
#include "clinctx/text.hpp"
#include "clinctx/timeline.hpp"
#include "clinctx/value.hpp"

namespace py = pybind11;
using namespace clinctx;

namespace {

context::TokenizerSpec tokenizer(const std::string& rule, std::int64_t divisor) {
  if (rule == "chars_div") return context::TokenizerSpec::chars_div(divisor);
  if (rule == "whitespace_words") return context::TokenizerSpec::whitespace_words();
  throw Error(ErrorCode::kInvalidParams, "unknown tokenizer rule " + rule);
}

py::dict entry_dict(const timeline::ResourceEntry& e) {
  py::dict d;
  d["entry_id"] = e.entry_id;
  d["kind"] = std::string(timeline::to_string(e.kind));
  d["occurred_at"] = format_timestamp(e.occurred_at);
  d["title"] = e.title ? py::cast(*e.title) : py::none();
  d["author_role"] = e.author_role ? py::cast(*e.author_role) : py::none();
  d["body"] = e.body;
  d["structured"] = e.structured;
  d["source"] = std::string(timeline::to_string(e.source));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the clinctx platform";

  static py::exception<Error> error_type(m, "ClinctxError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("chunk_text",
        [](const std::string& text, std::size_t size, std::size_t overlap) {
          std::vector<std::pair<std::size_t, std::string>> out;
          for (auto& c : context::chunk_text(text, size, overlap)) out.emplace_back(c.offset, std::move(c.text));
          return out;
        },
        py::arg("text"), py::arg("size") = 500, py::arg("overlap") = 50);

  m.def("count_tokens",
        [](const std::string& text, const std::string& rule, std::int64_t divisor) {
          return tokenizer(rule, divisor).count(text);
        },
        py::arg("text"), py::arg("rule") = "chars_div", py::arg("divisor") = 4);

  m.def("plan_chunk_count",
        [](const std::string& record, const std::string& query, const std::string& system, std::int64_t window,
           std::int64_t reserve, const std::string& rule, std::int64_t divisor) {
          auto tok = tokenizer(rule, divisor);
          auto plan = context::plan_fanout(context::build_context(record, query, system, tok), window, reserve, tok);
          return py::make_tuple(std::string(context::to_string(plan.mode)), plan.chunks.size(), plan.capacity_tokens);
        },
        py::arg("record"), py::arg("query"), py::arg("system") = "", py::arg("window"),
        py::arg("reserve") = context::kDefaultOutputReserve, py::arg("rule") = "chars_div", py::arg("divisor") = 4);

  m.def("parse_bundle",
        [](const std::string& raw) {
          auto r = timeline::parse_bundle(raw);
          py::list entries;
          for (const auto& e : r.timeline.entries()) entries.append(entry_dict(e));
          py::dict d;
          d["patient_id"] = r.timeline.patient_id();
          d["entries"] = entries;
          d["skipped"] = r.skipped;
          d["warnings"] = r.warnings;
          return d;
        },
        py::arg("raw"));

  m.def("serialize_bundle",
        [](const std::string& raw) { return timeline::serialize_for_context(timeline::parse_bundle(raw).timeline); },
        py::arg("raw"));

  m.def("sha256_hex", [](py::bytes data) { return text::sha256_hex(std::string(data)); });

  m.def("prompts", [] {
    py::dict d;
    d["chat_system"] = std::string(prompts::chat_system());
    d["entailment"] = std::string(prompts::entailment());
    d["claim_classification"] = std::string(prompts::claim_classification());
    d["task_normalization"] = std::string(prompts::task_normalization());
    d["linguistic_task"] = std::string(prompts::linguistic_task());
    d["task_catalog"] = std::string(prompts::task_catalog());
    return d;
  });

  m.def("time_savings",
        [](const std::string& users, const std::string& queries, const std::string& minutes,
           const std::string& rate, const std::string& days) {
          return value::time_savings(Decimal::parse(users), Decimal::parse(queries), Decimal::parse(minutes),
                                     Decimal::parse(rate), Decimal::parse(days))
              .to_canonical();
        });
  m.def("chart_review_savings", [](const std::string& before, const std::string& after, const std::string& minutes) {
    return value::chart_review_savings(Decimal::parse(before), Decimal::parse(after), Decimal::parse(minutes))
        .to_canonical();
  });
  m.def("bed_day_revenue", [](const std::string& beds, const std::string& revenue, const std::string& days) {
    return value::bed_day_revenue(Decimal::parse(beds), Decimal::parse(revenue), Decimal::parse(days)).to_canonical();
  });
  m.def("format_compact", [](const std::string& v, int sig) { return value::format_compact(Decimal::parse(v), sig); },
        py::arg("value"), py::arg("significant") = 2);
  m.def("project_scenario_json",
        [](const std::string& scenario_json) { return value::projection_to_json(value::project(value::parse_scenario(scenario_json))); });

  m.def("metrics_report_json",
        [](const std::string& jsonl, double latency_bin, double token_bin) {
          return metrics::report_to_json(metrics::build_report(logs::parse_session_logs(jsonl), latency_bin, token_bin));
        },
        py::arg("jsonl"), py::arg("latency_bin") = metrics::kDefaultLatencyBinSeconds,
        py::arg("token_bin") = metrics::kDefaultTokenBin);

  m.def("sample_sessions", &claims::sample_sessions, py::arg("session_ids"), py::arg("fraction"), py::arg("seed"));

  m.def("cluster_labels",
        [](const std::vector<std::string>& labels, std::size_t k, std::uint64_t seed, double threshold,
           std::size_t dimension) {
          gateway::TrigramHashEmbedder emb(dimension);
          auto model = tasks::cluster_tasks(labels, emb, k, seed, threshold);
          py::list out;
          for (const auto& c : model.clusters) {
            py::dict d;
            d["name"] = c.name;
            d["labels"] = c.labels;
            d["weight"] = c.weight;
            out.append(d);
          }
          return out;
        },
        py::arg("labels"), py::arg("k") = tasks::kDefaultClusters, py::arg("seed") = 0,
        py::arg("merge_threshold") = tasks::kDefaultMergeThreshold, py::arg("dimension") = 256);
}
