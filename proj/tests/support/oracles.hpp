#pragma once

// Brute-force recomputations shared by the unit and acceptance suites. They
// take the plain definitions and avoid the library's own helpers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "clinctx/metrics.hpp"
#include "clinctx/session_log.hpp"
#include "clinctx/tasks.hpp"

namespace testsupport {

// ISO week from the civil calendar: the week belongs to the year of its Thursday.
inline std::string iso_week_oracle(clinctx::Timestamp ts) {
  using namespace std::chrono;
  sys_days day = floor<days>(ts);
  weekday wd{day};
  int iso_wd = wd.c_encoding() == 0 ? 7 : static_cast<int>(wd.c_encoding());
  sys_days thursday = day + days(4 - iso_wd);
  year_month_day ymd{thursday};
  sys_days jan1 = sys_days{ymd.year() / January / 1};
  int week = static_cast<int>((thursday - jan1).count() / 7) + 1;
  return fmt::format("{:04d}-W{:02d}", static_cast<int>(ymd.year()), week);
}

inline std::string date_oracle(clinctx::Timestamp ts) {
  using namespace std::chrono;
  year_month_day ymd{floor<days>(ts)};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

inline clinctx::metrics::UsageSnapshot snapshot_oracle(const std::vector<clinctx::logs::SessionLog>& sessions) {
  using clinctx::metrics::UsageSnapshot;
  UsageSnapshot s;
  s.sessions = sessions.size();
  std::vector<std::string> users;
  std::vector<std::string> days;
  std::vector<std::string> weeks;
  for (const auto& l : sessions) {
    users.push_back(l.user_id);
    days.push_back(date_oracle(l.created_at));
    weeks.push_back(iso_week_oracle(l.created_at));
    s.queries += l.turns.size();
    for (const auto& t : l.turns) s.total_tokens += t.tokens_sent + t.tokens_received;
  }
  auto distinct = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  auto du = distinct(users);
  s.unique_users = du.size();
  for (const auto& d : distinct(days)) {
    std::vector<std::string> u;
    for (std::size_t i = 0; i < sessions.size(); ++i)
      if (days[i] == d) u.push_back(sessions[i].user_id);
    s.daily_active[d] = distinct(u).size();
  }
  for (const auto& w : distinct(weeks)) {
    std::vector<std::string> u, p;
    std::size_t n = 0;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      if (weeks[i] != w) continue;
      ++n;
      u.push_back(sessions[i].user_id);
      p.push_back(sessions[i].patient_id);
    }
    s.weekly[w] = {distinct(u).size(), n, distinct(p).size()};
  }
  for (const auto& user : du) {
    std::vector<std::string> w;
    for (std::size_t i = 0; i < sessions.size(); ++i)
      if (sessions[i].user_id == user) w.push_back(weeks[i]);
    if (distinct(w).size() >= 2) ++s.retention.used_ge_2w;
    else ++s.retention.used_1w;
  }
  return s;
}

// Counts values in [b*w, (b+1)*w) for every bin b touched by any value.
inline std::map<std::int64_t, std::size_t> histogram_oracle(const std::vector<double>& values, double w) {
  std::set<std::int64_t> candidates;
  for (double v : values) {
    auto b = static_cast<std::int64_t>(v / w);
    for (std::int64_t d = -1; d <= 1; ++d) candidates.insert(b + d);
  }
  std::map<std::int64_t, std::size_t> out;
  for (auto b : candidates) {
    std::size_t n = 0;
    for (double v : values)
      if (static_cast<double>(b) * w <= v && v < static_cast<double>(b + 1) * w) ++n;
    if (n > 0) out[b] = n;
  }
  return out;
}

inline std::string selection_key_oracle(const clinctx::timeline::ContextSelection& sel) {
  if (sel.kinds.size() == clinctx::timeline::kAllKinds.size()) return "all";
  std::string key;
  for (auto k : clinctx::timeline::kAllKinds) {
    if (!sel.kinds.count(k)) continue;
    key += (key.empty() ? "" : "+") + std::string(clinctx::timeline::to_string(k));
  }
  return key;
}

inline std::map<std::string, double> breakdown_oracle(const std::vector<clinctx::logs::SessionLog>& sessions) {
  std::vector<std::string> keys;
  for (const auto& l : sessions) keys.push_back(selection_key_oracle(l.selection));
  std::map<std::string, double> out;
  for (const auto& key : keys) {
    if (out.count(key)) continue;
    auto n = std::count(keys.begin(), keys.end(), key);
    out[key] = static_cast<double>(n) / static_cast<double>(sessions.size());
  }
  return out;
}

inline double cos_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

// Every step recomputes every centroid and every pairwise distance from scratch.
inline std::vector<std::vector<std::size_t>> merge_oracle(std::vector<std::vector<std::size_t>> groups,
                                                          const std::vector<std::vector<double>>& points,
                                                          const std::vector<double>& weights, double threshold) {
  auto centroid = [&](const std::vector<std::size_t>& g) {
    std::vector<double> c(points[0].size(), 0.0);
    double total = 0;
    for (auto m : g) {
      total += weights[m];
      for (std::size_t d = 0; d < c.size(); ++d) c[d] += weights[m] * points[m][d];
    }
    for (auto& v : c) v /= total;
    return c;
  };
  while (groups.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        double d = cos_dist(centroid(groups[i]), centroid(groups[j]));
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (best > threshold) break;
    groups[bi].insert(groups[bi].end(), groups[bj].begin(), groups[bj].end());
    std::sort(groups[bi].begin(), groups[bi].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return groups;
}

}  // namespace testsupport
