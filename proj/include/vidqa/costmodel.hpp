// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vidqa::cost {

struct CostEstimate {
    std::string method;
    std::int64_t total_tokens = 0;
    nlohmann::json inputs;
    bool upper_bound = false;
};

struct CompareReport {
    std::string ratio_text; // "1/k"
    double raw_ratio = 0.0; // larger/smaller, exact to 2 decimals
    nlohmann::json to_json() const;
};

struct LedgerEntry {
    int step = 0;
    std::string role;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    int image_count = 0;
};

/// Append-only record of measured per-call token usage for one run.
class TokenLedger {
public:
    void add(const LedgerEntry& entry);
    const std::vector<LedgerEntry>& entries() const { return entries_; }

private:
    std::vector<LedgerEntry> entries_;
};

struct LedgerTotals {
    std::vector<std::pair<std::string, std::int64_t>> per_role; // sorted by role
    std::int64_t grand_total = 0;
};

/// Visual tokens for one tiled frame: tiles * per_tile + base.
std::int64_t tokens_per_frame(std::int64_t tiles, std::int64_t per_tile,
                              std::int64_t base);

/// Dense-sampling baseline cost: frames (duration * fps, rounded half up)
/// times tokens per frame.
CostEstimate estimate_dvd(double duration_s, double fps_sampled,
                          std::int64_t tokens_per_frame);

/// Agentic loop upper bound: steps * per-step token budget.
CostEstimate estimate_arm(int steps, std::int64_t per_step_tokens);

/// Ratio report between two estimates, rendered as "1/k" where k is the
/// larger total over the smaller, rounded half up. Integer arithmetic only.
CompareReport compare(const CostEstimate& a, const CostEstimate& b);

LedgerTotals tally(const TokenLedger& ledger);

} // namespace vidqa::cost
