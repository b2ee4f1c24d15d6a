// SPDX-License-Identifier: Apache-2.0
#include "vidqa/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vidqa/errors.hpp"

namespace vidqa::cost {

nlohmann::json CompareReport::to_json() const {
    nlohmann::json j;
    j["ratio_text"] = ratio_text;
    j["raw_ratio"] = raw_ratio;
    return j;
}

void TokenLedger::add(const LedgerEntry& entry) {
    if (entry.prompt_tokens < 0 || entry.completion_tokens < 0 ||
        entry.image_count < 0) {
        throw Error("negative token or image count in ledger entry");
    }
    entries_.push_back(entry);
}

std::int64_t tokens_per_frame(std::int64_t tiles, std::int64_t per_tile,
                              std::int64_t base) {
    if (tiles < 0 || per_tile < 0 || base < 0) {
        throw Error("tokens_per_frame arguments must be nonnegative");
    }
    return tiles * per_tile + base;
}

CostEstimate estimate_dvd(double duration_s, double fps_sampled,
                          std::int64_t tokens_per_frame) {
    if (duration_s <= 0 || fps_sampled <= 0 || tokens_per_frame <= 0) {
        throw Error("estimate_dvd arguments must be positive");
    }
    const auto frames =
        static_cast<std::int64_t>(std::floor(duration_s * fps_sampled + 0.5));
    CostEstimate e;
    e.method = "dvd";
    e.total_tokens = frames * tokens_per_frame;
    e.inputs = {{"duration_s", duration_s},
                {"fps_sampled", fps_sampled},
                {"frames", frames},
                {"tokens_per_frame", tokens_per_frame}};
    e.upper_bound = false;
    return e;
}

CostEstimate estimate_arm(int steps, std::int64_t per_step_tokens) {
    if (steps < 1) {
        throw Error("estimate_arm requires at least one step");
    }
    if (per_step_tokens < 0) {
        throw Error("estimate_arm per-step tokens must be nonnegative");
    }
    CostEstimate e;
    e.method = "arm";
    e.total_tokens = static_cast<std::int64_t>(steps) * per_step_tokens;
    e.inputs = {{"steps", steps}, {"per_step_tokens", per_step_tokens}};
    e.upper_bound = true;
    return e;
}

CompareReport compare(const CostEstimate& a, const CostEstimate& b) {
    if (a.total_tokens <= 0 || b.total_tokens <= 0) {
        throw Error("compare requires positive totals");
    }
    const std::int64_t larger = std::max(a.total_tokens, b.total_tokens);
    const std::int64_t smaller = std::min(a.total_tokens, b.total_tokens);
    const std::int64_t k = (larger + smaller / 2) / smaller;
    const std::int64_t ratio_x100 = (100 * larger + smaller / 2) / smaller;
    CompareReport r;
    r.ratio_text = "1/" + std::to_string(k);
    r.raw_ratio = static_cast<double>(ratio_x100) / 100.0;
    return r;
}

LedgerTotals tally(const TokenLedger& ledger) {
    std::map<std::string, std::int64_t> by_role;
    LedgerTotals t;
    for (const auto& e : ledger.entries()) {
        by_role[e.role] += e.prompt_tokens + e.completion_tokens;
        t.grand_total += e.prompt_tokens + e.completion_tokens;
    }
    t.per_role.assign(by_role.begin(), by_role.end());
    return t;
}

} // namespace vidqa::cost
