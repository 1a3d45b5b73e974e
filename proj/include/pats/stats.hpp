#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace pats::stats {

struct KappaResult {
    double value = 0.0;
    bool degenerate = false; // everyone used a single category; value pinned to 1
};

/// Fleiss kappa over an item × category count matrix. Every row must sum to
/// the same rater count ≥ 2; needs ≥ 2 items. Throws ValidationError on a
/// ragged or undersized matrix.
KappaResult fleiss_kappa(const std::vector<std::vector<int>>& counts);

/// Cohen kappa between two aligned raters. Throws ValidationError on a length
/// mismatch or empty input. Perfect agreement on one category is degenerate
/// and pinned to 1.
KappaResult cohen_kappa(const std::vector<std::string>& r1, const std::vector<std::string>& r2);

struct WinTest {
    size_t n = 0;
    size_t wins = 0, ties = 0, losses = 0;
    double win_rate = 0.0; // (wins + ties/2) / n
    double t = 0.0;        // one-sample t against mean 0.5 over {1, 0.5, 0} scores
    double p = 0.0;        // one-sided (greater)
};

/// Throws ValidationError when n = 0. A zero-variance sample yields p = 0,
/// 0.5, or 1 by the sign of (win_rate - 0.5).
WinTest win_rate_test(size_t wins, size_t ties, size_t losses);

/// Strict majority; no strict majority -> nullopt. Throws ValidationError on
/// an empty list.
std::optional<int> majority_vote(const std::vector<int>& verdicts);

} // namespace pats::stats
