#include "pats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/students_t.hpp>

#include "pats/errors.hpp"

namespace pats::stats {

KappaResult fleiss_kappa(const std::vector<std::vector<int>>& counts) {
    if (counts.size() < 2) throw ValidationError("fleiss_kappa: need at least 2 items");
    const size_t k = counts.front().size();
    if (k < 2) throw ValidationError("fleiss_kappa: need at least 2 categories");

    long raters = 0;
    for (int c : counts.front()) raters += c;
    if (raters < 2) throw ValidationError("fleiss_kappa: need at least 2 raters");

    const double N = static_cast<double>(counts.size());
    const double n = static_cast<double>(raters);
    std::vector<double> p(k, 0.0);
    double p_bar = 0.0;
    for (const auto& row : counts) {
        if (row.size() != k) throw ValidationError("fleiss_kappa: ragged matrix");
        long row_sum = 0;
        double sq = 0.0;
        for (size_t j = 0; j < k; ++j) {
            if (row[j] < 0) throw ValidationError("fleiss_kappa: negative count");
            row_sum += row[j];
            sq += static_cast<double>(row[j]) * row[j];
            p[j] += row[j];
        }
        if (row_sum != raters) throw ValidationError("fleiss_kappa: rows sum to different rater counts");
        p_bar += (sq - n) / (n * (n - 1.0));
    }
    p_bar /= N;

    double pe = 0.0;
    for (size_t j = 0; j < k; ++j) {
        p[j] /= N * n;
        pe += p[j] * p[j];
    }
    if (pe >= 1.0) return {1.0, true};
    return {(p_bar - pe) / (1.0 - pe), false};
}

KappaResult cohen_kappa(const std::vector<std::string>& r1, const std::vector<std::string>& r2) {
    if (r1.empty()) throw ValidationError("cohen_kappa: empty input");
    if (r1.size() != r2.size()) throw ValidationError("cohen_kappa: length mismatch");

    const double n = static_cast<double>(r1.size());
    std::map<std::string, double> m1, m2;
    double agree = 0.0;
    for (size_t i = 0; i < r1.size(); ++i) {
        if (r1[i] == r2[i]) ++agree;
        ++m1[r1[i]];
        ++m2[r2[i]];
    }
    const double po = agree / n;
    double pe = 0.0;
    for (const auto& [cat, c1] : m1) {
        auto it = m2.find(cat);
        if (it != m2.end()) pe += (c1 / n) * (it->second / n);
    }
    if (pe >= 1.0) return {1.0, true};
    return {(po - pe) / (1.0 - pe), false};
}

WinTest win_rate_test(size_t wins, size_t ties, size_t losses) {
    WinTest r;
    r.wins = wins;
    r.ties = ties;
    r.losses = losses;
    r.n = wins + ties + losses;
    if (r.n == 0) throw ValidationError("win_rate_test: empty input");

    const double n = static_cast<double>(r.n);
    r.win_rate = (wins + ties / 2.0) / n;

    // one-sample t on per-pair scores {1, 0.5, 0} vs 0.5; mean equals win_rate
    const double mean = r.win_rate;
    const double ss = wins * (1.0 - mean) * (1.0 - mean) + ties * (0.5 - mean) * (0.5 - mean) +
                      losses * (0.0 - mean) * (0.0 - mean);
    if (r.n == 1 || ss == 0.0) {
        if (mean > 0.5) {
            r.t = std::numeric_limits<double>::infinity();
            r.p = 0.0;
        } else if (mean < 0.5) {
            r.t = -std::numeric_limits<double>::infinity();
            r.p = 1.0;
        } else {
            r.t = 0.0;
            r.p = 0.5;
        }
        return r;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    r.t = (mean - 0.5) / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    r.p = boost::math::cdf(boost::math::complement(dist, r.t));
    return r;
}

std::optional<int> majority_vote(const std::vector<int>& verdicts) {
    if (verdicts.empty()) throw ValidationError("majority_vote: empty input");
    std::map<int, size_t> counts;
    for (int v : verdicts) ++counts[v];
    for (const auto& [v, c] : counts)
        if (2 * c > verdicts.size()) return v;
    return std::nullopt;
}

} // namespace pats::stats
