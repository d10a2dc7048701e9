#pragma once

// Naive historical reference forecasters: a weekly log-normal fitted to the
// counts observed in the same calendar week of previous years, and a
// moment-matched negative binomial for per-group season totals.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "epicast/calendar.hpp"
#include "epicast/distributions.hpp"
#include "epicast/math.hpp"
#include "epicast/series.hpp"

namespace epicast {

/// Counts observed in each ISO calendar week across past years. ISO week 53
/// occurs only in some years, so its forecasts pool the history of weeks 52
/// and 1 instead.
class HistoricalIndex {
  public:
    HistoricalIndex() = default;

    /// Indexes the (univariate) history of group g over data columns
    /// [0, last_t].
    HistoricalIndex(const SurveillanceSeries& data, Eigen::Index group, Eigen::Index last_t) {
        if (group < 0 || group >= data.groups()) throw std::invalid_argument("HistoricalIndex: bad group");
        if (last_t < 0 || last_t >= data.weeks_count())
            throw std::invalid_argument("HistoricalIndex: bad history end");
        for (Eigen::Index t = 0; t <= last_t; ++t)
            add(data.week(t).week, static_cast<long>(data.count(group, t)));
    }

    void add(int iso_week, long count) {
        if (iso_week < 1 || iso_week > 53) throw std::invalid_argument("HistoricalIndex: bad ISO week");
        if (count < 0) throw std::invalid_argument("HistoricalIndex: negative count");
        by_week_[iso_week].push_back(count);
    }

    /// History relevant for one calendar week; week 53 pools weeks 52 and 1.
    std::vector<long> history(int iso_week) const {
        if (iso_week != 53) return lookup(iso_week);
        std::vector<long> pooled = lookup(52);
        const std::vector<long> jan = lookup(1);
        pooled.insert(pooled.end(), jan.begin(), jan.end());
        return pooled;
    }

  private:
    std::vector<long> lookup(int iso_week) const {
        const auto it = by_week_.find(iso_week);
        return (it == by_week_.end()) ? std::vector<long>{} : it->second;
    }

    std::map<int, std::vector<long>> by_week_;
};

/// Log-normal fitted to the log counts of the same calendar week in past
/// years (meanlog = mean of logs, sdlog = their sample sd), discretized to a
/// count pmf. All-equal history carries no dispersion information and falls
/// back to a Poisson at that count, mirroring naive_final_size; a point mass
/// would leave the log score and DSS undefined off its atom. Requires at
/// least two past values, all positive.
inline CountDistribution naive_forecast(const HistoricalIndex& index, const CalendarWeek& week) {
    const std::vector<long> hist = index.history(week.week);
    if (hist.size() < 2)
        throw std::domain_error("naive_forecast: fewer than 2 historical counts for " + to_string(week));
    std::vector<double> logs;
    logs.reserve(hist.size());
    for (long c : hist) {
        if (c <= 0)
            throw std::domain_error("naive_forecast: zero historical count for " + to_string(week) +
                                    " (log-normal undefined)");
        logs.push_back(std::log(static_cast<double>(c)));
    }
    const double meanlog = mean(logs);
    const double sdlog = sample_sd(logs);
    if (sdlog == 0.0) return CountDistribution(Poisson{static_cast<double>(hist.front())});
    return discretize(ContinuousDistribution(LogNormal{meanlog, sdlog}));
}

/// Moment-matched negative binomial for a group's seasonal total from past
/// season totals; variance <= mean falls back to Poisson with the flag set.
inline CountDistribution naive_final_size(const std::vector<double>& past_totals,
                                          bool* poisson_fallback = nullptr) {
    if (past_totals.size() < 2)
        throw std::domain_error("naive_final_size: need at least 2 past season totals");
    for (double v : past_totals)
        if (!is_count(v)) throw std::invalid_argument("naive_final_size: totals must be non-negative integers");
    const double m = mean(past_totals);
    const double v = sample_variance(past_totals);
    if (poisson_fallback) *poisson_fallback = !(v > m);
    if (v > m && m > 0.0) return CountDistribution(NegBin{m, m * m / (v - m)});
    if (m > 0.0) return CountDistribution(Poisson{m});
    return CountDistribution(EmpiricalPmf{{1.0}});  // all past seasons empty
}

}  // namespace epicast
