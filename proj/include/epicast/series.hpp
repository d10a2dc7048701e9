#pragma once

// Observed surveillance counts: a G-group by T-week matrix with ISO calendar
// metadata and optional population sizes for incidence reporting.

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "epicast/calendar.hpp"
#include "epicast/math.hpp"

namespace epicast {

class SurveillanceSeries {
  public:
    SurveillanceSeries(Eigen::MatrixXd counts, std::vector<CalendarWeek> weeks,
                       std::vector<std::string> group_labels,
                       std::optional<std::vector<double>> populations = std::nullopt)
        : counts_(std::move(counts)),
          weeks_(std::move(weeks)),
          labels_(std::move(group_labels)),
          populations_(std::move(populations)) {
        if (counts_.cols() < 2) throw std::invalid_argument("SurveillanceSeries: need at least 2 weeks");
        if (static_cast<Eigen::Index>(weeks_.size()) != counts_.cols())
            throw std::invalid_argument("SurveillanceSeries: week metadata length mismatch");
        if (static_cast<Eigen::Index>(labels_.size()) != counts_.rows())
            throw std::invalid_argument("SurveillanceSeries: group label length mismatch");
        for (Eigen::Index g = 0; g < counts_.rows(); ++g)
            for (Eigen::Index t = 0; t < counts_.cols(); ++t)
                if (!is_count(counts_(g, t)))
                    throw std::invalid_argument("SurveillanceSeries: counts must be non-negative integers");
        for (std::size_t t = 0; t + 1 < weeks_.size(); ++t)
            if (!(weeks_[t] < weeks_[t + 1]))
                throw std::invalid_argument("SurveillanceSeries: calendar weeks must be strictly increasing");
        if (populations_) {
            if (populations_->size() != labels_.size())
                throw std::invalid_argument("SurveillanceSeries: population length mismatch");
            for (double p : *populations_)
                if (!(p > 0.0)) throw std::invalid_argument("SurveillanceSeries: populations must be > 0");
        }
    }

    Eigen::Index groups() const { return counts_.rows(); }
    Eigen::Index weeks_count() const { return counts_.cols(); }
    const Eigen::MatrixXd& counts() const { return counts_; }
    double count(Eigen::Index g, Eigen::Index t) const { return counts_(g, t); }
    Eigen::VectorXd column(Eigen::Index t) const { return counts_.col(t); }
    const CalendarWeek& week(Eigen::Index t) const { return weeks_[static_cast<std::size_t>(t)]; }
    const std::vector<CalendarWeek>& weeks() const { return weeks_; }
    const std::vector<std::string>& group_labels() const { return labels_; }
    const std::optional<std::vector<double>>& populations() const { return populations_; }

    /// Index of a calendar week, or -1 when absent.
    Eigen::Index index_of(const CalendarWeek& w) const {
        for (std::size_t t = 0; t < weeks_.size(); ++t)
            if (weeks_[t] == w) return static_cast<Eigen::Index>(t);
        return -1;
    }

    /// The sub-series covering columns [first, last].
    SurveillanceSeries slice(Eigen::Index first, Eigen::Index last) const {
        if (first < 0 || last >= counts_.cols() || last - first + 1 < 2)
            throw std::invalid_argument("SurveillanceSeries::slice: invalid range");
        std::vector<CalendarWeek> w(weeks_.begin() + first, weeks_.begin() + last + 1);
        return SurveillanceSeries(counts_.middleCols(first, last - first + 1), std::move(w), labels_,
                                  populations_);
    }

  private:
    Eigen::MatrixXd counts_;
    std::vector<CalendarWeek> weeks_;
    std::vector<std::string> labels_;
    std::optional<std::vector<double>> populations_;
};

}  // namespace epicast
