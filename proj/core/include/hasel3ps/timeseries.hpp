#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hasel3ps/errors.hpp"

namespace hasel3ps {

/// Sampled multi-channel signal record. Rows of values correspond to the
/// entries of t, columns to named channels.
struct TimeSeries {
    std::vector<double> t;
    Eigen::MatrixXd values;
    std::vector<std::string> channels;

    long rows() const noexcept { return static_cast<long>(t.size()); }

    /// Column index of a channel, -1 when absent.
    int channel_index(std::string_view name) const noexcept;
    bool has_channel(std::string_view name) const noexcept {
        return channel_index(name) >= 0;
    }
    /// Column by name; throws std::out_of_range when absent.
    Eigen::VectorXd col(std::string_view name) const;

    /// Throws MonotonicityError unless t is strictly increasing, with the
    /// offending timestamp and row.
    void check_monotone() const;
};

}  // namespace hasel3ps
