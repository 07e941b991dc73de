#include "hasel3ps/timeseries.hpp"

#include <sstream>
#include <stdexcept>

namespace hasel3ps {

int TimeSeries::channel_index(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i] == name) return static_cast<int>(i);
    return -1;
}

Eigen::VectorXd TimeSeries::col(std::string_view name) const {
    const int i = channel_index(name);
    if (i < 0)
        throw std::out_of_range("TimeSeries: no channel named '" + std::string(name) +
                                "'");
    return values.col(i);
}

void TimeSeries::check_monotone() const {
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (!(t[k] > t[k - 1])) {
            std::ostringstream os;
            os << "timestamps not strictly increasing at row " << k + 1 << " (t="
               << t[k] << ")";
            throw MonotonicityError(os.str(), t[k], static_cast<long>(k + 1));
        }
    }
}

}  // namespace hasel3ps
