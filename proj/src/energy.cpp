#include "simalloc/energy.hpp"

#include "simalloc/error.hpp"

namespace simalloc {

void PowerModel::check() const {
    auto ratio = [](double v, const char* name) {
        if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1)");
    };
    if (!(main_core_power > 0.0)) throw ConfigError("main_core_power must be > 0");
    ratio(support_core_power_ratio, "support_core_power_ratio");
    ratio(support_area_ratio, "support_area_ratio");
    ratio(idle_power_fraction, "idle_power_fraction");
    if (!(uncore_power_ratio >= 0.0 && uncore_power_ratio < 1.0))
        throw ConfigError("uncore_power_ratio must lie in [0, 1)");
}

double energy(const Metrics& m, const PowerModel& p) {
    double e = 0.0;
    for (const auto& c : m.cores) e += p.main_core_power * static_cast<double>(c.completion);
    const double server = m.kind == AllocatorKind::IdleCore
                              ? p.main_core_power
                              : p.main_core_power * p.support_core_power_ratio;
    e += server * static_cast<double>(m.server_busy);
    e += server * p.idle_power_fraction * static_cast<double>(m.server_stall);
    e += p.uncore_power_ratio * p.main_core_power * static_cast<double>(m.cores.size()) *
         static_cast<double>(m.total_cycles);
    return e;
}

double support_power_share(const PowerModel& p, unsigned main_cores) {
    const double support = p.main_core_power * p.support_core_power_ratio;
    const double mains = p.main_core_power * main_cores * (1.0 + p.uncore_power_ratio);
    return support / (mains + support);
}

}  // namespace simalloc
