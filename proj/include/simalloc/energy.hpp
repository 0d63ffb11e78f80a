#pragma once

#include "simalloc/engine.hpp"

namespace simalloc {

/// Power of each component relative to one main core.
struct PowerModel {
    double main_core_power = 1.0;
    double support_core_power_ratio = 0.3372;
    double support_area_ratio = 0.2443;
    /// Fraction of its active power a stalled support core still draws.
    double idle_power_fraction = 0.3;
    /// Uncore power per main core, charged for the whole run.
    double uncore_power_ratio = 0.0;

    void check() const;
    friend bool operator==(const PowerModel&, const PowerModel&) = default;
};

/// Main cores draw power until their own completion; the support core draws
/// its ratio while busy and a fraction of it while stalled. The idle-core
/// helper is a main core and is charged as one.
double energy(const Metrics& m, const PowerModel& p = {});

/// Support-core share of total power on a system of `main_cores` busy cores
/// with a busy support core.
double support_power_share(const PowerModel& p, unsigned main_cores);

}  // namespace simalloc
