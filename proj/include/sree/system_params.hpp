// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "numerics.hpp"

#include <stdexcept>
#include <string>

namespace sree
{
    /// Scalar system constants. Defaults are the reference deployment:
    /// 1 MHz, L = 128, rho = 1, mu = 1.2, Ps = 39 dBm, Pr = 10 dBm,
    /// Pmax = 40 dBm, noise -114 dBm, M = 4, N = 64.
    struct SystemParams
    {
        double bandwidth_hz = 1e6;
        int spreading_factor = 128; // L
        double reflection_efficiency = 1.0; // rho
        double amplifier_inefficiency = 1.2; // mu
        double circuit_power_w = dbm_to_watt(39.0); // Ps
        double element_power_w = dbm_to_watt(10.0); // Pr
        double max_power_w = dbm_to_watt(40.0); // Pmax
        double noise_power_w = dbm_to_watt(-114.0); // sigma^2
        int antennas = 4; // M
        int elements = 64; // N

        double ris_power_w() const { return double(elements) * element_power_w; }
        double noise_std() const { return std::sqrt(noise_power_w); }

        void validate() const
        {
            auto fail = [](const std::string &what) { throw std::invalid_argument("SystemParams: " + what); };
            if (!(bandwidth_hz > 0.0))
                fail("bandwidth must be positive");
            if (spreading_factor < 1)
                fail("spreading factor L must be >= 1");
            if (!(reflection_efficiency > 0.0 && reflection_efficiency <= 1.0))
                fail("rho must lie in (0, 1]");
            if (!(amplifier_inefficiency > 1.0))
                fail("mu must exceed 1");
            if (!(circuit_power_w >= 0.0))
                fail("circuit power must be non-negative");
            if (!(element_power_w > 0.0))
                fail("element power must be positive");
            if (!(max_power_w > 0.0))
                fail("max power must be positive");
            if (!(noise_power_w > 0.0))
                fail("noise power must be positive");
            if (antennas < 1 || elements < 1)
                fail("M and N must be >= 1");
        }
    };
}
